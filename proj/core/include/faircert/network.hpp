#pragma once

#include <string>
#include <vector>

#include "faircert/common.hpp"

namespace faircert {

struct Layer {
  Mat w;  // t_i x t_{i-1}
  Vec b;  // t_i
};

// Fully-connected ReLU network with a single logit output. The reported
// probability is sigmoid(logit); the decision is 1 iff the logit clears
// logit(threshold).
class NetworkSpec {
public:
  NetworkSpec() = default;
  NetworkSpec(std::vector<Layer> layers, double threshold = 0.5);

  int input_dim() const { return static_cast<int>(layers_.front().w.cols()); }
  int depth() const { return static_cast<int>(layers_.size()); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  double threshold() const { return threshold_; }
  double logit_threshold() const { return logit(threshold_); }

private:
  std::vector<Layer> layers_;
  double threshold_ = 0.5;
};

struct ForwardTrace {
  std::vector<Vec> pre;   // z_i for every layer, i = 1..n
  std::vector<Vec> post;  // relu(z_i) for hidden layers, i = 1..n-1

  double logit() const { return pre.back()(0); }
  double probability() const { return sigmoid(logit()); }
};

ForwardTrace forward(const NetworkSpec& net, const Vec& x);
double predict_probability(const NetworkSpec& net, const Vec& x);
int decide(const NetworkSpec& net, const Vec& x);

// Binary cross entropy with the probability clamped to [1e-12, 1-1e-12].
double bce_loss(double p, int y);

struct Gradients {
  std::vector<Mat> dw;
  std::vector<Vec> db;
  double loss = 0.0;

  static Gradients zeros_like(const NetworkSpec& net);
  void add_scaled(const Gradients& other, double factor);
};

// Gradient of the clamped BCE loss for one sample. The ReLU subgradient at
// a kink (z == 0) is 0.
Gradients backward(const NetworkSpec& net, const Vec& x, int y);

std::string model_to_json(const NetworkSpec& net);
NetworkSpec model_from_json(const std::string& text);
void save_model(const NetworkSpec& net, const std::string& path);
NetworkSpec load_model(const std::string& path);

}  // namespace faircert
