#include "faircert/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace faircert {

NetworkSpec::NetworkSpec(std::vector<Layer> layers, double threshold)
    : layers_(std::move(layers)), threshold_(threshold) {
  if (layers_.empty()) throw Error("network: no layers");
  if (!(threshold_ > 0.0 && threshold_ < 1.0)) {
    throw Error("network: threshold must lie in (0,1)");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.w.rows() == 0 || l.w.cols() == 0 || l.b.size() != l.w.rows()) {
      throw Error("network: layer " + std::to_string(i + 1) + " has inconsistent shapes");
    }
    if (i > 0 && l.w.cols() != layers_[i - 1].w.rows()) {
      throw Error("network: layer " + std::to_string(i + 1) +
                  " width does not match the previous layer");
    }
    if (!l.w.allFinite() || !l.b.allFinite()) {
      throw Error("network: non-finite weight in layer " + std::to_string(i + 1));
    }
  }
  if (layers_.back().w.rows() != 1) throw Error("network: output width must be 1");
}

ForwardTrace forward(const NetworkSpec& net, const Vec& x) {
  if (x.size() != net.input_dim()) throw Error("network: input dimension mismatch");
  ForwardTrace t;
  t.pre.reserve(net.depth());
  t.post.reserve(net.depth() - 1);
  const Vec* in = &x;
  for (int i = 0; i < net.depth(); ++i) {
    t.pre.push_back(net.layers()[i].w * (*in) + net.layers()[i].b);
    if (i + 1 < net.depth()) {
      t.post.push_back(t.pre.back().cwiseMax(0.0));
      in = &t.post.back();
    }
  }
  return t;
}

double predict_probability(const NetworkSpec& net, const Vec& x) {
  return forward(net, x).probability();
}

int decide(const NetworkSpec& net, const Vec& x) {
  return forward(net, x).logit() >= net.logit_threshold() ? 1 : 0;
}

double bce_loss(double p, int y) {
  const double c = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return y == 1 ? -std::log(c) : -std::log(1.0 - c);
}

Gradients Gradients::zeros_like(const NetworkSpec& net) {
  Gradients g;
  g.dw.reserve(net.depth());
  g.db.reserve(net.depth());
  for (const Layer& l : net.layers()) {
    g.dw.push_back(Mat::Zero(l.w.rows(), l.w.cols()));
    g.db.push_back(Vec::Zero(l.b.size()));
  }
  return g;
}

void Gradients::add_scaled(const Gradients& other, double factor) {
  for (std::size_t i = 0; i < dw.size(); ++i) {
    dw[i] += factor * other.dw[i];
    db[i] += factor * other.db[i];
  }
  loss += factor * other.loss;
}

Gradients backward(const NetworkSpec& net, const Vec& x, int y) {
  const ForwardTrace t = forward(net, x);
  const int n = net.depth();
  Gradients g;
  g.dw.resize(n);
  g.db.resize(n);
  const double p = t.probability();
  g.loss = bce_loss(p, y);

  Vec delta(1);
  delta(0) = p - static_cast<double>(y);
  for (int i = n - 1; i >= 0; --i) {
    const Vec& input = i == 0 ? x : t.post[i - 1];
    g.dw[i] = delta * input.transpose();
    g.db[i] = delta;
    if (i > 0) {
      Vec back = net.layers()[i].w.transpose() * delta;
      for (int j = 0; j < back.size(); ++j) {
        if (t.pre[i - 1](j) <= 0.0) back(j) = 0.0;
      }
      delta = std::move(back);
    }
  }
  return g;
}

std::string model_to_json(const NetworkSpec& net) {
  nlohmann::json j;
  j["threshold"] = net.threshold();
  j["layers"] = nlohmann::json::array();
  for (const Layer& l : net.layers()) {
    nlohmann::json jl;
    auto& w = jl["w"] = nlohmann::json::array();
    for (int r = 0; r < l.w.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < l.w.cols(); ++c) row.push_back(l.w(r, c));
      w.push_back(std::move(row));
    }
    auto& b = jl["b"] = nlohmann::json::array();
    for (int r = 0; r < l.b.size(); ++r) b.push_back(l.b(r));
    j["layers"].push_back(std::move(jl));
  }
  return j.dump(2);
}

NetworkSpec model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model: JSON parse error: ") + e.what());
  }
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty()) {
    throw Error("model: missing 'layers'");
  }
  std::vector<Layer> layers;
  for (const auto& jl : j["layers"]) {
    if (!jl.contains("w") || !jl.contains("b")) throw Error("model: layer missing 'w'/'b'");
    const auto& jw = jl["w"];
    const auto& jb = jl["b"];
    if (!jw.is_array() || jw.empty() || !jw[0].is_array() || jw[0].empty()) {
      throw Error("model: 'w' must be a non-empty matrix");
    }
    Layer l;
    l.w = Mat(jw.size(), jw[0].size());
    for (std::size_t r = 0; r < jw.size(); ++r) {
      if (jw[r].size() != jw[0].size()) throw Error("model: ragged weight matrix");
      for (std::size_t c = 0; c < jw[r].size(); ++c) {
        l.w(static_cast<int>(r), static_cast<int>(c)) = jw[r][c].get<double>();
      }
    }
    if (!jb.is_array() || jb.size() != jw.size()) {
      throw Error("model: bias length does not match weight rows");
    }
    l.b = Vec(jb.size());
    for (std::size_t r = 0; r < jb.size(); ++r) {
      l.b(static_cast<int>(r)) = jb[r].get<double>();
    }
    layers.push_back(std::move(l));
  }
  return NetworkSpec(std::move(layers), j.value("threshold", 0.5));
}

void save_model(const NetworkSpec& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("model: cannot write " + path);
  out << model_to_json(net) << '\n';
}

NetworkSpec load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("model: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace faircert
