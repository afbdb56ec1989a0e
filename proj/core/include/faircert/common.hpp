#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace faircert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// One encoded input row: all columns min-max scaled into [0,1],
// categoricals one-hot expanded. Layout is owned by FeatureSchema.
using EncodedPoint = Eigen::VectorXd;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A prediction could not be certified within the solve limits.
class UndecidedError : public Error {
public:
  using Error::Error;
};

class TrainingError : public Error {
public:
  using Error::Error;
};

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace faircert
