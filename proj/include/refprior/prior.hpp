#pragma once

#include <functional>
#include <string>
#include <utility>

#include "refprior/numerics.hpp"

namespace refprior {

// Strictly positive, continuous (possibly improper) prior given on the log
// scale.
struct PriorFn {
  std::function<double(double)> log_value;
  std::string label;

  double operator()(double theta) const { return log_value(theta); }

  static PriorFn uniform() {
    return {[](double) { return 0.0; }, "uniform"};
  }
  // pi(theta) = 1/theta
  static PriorFn reciprocal() {
    return {[](double theta) { return -std::log(theta); }, "reciprocal"};
  }
  // Beta(a, b) shape on (lo, hi), unnormalized.
  static PriorFn beta_shape(double a, double b, double lo, double hi) {
    return {[=](double theta) {
              const double s = (theta - lo) / (hi - lo);
              return (a - 1.0) * std::log(s) + (b - 1.0) * std::log1p(-s);
            },
            "beta(" + std::to_string(a) + "," + std::to_string(b) + ")"};
  }
};

}  // namespace refprior
