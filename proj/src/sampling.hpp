#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "refprior/divergence.hpp"
#include "refprior/numerics.hpp"
#include "refprior/prior.hpp"

namespace refprior::detail {

// Data-space hull of the supports of p(. | theta) for theta in the set.
inline Interval data_hull(const Model& model, const CompactSet& set) {
  const Interval a = model.observation_support(set.lo);
  const Interval b = model.observation_support(set.hi);
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

// Panel cuts at the set ends and at decades away from them, so a wide data
// window still resolves the mass next to the set.
inline std::vector<double> data_breakpoints(const Model& model, const CompactSet& set) {
  std::vector<double> cuts{set.lo, set.hi};
  for (double theta : {set.lo, set.hi}) {
    const Interval s = model.observation_support(theta);
    cuts.push_back(s.lo);
    cuts.push_back(s.hi);
  }
  for (int e = 0; e <= 15; ++e) {
    const double d = std::pow(10.0, e);
    cuts.push_back(set.hi + d);
    cuts.push_back(set.lo - d);
  }
  std::erase_if(cuts, [](double c) { return !std::isfinite(c); });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

inline std::vector<double> inside(std::vector<double> cuts, Interval region) {
  std::erase_if(cuts, [&](double c) { return !(c > region.lo && c < region.hi); });
  return cuts;
}

// Mean and batch-means standard error of per-draw values.
inline void batch_summary(std::span<const double> values, std::size_t batches, double& mean, double& se) {
  const std::size_t n = values.size();
  batches = std::min(batches, n);
  std::vector<double> sums(batches, 0.0);
  std::vector<std::size_t> counts(batches, 0);
  for (std::size_t j = 0; j < n; ++j) {
    sums[j % batches] += values[j];
    ++counts[j % batches];
  }
  mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const double dev = sums[b] / static_cast<double>(counts[b]) - mean;
    var += dev * dev;
  }
  const double nb = static_cast<double>(batches);
  se = batches > 1 ? std::sqrt(var / (nb - 1.0) / nb) : kInf;
}

// Draws theta from the prior restricted to a compact set by inversion:
// panel masses first, then bisection on the in-panel Gauss-Legendre cdf.
class PriorSampler {
 public:
  PriorSampler(const PriorFn& prior, const CompactSet& set, const QuadratureSettings& settings)
      : prior_(prior), set_(set) {
    if (set.discrete) {
      points_ = set.points();
      std::vector<double> logs;
      for (double p : points_) logs.push_back(prior(p));
      const double total = log_sum_exp(logs);
      double acc = 0.0;
      for (double l : logs) {
        acc += std::exp(l - total);
        cumulative_.push_back(acc);
      }
      return;
    }
    if (prior.label == "uniform") return;
    const std::size_t panels = 256;
    const double width = (set.hi - set.lo) / static_cast<double>(panels);
    std::vector<double> logs;
    for (std::size_t p = 0; p < panels; ++p) {
      const double a = set.lo + width * static_cast<double>(p);
      edges_.push_back(a);
      logs.push_back(log_integrate(prior.log_value, {a, a + width}, settings));
    }
    edges_.push_back(set.hi);
    const double total = log_sum_exp(logs);
    double acc = 0.0;
    for (double l : logs) {
      masses_.push_back(std::exp(l - total));
      acc += masses_.back();
      cumulative_.push_back(acc);
    }
  }

  double draw(double u) const {
    if (set_.discrete) {
      const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u * cumulative_.back());
      return points_[std::min<std::size_t>(it - cumulative_.begin(), points_.size() - 1)];
    }
    if (cumulative_.empty()) return set_.lo + u * (set_.hi - set_.lo);
    const double target = u * cumulative_.back();
    const std::size_t p = std::min<std::size_t>(
        std::lower_bound(cumulative_.begin(), cumulative_.end(), target) - cumulative_.begin(),
        masses_.size() - 1);
    const double before = p == 0 ? 0.0 : cumulative_[p - 1];
    const double a = edges_[p], b = edges_[p + 1];
    const double panel_mass = masses_[p];
    const double goal = std::clamp((target - before) / panel_mass, 0.0, 1.0);
    const auto& gl = gauss_legendre(20);
    auto partial = [&](double t) {
      double s = 0.0;
      for (std::size_t n = 0; n < gl.nodes.size(); ++n) {
        const double x = 0.5 * (a + t) + 0.5 * (t - a) * gl.nodes[n];
        s += gl.weights[n] * std::exp(prior_(x));
      }
      return 0.5 * (t - a) * s;
    };
    const double whole = partial(b);
    double lo = a, hi = b;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (partial(mid) < goal * whole) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  PriorFn prior_;
  CompactSet set_;
  std::vector<double> points_, edges_, masses_, cumulative_;
};

}  // namespace refprior::detail
