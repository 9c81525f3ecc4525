#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "refprior/divergence.hpp"
#include "refprior/models.hpp"
#include "refprior/numerics.hpp"
#include "refprior/prior.hpp"

namespace refprior {

struct InformationEstimate {
  double value = 0.0;  // nats
  double std_err = 0.0;  // 0 for quadrature and exact enumeration
  bool budget_exceeded = false;
};

enum class InformationMethod { quadrature, monte_carlo };

struct InformationEstimator {
  InformationMethod method = InformationMethod::quadrature;
  std::uint64_t seed = 1;
  std::size_t draws = 4000;
  std::size_t threads = 0;

  static InformationEstimator quadrature() { return {}; }
  static InformationEstimator monte_carlo(std::uint64_t seed, std::size_t draws, std::size_t threads = 0) {
    return {InformationMethod::monte_carlo, seed, draws, threads};
  }
};

struct InformationSettings {
  QuadratureSettings quadrature;
  double budget = 1e3;  // nats; larger per-draw log ratios are flagged
  std::size_t batches = 32;
  // Monte Carlo: evaluate the posterior through the model's sufficient
  // statistic (when it has one) instead of the raw replicates.
  bool use_sufficient_statistic = false;
};

// I{q | M^k}: expected gain from k replicates when theta ~ q, with q the
// prior restricted to set and normalized. Quadrature covers a discrete
// parameter (exact enumeration) and scalar data with k = 1 or a scalar
// sufficient statistic; everything else needs Monte Carlo.
InformationEstimate expected_information(const Model& model, const PriorFn& q, const CompactSet& set,
                                         std::size_t k, const InformationSettings& settings,
                                         const InformationEstimator& estimator = InformationEstimator::quadrature());

struct AdditivityCheck {
  InformationEstimate combined;  // I{q | M^(nk)}
  InformationEstimate scaled;    // n I{q | M^k}
};
AdditivityCheck information_additivity_check(const Model& model, const PriorFn& q, const CompactSet& set,
                                             std::size_t n, std::size_t k, const InformationSettings& settings,
                                             const InformationEstimator& estimator = InformationEstimator::quadrature());

struct GapPoint {
  std::size_t k = 0;
  double gap = 0.0;  // I{pi_0 | M^k} - I{p_0 | M^k}
  double std_err = 0.0;
  InformationEstimate reference;
  InformationEstimate alternative;
};
std::vector<GapPoint> mmi_gap(const Model& model, const PriorFn& pi, const PriorFn& p, const CompactSet& set,
                              std::span<const std::size_t> ks, const InformationSettings& settings,
                              const InformationEstimator& estimator = InformationEstimator::quadrature());

enum class StandardModelMode { bounded_divergence, entropy_bound };

struct StandardModelSettings {
  QuadratureSettings quadrature;
  std::size_t grid_points = 15;
  double budget = 1e3;  // nats; divergences or entropies beyond this count as infinite
  // entropy_bound, second condition: Monte Carlo over the uniform-prior marginal.
  std::uint64_t seed = 1;
  std::size_t draws = 2000;
  std::size_t threads = 0;
};

struct StandardModelResult {
  bool satisfied = false;
  // bounded_divergence: the pair with the largest divergence between the k-replicate
  // densities. entropy_bound: theta with the smallest k-replicate entropy.
  double theta = kNaN;
  double theta_prime = kNaN;
  double value = kNaN;
  // entropy_bound: estimate of the integral of p0 log p0 and its standard error.
  double marginal_term = kNaN;
  double marginal_std_err = kNaN;
  std::string reason;
};
StandardModelResult standard_model_check(const Model& model, const CompactSet& set, std::size_t k,
                                         StandardModelMode mode, const StandardModelSettings& settings);

}  // namespace refprior
