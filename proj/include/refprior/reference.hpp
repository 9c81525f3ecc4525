#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "refprior/models.hpp"
#include "refprior/numerics.hpp"
#include "refprior/prior.hpp"

namespace refprior {

// How the uniforms behind each simulated sufficient statistic are drawn.
enum class SamplingDesign {
  independent,      // m independent replicates
  latin_hypercube,  // `replications` independent Latin hypercubes splitting the m replicates
  shifted_lattice,  // `replications` randomly shifted rank-1 lattices (statistics of dim <= 2)
};

struct MCConfig {
  std::size_t k = 500;  // observations per simulated data set
  std::size_t m = 1000;  // simulated data sets per grid point
  std::uint64_t seed = 42;
  Interval working_interval{kNegInf, kInf};  // region of the c_j normalizer
  QuadratureSettings quadrature;
  PriorFn pi_star = PriorFn::uniform();
  // Draw the sufficient statistic directly when the model declares one.
  bool use_sufficient_statistic = true;
  // Replicate j reuses the same uniforms at every grid point, so the
  // log-ratio to the anchor is estimated from paired differences.
  bool common_random_numbers = true;
  SamplingDesign design = SamplingDesign::shifted_lattice;
  std::size_t replications = 5;  // independent randomizations; stderr from their spread
  std::size_t threads = 0;  // 0: REFPRIOR_THREADS or hardware concurrency
  // Raw scalar samples only: regress the differences on the standardized
  // count of observations at or below theta (and its square), whose law is
  // Binomial(k, F(theta | theta)) under every design.
  bool control_variates = true;

  void validate(std::span<const double> grid) const;
};

// Expected information of one observation, -E[d^2/dtheta^2 log p], by
// Richardson-extrapolated second differences. Throws NonregularityError when
// the support moves with theta or the estimate is negative.
double fisher_information(const Model& model, double theta, const QuadratureSettings& settings);
double jeffreys_prior(const Model& model, double theta, const QuadratureSettings& settings);

// |E[d/dtheta log p]| for models whose support moves in one direction.
double nonregular_prior(const Model& model, double theta, const QuadratureSettings& settings);

// Reference prior of the uniform pair family (unnormalized).
double uniform_pair_prior(const UniformPairSpec& spec, double theta);
// (2 theta - 1) / (theta (theta - 1)) exp(psi(2 theta / (2 theta - 1))).
double theta_theta2_prior(double theta);

struct SeriesValue {
  double value;
  double tail_bound;
  std::size_t terms;
};
// Partial sum of 1/(j (b1 j + 1)(b2 j + 1)) with the remainder below tol.
SeriesValue j2_series_oracle(double b1, double b2, double tol);
// gamma + (b1 psi(1/b1 + 1) - b2 psi(1/b2 + 1)) / (b1 - b2), with the b1 = b2 limit.
double j2_closed_form(double b1, double b2);

// Deterministic log f_k(theta) - log f_k(theta0) by nested quadrature over
// the statistic's uniform representation. Requires a sufficient statistic.
double fk_quadrature(const Model& model, double theta, double theta0, std::size_t k,
                     Interval working_interval, const PriorFn& pi_star,
                     const QuadratureSettings& settings);

// Monte Carlo reference prior on a grid; theta0 must be a grid point.
PriorTable mc_reference_prior(const Model& model, std::span<const double> grid, double theta0,
                              const MCConfig& config);

// Change of variables phi = map(theta): log pi(phi) = log pi(theta) - log|map'(theta)|,
// renormalized at the image of the anchor.
PriorTable pushforward_prior(const PriorTable& table, const std::function<double(double)>& map,
                             const std::function<double(double)>& derivative);

// Crossing of the empirical cdf with the identity on (0, 1).
double triangular_root_estimator(std::span<const double> sample);

// Plug-in prior p(theta_k* = theta | theta) for the triangular model, with
// the density of the root estimator from a Gaussian kernel estimate.
PriorTable triangular_plugin_prior(std::span<const double> grid, double theta0, std::size_t k,
                                   std::size_t replicates, std::uint64_t seed, std::size_t threads = 0);

}  // namespace refprior
