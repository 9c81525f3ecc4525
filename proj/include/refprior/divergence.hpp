#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refprior/models.hpp"
#include "refprior/numerics.hpp"
#include "refprior/prior.hpp"

namespace refprior {

// Compact subset of the parameter space. For a discrete parameter it holds
// the integers lo, lo + 1, ..., hi.
struct CompactSet {
  double lo = 0.0;
  double hi = 1.0;
  bool discrete = false;

  Interval interval() const noexcept { return {lo, hi}; }
  bool contains(double theta) const noexcept { return theta >= lo && theta <= hi; }
  std::vector<double> points() const;  // discrete sets only
  void validate(const Model& model) const;
};

enum class SequenceKind { symmetric, log_symmetric, discrete, custom };

// Increasing compact sets Theta_i indexed by i.
struct CompactSequence {
  SequenceKind kind = SequenceKind::symmetric;
  std::function<CompactSet(double)> generator;

  static CompactSequence symmetric(double centre = 0.0);  // [c - i, c + i]
  static CompactSequence log_symmetric();                  // [e^-i, e^i]
  static CompactSequence discrete();                       // {1, ..., i}
  static CompactSequence custom(std::function<CompactSet(double)> generator);

  CompactSet operator()(double i) const { return generator(i); }
  // Nesting and monotone endpoints on the probed prefix; DomainError otherwise.
  void validate(const Model& model, std::span<const double> i_values) const;
};

enum class DiscrepancyVerdict { converging, diverging, undetermined };

struct DiscrepancyEstimate {
  double value = 0.0;  // nats; +inf when divergent
  double std_err = 0.0;
  DiscrepancyVerdict verdict = DiscrepancyVerdict::undetermined;
  bool budget_exceeded = false;
  // Quadrature only: (cutoff, value of the integral truncated there).
  std::vector<std::pair<double, double>> cutoff_series;
};

struct DiscrepancySettings {
  QuadratureSettings quadrature;
  double kl_budget = 50.0;  // nats; inner divergences beyond this are abandoned
  // Data windows [lo_i - C, hi_i + C] for the truncated outer integral.
  std::vector<double> cutoffs{1e3, 1e6, 1e9};
  // Growth between the last two cutoffs above this (absolute plus relative)
  // marks the outer integral as divergent.
  double cutoff_tol = 1e-7;
  std::size_t batches = 32;
};

enum class DiscrepancyMethod { quadrature, monte_carlo };

struct DiscrepancyEstimator {
  DiscrepancyMethod method = DiscrepancyMethod::quadrature;
  std::uint64_t seed = 1;
  std::size_t draws = 3200;
  std::size_t threads = 0;

  static DiscrepancyEstimator quadrature() { return {}; }
  static DiscrepancyEstimator monte_carlo(std::uint64_t seed, std::size_t draws, std::size_t threads = 0) {
    return {DiscrepancyMethod::monte_carlo, seed, draws, threads};
  }
};

// kappa{q | p} = int p log(p / q) over domain. Returns +inf when q vanishes
// where p does not, or when the value exceeds budget.
double kl_divergence(const LogFunction& log_p, const LogFunction& log_q, Interval domain,
                     const QuadratureSettings& settings, std::span<const double> breakpoints = {},
                     double budget = 50.0);
// Discrete version over matching support points.
double kl_divergence(std::span<const double> log_p, std::span<const double> log_q,
                     double budget = 50.0);

// Normalized formal posterior restricted to a region.
struct Posterior {
  std::shared_ptr<const LikelihoodSurface> surface;
  PriorFn prior;
  Interval region;
  bool discrete = false;
  std::vector<double> points;  // discrete parameter: candidates inside the region
  double log_normalizer = 0.0;

  double operator()(double theta) const;  // log density (log mass when discrete)
  std::vector<double> breakpoints() const;
};

// region empty means the whole parameter space. ImproprietyError when the
// normalizer diverges.
Posterior posterior_logpdf(const Model& model, const PriorFn& prior, std::span<const double> x,
                           std::optional<CompactSet> region, const QuadratureSettings& settings);

// (kappa{pi(.|x) | pi_i(.|x)}, -log of the posterior mass of Theta_i).
std::pair<double, double> truncation_kl_identity(const Model& model, const PriorFn& prior,
                                                 std::span<const double> x, const CompactSet& set,
                                                 const QuadratureSettings& settings);

// Expected discrepancy between full and truncated posteriors, averaged over
// the truncated prior predictive of one observation.
DiscrepancyEstimate expected_discrepancy(const Model& model, const PriorFn& prior, const CompactSet& set,
                                         const DiscrepancySettings& settings,
                                         const DiscrepancyEstimator& estimator = DiscrepancyEstimator::quadrature());

enum class FmnPrior { uniform, reciprocal };
// Exact enumeration for the discrete model over {1, ..., i}.
double fmn_discrepancy_exact(std::size_t i, FmnPrior prior);

// -(1/L) int G log G dx with G(x) = F(x - a) - F(x - b), L = b - a, for a
// location model with pi = 1 on [a, b]. cutoff bounds the data window.
double location_discrepancy_closed_form(const Model& model, const CompactSet& set,
                                        const QuadratureSettings& settings,
                                        double cutoff = kInf);

struct TailCheck {
  bool satisfied = false;
  // (t, log of |t|^(1+eps) f(t)) per probe; -inf where f vanishes.
  std::vector<std::pair<double, double>> witness;
};
// Location: |t|^(1+eps) f(t) -> 0; scale: |t|^(1+eps) e^t f(e^t) -> 0, both
// as |t| grows. A numeric probe, not a proof. Empty probes use defaults.
TailCheck tail_condition_check(const Model& model, double eps, std::span<const double> probes = {},
                               double tol = 1e-8);

enum class ProprietyStatus { proper, improper, undetermined };
struct ProprietyResult {
  ProprietyStatus status = ProprietyStatus::undetermined;
  double log_normalizer = kNaN;
  std::vector<double> window_log_normalizers;
};
// Classifies the normalizer by integrating over doubling windows.
ProprietyResult propriety_check(const Model& model, const PriorFn& prior, std::span<const double> x,
                                const QuadratureSettings& settings);

struct MonotonicityResult {
  DiscrepancyEstimate smaller;  // n1 observations
  DiscrepancyEstimate larger;   // n2 observations
  double difference = 0.0;      // larger - smaller, paired
  double difference_std_err = 0.0;
};
// Monte Carlo expected discrepancies with n1 and n2 observations sharing
// parameter draws and the first n1 observations.
MonotonicityResult discrepancy_monotonicity(const Model& model, const PriorFn& prior, const CompactSet& set,
                                            std::size_t n1, std::size_t n2, std::uint64_t seed,
                                            std::size_t draws, const DiscrepancySettings& settings,
                                            std::size_t threads = 0);

enum class Permissibility { permissible_evidence, not_permissible_evidence, undetermined };
std::string to_string(Permissibility p);
std::string to_string(DiscrepancyVerdict v);
std::string to_string(ProprietyStatus s);

struct PermissibilityReport {
  Permissibility status = Permissibility::undetermined;
  ProprietyStatus propriety = ProprietyStatus::undetermined;
  std::vector<double> i_values;
  std::vector<DiscrepancyEstimate> series;
  double extrapolated_limit = kNaN;
  std::string reason;
};

// Propriety on a probe data set plus the trend of the expected discrepancy
// over the probed i. Permissible evidence needs a proper posterior and a
// decreasing series whose extrapolated limit is at most threshold.
PermissibilityReport permissibility_verdict(const Model& model, const PriorFn& prior,
                                            const CompactSequence& sequence,
                                            std::span<const double> i_values,
                                            const DiscrepancySettings& settings,
                                            double threshold = 0.05);

// Aitken delta-squared limit of the last three terms; the last term when the
// tail is not geometric.
double extrapolated_limit(std::span<const double> series);

}  // namespace refprior
