#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "refprior/numerics.hpp"
#include "refprior/rng.hpp"

namespace refprior {

struct ParameterSpace {
  double lo = kNegInf;
  double hi = kInf;
  bool open_lo = true;
  bool open_hi = true;
  bool discrete = false;  // integer points lo, lo+1, ...

  bool contains(double theta) const noexcept;
  void validate() const;
};

enum class ModelFamily { location, scale, other };

// How the observation support moves with theta (nonregular class check).
enum class SupportMotion { fixed, increasing, decreasing, both_ends };

// Log-likelihood of theta for one fixed data set, up to a theta-free
// constant. Implementations precompute whatever reduction they need.
class LikelihoodSurface {
 public:
  virtual ~LikelihoodSurface() = default;

  virtual double operator()(double theta) const = 0;
  // Open theta-region outside which the likelihood vanishes.
  virtual Interval support() const = 0;
  // Kinks and scale hints (mode, mode +- a few widths) for quadrature.
  virtual std::vector<double> breakpoints() const { return {}; }
  // log of the integral of L(theta) exp(log_prior(theta)) over region.
  virtual double log_evidence(const std::function<double(double)>& log_prior, Interval region,
                              const QuadratureSettings& settings) const;
};

class SufficientStatistic {
 public:
  virtual ~SufficientStatistic() = default;

  virtual std::size_t dim() const = 0;
  virtual std::vector<double> reduce(std::span<const double> sample) const = 0;
  // Exact density of the statistic of k observations.
  virtual double stat_logpdf(std::span<const double> t, double theta, std::size_t k) const = 0;
  // Statistic of k draws at theta from dim() independent uniforms
  // (inverse Rosenblatt transform).
  virtual std::vector<double> from_uniforms(std::span<const double> u, double theta,
                                            std::size_t k) const = 0;
  virtual std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> t,
                                                        std::size_t k) const = 0;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual ParameterSpace parameter_space() const = 0;
  // Values per observation (an iid block of n draws has dimension n).
  virtual std::size_t observation_dim() const { return 1; }
  virtual bool discrete_observations() const { return false; }
  // Closure of the set where p(x | theta) > 0 (per coordinate).
  virtual Interval observation_support(double theta) const = 0;

  // Checks theta, then evaluates. x holds observation_dim() values.
  double logpdf(std::span<const double> x, double theta) const;
  double logpdf(double x, double theta) const { return logpdf(std::span<const double>(&x, 1), theta); }

  // Fills out (size n * observation_dim()) with n observations.
  virtual void sample(double theta, RandomStream& rng, std::span<double> out) const = 0;
  // Per-coordinate cdf; throws UnsupportedOperation when unavailable.
  virtual double cdf(double x, double theta) const;
  // 1 - cdf, computed without cancellation where a closed form allows.
  virtual double sf(double x, double theta) const { return 1.0 - cdf(x, theta); }
  // Inverse cdf of one coordinate, u in (0, 1).
  virtual double quantile(double u, double theta) const;
  virtual bool has_quantile() const { return false; }
  // Points with positive mass (discrete observation models only).
  virtual std::vector<double> support_points(double theta) const;
  // Parameter values for which p(x | theta) > 0 (discrete parameter only).
  virtual std::vector<double> theta_candidates(double x) const;

  virtual ModelFamily family() const { return ModelFamily::other; }
  virtual SupportMotion support_motion() const { return SupportMotion::fixed; }
  virtual UnboundedMap preferred_map() const { return UnboundedMap::rational; }
  virtual const SufficientStatistic* sufficient_statistic() const { return nullptr; }

  // Likelihood of theta for a flat sample of observations.
  virtual std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const;

  void check_theta(double theta) const;

 protected:
  virtual double log_density(std::span<const double> x, double theta) const = 0;
};

using ModelPtr = std::shared_ptr<const Model>;

// Family x ~ Un(a1(theta), a2(theta)) with increasing a1 < a2.
struct UniformPairSpec {
  std::function<double(double)> a1, a2, d_a1, d_a2;
  std::function<double(double)> inv_a1, inv_a2;  // optional; bisection if empty
  double theta_floor = 0.0;
  std::string label;

  double a1_inverse(double t) const;
  double a2_inverse(double t) const;
  // (a2' - a1') / a1' and (a2' - a1') / a2'
  double b1(double theta) const;
  double b2(double theta) const;
  // Throws DomainError when 0 < a1 < a2 or 0 < a1' < a2' fails at theta.
  void check(double theta) const;

  static UniformPairSpec theta_theta2();
};

ModelPtr normal_location();
ModelPtr expshift_location();
ModelPtr logtail_location();
// Location model of y = log x for x ~ exponential with scale exp(phi).
ModelPtr logexp_location();
ModelPtr exponential_scale();
ModelPtr uniform_scale();
ModelPtr uniform_pair(UniformPairSpec spec);
ModelPtr triangular();
ModelPtr normal_mixture();
ModelPtr fmn_discrete();
// One observation is an iid vector of n draws from base.
ModelPtr iid_block(ModelPtr base, std::size_t n);

// Lookup by identifier (e.g. "uniform-pair" ships the (theta, theta^2) pair).
ModelPtr make_model(const std::string& name);
std::vector<std::string> builtin_model_names();

double logpdf(const Model& model, std::span<const double> x, double theta);
// Sum of logpdf over consecutive observations; -inf as soon as one term is.
double loglik_product(const Model& model, std::span<const double> sample, double theta);
std::vector<double> sample(const Model& model, double theta, RandomStream& rng, std::size_t n);

struct ReducedSample {
  std::vector<double> statistic;
  const SufficientStatistic* reduction;
  std::size_t k;
  double stat_logpdf(double theta) const { return reduction->stat_logpdf(statistic, theta, k); }
};
// Throws UnsupportedOperation when the model declares no reduction.
ReducedSample sufficient_stat(const Model& model, std::span<const double> sample);

}  // namespace refprior
