#include "refprior/models.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <utility>

#include "refprior/errors.hpp"

namespace refprior {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kLogThree = 1.0986122886681098;

double normal_logpdf(double z) { return -kLogSqrt2Pi - 0.5 * z * z; }

Interval space_interval(const ParameterSpace& space) { return {space.lo, space.hi}; }

// Sum of log_density over the sample, theta already validated.
class GenericSurface : public LikelihoodSurface {
 public:
  GenericSurface(const Model& model, std::span<const double> sample, Interval support)
      : model_(model), sample_(sample.begin(), sample.end()), support_(support) {}

  double operator()(double theta) const override {
    if (!support_.contains(theta)) return kNegInf;
    return loglik_product(model_, sample_, theta);
  }
  Interval support() const override { return support_; }
  std::vector<double> breakpoints() const override {
    std::vector<double> s = sample_;
    std::sort(s.begin(), s.end());
    return {s.front(), s[s.size() / 2], s.back()};
  }

 private:
  const Model& model_;
  std::vector<double> sample_;
  Interval support_;
};

// Likelihood through the exact density of a sufficient statistic.
class StatSurface : public LikelihoodSurface {
 public:
  StatSurface(const SufficientStatistic& reduction, std::span<const double> t, std::size_t k,
              Interval support, std::vector<double> hints)
      : reduction_(reduction), t_(t.begin(), t.end()), k_(k), support_(support),
        hints_(std::move(hints)) {}

  double operator()(double theta) const override {
    if (!support_.contains(theta)) return kNegInf;
    return reduction_.stat_logpdf(t_, theta, k_);
  }
  Interval support() const override { return support_; }
  std::vector<double> breakpoints() const override { return hints_; }

 private:
  const SufficientStatistic& reduction_;
  std::vector<double> t_;
  std::size_t k_;
  Interval support_;
  std::vector<double> hints_;
};

std::vector<double> scaled_hints(double center, double width, std::initializer_list<double> cs) {
  std::vector<double> out;
  for (double c : cs) out.push_back(center + c * width);
  return out;
}

//---------------------------------------------------------------------------//

class GaussianSurface : public LikelihoodSurface {
 public:
  GaussianSurface(double k, double mean, double constant) : k_(k), mean_(mean), constant_(constant) {}
  double operator()(double theta) const override {
    const double d = theta - mean_;
    return constant_ - 0.5 * k_ * d * d;
  }
  Interval support() const override { return {kNegInf, kInf}; }
  std::vector<double> breakpoints() const override {
    return scaled_hints(mean_, 1.0 / std::sqrt(k_), {-10.0, -3.0, 0.0, 3.0, 10.0});
  }

 private:
  double k_, mean_, constant_;
};

class NormalMeanStatistic : public SufficientStatistic {
 public:
  std::size_t dim() const override { return 1; }
  std::vector<double> reduce(std::span<const double> sample) const override {
    return {std::accumulate(sample.begin(), sample.end(), 0.0) / sample.size()};
  }
  double stat_logpdf(std::span<const double> t, double theta, std::size_t k) const override {
    const double kd = static_cast<double>(k);
    return 0.5 * std::log(kd) + normal_logpdf(std::sqrt(kd) * (t[0] - theta));
  }
  std::vector<double> from_uniforms(std::span<const double> u, double theta,
                                    std::size_t k) const override {
    return {theta + normal_quantile(u[0]) / std::sqrt(static_cast<double>(k))};
  }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> t,
                                                std::size_t k) const override {
    const double kd = static_cast<double>(k);
    return std::make_unique<GaussianSurface>(kd, t[0], 0.5 * std::log(kd) - kLogSqrt2Pi);
  }
};

class NormalLocation : public Model {
 public:
  std::string name() const override { return "normal-location"; }
  ParameterSpace parameter_space() const override { return {}; }
  Interval observation_support(double) const override { return {kNegInf, kInf}; }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) x = theta + rng.normal();
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    return theta + normal_quantile(u);
  }
  double cdf(double x, double theta) const override { return normal_cdf(x - theta); }
  double sf(double x, double theta) const override { return normal_cdf(theta - x); }
  ModelFamily family() const override { return ModelFamily::location; }
  const SufficientStatistic* sufficient_statistic() const override { return &stat_; }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    const double k = static_cast<double>(sample.size());
    const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / k;
    double ss = 0.0;
    for (double x : sample) ss += (x - mean) * (x - mean);
    return std::make_unique<GaussianSurface>(k, mean, -k * kLogSqrt2Pi - 0.5 * ss);
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    return normal_logpdf(x[0] - theta);
  }

 private:
  NormalMeanStatistic stat_;
};

//---------------------------------------------------------------------------//

// L(theta) = exp(k theta - sum) on theta < min.
class ExpShiftSurface : public LikelihoodSurface {
 public:
  ExpShiftSurface(double k, double sum, double min) : k_(k), sum_(sum), min_(min) {}
  double operator()(double theta) const override {
    return theta < min_ ? k_ * theta - sum_ : kNegInf;
  }
  Interval support() const override { return {kNegInf, min_}; }
  std::vector<double> breakpoints() const override {
    return scaled_hints(min_, 1.0 / k_, {-40.0, -5.0, -1.0});
  }

 private:
  double k_, sum_, min_;
};

class ShiftMinStatistic : public SufficientStatistic {
 public:
  std::size_t dim() const override { return 1; }
  std::vector<double> reduce(std::span<const double> sample) const override {
    return {*std::min_element(sample.begin(), sample.end())};
  }
  double stat_logpdf(std::span<const double> t, double theta, std::size_t k) const override {
    const double kd = static_cast<double>(k);
    return t[0] > theta ? std::log(kd) - kd * (t[0] - theta) : kNegInf;
  }
  std::vector<double> from_uniforms(std::span<const double> u, double theta,
                                    std::size_t k) const override {
    return {theta - std::log(u[0]) / static_cast<double>(k)};
  }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> t,
                                                std::size_t k) const override {
    const double kd = static_cast<double>(k);
    return std::make_unique<ExpShiftSurface>(kd, kd * t[0] - std::log(kd), t[0]);
  }
};

class ExpShiftLocation : public Model {
 public:
  std::string name() const override { return "expshift-location"; }
  ParameterSpace parameter_space() const override { return {}; }
  Interval observation_support(double theta) const override { return {theta, kInf}; }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) x = theta + rng.exponential();
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    return theta - std::log1p(-u);
  }
  double cdf(double x, double theta) const override {
    return x > theta ? -std::expm1(-(x - theta)) : 0.0;
  }
  double sf(double x, double theta) const override {
    return x > theta ? std::exp(-(x - theta)) : 1.0;
  }
  ModelFamily family() const override { return ModelFamily::location; }
  SupportMotion support_motion() const override { return SupportMotion::increasing; }
  const SufficientStatistic* sufficient_statistic() const override { return &stat_; }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    const double sum = std::accumulate(sample.begin(), sample.end(), 0.0);
    const double min = *std::min_element(sample.begin(), sample.end());
    return std::make_unique<ExpShiftSurface>(static_cast<double>(sample.size()), sum, min);
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    return x[0] > theta ? -(x[0] - theta) : kNegInf;
  }

 private:
  ShiftMinStatistic stat_;
};

//---------------------------------------------------------------------------//

// f(t) = 1 / (t log^2 t) on t > e.
class LogtailLocation : public Model {
 public:
  std::string name() const override { return "logtail-location"; }
  ParameterSpace parameter_space() const override { return {}; }
  Interval observation_support(double theta) const override {
    return {theta + std::numbers::e, kInf};
  }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) {
      const double v = 1.0 / (1.0 - rng.uniform());
      x = theta + (v > 709.0 ? DBL_MAX : std::exp(v));
    }
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    const double v = 1.0 / (1.0 - u);
    return theta + (v > 709.0 ? DBL_MAX : std::exp(v));
  }
  double cdf(double x, double theta) const override {
    const double t = x - theta;
    return t > std::numbers::e ? 1.0 - 1.0 / std::log(t) : 0.0;
  }
  double sf(double x, double theta) const override {
    const double t = x - theta;
    return t > std::numbers::e ? 1.0 / std::log(t) : 1.0;
  }
  ModelFamily family() const override { return ModelFamily::location; }
  SupportMotion support_motion() const override { return SupportMotion::increasing; }
  UnboundedMap preferred_map() const override { return UnboundedMap::log_rational; }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    const double min = *std::min_element(sample.begin(), sample.end());
    return std::make_unique<GenericSurface>(*this, sample,
                                            Interval{kNegInf, min - std::numbers::e});
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    const double t = x[0] - theta;
    if (!(t > std::numbers::e)) return kNegInf;
    const double lt = std::log(t);
    return -lt - 2.0 * std::log(lt);
  }
};

//---------------------------------------------------------------------------//

// L(phi) = sum(y) - k phi - exp(log_s - phi).
class LogExpSurface : public LikelihoodSurface {
 public:
  LogExpSurface(double k, double sum, double log_s) : k_(k), sum_(sum), log_s_(log_s) {}
  double operator()(double phi) const override {
    return sum_ - k_ * phi - std::exp(log_s_ - phi);
  }
  Interval support() const override { return {kNegInf, kInf}; }
  std::vector<double> breakpoints() const override {
    return scaled_hints(log_s_ - std::log(k_), 1.0 / std::sqrt(k_), {-10.0, -3.0, 0.0, 3.0, 10.0});
  }

 private:
  double k_, sum_, log_s_;
};

class LogExpLocation : public Model {
 public:
  std::string name() const override { return "logexp-location"; }
  ParameterSpace parameter_space() const override { return {}; }
  Interval observation_support(double) const override { return {kNegInf, kInf}; }
  void sample(double phi, RandomStream& rng, std::span<double> out) const override {
    for (double& y : out) y = phi + std::log(rng.exponential());
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    return theta + std::log(-std::log1p(-u));
  }
  double cdf(double y, double phi) const override { return -std::expm1(-std::exp(y - phi)); }
  double sf(double y, double phi) const override { return std::exp(-std::exp(y - phi)); }
  ModelFamily family() const override { return ModelFamily::location; }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    const double sum = std::accumulate(sample.begin(), sample.end(), 0.0);
    return std::make_unique<LogExpSurface>(static_cast<double>(sample.size()), sum,
                                           log_sum_exp(sample));
  }

 protected:
  double log_density(std::span<const double> y, double phi) const override {
    const double s = y[0] - phi;
    return s - std::exp(s);
  }
};

//---------------------------------------------------------------------------//

// L(theta) = -k log theta - s / theta.
class ExpScaleSurface : public LikelihoodSurface {
 public:
  ExpScaleSurface(double k, double s) : k_(k), s_(s) {}
  double operator()(double theta) const override {
    return theta > 0.0 ? -k_ * std::log(theta) - s_ / theta : kNegInf;
  }
  Interval support() const override { return {0.0, kInf}; }
  std::vector<double> breakpoints() const override {
    const double mode = s_ / k_;
    std::vector<double> out;
    for (double c : {-10.0, -3.0, 0.0, 3.0, 10.0}) out.push_back(mode * std::exp(c / std::sqrt(k_)));
    return out;
  }

 private:
  double k_, s_;
};

class ExponentialScale : public Model {
 public:
  std::string name() const override { return "exponential-scale"; }
  ParameterSpace parameter_space() const override { return {0.0, kInf}; }
  Interval observation_support(double) const override { return {0.0, kInf}; }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) x = theta * rng.exponential();
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    return -theta * std::log1p(-u);
  }
  double cdf(double x, double theta) const override {
    return x > 0.0 ? -std::expm1(-x / theta) : 0.0;
  }
  double sf(double x, double theta) const override { return x > 0.0 ? std::exp(-x / theta) : 1.0; }
  ModelFamily family() const override { return ModelFamily::scale; }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    return std::make_unique<ExpScaleSurface>(static_cast<double>(sample.size()),
                                             std::accumulate(sample.begin(), sample.end(), 0.0));
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    return x[0] > 0.0 ? -std::log(theta) - x[0] / theta : kNegInf;
  }
};

//---------------------------------------------------------------------------//

class UniformMaxStatistic : public SufficientStatistic {
 public:
  std::size_t dim() const override { return 1; }
  std::vector<double> reduce(std::span<const double> sample) const override {
    return {*std::max_element(sample.begin(), sample.end())};
  }
  double stat_logpdf(std::span<const double> t, double theta, std::size_t k) const override {
    if (!(t[0] > 0.0 && t[0] < theta)) return kNegInf;
    const double kd = static_cast<double>(k);
    return std::log(kd) + (kd - 1.0) * std::log(t[0]) - kd * std::log(theta);
  }
  std::vector<double> from_uniforms(std::span<const double> u, double theta,
                                    std::size_t k) const override {
    return {theta * std::exp(std::log(u[0]) / static_cast<double>(k))};
  }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> t,
                                                std::size_t k) const override {
    const double kd = static_cast<double>(k);
    std::vector<double> hints;
    for (double c : {1.0, 5.0, 40.0}) hints.push_back(t[0] * std::exp(c / kd));
    return std::make_unique<StatSurface>(*this, t, k, Interval{t[0], kInf}, std::move(hints));
  }
};

class UniformScale : public Model {
 public:
  std::string name() const override { return "uniform-scale"; }
  ParameterSpace parameter_space() const override { return {0.0, kInf}; }
  Interval observation_support(double theta) const override { return {0.0, theta}; }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) x = theta * rng.uniform();
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    return theta * u;
  }
  double cdf(double x, double theta) const override { return std::clamp(x / theta, 0.0, 1.0); }
  ModelFamily family() const override { return ModelFamily::scale; }
  SupportMotion support_motion() const override { return SupportMotion::increasing; }
  const SufficientStatistic* sufficient_statistic() const override { return &stat_; }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    const auto t = stat_.reduce(sample);
    return stat_.likelihood(t, sample.size());
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    return x[0] > 0.0 && x[0] < theta ? -std::log(theta) : kNegInf;
  }

 private:
  UniformMaxStatistic stat_;
};

//---------------------------------------------------------------------------//

class UniformPairStatistic : public SufficientStatistic {
 public:
  explicit UniformPairStatistic(const UniformPairSpec& spec) : spec_(spec) {}

  std::size_t dim() const override { return 2; }
  std::vector<double> reduce(std::span<const double> sample) const override {
    const auto [lo, hi] = std::minmax_element(sample.begin(), sample.end());
    return {*lo, *hi};
  }
  double stat_logpdf(std::span<const double> t, double theta, std::size_t k) const override {
    const double a1 = spec_.a1(theta);
    const double a2 = spec_.a2(theta);
    const double kd = static_cast<double>(k);
    if (k == 1) {
      return t[0] == t[1] && a1 < t[0] && t[0] < a2 ? -std::log(a2 - a1) : kNegInf;
    }
    if (!(a1 < t[0] && t[0] < t[1] && t[1] < a2)) return kNegInf;
    return std::log(kd * (kd - 1.0)) + (kd - 2.0) * std::log(t[1] - t[0]) -
           kd * std::log(a2 - a1);
  }
  std::vector<double> from_uniforms(std::span<const double> u, double theta,
                                    std::size_t k) const override {
    const double a1 = spec_.a1(theta);
    const double w = spec_.a2(theta) - a1;
    const double kd = static_cast<double>(k);
    const double s2 = std::exp(std::log(u[1]) / kd);
    const double s1 = k == 1 ? s2 : -s2 * std::expm1(std::log(u[0]) / (kd - 1.0));
    return {a1 + w * s1, a1 + w * s2};
  }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> t,
                                                std::size_t k) const override {
    const double lo = std::max(spec_.a2_inverse(t[1]), spec_.theta_floor);
    const double hi = spec_.a1_inverse(t[0]);
    // Likelihood falls like (a2 - a1)^-k from the lower end.
    const double g = (spec_.d_a2(lo) - spec_.d_a1(lo)) / (spec_.a2(lo) - spec_.a1(lo));
    const double scale = 1.0 / (static_cast<double>(k) * g);
    std::vector<double> hints;
    for (double c : {1.0, 5.0, 40.0}) {
      if (lo + c * scale < hi) hints.push_back(lo + c * scale);
    }
    return std::make_unique<StatSurface>(*this, t, k, Interval{lo, hi}, std::move(hints));
  }

 private:
  const UniformPairSpec& spec_;
};

class UniformPair : public Model {
 public:
  explicit UniformPair(UniformPairSpec spec) : spec_(std::move(spec)), stat_(spec_) {}

  std::string name() const override { return "uniform-pair"; }
  ParameterSpace parameter_space() const override { return {spec_.theta_floor, kInf}; }
  Interval observation_support(double theta) const override {
    return {spec_.a1(theta), spec_.a2(theta)};
  }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    const double a1 = spec_.a1(theta);
    const double w = spec_.a2(theta) - a1;
    for (double& x : out) x = a1 + w * rng.uniform();
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    const double a1 = spec_.a1(theta);
    return a1 + (spec_.a2(theta) - a1) * u;
  }
  double cdf(double x, double theta) const override {
    const double a1 = spec_.a1(theta);
    return std::clamp((x - a1) / (spec_.a2(theta) - a1), 0.0, 1.0);
  }
  SupportMotion support_motion() const override { return SupportMotion::both_ends; }
  const SufficientStatistic* sufficient_statistic() const override { return &stat_; }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    const auto t = stat_.reduce(sample);
    return std::make_unique<GenericSurface>(
        *this, sample,
        Interval{std::max(spec_.a2_inverse(t[1]), spec_.theta_floor), spec_.a1_inverse(t[0])});
  }
  const UniformPairSpec& spec() const { return spec_; }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    const double a1 = spec_.a1(theta);
    const double a2 = spec_.a2(theta);
    return a1 < x[0] && x[0] < a2 ? -std::log(a2 - a1) : kNegInf;
  }

 private:
  UniformPairSpec spec_;
  UniformPairStatistic stat_;
};

//---------------------------------------------------------------------------//

// Log-likelihood of the triangular model. Between consecutive order
// statistics it equals c_n - n log(theta) - (k - n) log(1 - theta), which is
// convex, so each piece peaks at an endpoint.
class TriangularSurface : public LikelihoodSurface {
 public:
  explicit TriangularSurface(std::span<const double> sample) : xs_(sample.begin(), sample.end()) {
    std::sort(xs_.begin(), xs_.end());
    const std::size_t k = xs_.size();
    below_.assign(k + 1, 0.0);
    above_.assign(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) below_[i + 1] = below_[i] + std::log(2.0 * xs_[i]);
    for (std::size_t i = k; i-- > 0;) above_[i] = above_[i + 1] + std::log(2.0 * (1.0 - xs_[i]));
  }

  double operator()(double theta) const override {
    if (!(theta > 0.0 && theta < 1.0)) return kNegInf;
    const auto n = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), theta) - xs_.begin());
    return piece(n, theta);
  }
  Interval support() const override { return {0.0, 1.0}; }
  std::vector<double> breakpoints() const override { return xs_; }

  double log_evidence(const std::function<double(double)>& log_prior, Interval region,
                      const QuadratureSettings& settings) const override {
    region = region.intersect(support());
    if (region.empty()) return kNegInf;
    const std::size_t k = xs_.size();
    // Piece n covers (x_(n), x_(n+1)) with x_(0) = 0 and x_(k+1) = 1.
    struct Piece {
      std::size_t n;
      double a, b, peak;
    };
    std::vector<Piece> pieces;
    double best = kNegInf;
    for (std::size_t n = 0; n <= k; ++n) {
      const double a = std::max(n == 0 ? 0.0 : xs_[n - 1], region.lo);
      const double b = std::min(n == k ? 1.0 : xs_[n], region.hi);
      if (!(a < b)) continue;
      auto end_value = [&](double t) {
        const double v = piece(n, t) + log_prior(t);
        return std::isnan(v) ? kInf : v;
      };
      const double peak = std::max(end_value(a), end_value(b));
      pieces.push_back({n, a, b, peak});
      best = std::max(best, peak);
    }
    if (settings.nodes > 64) throw DomainError("triangular evidence: at most 64 nodes per panel");
    const auto& gl = gauss_legendre(settings.nodes);
    const double log_tol = std::log(std::max(settings.rel_tol, settings.abs_tol_log));
    std::vector<double> parts;
    int budget = settings.max_refinements;
    for (const auto& p : pieces) {
      if (p.peak < best - kPrune) continue;
      auto rule = [&](double a, double b) {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double peak = kNegInf;
        double vals[64];
        for (int i = 0; i < settings.nodes; ++i) {
          const double t = mid + half * gl.nodes[i];
          vals[i] = piece(p.n, t) + log_prior(t) + std::log(gl.weights[i]);
          peak = std::max(peak, vals[i]);
        }
        if (peak == kNegInf) return kNegInf;
        double acc = 0.0;
        for (int i = 0; i < settings.nodes; ++i) acc += std::exp(vals[i] - peak);
        return peak + std::log(acc * half);
      };
      // Bisect until each sub-piece agrees with its halves.
      std::vector<std::pair<double, double>> stack{{p.a, p.b}};
      while (!stack.empty()) {
        const auto [a, b] = stack.back();
        stack.pop_back();
        const double m = 0.5 * (a + b);
        const double whole = rule(a, b);
        const double halves = log_add_exp(rule(a, m), rule(m, b));
        const double gap = whole > halves ? log_sub_exp(whole, halves) : log_sub_exp(halves, whole);
        if (gap - halves <= log_tol || halves < best - kPrune || !(a < m && m < b)) {
          parts.push_back(halves);
        } else {
          if (--budget < 0) {
            throw ToleranceFailure("triangular evidence: refinement budget exhausted",
                                   log_sum_exp(parts), gap);
          }
          stack.push_back({a, m});
          stack.push_back({m, b});
        }
      }
    }
    return log_sum_exp(parts);
  }

 private:
  static constexpr double kPrune = 60.0;

  double piece(std::size_t n, double theta) const {
    const double kn = static_cast<double>(xs_.size() - n);
    double v = below_[n] + above_[n];
    if (n > 0) v -= static_cast<double>(n) * std::log(theta);
    if (kn > 0) v -= kn * std::log1p(-theta);
    return v;
  }

  std::vector<double> xs_;
  std::vector<double> below_;  // sum of log(2 x_(i)) for i < n
  std::vector<double> above_;  // sum of log(2 (1 - x_(i))) for i >= n
};

class Triangular : public Model {
 public:
  std::string name() const override { return "triangular"; }
  ParameterSpace parameter_space() const override { return {0.0, 1.0}; }
  Interval observation_support(double) const override { return {0.0, 1.0}; }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) {
      const double u = rng.uniform();
      x = u <= theta ? std::sqrt(u * theta) : 1.0 - std::sqrt((1.0 - u) * (1.0 - theta));
    }
  }
  bool has_quantile() const override { return true; }
  double quantile(double u, double theta) const override {
    return u <= theta ? std::sqrt(u * theta) : 1.0 - std::sqrt((1.0 - u) * (1.0 - theta));
  }
  double cdf(double x, double theta) const override {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x <= theta ? x * x / theta : 1.0 - (1.0 - x) * (1.0 - x) / (1.0 - theta);
  }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    return std::make_unique<TriangularSurface>(sample);
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    const double v = x[0];
    if (!(v > 0.0 && v < 1.0)) return kNegInf;
    return v <= theta ? std::log(2.0 * v / theta) : std::log(2.0 * (1.0 - v) / (1.0 - theta));
  }
};

//---------------------------------------------------------------------------//

class NormalMixture : public Model {
 public:
  std::string name() const override { return "normal-mixture"; }
  ParameterSpace parameter_space() const override { return {}; }
  Interval observation_support(double) const override { return {kNegInf, kInf}; }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) {
      const bool shifted = rng.uniform() < 0.5;
      x = (shifted ? theta : 0.0) + rng.normal();
    }
  }
  double cdf(double x, double theta) const override {
    return 0.5 * normal_cdf(x - theta) + 0.5 * normal_cdf(x);
  }
  double sf(double x, double theta) const override {
    return 0.5 * normal_cdf(theta - x) + 0.5 * normal_cdf(-x);
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    return std::log(0.5) + log_add_exp(normal_logpdf(x[0] - theta), normal_logpdf(x[0]));
  }
};

//---------------------------------------------------------------------------//

// theta = 1 maps to 1; otherwise the integer part of theta / 2.
double fmn_small(double theta) { return theta == 1.0 ? 1.0 : std::floor(theta / 2.0); }

bool is_positive_integer(double v) { return v >= 1.0 && v == std::floor(v) && std::isfinite(v); }

class FmnSurface : public LikelihoodSurface {
 public:
  FmnSurface(const Model& model, std::span<const double> sample)
      : model_(model), sample_(sample.begin(), sample.end()) {
    candidates_ = model.theta_candidates(sample_.front());
    std::erase_if(candidates_, [&](double theta) {
      return loglik_product(model_, sample_, theta) == kNegInf;
    });
  }
  double operator()(double theta) const override {
    if (!is_positive_integer(theta)) return kNegInf;
    return loglik_product(model_, sample_, theta);
  }
  Interval support() const override {
    if (candidates_.empty()) return {0.0, 0.0};
    return {candidates_.front() - 0.5, candidates_.back() + 0.5};
  }
  std::vector<double> breakpoints() const override { return candidates_; }
  double log_evidence(const std::function<double(double)>& log_prior, Interval region,
                      const QuadratureSettings&) const override {
    std::vector<double> terms;
    for (double theta : candidates_) {
      if (theta >= region.lo && theta <= region.hi) {
        terms.push_back((*this)(theta) + log_prior(theta));
      }
    }
    return log_sum_exp(terms);
  }

 private:
  const Model& model_;
  std::vector<double> sample_;
  std::vector<double> candidates_;
};

class FmnDiscrete : public Model {
 public:
  std::string name() const override { return "fmn-discrete"; }
  ParameterSpace parameter_space() const override { return {1.0, kInf, false, true, true}; }
  bool discrete_observations() const override { return true; }
  Interval observation_support(double theta) const override {
    return {fmn_small(theta), 2.0 * theta + 1.0};
  }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    const auto points = support_points(theta);
    for (double& x : out) x = points[std::min<std::size_t>(2, static_cast<std::size_t>(3.0 * rng.uniform()))];
  }
  double cdf(double x, double theta) const override {
    double c = 0.0;
    for (double p : support_points(theta)) {
      if (p <= x) c += 1.0 / 3.0;
    }
    return std::min(c, 1.0);
  }
  std::vector<double> support_points(double theta) const override {
    return {fmn_small(theta), 2.0 * theta, 2.0 * theta + 1.0};
  }
  std::vector<double> theta_candidates(double x) const override {
    std::vector<double> out;
    if (!is_positive_integer(x)) return out;
    if (x == 1.0) out.push_back(1.0);
    if (x >= 2.0) out.push_back(std::floor(x / 2.0));  // x = 2 theta or 2 theta + 1
    out.push_back(2.0 * x);
    out.push_back(2.0 * x + 1.0);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    return std::make_unique<FmnSurface>(*this, sample);
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    const double v = x[0];
    if (v == fmn_small(theta) || v == 2.0 * theta || v == 2.0 * theta + 1.0) return -kLogThree;
    return kNegInf;
  }
};

//---------------------------------------------------------------------------//

class IidBlock : public Model {
 public:
  IidBlock(ModelPtr base, std::size_t n) : base_(std::move(base)), n_(n) {
    if (n_ == 0) throw DomainError("iid_block: block size must be >= 1");
  }
  std::string name() const override { return base_->name() + "^" + std::to_string(n_); }
  ParameterSpace parameter_space() const override { return base_->parameter_space(); }
  std::size_t observation_dim() const override { return n_ * base_->observation_dim(); }
  bool discrete_observations() const override { return base_->discrete_observations(); }
  Interval observation_support(double theta) const override {
    return base_->observation_support(theta);
  }
  void sample(double theta, RandomStream& rng, std::span<double> out) const override {
    base_->sample(theta, rng, out);
  }
  double cdf(double x, double theta) const override { return base_->cdf(x, theta); }
  double sf(double x, double theta) const override { return base_->sf(x, theta); }
  ModelFamily family() const override { return base_->family(); }
  SupportMotion support_motion() const override { return base_->support_motion(); }
  UnboundedMap preferred_map() const override { return base_->preferred_map(); }
  std::unique_ptr<LikelihoodSurface> likelihood(std::span<const double> sample) const override {
    return base_->likelihood(sample);
  }

 protected:
  double log_density(std::span<const double> x, double theta) const override {
    return loglik_product(*base_, x, theta);
  }

 private:
  ModelPtr base_;
  std::size_t n_;
};

double bisect_increasing(const std::function<double(double)>& f, double target, double lo) {
  double hi = std::max(2.0 * std::fabs(lo), 1.0) + lo;
  for (int i = 0; i < 2000 && f(hi) < target; ++i) hi = lo + 2.0 * (hi - lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (!(lo < mid && mid < hi)) break;
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

//---------------------------------------------------------------------------//

bool ParameterSpace::contains(double theta) const noexcept {
  if (std::isnan(theta)) return false;
  const bool above = open_lo ? theta > lo : theta >= lo;
  const bool below = open_hi ? theta < hi : theta <= hi;
  if (!(above && below)) return false;
  return !discrete || theta == std::floor(theta);
}

void ParameterSpace::validate() const {
  if (!(lo < hi)) throw DomainError("parameter space: lo must be below hi");
  if (discrete && !(lo >= 1.0)) throw DomainError("parameter space: discrete spaces start at >= 1");
}

double LikelihoodSurface::log_evidence(const std::function<double(double)>& log_prior,
                                       Interval region, const QuadratureSettings& settings) const {
  region = region.intersect(support());
  if (region.empty()) return kNegInf;
  const auto cuts = breakpoints();
  return log_integrate(
      [&](double theta) {
        const double l = (*this)(theta);
        return l == kNegInf ? kNegInf : l + log_prior(theta);
      },
      region, settings, cuts);
}

void Model::check_theta(double theta) const {
  if (!parameter_space().contains(theta)) {
    throw DomainError(name() + ": theta=" + std::to_string(theta) + " outside the parameter space");
  }
}

double Model::logpdf(std::span<const double> x, double theta) const {
  check_theta(theta);
  if (x.size() != observation_dim()) throw DomainError(name() + ": observation has wrong dimension");
  const double v = log_density(x, theta);
  if (std::isnan(v)) throw InvariantViolation(name() + ": logpdf produced NaN");
  return v;
}

double Model::cdf(double, double) const {
  throw UnsupportedOperation(name() + ": no cdf available");
}

double Model::quantile(double, double) const {
  throw UnsupportedOperation(name() + ": no quantile function available");
}

std::vector<double> Model::support_points(double) const {
  throw UnsupportedOperation(name() + ": observations are continuous");
}

std::vector<double> Model::theta_candidates(double) const {
  throw UnsupportedOperation(name() + ": parameter is continuous");
}

std::unique_ptr<LikelihoodSurface> Model::likelihood(std::span<const double> sample) const {
  return std::make_unique<GenericSurface>(*this, sample, space_interval(parameter_space()));
}

double UniformPairSpec::a1_inverse(double t) const {
  if (inv_a1) return inv_a1(t);
  return bisect_increasing(a1, t, theta_floor);
}

double UniformPairSpec::a2_inverse(double t) const {
  if (inv_a2) return inv_a2(t);
  return bisect_increasing(a2, t, theta_floor);
}

double UniformPairSpec::b1(double theta) const {
  return (d_a2(theta) - d_a1(theta)) / d_a1(theta);
}

double UniformPairSpec::b2(double theta) const {
  return (d_a2(theta) - d_a1(theta)) / d_a2(theta);
}

void UniformPairSpec::check(double theta) const {
  if (!(theta > theta_floor)) throw DomainError("uniform pair: theta must exceed the floor");
  const double l = a1(theta), u = a2(theta), dl = d_a1(theta), du = d_a2(theta);
  if (!(0.0 < l && l < u)) throw DomainError("uniform pair: need 0 < a1 < a2");
  if (!(0.0 < dl && dl < du)) throw DomainError("uniform pair: need 0 < a1' < a2'");
}

UniformPairSpec UniformPairSpec::theta_theta2() {
  UniformPairSpec s;
  s.a1 = [](double t) { return t; };
  s.a2 = [](double t) { return t * t; };
  s.d_a1 = [](double) { return 1.0; };
  s.d_a2 = [](double t) { return 2.0 * t; };
  s.inv_a1 = [](double x) { return x; };
  s.inv_a2 = [](double x) { return std::sqrt(x); };
  s.theta_floor = 1.0;
  s.label = "theta-theta2";
  return s;
}

ModelPtr normal_location() { return std::make_shared<NormalLocation>(); }
ModelPtr expshift_location() { return std::make_shared<ExpShiftLocation>(); }
ModelPtr logtail_location() { return std::make_shared<LogtailLocation>(); }
ModelPtr logexp_location() { return std::make_shared<LogExpLocation>(); }
ModelPtr exponential_scale() { return std::make_shared<ExponentialScale>(); }
ModelPtr uniform_scale() { return std::make_shared<UniformScale>(); }
ModelPtr uniform_pair(UniformPairSpec spec) { return std::make_shared<UniformPair>(std::move(spec)); }
ModelPtr triangular() { return std::make_shared<Triangular>(); }
ModelPtr normal_mixture() { return std::make_shared<NormalMixture>(); }
ModelPtr fmn_discrete() { return std::make_shared<FmnDiscrete>(); }
ModelPtr iid_block(ModelPtr base, std::size_t n) {
  return std::make_shared<IidBlock>(std::move(base), n);
}

std::vector<std::string> builtin_model_names() {
  return {"normal-location", "expshift-location", "logtail-location", "logexp-location",
          "exponential-scale", "uniform-scale",   "uniform-pair",     "triangular",
          "normal-mixture",  "fmn-discrete"};
}

ModelPtr make_model(const std::string& name) {
  if (name == "normal-location") return normal_location();
  if (name == "expshift-location") return expshift_location();
  if (name == "logtail-location") return logtail_location();
  if (name == "logexp-location") return logexp_location();
  if (name == "exponential-scale") return exponential_scale();
  if (name == "uniform-scale") return uniform_scale();
  if (name == "uniform-pair") return uniform_pair(UniformPairSpec::theta_theta2());
  if (name == "triangular") return triangular();
  if (name == "normal-mixture") return normal_mixture();
  if (name == "fmn-discrete") return fmn_discrete();
  throw DomainError("unknown model '" + name + "'");
}

double logpdf(const Model& model, std::span<const double> x, double theta) {
  return model.logpdf(x, theta);
}

double loglik_product(const Model& model, std::span<const double> sample, double theta) {
  const std::size_t d = model.observation_dim();
  if (sample.empty() || sample.size() % d != 0) {
    throw DomainError("loglik_product: sample must hold a positive number of observations");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < sample.size(); i += d) {
    const double v = model.logpdf(sample.subspan(i, d), theta);
    if (v == kNegInf) return kNegInf;
    acc += v;
  }
  return acc;
}

std::vector<double> sample(const Model& model, double theta, RandomStream& rng, std::size_t n) {
  model.check_theta(theta);
  if (n == 0) throw DomainError("sample: n must be >= 1");
  std::vector<double> out(n * model.observation_dim());
  model.sample(theta, rng, out);
  return out;
}

ReducedSample sufficient_stat(const Model& model, std::span<const double> sample) {
  const SufficientStatistic* reduction = model.sufficient_statistic();
  if (reduction == nullptr) {
    throw UnsupportedOperation(model.name() + ": no sufficient statistic declared");
  }
  if (sample.empty()) throw DomainError("sufficient_stat: empty sample");
  return {reduction->reduce(sample), reduction, sample.size()};
}

}  // namespace refprior
