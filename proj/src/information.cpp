#include "refprior/information.hpp"

#include <algorithm>
#include <cmath>

#include "refprior/errors.hpp"
#include "refprior/parallel.hpp"
#include "refprior/rng.hpp"
#include "sampling.hpp"

namespace refprior {

namespace {

constexpr double kClip = 1e-8;

double log_prior_mass(const PriorFn& q, const CompactSet& set, const QuadratureSettings& settings) {
  if (set.discrete) {
    std::vector<double> logs;
    for (double t : set.points()) logs.push_back(q(t));
    return log_sum_exp(logs);
  }
  return log_integrate(q.log_value, set.interval(), settings);
}

double clip_nonnegative(double value, const char* what) {
  if (value >= 0.0) return value;
  if (value >= -kClip) return 0.0;
  throw InvariantViolation(std::string(what) + ": negative information " + std::to_string(value));
}

// Every k-tuple of support points of theta, in lexicographic order.
std::vector<std::vector<double>> support_tuples(const Model& model, double theta, std::size_t k) {
  const auto points = model.support_points(theta);
  std::vector<std::vector<double>> out{{}};
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double x : points) {
        next.push_back(prefix);
        next.back().push_back(x);
      }
    }
    out = std::move(next);
  }
  return out;
}

InformationEstimate enumerate_information(const Model& model, const PriorFn& q, const CompactSet& set,
                                          std::size_t k) {
  if (!model.discrete_observations()) {
    throw UnsupportedOperation(model.name() + ": exact enumeration needs discrete observations");
  }
  const auto thetas = set.points();
  std::vector<double> log_q;
  for (double t : thetas) log_q.push_back(q(t));
  const double log_z = log_sum_exp(log_q);
  for (double& l : log_q) l -= log_z;
  const double tuples = std::pow(static_cast<double>(model.support_points(thetas.front()).size()),
                                 static_cast<double>(k));
  if (tuples * static_cast<double>(thetas.size() * thetas.size()) > 1e8) {
    throw UnsupportedOperation(model.name() + ": enumeration too large; use Monte Carlo");
  }
  long double acc = 0.0L;
  std::vector<double> joint(thetas.size());
  for (std::size_t a = 0; a < thetas.size(); ++a) {
    for (const auto& xs : support_tuples(model, thetas[a], k)) {
      const double log_p = loglik_product(model, xs, thetas[a]);
      if (log_p == kNegInf) continue;
      for (std::size_t b = 0; b < thetas.size(); ++b) joint[b] = log_q[b] + loglik_product(model, xs, thetas[b]);
      const double log_m = log_sum_exp(joint);
      acc += std::exp(static_cast<long double>(log_q[a] + log_p)) * (log_p - log_m);
    }
  }
  return {clip_nonnegative(static_cast<double>(acc), "expected_information"), 0.0, false};
}

// Density of the k-replicate statistic at theta and its likelihood surface:
// the observation itself when k = 1, else a scalar sufficient statistic.
struct ScalarData {
  const Model& model;
  const SufficientStatistic* stat;
  std::size_t k;

  double logpdf(double t, double theta) const {
    if (!stat) return model.logpdf(t, theta);
    const double one[1] = {t};
    return stat->stat_logpdf(one, theta, k);
  }
  std::unique_ptr<LikelihoodSurface> surface(double t) const {
    const double one[1] = {t};
    return stat ? stat->likelihood(one, k) : model.likelihood(one);
  }
};

ScalarData scalar_data(const Model& model, std::size_t k) {
  if (model.discrete_observations() || model.observation_dim() != 1) {
    throw UnsupportedOperation(model.name() + ": quadrature needs scalar continuous observations");
  }
  if (k == 1) return {model, nullptr, 1};
  const SufficientStatistic* stat = model.sufficient_statistic();
  if (!stat || stat->dim() != 1) {
    throw UnsupportedOperation(model.name() + ": quadrature for k > 1 needs a scalar sufficient statistic");
  }
  return {model, stat, k};
}

// Differential entropy of the density t -> exp(log_f(t)) over support.
double entropy(const std::function<double(double)>& log_f, Interval support, std::vector<double> cuts,
               const QuadratureSettings& settings) {
  cuts.push_back(support.lo);
  cuts.push_back(support.hi);
  std::erase_if(cuts, [](double c) { return !std::isfinite(c); });
  return integrate(
      [&](double t) {
        const double l = log_f(t);
        return l == kNegInf ? 0.0 : -std::exp(l) * l;
      },
      support, settings, detail::inside(cuts, support));
}

QuadratureSettings loosened(const QuadratureSettings& q, double rel) {
  QuadratureSettings out = q;
  out.rel_tol = std::max(q.rel_tol, rel);
  out.abs_tol_log = std::max(q.abs_tol_log, rel * 1e-2);
  return out;
}

// I = H(m) - E_q H(p(. | theta)) for scalar data.
InformationEstimate quadrature_information(const Model& model, const PriorFn& q, const CompactSet& set,
                                           std::size_t k, const QuadratureSettings& settings) {
  const ScalarData data = scalar_data(model, k);
  const double log_z = log_prior_mass(q, set, settings);
  auto log_q = [&](double theta) { return q(theta) - log_z; };
  // Nested quadrature: the outer integrands carry the inner tolerance.
  const QuadratureSettings outer = loosened(settings, 1e-9);

  auto conditional_entropy = [&](double theta) {
    const Interval support = model.observation_support(theta);
    std::vector<double> cuts{theta};
    for (int e = -2; e <= 3; ++e) {
      cuts.push_back(theta + std::pow(10.0, e));
      cuts.push_back(theta - std::pow(10.0, e));
    }
    return entropy([&](double t) { return data.logpdf(t, theta); }, support, cuts, settings);
  };
  const double mean_entropy = integrate(
      [&](double theta) { return std::exp(log_q(theta)) * conditional_entropy(theta); }, set.interval(), outer);

  const Interval window = detail::data_hull(model, set);
  const double marginal_entropy = entropy(
      [&](double t) {
        const auto surface = data.surface(t);
        return surface->log_evidence(log_q, set.interval(), settings);
      },
      window, detail::data_breakpoints(model, set), outer);
  return {clip_nonnegative(marginal_entropy - mean_entropy, "expected_information"), 0.0, false};
}

InformationEstimate monte_carlo_information(const Model& model, const PriorFn& q, const CompactSet& set,
                                            std::size_t k, const InformationSettings& settings,
                                            const InformationEstimator& estimator) {
  if (estimator.draws < 2) throw DomainError("expected_information: at least two draws are needed");
  const QuadratureSettings& quad = settings.quadrature;
  const double log_z = log_prior_mass(q, set, quad);
  auto log_q = [&](double theta) { return q(theta) - log_z; };
  const SufficientStatistic* stat = settings.use_sufficient_statistic ? model.sufficient_statistic() : nullptr;
  const std::vector<double> points = set.discrete ? set.points() : std::vector<double>{};
  const detail::PriorSampler sampler(q, set, quad);

  std::vector<double> values(estimator.draws);
  parallel_for(estimator.draws, resolve_threads(estimator.threads), [&](std::size_t j) {
    RandomStream rng(estimator.seed, stream_id(0x1f0, j));
    const double theta = sampler.draw(rng.uniform());
    const std::vector<double> xs = sample(model, theta, rng, k);
    std::unique_ptr<LikelihoodSurface> surface;
    if (stat) {
      const auto t = stat->reduce(xs);
      surface = stat->likelihood(t, k);
    } else {
      surface = model.likelihood(xs);
    }
    double log_m;
    if (set.discrete) {
      std::vector<double> joint;
      for (double c : points) joint.push_back((*surface)(c) + log_q(c));
      log_m = log_sum_exp(joint);
    } else {
      log_m = surface->log_evidence(log_q, set.interval(), quad);
    }
    // log of posterior over prior at the drawn theta.
    values[j] = (*surface)(theta) - log_m;
  });

  InformationEstimate est;
  for (double v : values) {
    if (!std::isfinite(v) || std::fabs(v) > settings.budget) {
      est.value = kInf;
      est.std_err = kInf;
      est.budget_exceeded = true;
      return est;
    }
  }
  detail::batch_summary(values, settings.batches, est.value, est.std_err);
  return est;
}

std::vector<double> theta_grid(const CompactSet& set, std::size_t n) {
  if (n == 0) throw DomainError("standard_model_check: grid needs at least one point");
  if (n == 1) return {0.5 * (set.lo + set.hi)};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = set.lo + (set.hi - set.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

// One-observation divergence and entropy. Replicates are independent, so
// the k-replicate values are k times these.
double observation_kl(const Model& model, double theta, double theta_prime, const StandardModelSettings& s,
                      double budget) {
  if (theta == theta_prime) return 0.0;
  const Interval support = model.observation_support(theta);
  const Interval other = model.observation_support(theta_prime);
  std::vector<double> cuts{support.lo, support.hi, other.lo, other.hi, theta, theta_prime};
  std::erase_if(cuts, [](double c) { return !std::isfinite(c); });
  return kl_divergence([&](double x) { return model.logpdf(x, theta); },
                       [&](double x) { return model.logpdf(x, theta_prime); }, support, s.quadrature, cuts,
                       budget);
}

double observation_entropy(const Model& model, double theta, const QuadratureSettings& settings) {
  std::vector<double> cuts{theta};
  for (int e = -2; e <= 3; ++e) {
    cuts.push_back(theta + std::pow(10.0, e));
    cuts.push_back(theta - std::pow(10.0, e));
  }
  return entropy([&](double x) { return model.logpdf(x, theta); }, model.observation_support(theta), cuts,
                 settings);
}

}  // namespace

InformationEstimate expected_information(const Model& model, const PriorFn& q, const CompactSet& set,
                                         std::size_t k, const InformationSettings& settings,
                                         const InformationEstimator& estimator) {
  if (k < 1) throw DomainError("expected_information: k must be >= 1");
  set.validate(model);
  settings.quadrature.validate();
  if (estimator.method == InformationMethod::monte_carlo) {
    return monte_carlo_information(model, q, set, k, settings, estimator);
  }
  if (set.discrete) return enumerate_information(model, q, set, k);
  return quadrature_information(model, q, set, k, settings.quadrature);
}

AdditivityCheck information_additivity_check(const Model& model, const PriorFn& q, const CompactSet& set,
                                             std::size_t n, std::size_t k, const InformationSettings& settings,
                                             const InformationEstimator& estimator) {
  if (n < 1) throw DomainError("information_additivity_check: n must be >= 1");
  AdditivityCheck out;
  const InformationEstimate base = expected_information(model, q, set, k, settings, estimator);
  if (n == 1) {
    out.combined = base;
    out.scaled = base;
    return out;
  }
  out.combined = expected_information(model, q, set, n * k, settings, estimator);
  const double nd = static_cast<double>(n);
  out.scaled = {nd * base.value, nd * base.std_err, base.budget_exceeded};
  return out;
}

std::vector<GapPoint> mmi_gap(const Model& model, const PriorFn& pi, const PriorFn& p, const CompactSet& set,
                              std::span<const std::size_t> ks, const InformationSettings& settings,
                              const InformationEstimator& estimator) {
  std::vector<GapPoint> out;
  for (std::size_t k : ks) {
    GapPoint g;
    g.k = k;
    g.reference = expected_information(model, pi, set, k, settings, estimator);
    g.alternative = expected_information(model, p, set, k, settings, estimator);
    g.gap = g.reference.value - g.alternative.value;
    g.std_err = std::hypot(g.reference.std_err, g.alternative.std_err);
    out.push_back(g);
  }
  return out;
}

StandardModelResult standard_model_check(const Model& model, const CompactSet& set, std::size_t k,
                                         StandardModelMode mode, const StandardModelSettings& settings) {
  if (k < 1) throw DomainError("standard_model_check: k must be >= 1");
  set.validate(model);
  if (set.discrete) throw UnsupportedOperation(model.name() + ": standard models have a continuous parameter");
  if (model.discrete_observations() || model.observation_dim() != 1) {
    throw UnsupportedOperation(model.name() + ": probes need scalar continuous observations");
  }
  const double kd = static_cast<double>(k);
  const auto grid = theta_grid(set, settings.grid_points);
  StandardModelResult out;

  if (mode == StandardModelMode::bounded_divergence) {
    out.value = 0.0;
    out.theta = out.theta_prime = grid.front();
    for (double a : grid) {
      for (double b : grid) {
        const double kl = kd * observation_kl(model, a, b, settings, settings.budget / kd);
        if (kl > out.value) {
          out.value = kl;
          out.theta = a;
          out.theta_prime = b;
        }
        if (kl == kInf) {
          out.satisfied = false;
          out.reason = "divergence between replicate densities is infinite or beyond the budget";
          return out;
        }
      }
    }
    // Geometric ladder between the worst pair and its grid neighbours, in
    // case the divergence spikes inside a cell.
    if (grid.size() > 1) {
      const double h = grid[1] - grid[0];
      const double a = out.theta, b = out.theta_prime;
      for (int j = 1; j <= 10; ++j) {
        const double step = h * std::ldexp(1.0, -j);
        for (double bb : {b - step, b + step}) {
          if (!set.contains(bb)) continue;
          const double kl = kd * observation_kl(model, a, bb, settings, settings.budget / kd);
          if (kl == kInf) {
            out.value = kInf;
            out.theta_prime = bb;
            out.satisfied = false;
            out.reason = "divergence between replicate densities is infinite or beyond the budget";
            return out;
          }
          if (kl > out.value) {
            out.value = kl;
            out.theta_prime = bb;
          }
        }
      }
    }
    out.satisfied = true;
    out.reason = "divergence finite over the probed pairs";
    return out;
  }

  // Entropy bound, first condition: k-replicate entropy bounded below.
  out.value = kInf;
  for (double t : grid) {
    const double h = kd * observation_entropy(model, t, settings.quadrature);
    if (h < out.value) {
      out.value = h;
      out.theta = t;
    }
  }
  if (!std::isfinite(out.value) || out.value < -settings.budget) {
    out.satisfied = false;
    out.reason = "replicate entropy unbounded below";
    return out;
  }

  // Second condition: integral of p0 log p0 with p0 the uniform-prior
  // marginal of the k replicates, as a Monte Carlo mean of log p0(t_k).
  const double log_length = std::log(set.hi - set.lo);
  const std::size_t draws = std::max<std::size_t>(settings.draws, 2);
  std::vector<double> values(draws);
  parallel_for(draws, resolve_threads(settings.threads), [&](std::size_t j) {
    RandomStream rng(settings.seed, stream_id(0x57d, j));
    const double theta = set.lo + (set.hi - set.lo) * rng.uniform();
    const std::vector<double> xs = sample(model, theta, rng, k);
    const auto surface = model.likelihood(xs);
    std::vector<double> cuts = surface->breakpoints();
    const Interval s = surface->support();
    cuts.push_back(s.lo);
    cuts.push_back(s.hi);
    std::erase_if(cuts, [](double c) { return !std::isfinite(c); });
    const double log_p0 =
        log_integrate([&](double t) { return loglik_product(model, xs, t); }, set.interval(),
                      settings.quadrature, cuts) -
        log_length;
    values[j] = log_p0;
  });
  for (double v : values) {
    if (!std::isfinite(v) || std::fabs(v) > settings.budget) {
      out.marginal_term = kNegInf;
      out.marginal_std_err = kInf;
      out.satisfied = false;
      out.reason = "marginal log density unbounded";
      return out;
    }
  }
  detail::batch_summary(values, 32, out.marginal_term, out.marginal_std_err);
  out.satisfied = true;
  out.reason = "entropy bounded below and marginal term finite";
  return out;
}

}  // namespace refprior
