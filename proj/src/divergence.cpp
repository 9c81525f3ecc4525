#include "refprior/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "refprior/errors.hpp"
#include "refprior/parallel.hpp"
#include "refprior/rng.hpp"
#include "sampling.hpp"

namespace refprior {

using detail::batch_summary;
using detail::data_breakpoints;
using detail::data_hull;
using detail::inside;
using detail::PriorSampler;

namespace {

Interval parameter_interval(const Model& model) {
  const ParameterSpace s = model.parameter_space();
  return {s.lo, s.hi};
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

// log of the normalizer over an unbounded region, turning a failure that the
// doubling-window check classifies as divergence into ImproprietyError.
double full_log_normalizer(const Model& model, const LikelihoodSurface& surface, const PriorFn& prior,
                           std::span<const double> x, Interval region, const QuadratureSettings& settings) {
  // One observation from a location model under a constant prior, or from a
  // scale model under 1/theta, integrates to a known constant. Heavy-tailed
  // densities would otherwise leave mass beyond any quadrature window.
  if (x.size() == 1 && model.observation_dim() == 1) {
    if (model.family() == ModelFamily::location && prior.label == "uniform") return prior(0.0);
    if (model.family() == ModelFamily::scale && prior.label == "reciprocal" && x[0] > 0.0) {
      return -std::log(x[0]);
    }
  }
  double value;
  try {
    value = surface.log_evidence(prior.log_value, region, settings);
  } catch (const ToleranceFailure&) {
    if (region.bounded()) throw;
    const ProprietyResult check = propriety_check(model, prior, x, settings);
    if (check.status == ProprietyStatus::improper) {
      throw ImproprietyError(model.name() + ": formal posterior is improper under prior " + prior.label);
    }
    throw;
  }
  if (value == kInf) {
    throw ImproprietyError(model.name() + ": posterior normalizer is infinite under prior " + prior.label);
  }
  return value;
}

Posterior make_posterior(const Model& model, const PriorFn& prior, std::span<const double> x,
                         std::shared_ptr<const LikelihoodSurface> surface, Interval region,
                         bool full_space, const QuadratureSettings& settings) {
  Posterior post;
  post.surface = surface;
  post.prior = prior;
  post.region = region;
  post.discrete = model.parameter_space().discrete;
  if (post.discrete) {
    std::vector<double> logs;
    for (double c : surface->breakpoints()) {
      if (c >= region.lo && c <= region.hi && (*surface)(c) > kNegInf) {
        post.points.push_back(c);
        logs.push_back((*surface)(c) + prior(c));
      }
    }
    post.log_normalizer = log_sum_exp(logs);
  } else if (full_space) {
    post.log_normalizer = full_log_normalizer(model, *surface, prior, x, region, settings);
  } else {
    post.log_normalizer = surface->log_evidence(prior.log_value, region, settings);
  }
  if (post.log_normalizer == kNegInf) {
    throw DomainError(model.name() + ": data have zero likelihood on the region");
  }
  if (!std::isfinite(post.log_normalizer)) {
    throw ImproprietyError(model.name() + ": posterior normalizer is not finite");
  }
  return post;
}

// kappa{pi(.|x) | pi_i(.|x)} for one data set, +inf past the budget.
double truncation_kl(const Model& model, const PriorFn& prior, std::span<const double> x,
                     const CompactSet& set, const QuadratureSettings& settings, double budget) {
  std::shared_ptr<const LikelihoodSurface> surface = model.likelihood(x);
  const Posterior full = make_posterior(model, prior, x, surface, parameter_interval(model), true, settings);
  const Posterior trunc = make_posterior(model, prior, x, surface, set.interval(), false, settings);
  if (trunc.discrete) {
    std::vector<double> lp, lq;
    for (double c : trunc.points) {
      lp.push_back(trunc(c));
      lq.push_back(full(c));
    }
    return kl_divergence(lp, lq, budget);
  }
  // The truncated posterior is the full one renormalized on the set, so the
  // divergence equals the log ratio of the two normalizers. Integrating
  // p log(p/q) directly loses all precision once the data sit far outside
  // the set and the posterior collapses onto an endpoint.
  const double value = full.log_normalizer - trunc.log_normalizer;
  if (value > budget) return kInf;
  return std::max(value, 0.0);
}

// Per-draw truncation divergences with n_small and n_large observations that
// share the parameter draw and the first n_small observations.
void monte_carlo_draws(const Model& model, const PriorFn& prior, const CompactSet& set,
                       std::size_t n_small, std::size_t n_large, std::uint64_t seed, std::size_t draws,
                       const DiscrepancySettings& settings, std::size_t threads,
                       std::vector<double>& small, std::vector<double>& large) {
  if (draws < 2) throw DomainError("expected_discrepancy: at least two draws are needed");
  if (n_small < 1 || n_large < n_small) throw DomainError("expected_discrepancy: need 1 <= n1 <= n2");
  const PriorSampler sampler(prior, set, settings.quadrature);
  small.assign(draws, 0.0);
  large.assign(draws, 0.0);
  const std::size_t dim = model.observation_dim();
  parallel_for(draws, resolve_threads(threads), [&](std::size_t j) {
    RandomStream rng(seed, stream_id(0xd15c, j));
    const double theta = sampler.draw(rng.uniform());
    std::vector<double> xs = sample(model, theta, rng, n_large);
    small[j] = truncation_kl(model, prior, std::span<const double>(xs).first(n_small * dim), set,
                             settings.quadrature, settings.kl_budget);
    large[j] = n_large == n_small ? small[j]
                                  : truncation_kl(model, prior, xs, set, settings.quadrature,
                                                  settings.kl_budget);
  });
}

DiscrepancyEstimate summarize_draws(std::span<const double> values, std::size_t batches) {
  DiscrepancyEstimate est;
  if (std::any_of(values.begin(), values.end(), [](double v) { return v == kInf; })) {
    est.value = kInf;
    est.std_err = kInf;
    est.budget_exceeded = true;
    est.verdict = DiscrepancyVerdict::diverging;
    return est;
  }
  batch_summary(values, batches, est.value, est.std_err);
  est.verdict = DiscrepancyVerdict::undetermined;
  return est;
}

DiscrepancyEstimate discrete_parameter_discrepancy(const Model& model, const PriorFn& prior,
                                                   const CompactSet& set,
                                                   const DiscrepancySettings& settings) {
  if (!model.discrete_observations()) {
    throw UnsupportedOperation(model.name() + ": discrete parameter needs discrete observations");
  }
  const auto thetas = set.points();
  std::vector<double> logs;
  for (double t : thetas) logs.push_back(prior(t));
  const double log_total = log_sum_exp(logs);
  std::map<double, double> kl_cache;
  long double acc = 0.0L;
  bool exceeded = false;
  for (std::size_t n = 0; n < thetas.size(); ++n) {
    const double weight = std::exp(logs[n] - log_total);
    for (double x : model.support_points(thetas[n])) {
      const double px = std::exp(model.logpdf(x, thetas[n]));
      auto it = kl_cache.find(x);
      if (it == kl_cache.end()) {
        const double one[1] = {x};
        it = kl_cache.emplace(x, truncation_kl(model, prior, one, set, settings.quadrature,
                                               settings.kl_budget)).first;
      }
      if (it->second == kInf) exceeded = true;
      acc += static_cast<long double>(weight * px) * it->second;
    }
  }
  DiscrepancyEstimate est;
  est.budget_exceeded = exceeded;
  est.value = exceeded ? kInf : static_cast<double>(acc);
  est.verdict = exceeded ? DiscrepancyVerdict::diverging : DiscrepancyVerdict::converging;
  return est;
}

DiscrepancyEstimate continuous_discrepancy(const Model& model, const PriorFn& prior, const CompactSet& set,
                                           const DiscrepancySettings& settings) {
  if (model.discrete_observations()) {
    throw UnsupportedOperation(model.name() + ": quadrature needs continuous observations");
  }
  if (model.observation_dim() != 1) {
    throw UnsupportedOperation(model.name() + ": quadrature covers scalar observations; use Monte Carlo");
  }
  if (settings.cutoffs.empty()) throw DomainError("expected_discrepancy: no cutoffs given");
  const QuadratureSettings& q = settings.quadrature;
  const double log_prior_mass = log_integrate(prior.log_value, set.interval(), q);
  const Interval hull = data_hull(model, set);
  const auto cuts = data_breakpoints(model, set);
  bool exceeded = false;

  auto integrand = [&](double x) {
    const double one[1] = {x};
    std::shared_ptr<const LikelihoodSurface> surface = model.likelihood(one);
    const double log_mi = surface->log_evidence(prior.log_value, set.interval(), q);
    if (log_mi == kNegInf) return 0.0;
    const double log_weight = log_mi - log_prior_mass;
    const double kl = truncation_kl(model, prior, one, set, q, settings.kl_budget);
    if (kl == kInf) {
      // Negligible mass at this x keeps the capped value; otherwise the
      // whole estimate is abandoned.
      if (log_weight + std::log(settings.kl_budget) < std::log(1e-14)) {
        return std::exp(log_weight) * settings.kl_budget;
      }
      exceeded = true;
      return 0.0;
    }
    return std::exp(log_weight) * kl;
  };

  QuadratureSettings outer = q;
  outer.rel_tol = std::max(q.rel_tol, 1e-8);
  outer.abs_tol_log = std::max(q.abs_tol_log, 1e-11);

  DiscrepancyEstimate est;
  std::vector<double> cutoffs = settings.cutoffs;
  std::sort(cutoffs.begin(), cutoffs.end());
  double total = 0.0;
  Interval covered{0.0, 0.0};
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    const Interval window{std::max(hull.lo, set.lo - cutoffs[c]), std::min(hull.hi, set.hi + cutoffs[c])};
    if (c == 0) {
      total = integrate(integrand, window, outer, inside(cuts, window));
    } else {
      // Only the new bands on either side.
      if (window.lo < covered.lo) {
        const Interval band{window.lo, covered.lo};
        total += integrate(integrand, band, outer, inside(cuts, band));
      }
      if (window.hi > covered.hi) {
        const Interval band{covered.hi, window.hi};
        total += integrate(integrand, band, outer, inside(cuts, band));
      }
    }
    covered = window;
    est.cutoff_series.emplace_back(cutoffs[c], total);
    if (exceeded) break;
  }
  if (exceeded) {
    est.value = kInf;
    est.budget_exceeded = true;
    est.verdict = DiscrepancyVerdict::diverging;
    return est;
  }
  est.value = total;
  if (est.cutoff_series.size() >= 2) {
    const double last = est.cutoff_series.back().second;
    const double prev = est.cutoff_series[est.cutoff_series.size() - 2].second;
    if (last - prev > settings.cutoff_tol * (1.0 + std::fabs(last))) {
      // Still growing at the widest window: the integral diverges (or is
      // too heavy-tailed to resolve).
      est.value = kInf;
      est.budget_exceeded = true;
      est.verdict = DiscrepancyVerdict::diverging;
      return est;
    }
  }
  est.verdict = DiscrepancyVerdict::converging;
  return est;
}

}  // namespace

std::vector<double> CompactSet::points() const {
  if (!discrete) throw DomainError("CompactSet: points() needs a discrete set");
  std::vector<double> out;
  for (double t = lo; t <= hi; t += 1.0) out.push_back(t);
  return out;
}

void CompactSet::validate(const Model& model) const {
  if (!(lo < hi) && !(discrete && lo == hi)) throw DomainError("CompactSet: need lo < hi");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("CompactSet: endpoints must be finite");
  const ParameterSpace space = model.parameter_space();
  if (discrete != space.discrete) throw DomainError("CompactSet: discreteness does not match the model");
  if (discrete && (!is_integer(lo) || !is_integer(hi))) {
    throw DomainError("CompactSet: discrete endpoints must be integers");
  }
  const bool lo_ok = space.open_lo ? lo > space.lo : lo >= space.lo;
  const bool hi_ok = space.open_hi ? hi < space.hi : hi <= space.hi;
  if (!lo_ok || !hi_ok) throw DomainError("CompactSet: not inside the parameter space");
}

CompactSequence CompactSequence::symmetric(double centre) {
  return {SequenceKind::symmetric, [centre](double i) { return CompactSet{centre - i, centre + i}; }};
}

CompactSequence CompactSequence::log_symmetric() {
  return {SequenceKind::log_symmetric, [](double i) { return CompactSet{std::exp(-i), std::exp(i)}; }};
}

CompactSequence CompactSequence::discrete() {
  return {SequenceKind::discrete, [](double i) { return CompactSet{1.0, std::floor(i), true}; }};
}

CompactSequence CompactSequence::custom(std::function<CompactSet(double)> generator) {
  return {SequenceKind::custom, std::move(generator)};
}

void CompactSequence::validate(const Model& model, std::span<const double> i_values) const {
  if (i_values.empty()) throw DomainError("CompactSequence: no indices to probe");
  std::vector<double> is(i_values.begin(), i_values.end());
  std::sort(is.begin(), is.end());
  const ParameterSpace space = model.parameter_space();
  CompactSet prev = generator(is.front());
  prev.validate(model);
  for (std::size_t n = 1; n < is.size(); ++n) {
    const CompactSet next = generator(is[n]);
    next.validate(model);
    if (next.lo > prev.lo || next.hi < prev.hi) throw DomainError("CompactSequence: sets are not nested");
    // An endpoint that has not reached the boundary of Theta must keep moving.
    const bool lo_stuck = prev.lo > space.lo && next.lo == prev.lo && !(space.discrete && prev.lo <= space.lo);
    const bool hi_stuck = prev.hi < space.hi && next.hi == prev.hi;
    if ((lo_stuck && std::isinf(space.lo)) || hi_stuck) {
      throw DomainError("CompactSequence: endpoints do not move toward the parameter bounds");
    }
    if (lo_stuck && !std::isinf(space.lo) && !space.discrete) {
      throw DomainError("CompactSequence: lower endpoint does not move toward the parameter bound");
    }
    prev = next;
  }
}

double kl_divergence(const LogFunction& log_p, const LogFunction& log_q, Interval domain,
                     const QuadratureSettings& settings, std::span<const double> breakpoints,
                     double budget) {
  bool mismatch = false;
  auto f = [&](double t) {
    const double lp = log_p(t);
    if (lp == kNegInf) return 0.0;
    const double lq = log_q(t);
    if (lq == kNegInf) {
      mismatch = true;
      return 0.0;
    }
    return std::exp(lp) * (lp - lq);
  };
  std::vector<double> cuts(breakpoints.begin(), breakpoints.end());
  const double value = integrate(f, domain, settings, inside(cuts, domain));
  if (mismatch || !std::isfinite(value) || value > budget) return kInf;
  if (value < 0.0) {
    if (value >= -1e-8) return 0.0;
    throw InvariantViolation("kl_divergence: negative value " + std::to_string(value) +
                             " (densities not normalized?)");
  }
  return value;
}

double kl_divergence(std::span<const double> log_p, std::span<const double> log_q, double budget) {
  if (log_p.size() != log_q.size()) throw DomainError("kl_divergence: support sizes differ");
  long double acc = 0.0L;
  for (std::size_t n = 0; n < log_p.size(); ++n) {
    if (log_p[n] == kNegInf) continue;
    if (log_q[n] == kNegInf) return kInf;
    acc += std::exp(static_cast<long double>(log_p[n])) * (log_p[n] - log_q[n]);
  }
  const double value = static_cast<double>(acc);
  if (value > budget) return kInf;
  if (value < 0.0) {
    if (value >= -1e-8) return 0.0;
    throw InvariantViolation("kl_divergence: negative value " + std::to_string(value));
  }
  return value;
}

double Posterior::operator()(double theta) const {
  if (discrete) {
    if (!std::binary_search(points.begin(), points.end(), theta)) return kNegInf;
  } else if (!(theta >= region.lo && theta <= region.hi)) {
    return kNegInf;
  }
  const double l = (*surface)(theta);
  if (l == kNegInf) return kNegInf;
  return l + prior(theta) - log_normalizer;
}

std::vector<double> Posterior::breakpoints() const {
  std::vector<double> cuts = surface->breakpoints();
  const Interval s = surface->support();
  cuts.push_back(s.lo);
  cuts.push_back(s.hi);
  std::erase_if(cuts, [&](double c) { return !(c > region.lo && c < region.hi); });
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

Posterior posterior_logpdf(const Model& model, const PriorFn& prior, std::span<const double> x,
                           std::optional<CompactSet> region, const QuadratureSettings& settings) {
  if (x.empty()) throw DomainError("posterior_logpdf: empty data");
  if (region) region->validate(model);
  std::shared_ptr<const LikelihoodSurface> surface = model.likelihood(x);
  const Interval r = region ? region->interval() : parameter_interval(model);
  if (!region && !r.bounded() && !model.parameter_space().discrete) {
    // An unbounded quadrature can return a finite-looking value for a
    // non-integrable posterior, so the growth check runs first.
    if (propriety_check(model, prior, x, settings).status == ProprietyStatus::improper) {
      throw ImproprietyError(model.name() + ": formal posterior is improper under prior " + prior.label);
    }
  }
  return make_posterior(model, prior, x, surface, r, !region, settings);
}

std::pair<double, double> truncation_kl_identity(const Model& model, const PriorFn& prior,
                                                 std::span<const double> x, const CompactSet& set,
                                                 const QuadratureSettings& settings) {
  set.validate(model);
  const Posterior full = posterior_logpdf(model, prior, x, std::nullopt, settings);
  const Posterior trunc = posterior_logpdf(model, prior, x, set, settings);
  if (full.discrete) {
    std::vector<double> lp, lq;
    for (double c : trunc.points) {
      lp.push_back(trunc(c));
      lq.push_back(full(c));
    }
    return {kl_divergence(lp, lq, kInf), -log_sum_exp(lq)};
  }
  const auto cuts = trunc.breakpoints();
  const double lhs = kl_divergence([&](double t) { return trunc(t); }, [&](double t) { return full(t); },
                                   set.interval(), settings, cuts, kInf);
  const double mass = log_integrate([&](double t) { return full(t); }, set.interval(), settings, cuts);
  return {lhs, -mass};
}

DiscrepancyEstimate expected_discrepancy(const Model& model, const PriorFn& prior, const CompactSet& set,
                                         const DiscrepancySettings& settings,
                                         const DiscrepancyEstimator& estimator) {
  set.validate(model);
  settings.quadrature.validate();
  if (estimator.method == DiscrepancyMethod::monte_carlo) {
    std::vector<double> small, large;
    monte_carlo_draws(model, prior, set, 1, 1, estimator.seed, estimator.draws, settings,
                      estimator.threads, small, large);
    return summarize_draws(small, settings.batches);
  }
  if (model.parameter_space().discrete) return discrete_parameter_discrepancy(model, prior, set, settings);
  return continuous_discrepancy(model, prior, set, settings);
}

double fmn_discrepancy_exact(std::size_t i, FmnPrior prior) {
  if (i < 1) throw DomainError("fmn_discrepancy_exact: i must be >= 1");
  auto weight = [&](long long theta) -> long double {
    return prior == FmnPrior::uniform ? 1.0L : 1.0L / static_cast<long double>(theta);
  };
  auto small = [](long long theta) { return theta == 1 ? 1LL : theta / 2; };
  // Parameters that can produce x.
  auto candidates = [](long long x) {
    std::vector<long long> c{2 * x, 2 * x + 1};
    if (x == 1) c.push_back(1);
    if (x % 2 == 0) c.push_back(x / 2);
    else if (x >= 3) c.push_back((x - 1) / 2);
    return c;
  };
  const auto n = static_cast<long long>(i);
  long double total_weight = 0.0L;
  for (long long t = 1; t <= n; ++t) total_weight += weight(t);
  long double acc = 0.0L;
  for (long long t = 1; t <= n; ++t) {
    long double inner = 0.0L;
    for (long long x : {small(t), 2 * t, 2 * t + 1}) {
      long double full = 0.0L, trunc = 0.0L;
      for (long long c : candidates(x)) {
        full += weight(c);
        if (c <= n) trunc += weight(c);
      }
      inner += std::log(full / trunc);
    }
    acc += weight(t) / total_weight * inner / 3.0L;
  }
  return static_cast<double>(acc);
}

double location_discrepancy_closed_form(const Model& model, const CompactSet& set,
                                        const QuadratureSettings& settings, double cutoff) {
  if (model.family() != ModelFamily::location) {
    throw UnsupportedOperation(model.name() + ": closed form needs a location model");
  }
  set.validate(model);
  const double a = set.lo, b = set.hi;
  const double width = b - a;
  // G(x) = F(x - a) - F(x - b), from whichever tail keeps precision.
  auto g = [&](double x) {
    const double lower = model.cdf(x, a) - model.cdf(x, b);
    if (model.cdf(x, b) < 0.5) return lower;
    return model.sf(x, b) - model.sf(x, a);
  };
  const Interval hull = data_hull(model, set);
  const Interval window{std::max(hull.lo, a - cutoff), std::min(hull.hi, b + cutoff)};
  QuadratureSettings outer = settings;
  outer.rel_tol = std::max(settings.rel_tol, 1e-10);
  const double value = integrate(
      [&](double x) {
        const double v = g(x);
        return v > 0.0 ? -v * std::log(v) : 0.0;
      },
      window, outer, inside(data_breakpoints(model, set), window));
  return value / width;
}

TailCheck tail_condition_check(const Model& model, double eps, std::span<const double> probes, double tol) {
  if (!(eps > 0.0)) throw DomainError("tail_condition_check: eps must be positive");
  const ModelFamily family = model.family();
  if (family == ModelFamily::other) {
    throw UnsupportedOperation(model.name() + ": tail condition needs a location or scale model");
  }
  std::vector<double> ts(probes.begin(), probes.end());
  if (ts.empty()) {
    if (family == ModelFamily::location) {
      for (int e = 1; e <= 300; ++e) {
        ts.push_back(std::pow(10.0, e));
        ts.push_back(-std::pow(10.0, e));
      }
    } else {
      for (int t = 1; t <= 700; ++t) {
        ts.push_back(t);
        ts.push_back(-t);
      }
    }
  }
  std::sort(ts.begin(), ts.end(), [](double l, double r) { return std::fabs(l) < std::fabs(r); });
  TailCheck out;
  for (double t : ts) {
    double log_f;
    if (family == ModelFamily::location) {
      log_f = model.logpdf(t, 0.0);
    } else {
      // e^t f(e^t) is the density of log x at theta = 1.
      const double s = std::exp(t);
      log_f = s > 0.0 && std::isfinite(s) ? t + model.logpdf(s, 1.0) : kNegInf;
    }
    const double log_v = log_f == kNegInf ? kNegInf : (1.0 + eps) * std::log(std::fabs(t)) + log_f;
    out.witness.emplace_back(t, log_v);
  }
  // Each tail direction: the last three probes are non-increasing and the
  // final one is below tol.
  out.satisfied = true;
  for (int sign : {1, -1}) {
    std::vector<double> values;
    for (const auto& [t, v] : out.witness) {
      if ((t > 0) == (sign > 0)) values.push_back(v);
    }
    if (values.empty()) continue;
    const std::size_t n = values.size();
    if (values.back() > std::log(tol)) out.satisfied = false;
    for (std::size_t k = n >= 3 ? n - 3 : 0; k + 1 < n; ++k) {
      if (values[k + 1] > values[k]) out.satisfied = false;
    }
  }
  return out;
}

ProprietyResult propriety_check(const Model& model, const PriorFn& prior, std::span<const double> x,
                                const QuadratureSettings& settings) {
  if (x.empty()) throw DomainError("propriety_check: empty data");
  const auto surface = model.likelihood(x);
  ProprietyResult out;
  const Interval space = parameter_interval(model);
  if (model.parameter_space().discrete) {
    std::vector<double> logs;
    for (double c : surface->breakpoints()) logs.push_back((*surface)(c) + prior(c));
    out.log_normalizer = log_sum_exp(logs);
    out.status = std::isfinite(out.log_normalizer) ? ProprietyStatus::proper : ProprietyStatus::improper;
    return out;
  }
  const Interval region = space.intersect(surface->support());
  if (region.bounded()) {
    try {
      out.log_normalizer = surface->log_evidence(prior.log_value, region, settings);
      out.status = std::isfinite(out.log_normalizer) ? ProprietyStatus::proper : ProprietyStatus::improper;
    } catch (const ToleranceFailure&) {
      out.status = ProprietyStatus::undetermined;
    }
    return out;
  }
  // Centre and scale from the likelihood's own hints.
  std::vector<double> hints = inside(surface->breakpoints(), region);
  double centre;
  double scale = 1.0;
  if (hints.empty()) {
    centre = std::isfinite(region.lo) ? region.lo + 1.0 : (std::isfinite(region.hi) ? region.hi - 1.0 : 0.0);
  } else {
    std::sort(hints.begin(), hints.end());
    centre = hints[hints.size() / 2];
    scale = std::max(1.0, hints.back() - hints.front());
  }
  constexpr int kDoublings = 60;
  double prev = kNaN;
  int flat = 0;
  std::vector<double> deltas;
  for (int j = 0; j <= kDoublings; ++j) {
    const double grow = std::ldexp(1.0, j);
    const double lo = std::isfinite(region.lo) ? region.lo + (centre - region.lo) / grow : centre - scale * grow;
    const double hi = std::isfinite(region.hi) ? region.hi - (region.hi - centre) / grow : centre + scale * grow;
    double z;
    try {
      z = surface->log_evidence(prior.log_value, {lo, hi}, settings);
    } catch (const ToleranceFailure& e) {
      z = e.best_estimate();
    }
    out.window_log_normalizers.push_back(z);
    if (j > 0 && std::isfinite(prev) && std::isfinite(z)) {
      const double d = z - prev;
      deltas.push_back(d);
      flat = d < 1e-10 ? flat + 1 : 0;
      if (flat >= 2) {
        out.status = ProprietyStatus::proper;
        try {
          out.log_normalizer = surface->log_evidence(prior.log_value, region, settings);
        } catch (const ToleranceFailure&) {
          out.log_normalizer = z;
        }
        return out;
      }
    }
    prev = z;
  }
  // Still growing: improper when the growth per doubling is not dying out.
  const std::size_t n = deltas.size();
  if (n >= 5) {
    bool sustained = true;
    for (std::size_t k = n - 5; k < n; ++k) sustained = sustained && deltas[k] > 1e-3;
    if (sustained && deltas[n - 1] >= 0.5 * deltas[n - 5]) {
      out.status = ProprietyStatus::improper;
      out.log_normalizer = kInf;
      return out;
    }
  }
  out.status = ProprietyStatus::undetermined;
  return out;
}

MonotonicityResult discrepancy_monotonicity(const Model& model, const PriorFn& prior, const CompactSet& set,
                                            std::size_t n1, std::size_t n2, std::uint64_t seed,
                                            std::size_t draws, const DiscrepancySettings& settings,
                                            std::size_t threads) {
  set.validate(model);
  std::vector<double> small, large;
  monte_carlo_draws(model, prior, set, n1, n2, seed, draws, settings, threads, small, large);
  MonotonicityResult out;
  out.smaller = summarize_draws(small, settings.batches);
  out.larger = summarize_draws(large, settings.batches);
  if (out.smaller.budget_exceeded || out.larger.budget_exceeded) {
    out.difference = kNaN;
    out.difference_std_err = kInf;
    return out;
  }
  std::vector<double> diff(small.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = large[j] - small[j];
  batch_summary(diff, settings.batches, out.difference, out.difference_std_err);
  return out;
}

std::string to_string(Permissibility p) {
  switch (p) {
    case Permissibility::permissible_evidence: return "permissible-evidence";
    case Permissibility::not_permissible_evidence: return "not-permissible-evidence";
    case Permissibility::undetermined: return "undetermined";
  }
  return "undetermined";
}

std::string to_string(DiscrepancyVerdict v) {
  switch (v) {
    case DiscrepancyVerdict::converging: return "converging";
    case DiscrepancyVerdict::diverging: return "diverging";
    case DiscrepancyVerdict::undetermined: return "undetermined";
  }
  return "undetermined";
}

std::string to_string(ProprietyStatus s) {
  switch (s) {
    case ProprietyStatus::proper: return "proper";
    case ProprietyStatus::improper: return "improper";
    case ProprietyStatus::undetermined: return "undetermined";
  }
  return "undetermined";
}

double extrapolated_limit(std::span<const double> series) {
  if (series.empty()) return kNaN;
  const std::size_t n = series.size();
  if (n < 3) return series.back();
  const double a = series[n - 3], b = series[n - 2], c = series[n - 1];
  const double d1 = b - a, d2 = c - b;
  if (d1 == 0.0) return c;
  const double ratio = d2 / d1;
  // Only a geometric-looking, shrinking tail is extrapolated.
  if (!(ratio > 0.0 && ratio < 1.0)) return c;
  return c + d2 * ratio / (1.0 - ratio);
}

PermissibilityReport permissibility_verdict(const Model& model, const PriorFn& prior,
                                            const CompactSequence& sequence,
                                            std::span<const double> i_values,
                                            const DiscrepancySettings& settings, double threshold) {
  PermissibilityReport report;
  sequence.validate(model, i_values);
  report.i_values.assign(i_values.begin(), i_values.end());
  std::sort(report.i_values.begin(), report.i_values.end());

  // Propriety on one observation drawn inside the first set.
  const CompactSet first = sequence(report.i_values.front());
  const double probe_theta = first.discrete ? first.lo
                             : (first.lo > 0.0 && sequence.kind == SequenceKind::log_symmetric)
                                 ? std::sqrt(first.lo * first.hi)
                                 : 0.5 * (first.lo + first.hi);
  RandomStream rng(0x5eed, stream_id(0x9a0b));
  const std::vector<double> probe = sample(model, probe_theta, rng, 1);
  report.propriety = propriety_check(model, prior, probe, settings.quadrature).status;
  if (report.propriety == ProprietyStatus::improper) {
    report.status = Permissibility::not_permissible_evidence;
    report.reason = "formal posterior is improper";
    return report;
  }

  std::vector<double> values;
  for (double i : report.i_values) {
    DiscrepancyEstimate est;
    try {
      est = expected_discrepancy(model, prior, sequence(i), settings);
    } catch (const ImproprietyError& e) {
      report.status = Permissibility::not_permissible_evidence;
      report.reason = std::string("formal posterior is improper: ") + e.what();
      return report;
    }
    report.series.push_back(est);
    values.push_back(est.value);
    if (est.verdict == DiscrepancyVerdict::diverging || est.budget_exceeded) {
      report.status = Permissibility::not_permissible_evidence;
      report.reason = "expected discrepancy diverges at i=" + std::to_string(i);
      return report;
    }
  }
  bool decreasing = true;
  for (std::size_t n = 1; n < values.size(); ++n) decreasing = decreasing && values[n] <= values[n - 1] + 1e-12;
  report.extrapolated_limit = extrapolated_limit(values);
  if (values.size() >= 2 && values.back() > values.front() + 1e-9) {
    report.status = Permissibility::not_permissible_evidence;
    report.reason = "expected discrepancy rises with i";
    return report;
  }
  if (!decreasing) {
    report.status = Permissibility::undetermined;
    report.reason = "expected discrepancy is not monotone over the probed i";
    return report;
  }
  if (report.extrapolated_limit > threshold) {
    report.status = Permissibility::not_permissible_evidence;
    report.reason = "expected discrepancy levels off above the threshold";
    return report;
  }
  if (report.propriety != ProprietyStatus::proper) {
    report.status = Permissibility::undetermined;
    report.reason = "propriety undetermined";
    return report;
  }
  report.status = Permissibility::permissible_evidence;
  report.reason = "proper posterior and expected discrepancy decreasing toward zero";
  return report;
}

}  // namespace refprior
