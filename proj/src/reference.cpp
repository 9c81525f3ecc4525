#include "refprior/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "refprior/errors.hpp"
#include "refprior/parallel.hpp"
#include "refprior/rng.hpp"

namespace refprior {
namespace {

double step_for(double theta) { return std::max(1e-4, 1e-4 * std::fabs(theta)); }

// Expectation over p(x | theta) of g(x), by quadrature or by summation for
// discrete observations.
double expect(const Model& model, double theta, const std::function<double(double)>& g,
              const QuadratureSettings& settings) {
  if (model.discrete_observations()) {
    double acc = 0.0;
    for (double x : model.support_points(theta)) acc += std::exp(model.logpdf(x, theta)) * g(x);
    return acc;
  }
  const Interval support = model.observation_support(theta);
  std::vector<double> cuts{theta};
  return integrate(
      [&](double x) {
        const double lp = model.logpdf(x, theta);
        return lp == kNegInf ? 0.0 : std::exp(lp) * g(x);
      },
      support, settings, cuts);
}

// b psi(1/b + shift) divided difference between b1 and b2, with the
// second-order expansion around the midpoint when the two are close.
double digamma_divided_difference(double b1, double b2, double shift) {
  if (std::fabs(b1 - b2) >= 1e-6) {
    return (b1 * digamma(1.0 / b1 + shift) - b2 * digamma(1.0 / b2 + shift)) / (b1 - b2);
  }
  const double b = 0.5 * (b1 + b2);
  const double d = b1 - b2;
  const double y = 1.0 / b;
  // g(b) = b psi(1/b): g' = psi(y) - y psi'(y), g''' = -3 y^4 psi''(y) - y^5 psi'''(y).
  const double g1 = digamma(y) - y * polygamma(1, y);
  const double g3 = -3.0 * std::pow(y, 4) * polygamma(2, y) - std::pow(y, 5) * polygamma(3, y);
  const double base = g1 + g3 * d * d / 24.0;
  // b psi(1/b + 1) = b psi(1/b) + b^2 adds b1 + b2 to the difference quotient.
  return shift == 0.0 ? base : base + (b1 + b2);
}

// Second coordinate of a two-dimensional golden lattice with n points.
std::uint64_t golden_generator(std::uint64_t n) {
  if (n <= 2) return 1;
  auto a = static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * (std::numbers::phi - 1.0)));
  for (std::uint64_t step = 0; step < n; ++step) {
    for (std::uint64_t c : {a + step, a - step}) {
      if (c > 0 && c < n && std::gcd(c, n) == 1) return c;
    }
  }
  return 1;
}

// Subtracts beta' c_j from every d_j, where the controls c have mean zero by
// construction and beta is the least-squares slope. Columns that are
// (numerically) linear combinations of earlier ones get a zero coefficient.
void regress_out(std::vector<double>& d, const std::vector<std::vector<double>>& controls) {
  const std::size_t p = controls.size();
  const std::size_t m = d.size();
  if (p == 0 || m <= p + 1) return;
  auto centered = [&](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(m);
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = v[j] - mean;
    return out;
  };
  std::vector<std::vector<double>> c;
  for (const auto& col : controls) c.push_back(centered(col));
  const std::vector<double> y = centered(d);
  std::vector<double> a(p * p), rhs(p);
  for (std::size_t s = 0; s < p; ++s) {
    rhs[s] = std::inner_product(c[s].begin(), c[s].end(), y.begin(), 0.0);
    for (std::size_t t = 0; t < p; ++t) {
      a[s * p + t] = std::inner_product(c[s].begin(), c[s].end(), c[t].begin(), 0.0);
    }
  }
  // Cholesky with skipped pivots.
  std::vector<double> l(p * p, 0.0);
  std::vector<bool> live(p, false);
  for (std::size_t s = 0; s < p; ++s) {
    double diag = a[s * p + s];
    for (std::size_t t = 0; t < s; ++t) diag -= l[s * p + t] * l[s * p + t];
    if (!(diag > 1e-10 * a[s * p + s]) || !(a[s * p + s] > 0.0)) continue;
    live[s] = true;
    l[s * p + s] = std::sqrt(diag);
    for (std::size_t i = s + 1; i < p; ++i) {
      double v = a[i * p + s];
      for (std::size_t t = 0; t < s; ++t) v -= l[i * p + t] * l[s * p + t];
      l[i * p + s] = v / l[s * p + s];
    }
  }
  std::vector<double> w(p, 0.0), beta(p, 0.0);
  for (std::size_t s = 0; s < p; ++s) {
    if (!live[s]) continue;
    double v = rhs[s];
    for (std::size_t t = 0; t < s; ++t) v -= l[s * p + t] * w[t];
    w[s] = v / l[s * p + s];
  }
  for (std::size_t s = p; s-- > 0;) {
    if (!live[s]) continue;
    double v = w[s];
    for (std::size_t i = s + 1; i < p; ++i) v -= l[i * p + s] * beta[i];
    beta[s] = v / l[s * p + s];
  }
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t s = 0; s < p; ++s) d[j] -= beta[s] * controls[s][j];
  }
}

}  // namespace

void MCConfig::validate(std::span<const double> grid) const {
  if (k < 1) throw DomainError("mc config: k must be >= 1");
  if (m < 2) throw DomainError("mc config: m must be >= 2");
  if (working_interval.empty()) throw DomainError("mc config: empty working interval");
  if (design == SamplingDesign::latin_hypercube && (replications < 2 || replications > m)) {
    throw DomainError("mc config: replications must lie in [2, m]");
  }
  quadrature.validate();
  for (double theta : grid) {
    if (!working_interval.contains(theta)) {
      throw DomainError("mc config: grid point " + std::to_string(theta) +
                        " not inside the working interval");
    }
  }
}

double fisher_information(const Model& model, double theta, const QuadratureSettings& settings) {
  model.check_theta(theta);
  if (model.parameter_space().discrete) {
    throw NonregularityError(model.name() + ": discrete parameter has no Fisher information");
  }
  if (model.support_motion() != SupportMotion::fixed) {
    throw NonregularityError(model.name() + ": support depends on theta");
  }
  const double h = step_for(theta);
  const ParameterSpace space = model.parameter_space();
  if (!space.contains(theta - h) || !space.contains(theta + h)) {
    throw DomainError(model.name() + ": theta too close to the parameter boundary");
  }
  bool irregular = false;
  auto second = [&](double x) {
    auto d2 = [&](double s) {
      const double lm = model.logpdf(x, theta - s);
      const double l0 = model.logpdf(x, theta);
      const double lp = model.logpdf(x, theta + s);
      if (!std::isfinite(lm) || !std::isfinite(lp)) irregular = true;
      return (lp - 2.0 * l0 + lm) / (s * s);
    };
    const double coarse = d2(h);
    const double fine = d2(0.5 * h);
    if (irregular) return 0.0;
    return -(4.0 * fine - coarse) / 3.0;
  };
  // Second differences carry rounding noise of order eps |log p| / h^2, so
  // the expectation cannot be resolved below that level.
  QuadratureSettings noisy = settings;
  noisy.rel_tol = std::max(settings.rel_tol, 1e-7);
  noisy.abs_tol_log = std::max(settings.abs_tol_log, 1e-9);
  const double info = expect(model, theta, second, noisy);
  if (irregular || !std::isfinite(info)) {
    throw NonregularityError(model.name() + ": log-density not twice differentiable in theta");
  }
  if (info < -1e-6 * std::max(1.0, std::fabs(info))) {
    throw NonregularityError(model.name() + ": formal Fisher information is negative (" +
                             std::to_string(info) + ")");
  }
  return std::max(info, 0.0);
}

double jeffreys_prior(const Model& model, double theta, const QuadratureSettings& settings) {
  return std::sqrt(fisher_information(model, theta, settings));
}

double nonregular_prior(const Model& model, double theta, const QuadratureSettings& settings) {
  const SupportMotion motion = model.support_motion();
  if (motion != SupportMotion::increasing && motion != SupportMotion::decreasing) {
    throw UnsupportedOperation(model.name() +
                               ": support does not move monotonically at one end only");
  }
  model.check_theta(theta);
  const double h = step_for(theta);
  const ParameterSpace space = model.parameter_space();
  auto lp = [&](double x, double t) {
    return space.contains(t) ? model.logpdf(x, t) : kNegInf;
  };
  bool failed = false;
  auto score = [&](double x) {
    const double l0 = lp(x, theta);
    const double plus = lp(x, theta + h), minus = lp(x, theta - h);
    if (std::isfinite(plus) && std::isfinite(minus)) return (plus - minus) / (2.0 * h);
    // One-sided second-order differences near the moving edge.
    const double plus2 = lp(x, theta + 2.0 * h);
    if (std::isfinite(plus) && std::isfinite(plus2)) return (-3.0 * l0 + 4.0 * plus - plus2) / (2.0 * h);
    const double minus2 = lp(x, theta - 2.0 * h);
    if (std::isfinite(minus) && std::isfinite(minus2)) return (3.0 * l0 - 4.0 * minus + minus2) / (2.0 * h);
    failed = true;
    return 0.0;
  };
  const double value = std::fabs(expect(model, theta, score, settings));
  if (failed || !std::isfinite(value)) {
    throw NonregularityError(model.name() + ": score not available on the support interior");
  }
  return value;
}

double uniform_pair_prior(const UniformPairSpec& spec, double theta) {
  spec.check(theta);
  const double b1 = spec.b1(theta);
  const double b2 = spec.b2(theta);
  const double prefactor =
      (spec.d_a2(theta) - spec.d_a1(theta)) / (spec.a2(theta) - spec.a1(theta));
  return prefactor * std::exp(b1 + digamma_divided_difference(b1, b2, 0.0));
}

double theta_theta2_prior(double theta) {
  if (!(theta > 1.0)) throw DomainError("theta_theta2_prior: theta must exceed 1");
  const double s = 2.0 * theta - 1.0;
  return s / (theta * (theta - 1.0)) * std::exp(digamma(2.0 * theta / s));
}

SeriesValue j2_series_oracle(double b1, double b2, double tol) {
  if (!(b1 > 0.0 && b2 > 0.0)) throw DomainError("j2_series_oracle: b1 and b2 must be positive");
  if (!(tol > 0.0)) throw DomainError("j2_series_oracle: tol must be positive");
  // Remainder after N terms is below sum_{j>N} 1/(b1 b2 j^3) < 1/(2 b1 b2 N^2).
  const auto n = static_cast<std::size_t>(std::ceil(std::sqrt(1.0 / (2.0 * b1 * b2 * tol))));
  long double acc = 0.0L;
  for (std::size_t j = n; j >= 1; --j) {
    const long double jd = static_cast<long double>(j);
    acc += 1.0L / (jd * (b1 * jd + 1.0L) * (b2 * jd + 1.0L));
  }
  const double bound = 1.0 / (2.0 * b1 * b2 * static_cast<double>(n) * static_cast<double>(n));
  return {static_cast<double>(acc), bound, n};
}

double j2_closed_form(double b1, double b2) {
  if (!(b1 > 0.0 && b2 > 0.0)) throw DomainError("j2_closed_form: b1 and b2 must be positive");
  return kEulerGamma + digamma_divided_difference(b1, b2, 1.0);
}

double fk_quadrature(const Model& model, double theta, double theta0, std::size_t k,
                     Interval working_interval, const PriorFn& pi_star,
                     const QuadratureSettings& settings) {
  const SufficientStatistic* reduction = model.sufficient_statistic();
  if (reduction == nullptr) {
    throw UnsupportedOperation(model.name() + ": fk_quadrature needs a sufficient statistic");
  }
  if (k < 1) throw DomainError("fk_quadrature: k must be >= 1");
  model.check_theta(theta);
  model.check_theta(theta0);
  const std::size_t dim = reduction->dim();
  if (dim > 2) throw UnsupportedOperation("fk_quadrature: statistics of dimension > 2");

  QuadratureSettings outer = settings;
  outer.rel_tol = std::max(settings.rel_tol, 1e-9);
  outer.abs_tol_log = std::max(settings.abs_tol_log, 1e-10);
  outer.initial_panels = 4;

  auto log_fk = [&](double th) {
    auto log_posterior = [&](std::span<const double> u) {
      const auto t = reduction->from_uniforms(u, th, k);
      const auto surface = reduction->likelihood(t, k);
      const double lc = surface->log_evidence(pi_star.log_value, working_interval, settings);
      return (*surface)(th) + pi_star(th) - lc;
    };
    if (dim == 1) {
      return integrate([&](double u) { return log_posterior(std::span<const double>(&u, 1)); },
                       {0.0, 1.0}, outer);
    }
    return integrate(
        [&](double u1) {
          return integrate(
              [&](double u2) {
                const double u[2] = {u1, u2};
                return log_posterior(u);
              },
              {0.0, 1.0}, outer);
        },
        {0.0, 1.0}, outer);
  };
  return log_fk(theta) - log_fk(theta0);
}

PriorTable mc_reference_prior(const Model& model, std::span<const double> grid, double theta0,
                              const MCConfig& config) {
  if (grid.empty()) throw DomainError("mc_reference_prior: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i - 1] < grid[i])) throw DomainError("mc_reference_prior: grid must increase strictly");
  }
  for (double theta : grid) model.check_theta(theta);
  config.validate(grid);
  const auto anchor_it = std::find(grid.begin(), grid.end(), theta0);
  if (anchor_it == grid.end()) throw DomainError("mc_reference_prior: anchor must be a grid point");
  const std::size_t anchor = static_cast<std::size_t>(anchor_it - grid.begin());

  const SufficientStatistic* reduction =
      config.use_sufficient_statistic ? model.sufficient_statistic() : nullptr;
  const std::size_t g_count = grid.size();
  const std::size_t m = config.m;
  // Raw samples can be stratified only through an inverse cdf.
  const bool raw_stratifiable = reduction == nullptr && model.has_quantile();
  const bool stratified = config.design != SamplingDesign::independent &&
                          (reduction != nullptr || raw_stratifiable);
  // The lattice covers statistics of dimension <= 2; everything else that
  // is stratified uses Latin hypercubes.
  const bool lattice = stratified && reduction != nullptr && reduction->dim() <= 2 &&
                       config.design == SamplingDesign::shifted_lattice;
  const std::size_t coords =
      reduction != nullptr ? reduction->dim() : config.k * model.observation_dim();
  // Replicate j belongs to design block j % R and occupies point j / R of it.
  const std::size_t blocks = stratified ? config.replications : m;
  auto block_of = [&](std::size_t j) { return stratified ? j % blocks : j; };
  auto block_size = [&](std::size_t b) { return stratified ? (m - b + blocks - 1) / blocks : 1; };

  // Per block and coordinate, a seeded permutation of its strata.
  std::vector<std::vector<std::uint32_t>> perms;
  std::vector<double> shifts;
  if (lattice) {
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t d = 0; d < coords; ++d) {
        shifts.push_back(RandomStream(config.seed, stream_id(0x1a77, b, d)).uniform());
      }
    }
  } else if (stratified) {
    perms.resize(blocks * coords);
    parallel_for(blocks * coords, resolve_threads(config.threads), [&](std::size_t index) {
      std::vector<std::uint32_t> p(block_size(index / coords));
      std::iota(p.begin(), p.end(), 0u);
      RandomStream prng(config.seed, stream_id(0x5eed, index / coords, index % coords));
      for (std::size_t i = p.size(); i > 1; --i) {
        const auto pick = static_cast<std::size_t>(prng.uniform() * static_cast<double>(i));
        std::swap(p[i - 1], p[std::min(pick, i - 1)]);
      }
      perms[index] = std::move(p);
    });
  }

  // Uniform for coordinate d of replicate j.
  auto design_uniform = [&](std::size_t j, std::size_t d, double u) {
    if (!stratified) return u;
    const std::size_t b = block_of(j);
    const auto n = static_cast<std::uint64_t>(block_size(b));
    const double nd = static_cast<double>(n);
    if (lattice) {
      const std::uint64_t z = d == 0 ? 1 : golden_generator(n);
      const double point = static_cast<double>(((j / blocks) * z) % n) / nd;
      // Tent transform of the shifted point keeps the rule accurate for
      // integrands that are not periodic on the unit square.
      const double shifted = std::fmod(point + shifts[b * coords + d], 1.0);
      const double v = 1.0 - std::fabs(2.0 * shifted - 1.0);
      return v > 0.0 ? v : 0.5 / nd;
    }
    return (perms[b * coords + d][j / blocks] + u) / nd;
  };

  // Control levels per grid point: the count of observations with
  // cdf(x | theta) <= q is Binomial(k, q) whatever the design, so its
  // standardized value and square minus one have mean zero. Levels sit
  // around F(theta | theta), where the likelihood of a moving-kink model
  // changes shape.
  constexpr int kLevelReach = 3;
  std::vector<std::vector<double>> levels(g_count);
  if (config.control_variates && reduction == nullptr && model.observation_dim() == 1 &&
      !model.discrete_observations()) {
    try {
      const double kd = static_cast<double>(config.k);
      const double lo = 0.5 / kd, hi = 1.0 - 0.5 / kd;
      for (std::size_t g = 0; g < g_count; ++g) {
        double centre = model.cdf(grid[g], grid[g]);
        if (!(centre > 0.0 && centre < 1.0)) centre = 0.5;
        const double h = std::sqrt(centre * (1.0 - centre) / kd);
        for (int c = -kLevelReach; c <= kLevelReach; ++c) {
          const double q = std::clamp(centre + c * h, lo, hi);
          if (levels[g].empty() || q > levels[g].back()) levels[g].push_back(q);
        }
      }
    } catch (const UnsupportedOperation&) {
      for (auto& row : levels) row.clear();
    }
  }
  const std::size_t max_levels = 2 * kLevelReach + 1;
  std::vector<double> z(levels[0].empty() ? 0 : g_count * m * max_levels, 0.0);

  std::vector<double> r(g_count * m);
  auto task = [&](std::size_t index) {
    const std::size_t g = index / m;
    const std::size_t j = index % m;
    const double theta = grid[g];
    RandomStream rng(config.seed, config.common_random_numbers ? stream_id(j) : stream_id(g, j));
    std::unique_ptr<LikelihoodSurface> surface;
    std::vector<double> xs;
    if (reduction != nullptr) {
      std::vector<double> u(coords);
      for (std::size_t d = 0; d < coords; ++d) u[d] = design_uniform(j, d, rng.uniform());
      surface = reduction->likelihood(reduction->from_uniforms(u, theta, config.k), config.k);
    } else if (stratified) {
      xs.resize(coords);
      for (std::size_t d = 0; d < coords; ++d) {
        xs[d] = model.quantile(design_uniform(j, d, rng.uniform()), theta);
      }
      surface = model.likelihood(xs);
    } else {
      xs = sample(model, theta, rng, config.k);
      surface = model.likelihood(xs);
    }
    if (!levels[g].empty()) {
      std::vector<double> probs(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) probs[i] = model.cdf(xs[i], theta);
      const double kd = static_cast<double>(xs.size());
      for (std::size_t c = 0; c < levels[g].size(); ++c) {
        const double q = levels[g][c];
        const double below = static_cast<double>(
            std::count_if(probs.begin(), probs.end(), [&](double v) { return v <= q; }));
        z[index * max_levels + c] = (below - kd * q) / std::sqrt(kd * q * (1.0 - q));
      }
    }
    const double at_theta = (*surface)(theta);
    if (!std::isfinite(at_theta)) {
      throw InvariantViolation("mc_reference_prior: simulated data has zero likelihood at theta=" +
                               std::to_string(theta));
    }
    double log_c;
    try {
      log_c = surface->log_evidence(config.pi_star.log_value, config.working_interval,
                                    config.quadrature);
    } catch (const ToleranceFailure& e) {
      throw ToleranceFailure("mc_reference_prior: normalizer failed at theta=" +
                                 std::to_string(theta) + ", replicate " + std::to_string(j) +
                                 ": " + e.what(),
                             e.best_estimate(), e.gap());
    }
    r[index] = at_theta + config.pi_star(theta) - log_c;
  };
  parallel_for(g_count * m, resolve_threads(config.threads), task);

  PriorTable table;
  table.grid.assign(grid.begin(), grid.end());
  table.anchor = theta0;
  table.log_pi.assign(g_count, 0.0);
  table.std_err.assign(g_count, 0.0);
  table.meta = {config.k, m, config.seed, model.name()};

  // Mean and standard error of the per-replicate differences d_j; with a
  // stratified design the error comes from the spread of hypercube means.
  auto summarize = [&](const std::function<double(std::size_t)>& d, double& mean, double& se) {
    std::vector<double> sums(blocks, 0.0);
    for (std::size_t j = 0; j < m; ++j) sums[block_of(j)] += d(j);
    mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean += d(j);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
      const double dev = sums[b] / static_cast<double>(block_size(b)) - mean;
      var += dev * dev;
    }
    const double nb = static_cast<double>(blocks);
    se = std::sqrt(var / (nb - 1.0) / nb);
  };
  const std::size_t a = anchor;
  for (std::size_t g = 0; g < g_count; ++g) {
    if (g == a) continue;
    double mean, se;
    // Control columns: z and z^2 - 1 per level, at theta and at the anchor.
    auto controls_for = [&](std::size_t row) {
      std::vector<std::vector<double>> cols;
      for (std::size_t c = 0; c < levels[row].size(); ++c) {
        std::vector<double> lin(m), quad(m);
        for (std::size_t j = 0; j < m; ++j) {
          lin[j] = z[(row * m + j) * max_levels + c];
          quad[j] = lin[j] * lin[j] - 1.0;
        }
        cols.push_back(std::move(lin));
        cols.push_back(std::move(quad));
      }
      return cols;
    };
    if (config.common_random_numbers) {
      std::vector<double> d(m);
      for (std::size_t j = 0; j < m; ++j) d[j] = r[g * m + j] - r[a * m + j];
      auto cols = controls_for(g);
      for (auto& col : controls_for(a)) cols.push_back(std::move(col));
      regress_out(d, cols);
      summarize([&](std::size_t j) { return d[j]; }, mean, se);
    } else {
      std::vector<double> dg(r.begin() + g * m, r.begin() + (g + 1) * m);
      std::vector<double> da(r.begin() + a * m, r.begin() + (a + 1) * m);
      regress_out(dg, controls_for(g));
      regress_out(da, controls_for(a));
      double mean_a, se_a;
      summarize([&](std::size_t j) { return dg[j]; }, mean, se);
      summarize([&](std::size_t j) { return da[j]; }, mean_a, se_a);
      mean -= mean_a;
      se = std::hypot(se, se_a);
    }
    table.log_pi[g] = mean;
    table.std_err[g] = se;
  }
  table.validate();
  return table;
}

PriorTable pushforward_prior(const PriorTable& table, const std::function<double(double)>& map,
                             const std::function<double(double)>& derivative) {
  table.validate();
  const std::size_t n = table.size();
  std::vector<double> phi(n), log_value(n);
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = derivative(table.grid[i]);
    if (!(d != 0.0) || !std::isfinite(d)) throw DomainError("pushforward_prior: derivative vanishes");
    const int s = d > 0.0 ? 1 : -1;
    if (sign != 0 && s != sign) throw DomainError("pushforward_prior: derivative changes sign");
    sign = s;
    phi[i] = map(table.grid[i]);
    log_value[i] = table.log_pi[i] - std::log(std::fabs(d));
  }
  const std::size_t a = table.anchor_index();
  PriorTable out;
  out.meta = table.meta;
  out.anchor = phi[a];
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = sign > 0 ? step : n - 1 - step;
    out.grid.push_back(phi[i]);
    out.log_pi.push_back(i == a ? 0.0 : log_value[i] - log_value[a]);
    out.std_err.push_back(table.std_err[i]);
  }
  out.validate();
  return out;
}

double triangular_root_estimator(std::span<const double> sample) {
  if (sample.empty()) throw DomainError("triangular_root_estimator: empty sample");
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const double k = static_cast<double>(xs.size());
  // h(i) = i/k - x_(i) is the value of F_k(t) - t at the i-th step; the
  // virtual h(0) is negative and h(k) = 1 - x_(k) is positive.
  auto h = [&](std::size_t i) { return static_cast<double>(i) / k - xs[i - 1]; };
  std::size_t lo = 0, hi = xs.size();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (h(mid) >= 0.0 ? hi : lo) = mid;
  }
  return xs[hi - 1];
}

PriorTable triangular_plugin_prior(std::span<const double> grid, double theta0, std::size_t k,
                                   std::size_t replicates, std::uint64_t seed, std::size_t threads) {
  if (replicates < 2) throw DomainError("triangular_plugin_prior: need at least 2 replicates");
  const auto anchor_it = std::find(grid.begin(), grid.end(), theta0);
  if (anchor_it == grid.end()) throw DomainError("triangular_plugin_prior: anchor must be a grid point");
  const auto model = triangular();
  const std::size_t g_count = grid.size();
  std::vector<double> est(g_count * replicates);
  parallel_for(g_count * replicates, resolve_threads(threads), [&](std::size_t index) {
    const std::size_t g = index / replicates;
    RandomStream rng(seed, stream_id(g, index % replicates));
    est[index] = triangular_root_estimator(sample(*model, grid[g], rng, k));
  });
  std::vector<double> log_density(g_count), rel_err(g_count);
  const double n = static_cast<double>(replicates);
  for (std::size_t g = 0; g < g_count; ++g) {
    const auto v = std::span<const double>(est).subspan(g * replicates, replicates);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / (n - 1.0));
    const double bw = 1.06 * sd * std::pow(n, -0.2);
    double s1 = 0.0, s2 = 0.0;
    for (double x : v) {
      const double z = (grid[g] - x) / bw;
      const double kv = std::exp(-0.5 * z * z);
      s1 += kv;
      s2 += kv * kv;
    }
    const double kmean = s1 / n;
    const double kvar = std::max(s2 / n - kmean * kmean, 0.0);
    log_density[g] = std::log(kmean / (bw * std::sqrt(2.0 * std::numbers::pi)));
    rel_err[g] = std::sqrt(kvar / n) / kmean;
  }
  const std::size_t a = static_cast<std::size_t>(anchor_it - grid.begin());
  PriorTable table;
  table.grid.assign(grid.begin(), grid.end());
  table.anchor = theta0;
  table.meta = {k, replicates, seed, "triangular"};
  for (std::size_t g = 0; g < g_count; ++g) {
    table.log_pi.push_back(g == a ? 0.0 : log_density[g] - log_density[a]);
    table.std_err.push_back(g == a ? 0.0 : std::hypot(rel_err[g], rel_err[a]));
  }
  table.validate();
  return table;
}

}  // namespace refprior
