#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "refprior/divergence.hpp"
#include "refprior/errors.hpp"
#include "refprior/models.hpp"
#include "refprior/rng.hpp"

using namespace refprior;

namespace {

UniformPairSpec theta_theta2_spec() {
  UniformPairSpec s;
  s.a1 = [](double t) { return t; };
  s.a2 = [](double t) { return t * t; };
  s.d_a1 = [](double) { return 1.0; };
  s.d_a2 = [](double t) { return 2.0 * t; };
  s.theta_floor = 1.0;
  s.label = "theta-theta2";
  return s;
}

double log_normal_density(double z) { return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi); }

// A model, a prior with a proper posterior, and a compact set to draw from.
struct Case {
  ModelPtr model;
  PriorFn prior;
  CompactSet set;
};

std::vector<Case> continuous_cases() {
  return {
      {normal_location(), PriorFn::uniform(), {-3.0, 3.0}},
      {logexp_location(), PriorFn::uniform(), {-2.0, 2.0}},
      {exponential_scale(), PriorFn::reciprocal(), {0.5, 4.0}},
      {uniform_scale(), PriorFn::reciprocal(), {0.5, 4.0}},
  };
}

}  // namespace

TEST_CASE("kl divergence of gaussians and degenerate cases") {
  QuadratureSettings q;
  const Interval line{kNegInf, kInf};
  auto n0 = [](double t) { return log_normal_density(t); };
  auto n1 = [](double t) { return log_normal_density(t - 1.0); };
  CHECK(std::fabs(kl_divergence(n0, n0, line, q)) <= 1e-8);
  CHECK(kl_divergence(n0, n1, line, q) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(kl_divergence(n1, n0, line, q) == doctest::Approx(0.5).epsilon(1e-9));
  // (mu1 - mu2)^2 / 2 sigma^2 with sigma = 2.
  auto w0 = [](double t) { return log_normal_density(t / 2.0) - std::log(2.0); };
  auto w3 = [](double t) { return log_normal_density((t - 3.0) / 2.0) - std::log(2.0); };
  CHECK(kl_divergence(w0, w3, line, q) == doctest::Approx(9.0 / 8.0).epsilon(1e-9));

  const double third = std::log(1.0 / 3.0);
  const std::vector<double> p{third, third, third};
  const std::vector<double> q_zero{0.0, kNegInf, kNegInf};
  CHECK(kl_divergence(p, q_zero) == kInf);
  const std::vector<double> smoothed{std::log(0.98), std::log(0.01), std::log(0.01)};
  CHECK(std::isfinite(kl_divergence(p, smoothed)));
  CHECK(kl_divergence(p, p) == 0.0);
  // Past the budget the value is abandoned.
  auto far = [](double t) { return log_normal_density(t - 20.0); };
  CHECK(kl_divergence(n0, far, line, q) == kInf);
  CHECK(kl_divergence(n0, far, line, q, {}, 1e6) == doctest::Approx(200.0).epsilon(1e-9));
}

TEST_CASE("kl divergence is nonnegative on posterior pairs") {
  QuadratureSettings q;
  const auto cases = continuous_cases();
  std::size_t checked = 0;
  for (std::size_t n = 0; n < 200; ++n) {
    const Case& c = cases[n % cases.size()];
    RandomStream rng(77, stream_id(n));
    const double span = c.set.hi - c.set.lo;
    const double t1 = c.set.lo + span * rng.uniform();
    const double t2 = c.set.lo + span * rng.uniform();
    const auto x1 = sample(*c.model, t1, rng, 1);
    const auto x2 = sample(*c.model, t2, rng, 1);
    const Posterior p = posterior_logpdf(*c.model, c.prior, x1, c.set, q);
    const Posterior r = posterior_logpdf(*c.model, c.prior, x2, c.set, q);
    const auto cuts = p.breakpoints();
    const double kl = kl_divergence([&](double t) { return p(t); }, [&](double t) { return r(t); },
                                    c.set.interval(), q, cuts, kInf);
    INFO(c.model->name() << " x1=" << x1[0] << " x2=" << x2[0]);
    CHECK(kl >= 0.0);
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("posterior of the normal location model") {
  QuadratureSettings q;
  const auto model = normal_location();
  const double x[1] = {0.0};
  const Posterior post = posterior_logpdf(*model, PriorFn::uniform(), x, std::nullopt, q);
  for (double t : {-2.5, -1.0, 0.0, 0.3, 4.0}) {
    CHECK(post(t) == doctest::Approx(log_normal_density(t)).epsilon(1e-10));
  }
  const double y[2] = {1.0, 2.0};
  const Posterior two = posterior_logpdf(*model, PriorFn::uniform(), y, CompactSet{-1.0, 4.0}, q);
  const double mass = std::exp(log_integrate([&](double t) { return two(t); }, {-1.0, 4.0}, q));
  CHECK(std::fabs(mass - 1.0) <= 1e-6);
  CHECK(two(-1.5) == kNegInf);
}

TEST_CASE("posterior of the uniform pair model") {
  QuadratureSettings q;
  const auto model = uniform_pair(theta_theta2_spec());
  RandomStream rng(5, stream_id(1));
  const std::size_t k = 6;
  const auto xs = sample(*model, 2.0, rng, k);
  const double t1 = *std::min_element(xs.begin(), xs.end());
  const double t2 = *std::max_element(xs.begin(), xs.end());
  const Posterior post = posterior_logpdf(*model, PriorFn::uniform(), xs, std::nullopt, q);
  // Density proportional to (theta^2 - theta)^-k on (sqrt(t2), t1).
  const double lo = std::sqrt(t2);
  const double a = lo + 0.3 * (t1 - lo);
  const double b = lo + 0.8 * (t1 - lo);
  const double expected = -static_cast<double>(k) * std::log((a * a - a) / (b * b - b));
  CHECK(post(a) - post(b) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(post(lo - 1e-3) == kNegInf);
  CHECK(post(t1 + 1e-3) == kNegInf);
  const double mass = std::exp(log_integrate([&](double t) { return post(t); }, {lo, t1}, q));
  CHECK(std::fabs(mass - 1.0) <= 1e-6);
}

TEST_CASE("improper formal posterior is reported as such") {
  QuadratureSettings q;
  const auto model = normal_mixture();
  const double x[1] = {0.0};
  CHECK_THROWS_AS(posterior_logpdf(*model, PriorFn::uniform(), x, std::nullopt, q), ImproprietyError);
  const double y[3] = {1.5, -0.3, 2.0};
  CHECK_THROWS_AS(posterior_logpdf(*model, PriorFn::uniform(), y, std::nullopt, q), ImproprietyError);
  // A compact region is always fine.
  CHECK_NOTHROW(posterior_logpdf(*model, PriorFn::uniform(), x, CompactSet{-5.0, 5.0}, q));
}

TEST_CASE("truncation identity") {
  QuadratureSettings q;
  const double x0[1] = {0.0};
  const auto normal = normal_location();
  const auto [lhs, rhs] = truncation_kl_identity(*normal, PriorFn::uniform(), x0, {-1.0, 1.0}, q);
  const double oracle = -std::log(normal_cdf(1.0) - normal_cdf(-1.0));
  CHECK(lhs == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(rhs == doctest::Approx(oracle).epsilon(1e-9));

  // A set covering the posterior's effective support.
  const auto [wide_l, wide_r] = truncation_kl_identity(*normal, PriorFn::uniform(), x0, {-40.0, 40.0}, q);
  CHECK(std::fabs(wide_l) <= 1e-8);
  CHECK(std::fabs(wide_r) <= 1e-8);

  // x = 4 arises from theta in {2, 8, 9}; {1, 2} holds one third of the mass.
  const double x4[1] = {4.0};
  const auto [fl, fr] = truncation_kl_identity(*fmn_discrete(), PriorFn::uniform(), x4, {1.0, 2.0, true}, q);
  CHECK(fl == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fr == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  const auto cases = continuous_cases();
  for (std::size_t n = 0; n < 50; ++n) {
    const Case& c = cases[n % cases.size()];
    RandomStream rng(2024, stream_id(n));
    const double span = c.set.hi - c.set.lo;
    const double theta = c.set.lo + span * rng.uniform();
    const double n_obs = 1 + n % 3;
    const auto xs = sample(*c.model, theta, rng, static_cast<std::size_t>(n_obs));
    // A random subset of the sampling set that keeps theta inside.
    const double lo = theta - (theta - c.set.lo) * rng.uniform();
    const double hi = theta + (c.set.hi - theta) * rng.uniform();
    const auto [l, r] = truncation_kl_identity(*c.model, c.prior, xs, {lo, hi}, q);
    INFO(c.model->name() << " n=" << n_obs << " set=[" << lo << "," << hi << "]");
    CHECK(std::fabs(l - r) <= 1e-6);
  }
}

TEST_CASE("exact discrete discrepancy") {
  // Independent enumeration in arbitrary precision.
  CHECK(fmn_discrepancy_exact(1, FmnPrior::uniform) == doctest::Approx(1.09861228866810969).epsilon(1e-12));
  CHECK(fmn_discrepancy_exact(2, FmnPrior::uniform) == doctest::Approx(0.867563228481461255).epsilon(1e-12));
  CHECK(fmn_discrepancy_exact(10, FmnPrior::uniform) == doctest::Approx(0.612957561163536128).epsilon(1e-12));
  CHECK(fmn_discrepancy_exact(100, FmnPrior::uniform) == doctest::Approx(0.555671286017002974).epsilon(1e-12));
  CHECK(fmn_discrepancy_exact(10, FmnPrior::reciprocal) == doctest::Approx(0.133869942741657637).epsilon(1e-12));
  CHECK(fmn_discrepancy_exact(100, FmnPrior::reciprocal) ==
        doctest::Approx(0.0726008122624995145).epsilon(1e-12));

  for (std::size_t i : {1, 2, 5, 10, 37, 100, 1000}) {
    const double u = fmn_discrepancy_exact(i, FmnPrior::uniform);
    CHECK(u == fmn_discrepancy_exact(i, FmnPrior::uniform));
    CHECK(u >= 0.0);
    CHECK(u <= std::log(3.0) + 1e-12);
    CHECK(fmn_discrepancy_exact(i, FmnPrior::reciprocal) >= 0.0);
  }
  const double r10 = fmn_discrepancy_exact(10, FmnPrior::reciprocal);
  const double r100 = fmn_discrepancy_exact(100, FmnPrior::reciprocal);
  const double r1000 = fmn_discrepancy_exact(1000, FmnPrior::reciprocal);
  CHECK(r1000 < fmn_discrepancy_exact(1000, FmnPrior::uniform));
  CHECK(r10 > r100);
  CHECK(r100 > r1000);
  CHECK_THROWS_AS(fmn_discrepancy_exact(0, FmnPrior::uniform), DomainError);

  // The generic enumeration through the model agrees.
  DiscrepancySettings s;
  for (double i : {1.0, 7.0, 30.0}) {
    const auto est = expected_discrepancy(*fmn_discrete(), PriorFn::uniform(), {1.0, i, true}, s);
    CHECK(est.value == doctest::Approx(fmn_discrepancy_exact(static_cast<std::size_t>(i), FmnPrior::uniform))
                           .epsilon(1e-12));
    const auto rec = expected_discrepancy(*fmn_discrete(), PriorFn::reciprocal(), {1.0, i, true}, s);
    CHECK(rec.value ==
          doctest::Approx(fmn_discrepancy_exact(static_cast<std::size_t>(i), FmnPrior::reciprocal)).epsilon(1e-12));
  }
}

TEST_CASE("location discrepancy against the closed form") {
  QuadratureSettings q;
  DiscrepancySettings s;
  const auto model = normal_location();
  double previous = kInf;
  for (double i : {1.0, 2.0}) {
    const double closed = location_discrepancy_closed_form(*model, {-i, i}, q);
    const auto est = expected_discrepancy(*model, PriorFn::uniform(), {-i, i}, s);
    CHECK(est.verdict == DiscrepancyVerdict::converging);
    CHECK(std::fabs(est.value - closed) <= 1e-6);
    CHECK(closed < previous);
    previous = closed;
  }
  // Once the set is wide the integral no longer depends on i, so the value
  // scales like 1/i.
  const double c8 = location_discrepancy_closed_form(*model, {-8.0, 8.0}, q);
  const double c16 = location_discrepancy_closed_form(*model, {-16.0, 16.0}, q);
  CHECK(c16 / c8 == doctest::Approx(0.5).epsilon(1e-3));
  CHECK_THROWS_AS(location_discrepancy_closed_form(*exponential_scale(), {1.0, 2.0}, q), UnsupportedOperation);
}

TEST_CASE("heavy tail makes the discrepancy diverge") {
  DiscrepancySettings s;
  const auto est = expected_discrepancy(*logtail_location(), PriorFn::uniform(), {0.0, 1.0}, s);
  CHECK(est.verdict == DiscrepancyVerdict::diverging);
  CHECK(est.budget_exceeded);
  CHECK(est.value == kInf);
  REQUIRE(est.cutoff_series.size() == 3);
  CHECK(est.cutoff_series[1].second > est.cutoff_series[0].second);
  CHECK(est.cutoff_series[2].second > est.cutoff_series[1].second);
}

TEST_CASE("monte carlo discrepancy matches quadrature") {
  DiscrepancySettings s;
  const auto model = normal_location();
  const CompactSet set{-1.0, 1.0};
  const double closed = location_discrepancy_closed_form(*model, set, s.quadrature);
  const auto mc = expected_discrepancy(*model, PriorFn::uniform(), set, s,
                                       DiscrepancyEstimator::monte_carlo(9, 3200, 2));
  CHECK(mc.std_err > 0.0);
  CHECK(std::fabs(mc.value - closed) <= 3.0 * mc.std_err);
  const auto again = expected_discrepancy(*model, PriorFn::uniform(), set, s,
                                          DiscrepancyEstimator::monte_carlo(9, 3200, 1));
  CHECK(again.value == mc.value);
  CHECK(again.std_err == mc.std_err);

  // A non-uniform prior exercises the inversion sampler.
  const auto scale = exponential_scale();
  const auto quad = expected_discrepancy(*scale, PriorFn::reciprocal(), {0.5, 2.0}, s);
  const auto draw = expected_discrepancy(*scale, PriorFn::reciprocal(), {0.5, 2.0}, s,
                                         DiscrepancyEstimator::monte_carlo(3, 3200, 2));
  CHECK(quad.verdict == DiscrepancyVerdict::converging);
  CHECK(std::fabs(draw.value - quad.value) <= 3.0 * draw.std_err);
}

TEST_CASE("tail condition") {
  CHECK(tail_condition_check(*exponential_scale(), 1.0).satisfied);
  CHECK(tail_condition_check(*uniform_scale(), 1.0).satisfied);
  CHECK(tail_condition_check(*normal_location(), 1.0).satisfied);
  for (double eps : {0.01, 0.5, 1.0}) {
    const TailCheck c = tail_condition_check(*logtail_location(), eps);
    CHECK_FALSE(c.satisfied);
    REQUIRE(c.witness.size() > 3);
  }
  CHECK_THROWS_AS(tail_condition_check(*normal_mixture(), 1.0), UnsupportedOperation);
  CHECK_THROWS_AS(tail_condition_check(*normal_location(), 0.0), DomainError);

  // The scale check on exp-scale is the location check on its log.
  std::vector<double> probes;
  for (int t = 1; t <= 700; ++t) {
    probes.push_back(t);
    probes.push_back(-t);
  }
  const TailCheck scale = tail_condition_check(*exponential_scale(), 1.0, probes);
  const TailCheck location = tail_condition_check(*logexp_location(), 1.0, probes);
  CHECK(scale.satisfied == location.satisfied);
  REQUIRE(scale.witness.size() == location.witness.size());
  for (std::size_t n = 0; n < scale.witness.size(); ++n) {
    CHECK(scale.witness[n].first == location.witness[n].first);
    const double a = scale.witness[n].second, b = location.witness[n].second;
    if (a == kNegInf || b == kNegInf) {
      CHECK(a == b);
    } else {
      CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
  }
}

TEST_CASE("propriety check") {
  QuadratureSettings q;
  const double x0[1] = {0.0};
  const double x1[1] = {1.0};
  const double pair[2] = {0.4, -1.2};
  CHECK(propriety_check(*normal_mixture(), PriorFn::uniform(), x0, q).status == ProprietyStatus::improper);
  CHECK(propriety_check(*normal_mixture(), PriorFn::uniform(), pair, q).status == ProprietyStatus::improper);

  const ProprietyResult scale = propriety_check(*exponential_scale(), PriorFn::reciprocal(), x1, q);
  CHECK(scale.status == ProprietyStatus::proper);
  CHECK(scale.log_normalizer == doctest::Approx(0.0).epsilon(1e-8));

  const ProprietyResult normal = propriety_check(*normal_location(), PriorFn::uniform(), x0, q);
  CHECK(normal.status == ProprietyStatus::proper);
  CHECK(std::fabs(normal.log_normalizer) <= 1e-8);

  // 1/theta on the uniform scale model: theta^-2 on (x, inf), normalizer 1/x.
  const double x2[1] = {2.0};
  const ProprietyResult uniform = propriety_check(*uniform_scale(), PriorFn::reciprocal(), x2, q);
  CHECK(uniform.status == ProprietyStatus::proper);
  CHECK(uniform.log_normalizer == doctest::Approx(-std::log(2.0)).epsilon(1e-8));
  // A constant prior there leaves 1/theta, which is not integrable.
  CHECK(propriety_check(*uniform_scale(), PriorFn::uniform(), x2, q).status == ProprietyStatus::improper);
}

TEST_CASE("discrepancy does not grow with the sample size") {
  DiscrepancySettings s;
  struct Setup {
    ModelPtr model;
    PriorFn prior;
    CompactSet set;
  };
  const std::vector<Setup> setups{
      {normal_location(), PriorFn::uniform(), {-3.0, 3.0}},
      {exponential_scale(), PriorFn::reciprocal(), {0.5, 2.0}},
  };
  for (const auto& setup : setups) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto r = discrepancy_monotonicity(*setup.model, setup.prior, setup.set, 1, 2, seed, 400, s, 2);
      INFO(setup.model->name() << " seed=" << seed << " n1=" << r.smaller.value << " n2=" << r.larger.value);
      CHECK(r.larger.value <= r.smaller.value + 2.0 * std::hypot(r.smaller.std_err, r.larger.std_err));
      CHECK(r.difference == doctest::Approx(r.larger.value - r.smaller.value).epsilon(1e-9));
    }
    const auto same = discrepancy_monotonicity(*setup.model, setup.prior, setup.set, 2, 2, 4, 200, s, 2);
    CHECK(same.smaller.value == same.larger.value);
    CHECK(same.difference == 0.0);
  }
  CHECK_THROWS_AS(discrepancy_monotonicity(*normal_location(), PriorFn::uniform(), {-1.0, 1.0}, 3, 2, 1, 100, s),
                  DomainError);
}

TEST_CASE("compact sets and sequences") {
  const auto normal = normal_location();
  CHECK_NOTHROW(CompactSequence::symmetric().validate(*normal, std::vector<double>{1, 2, 4, 8}));
  CHECK_NOTHROW(CompactSequence::log_symmetric().validate(*exponential_scale(), std::vector<double>{1, 2, 3}));
  CHECK_NOTHROW(CompactSequence::discrete().validate(*fmn_discrete(), std::vector<double>{1, 10, 100}));
  const auto stuck = CompactSequence::custom([](double i) { return CompactSet{-1.0, i}; });
  CHECK_THROWS_AS(stuck.validate(*normal, std::vector<double>{1, 2}), DomainError);
  const auto shrinking = CompactSequence::custom([](double i) { return CompactSet{-1.0 / i, 1.0 / i}; });
  CHECK_THROWS_AS(shrinking.validate(*normal, std::vector<double>{1, 2}), DomainError);
  CHECK_THROWS_AS(CompactSet({-1.0, 1.0}).validate(*exponential_scale()), DomainError);
  CHECK_THROWS_AS(CompactSet({1.0, 1.0}).validate(*normal), DomainError);
  CHECK_THROWS_AS(CompactSet({1.0, 3.0}).validate(*fmn_discrete()), DomainError);
  CHECK(CompactSet{1.0, 4.0, true}.points() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("permissibility verdicts") {
  DiscrepancySettings s;
  const std::vector<double> widths{1, 2, 4, 8};
  const auto normal = permissibility_verdict(*normal_location(), PriorFn::uniform(),
                                             CompactSequence::symmetric(), widths, s);
  CHECK(normal.status == Permissibility::permissible_evidence);
  CHECK(normal.propriety == ProprietyStatus::proper);
  REQUIRE(normal.series.size() == 4);
  CHECK(normal.extrapolated_limit <= 0.05);

  const std::vector<double> sizes{10, 100, 1000};
  const auto fmn = permissibility_verdict(*fmn_discrete(), PriorFn::uniform(), CompactSequence::discrete(), sizes, s);
  CHECK(fmn.status == Permissibility::not_permissible_evidence);
  CHECK(fmn.extrapolated_limit > 0.5);

  const auto fmn_reciprocal =
      permissibility_verdict(*fmn_discrete(), PriorFn::reciprocal(), CompactSequence::discrete(), sizes, s);
  CHECK(fmn_reciprocal.status == Permissibility::permissible_evidence);

  const auto logtail = permissibility_verdict(*logtail_location(), PriorFn::uniform(),
                                              CompactSequence::symmetric(), widths, s);
  CHECK(logtail.status == Permissibility::not_permissible_evidence);

  const auto mixture = permissibility_verdict(*normal_mixture(), PriorFn::uniform(),
                                              CompactSequence::symmetric(), widths, s);
  CHECK(mixture.status == Permissibility::not_permissible_evidence);
  CHECK(mixture.propriety == ProprietyStatus::improper);

  CHECK(to_string(Permissibility::permissible_evidence) == "permissible-evidence");
  CHECK(to_string(Permissibility::not_permissible_evidence) == "not-permissible-evidence");
}

TEST_CASE("aitken extrapolation") {
  const std::vector<double> geometric{1.0, 0.5, 0.25};
  CHECK(extrapolated_limit(geometric) == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<double> shifted{3.0, 2.5, 2.25};
  CHECK(extrapolated_limit(shifted) == doctest::Approx(2.0).epsilon(1e-15));
  const std::vector<double> alternating{1.0, 0.5, 0.75};
  CHECK(extrapolated_limit(alternating) == 0.75);
  const std::vector<double> single{0.3};
  CHECK(extrapolated_limit(single) == 0.3);
}
