#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "refprior/errors.hpp"
#include "refprior/models.hpp"
#include "refprior/reference.hpp"

using namespace refprior;

namespace {

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return g;
}

// The estimator as first described: independent streams per grid point and
// plain replicates, so stderr is the m-sample one.
MCConfig plain_config(std::size_t k, std::size_t m, std::uint64_t seed) {
  MCConfig c;
  c.k = k;
  c.m = m;
  c.seed = seed;
  c.design = SamplingDesign::independent;
  c.common_random_numbers = false;
  c.control_variates = false;
  return c;
}

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

// Per-point multiple of the combined standard error that keeps the chance of
// any false alarm over n compared points at 5%.
double family_z(std::size_t n) {
  const double per_point = 1.0 - std::pow(0.95, 1.0 / static_cast<double>(n));
  return normal_quantile(1.0 - 0.5 * per_point);
}

// Two tables on the same grid agree within the family-wise band of their
// combined standard errors (the anchor row is exact in both).
void check_tables_agree(const PriorTable& a, const PriorTable& b) {
  REQUIRE(a.size() == b.size());
  const double z = family_z(a.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO("theta=" << a.grid[i] << " a=" << a.log_pi[i] << " b=" << b.log_pi[i]);
    CHECK(std::fabs(a.log_pi[i] - b.log_pi[i]) <= z * std::hypot(a.std_err[i], b.std_err[i]));
  }
}

}  // namespace

TEST_CASE("fisher information and jeffreys prior") {
  QuadratureSettings q;
  for (double theta : {-3.0, 0.0, 2.5}) {
    CHECK(fisher_information(*normal_location(), theta, q) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(fisher_information(*exponential_scale(), 2.0, q) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(jeffreys_prior(*exponential_scale(), 2.0, q) == doctest::Approx(0.5).epsilon(1e-6));
  const double ratio =
      jeffreys_prior(*exponential_scale(), 1.0, q) / jeffreys_prior(*exponential_scale(), 4.0, q);
  CHECK(std::fabs(ratio - 4.0) < 4e-4);
  CHECK_THROWS_AS(fisher_information(*triangular(), 0.5, q), NonregularityError);
  CHECK_THROWS_AS(jeffreys_prior(*uniform_scale(), 1.0, q), NonregularityError);
  CHECK_THROWS_AS(fisher_information(*fmn_discrete(), 3.0, q), NonregularityError);
}

TEST_CASE("nonregular monotone-support prior") {
  QuadratureSettings q;
  auto model = uniform_scale();
  CHECK(nonregular_prior(*model, 2.0, q) == doctest::Approx(0.5).epsilon(1e-6));
  const double ratio = nonregular_prior(*model, 1.0, q) / nonregular_prior(*model, 4.0, q);
  CHECK(std::fabs(ratio - 4.0) < 4e-4);
  CHECK_THROWS_AS(nonregular_prior(*make_model("uniform-pair"), 2.0, q), UnsupportedOperation);
  CHECK_THROWS_AS(nonregular_prior(*normal_location(), 0.0, q), UnsupportedOperation);
}

TEST_CASE("uniform pair prior closed forms") {
  const UniformPairSpec spec = theta_theta2_spec();
  // mpmath at 60 digits: b1 = 3, b2 = 3/4.
  CHECK(uniform_pair_prior(spec, 2.0) == doctest::Approx(0.483565418192351654).epsilon(1e-12));
  CHECK(theta_theta2_prior(2.0) == doctest::Approx(1.31446708914346851).epsilon(1e-12));
  CHECK_THROWS_AS(theta_theta2_prior(1.0), DomainError);
  CHECK_THROWS_AS(uniform_pair_prior(spec, 0.5), DomainError);

  const double base_general = uniform_pair_prior(spec, 2.0);
  const double base_special = theta_theta2_prior(2.0);
  for (double theta : log_grid(1.2, 8.0, 20)) {
    const double general = uniform_pair_prior(spec, theta) / base_general;
    const double special = theta_theta2_prior(theta) / base_special;
    CHECK(std::fabs(general - special) <= 1e-10 * special);
  }

  // (theta - 1) pi(theta) drifts slowly from 1.31 towards 2 exp(-gamma).
  double previous = theta_theta2_prior(2.0);
  for (double theta = 3.0; theta <= 32.0; theta += 1.0) {
    const double scaled = (theta - 1.0) * theta_theta2_prior(theta);
    CHECK(scaled < previous);
    CHECK(scaled > 2.0 * std::exp(-kEulerGamma));
    previous = scaled;
  }
}

TEST_CASE("uniform pair prior near b1 = b2") {
  // a1 = theta, a2 = (1 + d) theta + 1 gives b1 - b2 ~ d^2, inside the
  // expansion branch; mpmath evaluates the exact bracket at 60 digits.
  const double d = 1e-4;
  UniformPairSpec spec;
  spec.a1 = [](double t) { return t; };
  spec.a2 = [d](double t) { return (1.0 + d) * t + 1.0; };
  spec.d_a1 = [](double) { return 1.0; };
  spec.d_a2 = [d](double) { return 1.0 + d; };
  spec.theta_floor = 0.0;
  CHECK(uniform_pair_prior(spec, 2.0) == doctest::Approx(0.36782427044268779263).epsilon(1e-8));
  CHECK(uniform_pair_prior(spec, 5.0) == doctest::Approx(0.36771397830762251893).epsilon(1e-8));
}

TEST_CASE("j2 series against the digamma closed form") {
  const SeriesValue one = j2_series_oracle(1.0, 1.0, 1e-12);
  const double exact = 2.0 - std::numbers::pi * std::numbers::pi / 6.0;
  CHECK(std::fabs(one.value - exact) <= 2e-12);
  CHECK(one.tail_bound <= 1e-12);
  CHECK(std::fabs(j2_closed_form(1.0, 1.0) - exact) < 1e-12);

  // b1 = b2 limits from mpmath.
  CHECK(j2_closed_form(0.5, 0.5) == doctest::Approx(0.71013186630354712706).epsilon(1e-12));
  CHECK(j2_closed_form(3.0, 3.0) == doctest::Approx(0.079982843071695177013).epsilon(1e-12));
  CHECK(j2_closed_form(0.1, 0.1) == doctest::Approx(1.977304897151396507).epsilon(1e-12));
  // Either side of the switch to the expansion, against mpmath at the same doubles.
  struct Near {
    double b, gap, value;
  };
  for (const Near& n : {Near{0.3, 5e-7, 1.0590071735251997987}, Near{0.3, 2e-6, 1.0590053141430488986},
                        Near{1.0, 5e-7, 0.35506583212335190302}, Near{1.0, 2e-6, 0.3550655290384461668},
                        Near{4.0, 5e-7, 0.050429837712006175682},
                        Near{4.0, 2e-6, 0.050429822152561802458}}) {
    INFO("b=" << n.b << " gap=" << n.gap);
    CHECK(std::fabs(j2_closed_form(n.b, n.b + n.gap) - n.value) < 1e-9);
  }

  CHECK(std::fabs(j2_series_oracle(3.0, 0.75, 1e-12).value - 0.195181884880726538) < 1e-11);
  CHECK(std::fabs(j2_closed_form(3.0, 0.75) - 0.195181884880726538) < 1e-13);

  RandomStream rng(7, stream_id(2));
  for (int i = 0; i < 50; ++i) {
    const double b1 = 0.1 + 9.9 * rng.uniform();
    const double b2 = 0.1 + 9.9 * rng.uniform();
    const SeriesValue s = j2_series_oracle(b1, b2, 1e-11);
    INFO("b1=" << b1 << " b2=" << b2);
    CHECK(std::fabs(s.value - j2_closed_form(b1, b2)) < 1e-10);
  }

  const SeriesValue coarse = j2_series_oracle(0.7, 2.0, 1e-8);
  const SeriesValue fine = j2_series_oracle(0.7, 2.0, 5e-9);
  CHECK(std::fabs(coarse.value - fine.value) < 1e-8);
  CHECK(fine.terms > coarse.terms);
  CHECK_THROWS_AS(j2_series_oracle(0.0, 1.0, 1e-8), DomainError);
}

TEST_CASE("fk quadrature") {
  QuadratureSettings q;
  SUBCASE("location models are flat") {
    for (double theta : {-2.0, 0.5, 3.0}) {
      CHECK(std::fabs(fk_quadrature(*normal_location(), theta, 0.0, 20, {kNegInf, kInf},
                                    PriorFn::uniform(), q)) < 1e-8);
      CHECK(std::fabs(fk_quadrature(*expshift_location(), theta, 0.0, 20, {kNegInf, kInf},
                                    PriorFn::uniform(), q)) < 1e-8);
    }
  }
  SUBCASE("uniform pair approaches the limit") {
    auto model = make_model("uniform-pair");
    const double oracle = theta_theta2_prior(1.6) / theta_theta2_prior(2.0);
    const double value =
        std::exp(fk_quadrature(*model, 1.6, 2.0, 500, {1.0, kInf}, PriorFn::uniform(), q));
    CHECK(std::fabs(value - oracle) < 1e-3);
    double last = kInf;
    double previous = fk_quadrature(*model, 4.0, 2.0, 50, {1.0, kInf}, PriorFn::uniform(), q);
    for (std::size_t k : {100, 200}) {
      const double current = fk_quadrature(*model, 4.0, 2.0, k, {1.0, kInf}, PriorFn::uniform(), q);
      const double step = std::fabs(current - previous);
      CHECK(step < last);
      last = step;
      previous = current;
    }
  }
  CHECK_THROWS_AS(fk_quadrature(*triangular(), 0.3, 0.5, 10, {0.0, 1.0}, PriorFn::uniform(), q),
                  UnsupportedOperation);
}

TEST_CASE("mc reference prior: validation") {
  auto model = normal_location();
  MCConfig c = plain_config(10, 20, 1);
  const std::vector<double> grid{-1.0, 0.0, 1.0};
  CHECK_THROWS_AS(mc_reference_prior(*model, grid, 0.5, c), DomainError);
  const std::vector<double> unsorted{0.0, -1.0};
  CHECK_THROWS_AS(mc_reference_prior(*model, unsorted, 0.0, c), DomainError);
  c.working_interval = {-0.5, 0.5};
  CHECK_THROWS_AS(mc_reference_prior(*model, grid, 0.0, c), DomainError);
  c = plain_config(10, 1, 1);
  CHECK_THROWS_AS(mc_reference_prior(*model, grid, 0.0, c), DomainError);
}

TEST_CASE("mc reference prior: determinism across worker counts") {
  auto model = make_model("uniform-pair");
  const std::vector<double> grid = log_grid(1.2, 8.0, 5);
  std::vector<double> with_anchor = grid;
  with_anchor.insert(std::upper_bound(with_anchor.begin(), with_anchor.end(), 2.0), 2.0);
  MCConfig c;
  c.k = 50;
  c.m = 100;
  c.working_interval = {1.0, kInf};
  for (bool suff : {true, false}) {
    c.use_sufficient_statistic = suff;
    c.threads = 1;
    const PriorTable serial = mc_reference_prior(*model, with_anchor, 2.0, c);
    c.threads = 4;
    const PriorTable parallel = mc_reference_prior(*model, with_anchor, 2.0, c);
    CHECK(serial.log_pi == parallel.log_pi);
    CHECK(serial.std_err == parallel.std_err);
    CHECK(serial.log_pi[serial.anchor_index()] == 0.0);
  }
}

TEST_CASE("mc reference prior: location flatness and scale law") {
  const std::vector<double> grid{-2.0, -1.0, 0.0, 1.0, 2.0};
  for (const ModelPtr& model : {normal_location(), expshift_location()}) {
    INFO(model->name());
    const PriorTable plain = mc_reference_prior(*model, grid, 0.0, plain_config(30, 400, 3));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(std::fabs(plain.log_pi[i]) <= family_z(grid.size() - 1) * plain.std_err[i]);
    }
    // With shared uniforms the location shift cancels exactly.
    MCConfig crn;
    crn.k = 30;
    crn.m = 100;
    const PriorTable paired = mc_reference_prior(*model, grid, 0.0, crn);
    for (double v : paired.log_pi) CHECK(std::fabs(v) < 1e-8);
  }

  auto model = exponential_scale();
  const std::vector<double> scale_grid{0.5, 1.0, 2.0, 4.0, 8.0};
  MCConfig c = plain_config(30, 400, 5);
  c.working_interval = {0.0, kInf};
  const PriorTable plain = mc_reference_prior(*model, scale_grid, 2.0, c);
  for (std::size_t i = 0; i < scale_grid.size(); ++i) {
    const double deviation = plain.log_pi[i] + std::log(scale_grid[i]) - std::log(2.0);
    CHECK(std::fabs(deviation) <= family_z(scale_grid.size() - 1) * plain.std_err[i]);
  }
  MCConfig crn;
  crn.k = 30;
  crn.m = 100;
  crn.working_interval = {0.0, kInf};
  const PriorTable paired = mc_reference_prior(*model, scale_grid, 2.0, crn);
  for (std::size_t i = 0; i < scale_grid.size(); ++i) {
    CHECK(std::fabs(paired.log_pi[i] + std::log(scale_grid[i]) - std::log(2.0)) < 1e-8);
  }
}

TEST_CASE("mc reference prior: sample size independence") {
  const std::vector<double> grid{-1.5, 0.0, 1.5};
  const PriorTable single = mc_reference_prior(*normal_location(), grid, 0.0, plain_config(20, 300, 8));
  MCConfig c = plain_config(20, 300, 9);
  c.use_sufficient_statistic = false;
  const PriorTable block = mc_reference_prior(*iid_block(normal_location(), 3), grid, 0.0, c);
  check_tables_agree(single, block);
}

TEST_CASE("mc reference prior: sufficient statistic path equals raw path") {
  auto model = make_model("uniform-pair");
  const std::vector<double> grid{1.2, 1.6, 2.0, 3.0, 5.0};
  MCConfig c = plain_config(40, 300, 11);
  c.working_interval = {1.0, kInf};
  const PriorTable reduced = mc_reference_prior(*model, grid, 2.0, c);
  c.use_sufficient_statistic = false;
  c.seed = 12;
  const PriorTable raw = mc_reference_prior(*model, grid, 2.0, c);
  check_tables_agree(reduced, raw);
}

TEST_CASE("mc reference prior: reparametrization consistency") {
  const std::vector<double> theta_grid{0.5, 1.0, 2.0, 4.0};
  MCConfig c = plain_config(30, 400, 13);
  c.working_interval = {0.0, kInf};
  const PriorTable scale = mc_reference_prior(*exponential_scale(), theta_grid, 1.0, c);
  const PriorTable pushed = pushforward_prior(
      scale, [](double t) { return std::log(t); }, [](double t) { return 1.0 / t; });
  std::vector<double> phi_grid;
  for (double t : theta_grid) phi_grid.push_back(std::log(t));
  const PriorTable location =
      mc_reference_prior(*logexp_location(), phi_grid, 0.0, plain_config(30, 400, 14));
  REQUIRE(pushed.grid.size() == location.grid.size());
  for (std::size_t i = 0; i < phi_grid.size(); ++i) CHECK(pushed.grid[i] == doctest::Approx(phi_grid[i]));
  check_tables_agree(pushed, location);
}

TEST_CASE("mc reference prior: insensitivity to the convenience prior") {
  auto model = make_model("uniform-pair");
  const std::vector<double> grid{1.2, 2.0, 4.0, 8.0};
  MCConfig c = plain_config(200, 300, 21);
  c.working_interval = {1.0, 100.0};
  const PriorTable flat = mc_reference_prior(*model, grid, 2.0, c);
  c.pi_star = PriorFn::reciprocal();
  c.seed = 22;
  const PriorTable reciprocal = mc_reference_prior(*model, grid, 2.0, c);
  check_tables_agree(flat, reciprocal);
}

TEST_CASE("pushforward prior") {
  PriorTable table;
  table.grid = {1.0, 2.0, 4.0};
  table.log_pi = {std::log(2.0), 0.0, -std::log(2.0)};
  table.std_err = {0.01, 0.0, 0.02};
  table.anchor = 2.0;
  table.meta = {10, 10, 1, "exponential-scale"};

  const PriorTable same = pushforward_prior(table, [](double t) { return t; }, [](double) { return 1.0; });
  CHECK(same.grid == table.grid);
  CHECK(same.log_pi == table.log_pi);

  const PriorTable logged = pushforward_prior(
      table, [](double t) { return std::log(t); }, [](double t) { return 1.0 / t; });
  for (double v : logged.log_pi) CHECK(std::fabs(v) < 1e-15);
  CHECK(logged.anchor == doctest::Approx(std::log(2.0)));
  CHECK(logged.std_err == table.std_err);

  PriorTable flat = table;
  flat.log_pi = {0.0, 0.0, 0.0};
  const PriorTable doubled = pushforward_prior(flat, [](double t) { return 2.0 * t; }, [](double) { return 2.0; });
  for (double v : doubled.log_pi) CHECK(v == 0.0);
  CHECK(doubled.grid == std::vector<double>{2.0, 4.0, 8.0});

  const PriorTable flipped = pushforward_prior(flat, [](double t) { return -t; }, [](double) { return -1.0; });
  CHECK(flipped.grid == std::vector<double>{-4.0, -2.0, -1.0});
  CHECK(flipped.anchor == -2.0);

  CHECK_THROWS_AS(pushforward_prior(flat, [](double t) { return t; }, [](double) { return 0.0; }),
                  DomainError);
  CHECK_THROWS_AS(pushforward_prior(flat, [](double t) { return (t - 2.0) * (t - 2.0); },
                                    [](double t) { return 2.0 * (t - 2.0) + (t == 2.0 ? 1.0 : 0.0); }),
                  DomainError);
}

TEST_CASE("triangular root estimator") {
  const std::vector<double> single{0.5};
  CHECK(triangular_root_estimator(single) == 0.5);

  auto model = triangular();
  for (double theta : {0.2, 0.3, 0.5, 0.8}) {
    const std::size_t k = 2000, reps = 500;
    std::vector<double> est(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      RandomStream rng(31, stream_id(r));
      est[r] = triangular_root_estimator(sample(*model, theta, rng, k));
    }
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    const double sd = std::sqrt(var / static_cast<double>(reps - 1));
    INFO("theta=" << theta << " mean=" << mean << " sd=" << sd);
    CHECK(std::fabs(mean - theta) <= 3.0 * sd / std::sqrt(static_cast<double>(reps)));
    if (theta == 0.3) {
      const double asymptotic = std::sqrt(theta * (1.0 - theta) / static_cast<double>(k));
      CHECK(std::fabs(sd / asymptotic - 1.0) < 0.15);
    }
  }
}
