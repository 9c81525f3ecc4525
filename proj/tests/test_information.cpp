#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "refprior/errors.hpp"
#include "refprior/information.hpp"
#include "refprior/models.hpp"
#include "refprior/rng.hpp"

using namespace refprior;

namespace {

// Standard normal data whatever theta is.
class ThetaFree : public Model {
 public:
  std::string name() const override { return "theta-free"; }
  ParameterSpace parameter_space() const override { return {kNegInf, kInf}; }
  Interval observation_support(double) const override { return {kNegInf, kInf}; }
  void sample(double, RandomStream& rng, std::span<double> out) const override {
    for (double& x : out) x = rng.normal();
  }

 protected:
  double log_density(std::span<const double> x, double) const override {
    return -0.5 * x[0] * x[0] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
};

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

// Independent oracles: mpmath quadrature of H(m) - H(N(0, 1/k)) with
// m(t) = Phi(sqrt(k) t) - Phi(sqrt(k) (t - 1)), and arbitrary-precision
// enumeration of the discrete model.
constexpr double kNormalK1 = 0.04002029090042643379;
constexpr double kNormalK2 = 0.07706236673017886524;
constexpr double kNormalK4 = 0.14371112621065775564;
constexpr double kFmnTenK1 = 1.81693036548947212017;
constexpr double kFmnTenK2 = 2.14070018382585449607;
constexpr double kFmnFiveK3 = 1.56061069960440661054;

}  // namespace

TEST_CASE("information of the normal location model") {
  InformationSettings s;
  const auto model = normal_location();
  CHECK(expected_information(*model, PriorFn::uniform(), {0.0, 1.0}, 1, s).value ==
        doctest::Approx(kNormalK1).epsilon(1e-9));
  CHECK(expected_information(*model, PriorFn::uniform(), {0.0, 1.0}, 2, s).value ==
        doctest::Approx(kNormalK2).epsilon(1e-9));
  CHECK(expected_information(*model, PriorFn::uniform(), {0.0, 1.0}, 4, s).value ==
        doctest::Approx(kNormalK4).epsilon(1e-9));

  const auto mc = expected_information(*model, PriorFn::uniform(), {0.0, 1.0}, 1, s,
                                       InformationEstimator::monte_carlo(1, 4000, 2));
  CHECK(mc.std_err > 0.0);
  CHECK(std::fabs(mc.value - kNormalK1) <= 3.0 * mc.std_err);
  const auto serial = expected_information(*model, PriorFn::uniform(), {0.0, 1.0}, 1, s,
                                           InformationEstimator::monte_carlo(1, 4000, 1));
  CHECK(serial.value == mc.value);
}

TEST_CASE("information of the discrete model by enumeration") {
  InformationSettings s;
  const auto model = fmn_discrete();
  const double one = expected_information(*model, PriorFn::uniform(), {1.0, 10.0, true}, 1, s).value;
  CHECK(one == doctest::Approx(kFmnTenK1).epsilon(1e-12));
  CHECK(one > 0.0);
  CHECK(one <= std::log(10.0));
  CHECK(expected_information(*model, PriorFn::uniform(), {1.0, 10.0, true}, 2, s).value ==
        doctest::Approx(kFmnTenK2).epsilon(1e-12));
  CHECK(expected_information(*model, PriorFn::uniform(), {1.0, 5.0, true}, 3, s).value ==
        doctest::Approx(kFmnFiveK3).epsilon(1e-12));

  const auto mc = expected_information(*model, PriorFn::uniform(), {1.0, 10.0, true}, 2, s,
                                       InformationEstimator::monte_carlo(4, 4000, 2));
  CHECK(std::fabs(mc.value - kFmnTenK2) <= 3.0 * mc.std_err);
}

TEST_CASE("information is zero when the data ignore theta") {
  InformationSettings s;
  const ThetaFree model;
  const auto quad = expected_information(model, PriorFn::uniform(), {-1.0, 2.0}, 1, s);
  CHECK(quad.value == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(quad.value >= 0.0);
  const auto mc = expected_information(model, PriorFn::uniform(), {-1.0, 2.0}, 3, s,
                                       InformationEstimator::monte_carlo(2, 200, 1));
  CHECK(std::fabs(mc.value) <= 1e-8);
}

TEST_CASE("information is nonnegative") {
  InformationSettings s;
  struct Setup {
    ModelPtr model;
    PriorFn prior;
    CompactSet set;
  };
  const std::vector<Setup> setups{
      {normal_location(), PriorFn::uniform(), {-2.0, 3.0}},
      {exponential_scale(), PriorFn::reciprocal(), {0.5, 2.0}},
      {exponential_scale(), PriorFn::uniform(), {0.1, 10.0}},
      {logexp_location(), PriorFn::uniform(), {-1.0, 1.0}},
      {expshift_location(), PriorFn::uniform(), {0.0, 2.0}},
      {uniform_scale(), PriorFn::reciprocal(), {1.0, 3.0}},
  };
  for (const auto& setup : setups) {
    INFO(setup.model->name());
    const auto est = expected_information(*setup.model, setup.prior, setup.set, 1, s);
    CHECK(est.value >= 0.0);
    CHECK(std::isfinite(est.value));
  }
  CHECK_THROWS_AS(expected_information(*exponential_scale(), PriorFn::uniform(), {0.5, 2.0}, 2, s),
                  UnsupportedOperation);
  CHECK_THROWS_AS(expected_information(*normal_location(), PriorFn::uniform(), {0.0, 1.0}, 0, s), DomainError);
}

TEST_CASE("additivity check returns the same computation for one replicate") {
  InformationSettings s;
  const auto r = information_additivity_check(*normal_location(), PriorFn::uniform(), {0.0, 1.0}, 1, 1, s);
  CHECK(r.combined.value == r.scaled.value);
  const auto m = information_additivity_check(*fmn_discrete(), PriorFn::uniform(), {1.0, 10.0, true}, 1, 2, s);
  CHECK(m.combined.value == m.scaled.value);
}

// Mutual information between theta and iid replicates is subadditive and
// capped by the prior entropy, so n I{q | M^k} overstates I{q | M^nk}.
TEST_CASE("information grows less than linearly in the replicates") {
  InformationSettings s;
  const auto fmn = information_additivity_check(*fmn_discrete(), PriorFn::uniform(), {1.0, 10.0, true}, 2, 1, s);
  CHECK(fmn.combined.value == doctest::Approx(kFmnTenK2).epsilon(1e-12));
  CHECK(fmn.scaled.value == doctest::Approx(2.0 * kFmnTenK1).epsilon(1e-12));
  CHECK(fmn.combined.value < fmn.scaled.value);
  CHECK(fmn.combined.value <= std::log(10.0));

  const auto normal = information_additivity_check(*normal_location(), PriorFn::uniform(), {0.0, 1.0}, 2, 1, s);
  CHECK(normal.combined.value < normal.scaled.value);
  CHECK(normal.combined.value > normal.scaled.value / 2.0);
}

TEST_CASE("sufficient statistic leaves the information unchanged") {
  InformationSettings raw;
  InformationSettings reduced;
  reduced.use_sufficient_statistic = true;
  const auto model = uniform_pair(theta_theta2_spec());
  for (std::uint64_t seed : {3u, 4u}) {
    const auto a = expected_information(*model, PriorFn::uniform(), {1.5, 2.0}, 5, raw,
                                        InformationEstimator::monte_carlo(seed, 1000, 2));
    const auto b = expected_information(*model, PriorFn::uniform(), {1.5, 2.0}, 5, reduced,
                                        InformationEstimator::monte_carlo(seed, 1000, 2));
    CHECK(std::fabs(a.value - b.value) <= 2.0 * std::hypot(a.std_err, b.std_err));
    CHECK(a.value > 0.0);
  }
  // Independent draws as well, not only shared ones.
  const auto a = expected_information(*model, PriorFn::uniform(), {1.5, 2.0}, 5, raw,
                                      InformationEstimator::monte_carlo(10, 1000, 2));
  const auto b = expected_information(*model, PriorFn::uniform(), {1.5, 2.0}, 5, reduced,
                                      InformationEstimator::monte_carlo(11, 1000, 2));
  CHECK(std::fabs(a.value - b.value) <= 2.0 * std::hypot(a.std_err, b.std_err));
}

TEST_CASE("mmi gap") {
  InformationSettings s;
  const auto scale = exponential_scale();
  const std::vector<std::size_t> ks{1, 2, 4};
  const auto same = mmi_gap(*scale, PriorFn::reciprocal(), PriorFn::reciprocal(), {0.5, 2.0}, ks, s,
                            InformationEstimator::monte_carlo(7, 400, 2));
  for (const auto& g : same) CHECK(g.gap == 0.0);

  const auto gaps = mmi_gap(*scale, PriorFn::reciprocal(), PriorFn::uniform(), {0.5, 2.0}, ks, s,
                            InformationEstimator::monte_carlo(7, 4000, 2));
  REQUIRE(gaps.size() == 3);
  for (const auto& g : gaps) {
    INFO("k=" << g.k << " gap=" << g.gap << " se=" << g.std_err);
    CHECK(g.gap >= -2.0 * g.std_err);
  }
  // At k = 1 quadrature is available and resolves the sign.
  const std::vector<std::size_t> first{1};
  const auto exact = mmi_gap(*scale, PriorFn::reciprocal(), PriorFn::uniform(), {0.5, 2.0}, first, s);
  CHECK(exact[0].gap > 0.0);

  const auto normal = normal_location();
  const PriorFn bump = PriorFn::beta_shape(3.0, 3.0, 0.0, 1.0);
  const auto location = mmi_gap(*normal, PriorFn::uniform(), bump, {0.0, 1.0}, ks, s);
  for (const auto& g : location) {
    INFO("k=" << g.k << " gap=" << g.gap);
    CHECK(g.gap > 0.0);
  }
}

TEST_CASE("standard model probes") {
  StandardModelSettings s;
  const auto normal = normal_location();
  const auto gauss = standard_model_check(*normal, {-1.0, 1.0}, 1, StandardModelMode::bounded_divergence, s);
  CHECK(gauss.satisfied);
  // (theta - theta')^2 / 2 peaks at the ends of the set.
  CHECK(gauss.value == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(std::fabs(gauss.theta - gauss.theta_prime) == doctest::Approx(2.0));
  const auto gauss3 = standard_model_check(*normal, {-1.0, 1.0}, 3, StandardModelMode::bounded_divergence, s);
  CHECK(gauss3.value == doctest::Approx(6.0).epsilon(1e-8));

  const auto pair = uniform_pair(theta_theta2_spec());
  const auto moving = standard_model_check(*pair, {1.5, 2.0}, 2, StandardModelMode::bounded_divergence, s);
  CHECK_FALSE(moving.satisfied);
  CHECK(moving.value == kInf);
  CHECK(moving.theta != moving.theta_prime);
  const auto entropy = standard_model_check(*pair, {1.5, 2.0}, 2, StandardModelMode::entropy_bound, s);
  CHECK(entropy.satisfied);
  // 2 log(theta^2 - theta) is smallest at theta = 1.5.
  CHECK(entropy.theta == 1.5);
  CHECK(entropy.value == doctest::Approx(2.0 * std::log(0.75)).epsilon(1e-8));
  CHECK(std::isfinite(entropy.marginal_term));

  StandardModelSettings single = s;
  single.grid_points = 1;
  const auto trivial = standard_model_check(*pair, {1.5, 2.0}, 2, StandardModelMode::bounded_divergence, single);
  CHECK(trivial.satisfied);
  CHECK(trivial.value == 0.0);

  CHECK_THROWS_AS(standard_model_check(*fmn_discrete(), {1.0, 4.0, true}, 1, StandardModelMode::bounded_divergence, s),
                  UnsupportedOperation);
}
