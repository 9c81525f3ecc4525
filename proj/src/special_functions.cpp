#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "refprior/errors.hpp"
#include "refprior/numerics.hpp"

namespace refprior {
namespace {

// Bernoulli numbers B_2 .. B_16.
constexpr std::array<double, 8> kBernoulli = {
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0};

constexpr double kShiftThreshold = 8.0;
constexpr double kPolyShiftThreshold = 16.0;

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

double digamma(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw DomainError("digamma: argument must be positive and finite");
  }
  double shift = 0.0;
  while (z < kShiftThreshold) {
    shift -= 1.0 / z;
    z += 1.0;
  }
  const double inv2 = 1.0 / (z * z);
  // log z - 1/(2z) - sum B_2k / (2k z^2k), Horner in 1/z^2.
  double series = 0.0;
  for (int k = static_cast<int>(kBernoulli.size()) - 1; k >= 0; --k) {
    series = series * inv2 + kBernoulli[k] / (2.0 * (k + 1));
  }
  series *= inv2;
  return shift + std::log(z) - 0.5 / z - series;
}

double polygamma(int n, double z) {
  if (n == 0) return digamma(z);
  if (n < 0 || n > 3) throw DomainError("polygamma: order must be in [0, 3]");
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw DomainError("polygamma: argument must be positive and finite");
  }
  const double sign = (n % 2 == 1) ? 1.0 : -1.0;  // (-1)^(n+1)
  const double nfact = factorial(n);
  double shift = 0.0;
  while (z < kPolyShiftThreshold) {
    shift += sign * nfact / std::pow(z, n + 1);
    z += 1.0;
  }
  // (n-1)!/z^n + n!/(2 z^(n+1)) + sum B_2k (2k+n-1)!/((2k)! z^(2k+n))
  double acc = factorial(n - 1) / std::pow(z, n) + nfact / (2.0 * std::pow(z, n + 1));
  for (std::size_t k = 1; k <= kBernoulli.size(); ++k) {
    const int two_k = static_cast<int>(2 * k);
    acc += kBernoulli[k - 1] * factorial(two_k + n - 1) / factorial(two_k) /
           std::pow(z, two_k + n);
  }
  return shift + sign * acc;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return kNegInf;
    if (p == 1.0) return kInf;
    throw DomainError("normal_quantile: probability outside [0, 1]");
  }
  // Wichura (1988), algorithm AS 241 (PPND16).
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                  0.24178072517745061177) * r + 1.27045825245236838258) * r +
                3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                  0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                  1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

double log_add_exp(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_sub_exp(double a, double b) noexcept {
  if (b == kNegInf) return a;
  if (b >= a) return kNegInf;
  return a + std::log1p(-std::exp(b - a));
}

double log_sum_exp(std::span<const double> values) noexcept {
  double peak = kNegInf;
  for (double v : values) peak = std::max(peak, v);
  if (peak == kNegInf || !std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

}  // namespace refprior
