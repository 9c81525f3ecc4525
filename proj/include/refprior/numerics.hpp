#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace refprior {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Closed or open real interval; endpoints may be infinite.
struct Interval {
  double lo = kNegInf;
  double hi = kInf;

  bool empty() const noexcept { return !(lo < hi); }
  bool bounded() const noexcept { return lo > kNegInf && hi < kInf; }
  double width() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return lo < x && x < hi; }
  Interval intersect(const Interval& o) const noexcept {
    return {lo > o.lo ? lo : o.lo, hi < o.hi ? hi : o.hi};
  }
  friend bool operator==(const Interval&, const Interval&) = default;
};

//---------------------------------------------------------------------------//
// Special functions
//---------------------------------------------------------------------------//

inline constexpr double kEulerGamma = std::numbers::egamma;

// psi(z) for z > 0. Throws DomainError otherwise.
double digamma(double z);

// n-th derivative of digamma, n in [0, 3], z > 0.
double polygamma(int n, double z);

// Standard normal cdf and its inverse (Wichura AS241, ~1e-16 relative).
double normal_cdf(double x);
double normal_quantile(double p);

// log(exp(a) + exp(b)) without overflow; -inf absorbing.
double log_add_exp(double a, double b) noexcept;
// log(exp(a) - exp(b)) for a >= b.
double log_sub_exp(double a, double b) noexcept;
double log_sum_exp(std::span<const double> values) noexcept;

//---------------------------------------------------------------------------//
// Quadrature
//---------------------------------------------------------------------------//

// Change of variables applied to infinite endpoints.
enum class UnboundedMap {
  rational,      // t = lo + u/(1-u), or u/(1-u^2) on the full line
  log_rational,  // t = lo + expm1(u/(1-u)); for tails decaying like 1/(t log^2 t)
};

struct QuadratureSettings {
  int nodes = 10;                 // Gauss-Legendre points per panel
  double rel_tol = 1e-10;         // relative gap on the integral
  double abs_tol_log = 1e-12;     // accepted absolute error on log-scale results
  int max_refinements = 4000;     // panel bisections before giving up
  int initial_panels = 8;         // uniform split of each breakpoint segment
  UnboundedMap unbounded_map = UnboundedMap::rational;

  void validate() const;
};

using LogFunction = std::function<double(double)>;

// log of the integral of exp(log_f) over `interval`. Breakpoints inside the
// interval become panel boundaries so no panel straddles a kink. Summation
// is max-shifted, so log_f values spanning +-1e4 neither overflow nor vanish.
// Returns -inf when the integrand is identically zero.
double log_integrate(const LogFunction& log_f, Interval interval,
                     const QuadratureSettings& settings,
                     std::span<const double> breakpoints = {});

// Plain (signed) integral with the same panel strategy.
double integrate(const std::function<double(double)>& f, Interval interval,
                 const QuadratureSettings& settings,
                 std::span<const double> breakpoints = {});

// Gauss-Legendre nodes and weights on [-1, 1]; cached per order.
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre(int order);

//---------------------------------------------------------------------------//
// Prior tables
//---------------------------------------------------------------------------//

struct TableMeta {
  std::size_t k = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::string model;
  std::uint64_t config_hash = 0;  // FNV-1a of the run configuration, 0 if none
};

// Tabulated prior normalized so that log_pi(anchor) == 0.
struct PriorTable {
  std::vector<double> grid;     // strictly increasing
  std::vector<double> log_pi;   // finite
  std::vector<double> std_err;  // Monte Carlo standard error of log_pi, >= 0
  double anchor = 0.0;
  TableMeta meta;

  std::size_t size() const noexcept { return grid.size(); }
  std::size_t anchor_index() const;
  // Throws InvariantViolation describing the first broken invariant.
  void validate() const;
};

// Monotone (Fritsch-Carlson) cubic through the table's log values; the
// abscissa is log(theta) when the grid is positive. Exact at the knots and
// strictly positive everywhere; throws RangeError outside the grid.
class TableInterpolant {
 public:
  explicit TableInterpolant(const PriorTable& table);

  double operator()(double theta) const { return std::exp(log_value(theta)); }
  double log_value(double theta) const;
  Interval domain() const noexcept { return {grid_.front(), grid_.back()}; }

 private:
  double abscissa(double theta) const;

  std::vector<double> grid_;
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> slopes_;
  bool log_abscissa_ = false;
};

TableInterpolant interpolate_table(const PriorTable& table);

}  // namespace refprior
