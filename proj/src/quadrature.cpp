#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>
#include <string>
#include <vector>

#include "refprior/errors.hpp"
#include "refprior/numerics.hpp"

namespace refprior {

void QuadratureSettings::validate() const {
  if (nodes < 3) throw DomainError("quadrature: nodes must be >= 3");
  if (!(rel_tol > 0.0) || !(abs_tol_log > 0.0)) {
    throw DomainError("quadrature: tolerances must be positive");
  }
  if (max_refinements < 0) throw DomainError("quadrature: max_refinements must be >= 0");
  if (initial_panels < 1) throw DomainError("quadrature: initial_panels must be >= 1");
}

const GaussLegendreRule& gauss_legendre(int order) {
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  GaussLegendreRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  // Newton iteration on P_n from the Chebyshev-like initial guess.
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int n = 2; n <= order; ++n) {
        const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
        p0 = p1;
        p1 = p2;
      }
      if (order == 1) p0 = 1.0;
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::fabs(step) < 1e-16) break;
    }
    double p0 = 1.0;
    double p1 = x;
    for (int n = 2; n <= order; ++n) {
      const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
      p0 = p1;
      p1 = p2;
    }
    dp = order * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

namespace {

// Maps a finite u-range onto one segment of the integration interval.
struct SegmentMap {
  enum class Kind { affine, geometric, upper_tail, lower_tail, full_line };
  Kind kind = Kind::affine;
  double anchor = 0.0;
  bool log_tail = false;

  // Returns t(u) and writes log|dt/du|.
  double apply(double u, double& log_jac) const {
    switch (kind) {
      case Kind::affine:
        log_jac = 0.0;
        return u;
      case Kind::geometric: {
        // t = sign * e^u; anchor carries the sign.
        const double t = std::exp(u);
        log_jac = u;
        return anchor * t;
      }
      case Kind::upper_tail:
      case Kind::lower_tail: {
        const double v = u / (1.0 - u);
        double s;
        if (log_tail) {
          s = std::expm1(v);
          log_jac = v - 2.0 * std::log1p(-u);
        } else {
          s = v;
          log_jac = -2.0 * std::log1p(-u);
        }
        return kind == Kind::upper_tail ? anchor + s : anchor - s;
      }
      case Kind::full_line: {
        const double d = 1.0 - u * u;
        log_jac = std::log1p(u * u) - 2.0 * std::log(d);
        return u / d;
      }
    }
    return u;
  }
};

struct Segment {
  SegmentMap map;
  double u_lo;
  double u_hi;
};

constexpr double kGeometricSpan = 1e3;

std::vector<Segment> build_segments(Interval interval, const QuadratureSettings& s,
                                    std::span<const double> breakpoints) {
  std::vector<double> cuts;
  for (double b : breakpoints) {
    if (std::isfinite(b) && interval.contains(b)) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const bool log_tail = s.unbounded_map == UnboundedMap::log_rational;
  if (interval.lo == kNegInf && interval.hi == kInf && cuts.empty()) {
    if (!log_tail) {
      return {Segment{SegmentMap{SegmentMap::Kind::full_line, 0.0, false}, -1.0, 1.0}};
    }
    cuts.push_back(0.0);
  }

  std::vector<double> points;
  points.push_back(interval.lo);
  points.insert(points.end(), cuts.begin(), cuts.end());
  points.push_back(interval.hi);

  std::vector<Segment> segments;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double a = points[i];
    const double b = points[i + 1];
    if (a == kNegInf) {
      segments.push_back({SegmentMap{SegmentMap::Kind::lower_tail, b, log_tail}, 0.0, 1.0});
    } else if (b == kInf) {
      segments.push_back({SegmentMap{SegmentMap::Kind::upper_tail, a, log_tail}, 0.0, 1.0});
    } else if (a > 0.0 && b > kGeometricSpan * a) {
      // Many decades on one side of zero: panels even in log t, otherwise
      // mass near the short end can slip between the nodes of a wide panel.
      segments.push_back({SegmentMap{SegmentMap::Kind::geometric, 1.0, false}, std::log(a), std::log(b)});
    } else if (b < 0.0 && a < kGeometricSpan * b) {
      segments.push_back({SegmentMap{SegmentMap::Kind::geometric, -1.0, false}, std::log(-b), std::log(-a)});
    } else {
      segments.push_back({SegmentMap{}, a, b});
    }
  }
  return segments;
}

// Log-space panel: value is log of the panel integral.
struct LogPanel {
  const Segment* seg;
  double a, b;
  double whole;  // single-rule estimate
  double left, right;
  double estimate() const { return log_add_exp(left, right); }
  double log_error() const {
    const double est = estimate();
    if (whole == kNegInf && est == kNegInf) return kNegInf;
    return whole > est ? log_sub_exp(whole, est) : log_sub_exp(est, whole);
  }
};

class LogEngine {
 public:
  LogEngine(const LogFunction& f, const QuadratureSettings& s)
      : f_(f), rule_(gauss_legendre(s.nodes)), buffer_(s.nodes) {}

  double rule(const Segment& seg, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const double log_half = std::log(half);
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
      const double u = mid + half * rule_.nodes[i];
      double log_jac = 0.0;
      const double t = seg.map.apply(u, log_jac);
      double v = std::isfinite(t) ? f_(t) : kNegInf;
      if (std::isnan(v)) throw InvariantViolation("log_integrate: integrand returned NaN");
      if (v == kInf) throw InvariantViolation("log_integrate: integrand returned +inf");
      buffer_[i] = v == kNegInf ? kNegInf : v + log_jac + std::log(rule_.weights[i]);
    }
    return log_sum_exp(buffer_) + log_half;
  }

  LogPanel make(const Segment& seg, double a, double b, double whole) {
    const double m = 0.5 * (a + b);
    return {&seg, a, b, whole, rule(seg, a, m), rule(seg, m, b)};
  }

 private:
  const LogFunction& f_;
  const GaussLegendreRule& rule_;
  std::vector<double> buffer_;
};

struct PanelOrder {
  bool operator()(const LogPanel& x, const LogPanel& y) const {
    return x.log_error() < y.log_error();
  }
};

}  // namespace

double log_integrate(const LogFunction& log_f, Interval interval,
                     const QuadratureSettings& settings, std::span<const double> breakpoints) {
  settings.validate();
  if (std::isnan(interval.lo) || std::isnan(interval.hi) || interval.empty()) {
    throw DomainError("log_integrate: empty interval");
  }
  const auto segments = build_segments(interval, settings, breakpoints);
  LogEngine engine(log_f, settings);

  std::vector<LogPanel> panels;
  for (const auto& seg : segments) {
    const int n = settings.initial_panels;
    for (int i = 0; i < n; ++i) {
      const double a = seg.u_lo + (seg.u_hi - seg.u_lo) * i / n;
      const double b = i + 1 == n ? seg.u_hi : seg.u_lo + (seg.u_hi - seg.u_lo) * (i + 1) / n;
      panels.push_back(engine.make(seg, a, b, engine.rule(seg, a, b)));
    }
  }

  const double log_tol = std::log(std::max(settings.rel_tol, settings.abs_tol_log));
  std::vector<double> est(panels.size());
  std::vector<double> err(panels.size());
  auto totals = [&](double& total, double& gap) {
    est.resize(panels.size());
    err.resize(panels.size());
    for (std::size_t i = 0; i < panels.size(); ++i) {
      est[i] = panels[i].estimate();
      err[i] = panels[i].log_error();
    }
    total = log_sum_exp(est);
    gap = log_sum_exp(err);
  };

  double total = kNegInf;
  double gap = kNegInf;
  totals(total, gap);
  for (int refinement = 0;; ++refinement) {
    if (total == kNegInf) return kNegInf;
    if (gap == kNegInf || gap - total <= log_tol) return total;
    if (refinement >= settings.max_refinements) {
      throw ToleranceFailure("log_integrate: no convergence after " +
                                 std::to_string(settings.max_refinements) + " refinements",
                             total, gap - total);
    }
    // Split the worst panel; each half reuses its already computed estimate.
    auto worst = std::max_element(panels.begin(), panels.end(), PanelOrder{});
    const LogPanel p = *worst;
    const double m = 0.5 * (p.a + p.b);
    if (!(p.a < m && m < p.b)) {
      throw ToleranceFailure("log_integrate: panel width underflow", total, gap - total);
    }
    *worst = engine.make(*p.seg, p.a, m, p.left);
    panels.push_back(engine.make(*p.seg, m, p.b, p.right));
    totals(total, gap);
  }
}

double integrate(const std::function<double(double)>& f, Interval interval,
                 const QuadratureSettings& settings, std::span<const double> breakpoints) {
  settings.validate();
  if (std::isnan(interval.lo) || std::isnan(interval.hi) || interval.empty()) {
    throw DomainError("integrate: empty interval");
  }
  const auto segments = build_segments(interval, settings, breakpoints);
  const auto& gl = gauss_legendre(settings.nodes);

  auto rule = [&](const Segment& seg, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (int i = 0; i < settings.nodes; ++i) {
      double log_jac = 0.0;
      const double t = seg.map.apply(mid + half * gl.nodes[i], log_jac);
      if (!std::isfinite(t)) continue;
      const double v = f(t);
      if (std::isnan(v)) throw InvariantViolation("integrate: integrand returned NaN");
      if (v != 0.0) acc += gl.weights[i] * v * std::exp(log_jac);
    }
    return acc * half;
  };

  struct Panel {
    const Segment* seg;
    double a, b, left, right, error;
  };
  auto make = [&](const Segment& seg, double a, double b, double whole) {
    const double m = 0.5 * (a + b);
    Panel p{&seg, a, b, rule(seg, a, m), rule(seg, m, b), 0.0};
    p.error = std::fabs(whole - (p.left + p.right));
    return p;
  };

  std::vector<Panel> panels;
  for (const auto& seg : segments) {
    const int n = settings.initial_panels;
    for (int i = 0; i < n; ++i) {
      const double a = seg.u_lo + (seg.u_hi - seg.u_lo) * i / n;
      const double b = i + 1 == n ? seg.u_hi : seg.u_lo + (seg.u_hi - seg.u_lo) * (i + 1) / n;
      panels.push_back(make(seg, a, b, rule(seg, a, b)));
    }
  }

  for (int refinement = 0;; ++refinement) {
    double total = 0.0;
    double gap = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      total += panels[i].left + panels[i].right;
      gap += panels[i].error;
      if (panels[i].error > panels[worst].error) worst = i;
    }
    if (!std::isfinite(total)) {
      throw ToleranceFailure("integrate: non-finite partial sum", total, kInf);
    }
    if (gap <= std::max(settings.rel_tol * std::fabs(total), settings.abs_tol_log)) return total;
    if (refinement >= settings.max_refinements) {
      throw ToleranceFailure("integrate: no convergence after " +
                                 std::to_string(settings.max_refinements) + " refinements",
                             total, gap);
    }
    const Panel p = panels[worst];
    const double m = 0.5 * (p.a + p.b);
    if (!(p.a < m && m < p.b)) throw ToleranceFailure("integrate: panel width underflow", total, gap);
    panels[worst] = make(*p.seg, p.a, m, p.left);
    panels.push_back(make(*p.seg, m, p.b, p.right));
  }
}

}  // namespace refprior
