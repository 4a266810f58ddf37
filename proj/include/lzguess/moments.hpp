#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "lzguess/error.hpp"

namespace lzguess {

// E[G^zeta] for G geometric on {1,2,...} with success probability q:
//   sum_k k^zeta (1-q)^(k-1) q.
// Values are carried as log2 because they overflow doubles for q ~ 2^-1000.
struct MomentValue {
  enum class Method { trivial, closed_form, eulerian, series, polylog };

  double log2_value = 0;
  double rel_error = 0;  // certified bound on |computed - true| / true
  Method method = Method::trivial;

  double value() const { return std::exp2(log2_value); }
};

inline const char* method_name(MomentValue::Method m) {
  switch (m) {
    case MomentValue::Method::trivial: return "trivial";
    case MomentValue::Method::closed_form: return "closed_form";
    case MomentValue::Method::eulerian: return "eulerian";
    case MomentValue::Method::series: return "series";
    case MomentValue::Method::polylog: return "polylog";
  }
  return "?";
}

inline constexpr double kMomentTolerance = 1e-12;
inline constexpr double kSeriesMinQ = 1e-4;

namespace detail {

inline void check_moment_args(double log2q, double zeta) {
  if (!(zeta > 0)) throw PreconditionError("moment order zeta must be positive");
  if (std::isinf(log2q) && log2q < 0) {
    throw PreconditionError("q = 0: the guessing moment diverges");
  }
  if (std::isnan(log2q) || log2q > 0) throw PreconditionError("q must lie in (0, 1]");
}

inline bool is_integer(double z) { return z == std::floor(z); }

}  // namespace detail

// Direct summation with Neumaier compensation. Past the mode the term ratio
// ((k+1)/k)^zeta (1-q) decreases in k, so the remainder after K terms is at
// most a_{K+1} / (1 - ratio_{K+1}); summation stops once that bound falls
// below 1e-13 of the partial sum.
inline MomentValue moment_series(double q, double zeta) {
  detail::check_moment_args(std::log2(q), zeta);
  if (q < kSeriesMinQ) {
    throw BudgetError("direct series needs ~30/q terms; refused below q = 1e-4");
  }
  if (q == 1) return {0.0, 0.0, MomentValue::Method::series};
  const double r = 1.0 - q;
  const double log_r = std::log1p(-q);
  double sum = 0, comp = 0;
  double tail_bound = 0;
  const double mode = r > 0 ? zeta / -log_r : 0.0;
  for (std::uint64_t k = 1;; ++k) {
    const double kd = static_cast<double>(k);
    const double term = std::exp(zeta * std::log(kd) + (kd - 1) * log_r) * q;
    const double t = sum + term;
    comp += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
    if (kd > mode) {
      const double next = std::exp(zeta * std::log(kd + 1) + kd * log_r) * q;
      const double ratio = std::pow((kd + 2) / (kd + 1), zeta) * r;
      if (ratio < 1) {
        tail_bound = next / (1 - ratio);
        if (tail_bound < 1e-13 * (sum + comp)) break;
      }
    }
  }
  const double total = sum + comp;
  MomentValue m;
  m.log2_value = std::log2(total);
  m.rel_error = tail_bound / total + 4 * std::numeric_limits<double>::epsilon();
  m.method = MomentValue::Method::series;
  return m;
}

// Polylogarithm route for non-integer zeta:
//   E = (q / r) Li_{-zeta}(r),  r = 1 - q = e^mu,
//   Li_{-zeta}(e^mu) = Gamma(1+zeta) (-mu)^(-zeta-1) + sum_k Riemann_zeta(-zeta-k) mu^k / k!
// (convergent for |mu| < 2 pi). The log2 of q is taken as input so targets
// far below double range work; there the correction sum vanishes.
inline MomentValue moment_polylog_log2q(double log2q, double zeta) {
  detail::check_moment_args(log2q, zeta);
  if (detail::is_integer(zeta)) {
    throw PreconditionError("polylog route needs non-integer zeta; use the Eulerian form");
  }
  const double q = std::exp2(log2q);
  if (q > 0.9) throw PreconditionError("polylog route needs q <= 0.9");
  const double lgamma2 = boost::math::lgamma(1 + zeta) / std::log(2.0);
  MomentValue m;
  m.method = MomentValue::Method::polylog;
  if (log2q < -60) {
    // -mu = q (1 + q/2 + ...) and 1 - q both equal 1 to double precision.
    m.log2_value = lgamma2 - zeta * log2q;
    m.rel_error = 4 * std::numeric_limits<double>::epsilon();
    return m;
  }
  const double mu = std::log1p(-q);
  const double lead_log2 = lgamma2 - (zeta + 1) * std::log2(-mu);
  // Corrections relative to the leading term.
  const double scale = std::exp2(-lead_log2);
  double corr = 0, last = 0;
  double mu_pow = 1, fact = 1;
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      mu_pow *= mu;
      fact *= k;
    }
    const double term = boost::math::zeta(-zeta - k) * mu_pow / fact * scale;
    corr += term;
    last = std::fabs(term);
    if (k > 2 && last < 1e-18 * std::fabs(1 + corr)) break;
  }
  m.log2_value = log2q - std::log2(1 - q) + lead_log2 + std::log2(1 + corr);
  m.rel_error = 2 * last + 8 * std::numeric_limits<double>::epsilon();
  return m;
}

inline MomentValue moment_polylog(double q, double zeta) {
  return moment_polylog_log2q(std::log2(q), zeta);
}

// Integer zeta: sum_k k^zeta r^(k-1) q = A_zeta(r) / q^zeta with the Eulerian
// polynomial A_zeta(r) = sum_m A(zeta, m) r^m.
inline MomentValue moment_eulerian_log2q(double log2q, unsigned zeta) {
  detail::check_moment_args(log2q, zeta);
  if (zeta > 60) throw PreconditionError("Eulerian form limited to zeta <= 60");
  std::vector<double> row{1.0};  // A(1, 0) = 1
  for (unsigned n = 2; n <= zeta; ++n) {
    std::vector<double> next(n, 0.0);
    for (unsigned m = 0; m < n; ++m) {
      const double left = m > 0 ? (n - m) * row[m - 1] : 0.0;
      const double right = m < row.size() ? (m + 1) * row[m] : 0.0;
      next[m] = left + right;
    }
    row = std::move(next);
  }
  const double r = -std::expm1(log2q * std::log(2.0));  // 1 - q
  double poly = 0;
  for (auto it = row.rbegin(); it != row.rend(); ++it) poly = poly * r + *it;
  MomentValue m;
  m.log2_value = std::log2(poly) - zeta * log2q;
  m.rel_error = 4 * zeta * std::numeric_limits<double>::epsilon();
  m.method = MomentValue::Method::eulerian;
  return m;
}

// E[G^zeta], dispatching to the most accurate route:
//   q = 1 -> 1;  zeta in {1,2} -> 1/q, (2-q)/q^2;  other integers -> Eulerian;
//   otherwise the certified series for q >= 1e-4 and the polylog expansion below.
inline MomentValue moment_exact_log2q(double log2q, double zeta) {
  detail::check_moment_args(log2q, zeta);
  MomentValue m;
  if (log2q == 0) return m;
  const double q = std::exp2(log2q);
  if (zeta == 1) {
    m.log2_value = -log2q;
  } else if (zeta == 2) {
    m.log2_value = std::log2(2 - q) - 2 * log2q;
  } else if (detail::is_integer(zeta) && zeta <= 60) {
    return moment_eulerian_log2q(log2q, static_cast<unsigned>(zeta));
  } else if (q >= kSeriesMinQ && q < 1) {
    return moment_series(q, zeta);
  } else {
    return moment_polylog_log2q(log2q, zeta);
  }
  m.method = MomentValue::Method::closed_form;
  m.rel_error = 4 * std::numeric_limits<double>::epsilon();
  return m;
}

inline MomentValue moment_exact(double q, double zeta) {
  if (!(q > 0)) throw PreconditionError("q = 0: the guessing moment diverges");
  return moment_exact_log2q(std::log2(q), zeta);
}

// (2^-zeta / e^2) q^-zeta, a lower bound on E[G^zeta] valid for q <= 1/2.
inline double moment_lower_bound_log2(double log2q, double zeta) {
  detail::check_moment_args(log2q, zeta);
  if (log2q > -1) {
    throw PreconditionError("moment lower bound requires q <= 1/2 (at least one random bit used)");
  }
  return -zeta - 2 * std::log2(std::exp(1.0)) - zeta * log2q;
}

inline double moment_lower_bound(double q, double zeta) {
  if (!(q > 0)) throw PreconditionError("q must be positive");
  return std::exp2(moment_lower_bound_log2(std::log2(q), zeta));
}

}  // namespace lzguess
