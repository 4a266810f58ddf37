#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lzguess/error.hpp"
#include "lzguess/guessers.hpp"
#include "lzguess/lz78.hpp"
#include "lzguess/moments.hpp"
#include "lzguess/seqcore.hpp"

namespace lzguess {

inline std::vector<std::size_t> divisors(std::size_t n) {
  std::vector<std::size_t> lo, hi;
  for (std::size_t d = 1; d * d <= n; ++d) {
    if (n % d) continue;
    lo.push_back(d);
    if (d != n / d) hi.push_back(n / d);
  }
  lo.insert(lo.end(), hi.rbegin(), hi.rend());
  return lo;
}

// Ĥ_ℓ in bits: entropy of the empirical law of the n/ℓ non-overlapping blocks.
// A trailing partial block is dropped; `truncated` reports when that happened.
inline double block_entropy(std::span<const Symbol> x, std::size_t ell, bool* truncated = nullptr) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  if (ell > x.size()) throw PreconditionError("block length exceeds sequence length");
  if (truncated) *truncated = x.size() % ell != 0;
  const std::size_t m = x.size() / ell;
  std::map<std::vector<Symbol>, std::size_t> counts;
  for (std::size_t b = 0; b < m; ++b) {
    auto blk = x.subspan(b * ell, ell);
    ++counts[std::vector<Symbol>(blk.begin(), blk.end())];
  }
  double h = 0;
  for (const auto& [blk, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(m);
    h -= p * std::log2(p);
  }
  return h == 0 ? 0.0 : h;  // no -0
}

inline double block_entropy(const SymbolSeq& x, std::size_t ell, bool* truncated = nullptr) {
  return block_entropy(x.symbols(), ell, truncated);
}

// K(ℓ) = 1 + a + ... + a^ℓ, exact. Throws on uint64 overflow.
inline std::uint64_t K_of_ell(std::size_t ell, std::uint64_t a) {
  if (a < 2) throw PreconditionError("alphabet size must be >= 2");
  std::uint64_t k = 0, pw = 1;
  for (std::size_t j = 0; j <= ell; ++j) {
    if (k > std::numeric_limits<std::uint64_t>::max() - pw) throw BudgetError("K(ell) overflows 64 bits");
    k += pw;
    if (j < ell) {
      if (pw > std::numeric_limits<std::uint64_t>::max() / a) throw BudgetError("K(ell) overflows 64 bits");
      pw *= a;
    }
  }
  return k;
}

// log2 K(ℓ) without overflow.
inline double log2_K(std::size_t ell, double a) {
  const double e = static_cast<double>(ell + 1) * std::log2(a);
  // log2((a^(ℓ+1) - 1)/(a - 1))
  return e + std::log2(-std::expm1(-e * std::numbers::ln2)) - std::log2(a - 1);
}

struct EpsilonN {
  double value;
  bool clamped;  // value >= 1: the phrase bound degrades to c <= n
};

// εₙ in c(x) <= n log α / ((1 - εₙ) log n):
//   L = log_α n,  εₙ = (log_α(L + 1) + 3) / L.
inline EpsilonN epsilon_n(std::size_t n, std::size_t alpha) {
  if (n < 2) throw PreconditionError("epsilon_n needs n >= 2");
  const double la = std::log2(static_cast<double>(alpha));
  const double L = std::log2(static_cast<double>(n)) / la;
  const double eps = (std::log2(L + 1) / la + 3) / L;
  return {eps, eps >= 1};
}

// Upper bound on the number of distinct phrases of any length-n sequence.
inline double phrase_count_bound(std::size_t n, std::size_t alpha) {
  const EpsilonN e = epsilon_n(n, alpha);
  if (e.clamped) return static_cast<double>(n);
  return static_cast<double>(n) * std::log2(static_cast<double>(alpha)) /
         ((1 - e.value) * std::log2(static_cast<double>(n)));
}

// ε(n) with code_length(x) <= c log c + n ε(n).
inline double epsilon_lz(std::size_t n, std::size_t alpha) {
  if (n < 2) throw PreconditionError("epsilon_lz needs n >= 2");
  const double nd = static_cast<double>(n);
  const double a = static_cast<double>(alpha);
  return (std::numbers::log2e + phrase_count_bound(n, alpha) * std::log2(2 * a) + std::log2(2 * a * (nd + 1))) /
         nd;
}

namespace detail {

inline double log2_s3e(double s) { return 3 * std::log2(s) + std::numbers::log2e; }
inline double moment_slack(double zeta, std::size_t n) {
  return (2 * std::numbers::log2e + zeta) / static_cast<double>(n);  // log2(e^2 2^zeta) / n
}
inline void check_s(double s) {
  if (!(s >= 1)) throw PreconditionError("state count s must be >= 1");
}

}  // namespace detail

// Bracket of δₙ for one ℓ; `a` is the alphabet size K(ℓ) is built over.
inline double delta_bracket(std::size_t n, double s, std::size_t ell, double a, double phrase_bound) {
  const double l2K = log2_K(ell, a);
  const double l2_4K2 = 2 + 2 * l2K;
  const double nd = static_cast<double>(n);
  return phrase_bound / nd * l2_4K2 + std::exp2(2 * l2K) * l2_4K2 / nd + std::log2(2 * s * s * s * std::numbers::e) / static_cast<double>(ell);
}

struct DeltaN {
  double value;
  std::size_t ell;  // minimizing divisor
};

inline DeltaN delta_n(std::size_t n, double s, double zeta, std::size_t alpha) {
  detail::check_s(s);
  const double pb = phrase_count_bound(n, alpha);
  DeltaN best{std::numeric_limits<double>::infinity(), 1};
  for (std::size_t ell : divisors(n)) {
    const double v = delta_bracket(n, s, ell, static_cast<double>(alpha), pb);
    if (v < best.value) best = {v, ell};
  }
  best.value += detail::moment_slack(zeta, n);
  return best;
}

inline double clogc(std::size_t c) {
  return c <= 1 ? 0.0 : static_cast<double>(c) * std::log2(static_cast<double>(c));
}

// Entropy converse term for one ℓ (unclamped).
inline double converse_entropy_at(double h_ell, std::size_t ell, std::size_t n, double s, double zeta) {
  return zeta * (h_ell - detail::log2_s3e(s)) / static_cast<double>(ell) - detail::moment_slack(zeta, n);
}

struct ConverseValue {
  double value;     // clamped at 0
  double raw;       // before clamping
  std::size_t ell;  // maximizing (or minimizing for δ) divisor
};

inline ConverseValue converse_entropy(std::span<const Symbol> x, double s, double zeta) {
  detail::check_s(s);
  ConverseValue best{0, -std::numeric_limits<double>::infinity(), 1};
  for (std::size_t ell : divisors(x.size())) {
    const double v = converse_entropy_at(block_entropy(x, ell), ell, x.size(), s, zeta);
    if (v > best.raw) best = {0, v, ell};
  }
  best.value = std::max(0.0, best.raw);
  return best;
}

// c·log c is taken per symbol (divided by n).
inline ConverseValue converse_clogc(std::span<const Symbol> x, std::size_t alpha, double s, double zeta) {
  const DeltaN d = delta_n(x.size(), s, zeta, alpha);
  const double raw = zeta * (clogc(incremental_parse(x, alpha).c_lz()) / static_cast<double>(x.size()) - d.value);
  return {std::max(0.0, raw), raw, d.ell};
}

inline double direct_clogc(std::span<const Symbol> x, std::size_t alpha, double zeta) {
  const double n = static_cast<double>(x.size());
  return zeta * (clogc(incremental_parse(x, alpha).c_lz()) / n + epsilon_lz(x.size(), alpha));
}

// Block-restarted analogue: per-block c log c plus ε at the block length.
inline double direct_block(std::span<const Symbol> x, std::size_t alpha, std::size_t ell, double zeta) {
  if (ell < 2) throw PreconditionError("direct block bound needs ell >= 2");
  double bits = 0;
  for (std::size_t b = 0; b < x.size(); b += ell) {
    const std::size_t len = std::min(ell, x.size() - b);
    const auto blk = x.subspan(b, len);
    bits += clogc(incremental_parse(blk, alpha).c_lz());
    if (len >= 2) {
      bits += static_cast<double>(len) * epsilon_lz(len, alpha);
    } else {
      bits += std::ceil(std::log2(static_cast<double>(alpha)));
    }
  }
  return zeta * bits / static_cast<double>(x.size());
}

// Shannon-code surrogate (Ĥ_ℓ + 1)/ℓ for ρ_K(ℓ).
inline double rho_upper(std::span<const Symbol> x, std::size_t ell) { return (block_entropy(x, ell) + 1) / static_cast<double>(ell); }

// Lower surrogate for ρ_K(ℓ) from the LZ phrase-count bound, using c >= c_lz - 1.
inline double rho_lower(std::span<const Symbol> x, std::size_t alpha, std::size_t ell) {
  const double c = static_cast<double>(incremental_parse(x, alpha).c_lz()) - 1;
  const double k2 = std::exp2(2 * log2_K(ell, static_cast<double>(alpha)));
  if (!std::isfinite(k2)) return 0.0;
  const double v = (c + k2) * std::log2((c + k2) / (4 * k2)) / static_cast<double>(x.size());
  return std::max(0.0, v);
}

inline double measured_exponent(double log2_moment, std::size_t n) { return log2_moment / static_cast<double>(n); }

// Per-symbol exponent from an exact guess probability.
inline double exponent_from_q(double q_log2, double zeta, std::size_t n) {
  return measured_exponent(moment_exact_log2q(q_log2, zeta).log2_value, n);
}

struct BoundRow {
  std::size_t ell = 0;
  double h_ell = 0;
  double converse_entropy = 0;  // this ℓ's term, clamped
  double converse_clogc = 0;    // ζ[c log c / n - bracket(ℓ) - slack], clamped
  double rho_lower = 0;
  double rho_upper = 0;
};

struct BoundReport {
  std::string id;
  std::size_t n = 0;
  std::size_t alpha = 0;
  double zeta = 1;
  double s = 1;
  std::string guesser;
  std::size_t c_lz = 0;
  double q_log2 = 0;
  std::vector<BoundRow> rows;
  std::size_t best_ell = 0;  // maximizer of the entropy converse
  double converse_entropy = 0;
  double converse_clogc = 0;
  std::optional<double> direct;  // present for LZ-based guessers
  double measured = 0;
  bool eps_clamped = false;
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

inline constexpr double kOrderingTolerance = 1e-9;

inline void check_ordering(BoundReport& r) {
  auto flag = [&](bool bad, const std::string& what) {
    if (bad) r.violations.push_back(what);
  };
  flag(r.converse_entropy > r.measured + kOrderingTolerance, "converse_entropy > measured");
  flag(r.converse_clogc > r.measured + kOrderingTolerance, "converse_clogc > measured");
  if (r.direct) flag(r.measured > *r.direct + kOrderingTolerance, "measured > direct");
}

// Converse and direct bounds around the exact exponent of `guesser` on x.
inline BoundReport sandwich(const SymbolSeq& x, double zeta, double s, const Guesser& guesser,
                            const std::string& id = "x") {
  if (x.size() < 2) throw PreconditionError("sandwich needs n >= 2");
  detail::check_s(s);
  const auto sym = x.symbols();
  const std::size_t n = x.size();
  const std::size_t alpha = x.alpha();
  BoundReport r;
  r.id = id;
  r.n = n;
  r.alpha = alpha;
  r.zeta = zeta;
  r.s = s;
  r.guesser = guesser.name();
  r.c_lz = incremental_parse(sym, alpha).c_lz();
  r.eps_clamped = epsilon_n(n, alpha).clamped;
  r.q_log2 = guesser.exact_log2prob(sym);
  if (std::isinf(r.q_log2)) throw PreconditionError("target has zero probability under this guesser");
  r.measured = exponent_from_q(r.q_log2, zeta, n);

  const double pb = phrase_count_bound(n, alpha);
  const double cl = clogc(r.c_lz) / static_cast<double>(n);
  double best_entropy = -std::numeric_limits<double>::infinity();
  double best_clogc = -std::numeric_limits<double>::infinity();
  for (std::size_t ell : divisors(n)) {
    BoundRow row;
    row.ell = ell;
    row.h_ell = block_entropy(sym, ell);
    const double ce = converse_entropy_at(row.h_ell, ell, n, s, zeta);
    const double cc = zeta * (cl - delta_bracket(n, s, ell, static_cast<double>(alpha), pb) - detail::moment_slack(zeta, n));
    if (ce > best_entropy) {
      best_entropy = ce;
      r.best_ell = ell;
    }
    best_clogc = std::max(best_clogc, cc);
    row.converse_entropy = std::max(0.0, ce);
    row.converse_clogc = std::max(0.0, cc);
    row.rho_upper = rho_upper(sym, ell);
    row.rho_lower = rho_lower(sym, alpha, ell);
    r.rows.push_back(row);
  }
  r.converse_entropy = std::max(0.0, best_entropy);
  r.converse_clogc = std::max(0.0, best_clogc);
  if (guesser.kind() == Guesser::Kind::lz_full) {
    r.direct = direct_clogc(sym, alpha, zeta);
  } else if (guesser.kind() == Guesser::Kind::lz_block && guesser.ell() >= 2) {
    r.direct = direct_block(sym, alpha, guesser.ell(), zeta);
  }
  check_ordering(r);
  return r;
}

}  // namespace lzguess
