#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lzguess/bitsource.hpp"
#include "lzguess/bounds.hpp"
#include "lzguess/dyadic.hpp"
#include "lzguess/error.hpp"
#include "lzguess/game.hpp"
#include "lzguess/guessers.hpp"
#include "lzguess/lz78.hpp"
#include "lzguess/moments.hpp"
#include "lzguess/seqcore.hpp"

namespace lzguess {

// A target x paired with side information y of the same length.
class JointSeq {
 public:
  JointSeq(SymbolSeq x, SymbolSeq y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size()) {
      throw PreconditionError("x and y lengths differ (" + std::to_string(x_.size()) + " vs " +
                              std::to_string(y_.size()) + ")");
    }
  }
  const SymbolSeq& x() const noexcept { return x_; }
  const SymbolSeq& y() const noexcept { return y_; }
  std::size_t size() const noexcept { return x_.size(); }
  std::size_t alpha() const noexcept { return x_.alpha(); }
  std::size_t beta() const noexcept { return y_.alpha(); }

 private:
  SymbolSeq x_, y_;
};

inline std::vector<Symbol> pair_symbols(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t beta) {
  if (x.size() != y.size()) throw PreconditionError("x and y lengths differ");
  std::vector<Symbol> js(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) js[i] = static_cast<Symbol>(x[i] * beta + y[i]);
  return js;
}

struct YPhraseCount {
  std::vector<Symbol> y_phrase;
  std::size_t count;  // distinct joint phrases whose y-part is y_phrase
};

struct JointParseResult {
  ParseResult joint;               // over the product alphabet, symbol x·β + y
  std::size_t alpha = 0, beta = 0;
  std::vector<YPhraseCount> y_phrases;  // in order of first appearance
  double u = 0;

  // Distinct joint phrases; an incomplete tail repeats one of them.
  std::size_t c_xy() const noexcept { return joint.c_lz() - (joint.last_complete ? 0 : 1); }
  std::size_t c_y() const noexcept { return y_phrases.size(); }
};

inline double cond_complexity(const JointParseResult& jp) {
  double u = 0;
  for (const auto& yp : jp.y_phrases) u += clogc(yp.count);
  return u;
}

inline JointParseResult joint_parse(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha,
                                    std::size_t beta) {
  JointParseResult r{incremental_parse(pair_symbols(x, y, beta), alpha * beta), alpha, beta, {}, 0};
  std::map<std::vector<Symbol>, std::size_t> slot;
  for (std::size_t i = 0; i < r.c_xy(); ++i) {
    const Phrase& ph = r.joint.phrases[i];
    std::vector<Symbol> yp(y.begin() + static_cast<std::ptrdiff_t>(ph.offset),
                           y.begin() + static_cast<std::ptrdiff_t>(ph.offset + ph.length));
    auto [it, fresh] = slot.emplace(yp, r.y_phrases.size());
    if (fresh) {
      r.y_phrases.push_back({std::move(yp), 1});
    } else {
      ++r.y_phrases[it->second].count;
    }
  }
  r.u = cond_complexity(r);
  return r;
}

inline JointParseResult joint_parse(const JointSeq& j) {
  return joint_parse(j.x().symbols(), j.y().symbols(), j.alpha(), j.beta());
}

// ---------------------------------------------------------------------------
// Conditional LZ code.
//
// Per joint phrase the decoder, knowing y and the dictionary, lists the
// options for the next phrase: an existing node P whose y-part matches y at
// the current position, followed by an x-symbol a whose edge (a, y_next) is
// still free; or, when P reaches exactly to n, P itself as the final
// incomplete phrase. Options are ranked (deepest P first, then x-symbols by
// how often they already sit on dictionary edges with y_next). Rank 0 costs
// one bit "1"; rank r >= 1 costs "0" plus ceil(log2(|S|-1)) bits for r-1. A
// single option costs nothing.

struct CondOption {
  std::uint32_t parent;
  std::int32_t x_symbol;  // -1: P is the final (incomplete) phrase
  std::uint32_t depth;
};

class CondLZState {
 public:
  CondLZState(std::size_t alpha, std::size_t beta)
      : alpha_(alpha), beta_(beta), trie_(alpha * beta), edge_freq_(alpha * beta, 0) {
    if (alpha < 2 || beta < 1) throw PreconditionError("bad alphabet sizes");
  }

  std::size_t alpha() const noexcept { return alpha_; }
  std::size_t beta() const noexcept { return beta_; }
  const ParseTrie& trie() const noexcept { return trie_; }

  // Ranked option list at position pos of y (pos < y.size()).
  std::vector<CondOption> options(std::span<const Symbol> y, std::size_t pos) const {
    const std::size_t remaining = y.size() - pos;
    std::vector<CondOption> terminal, extend;
    std::vector<std::uint32_t> level{0}, next_level;
    for (std::uint32_t d = 0; !level.empty(); ++d) {
      if (d == remaining) {
        for (auto u : level) terminal.push_back({u, -1, d});
        break;
      }
      const Symbol yn = y[pos + d];
      next_level.clear();
      for (auto u : level) {
        for (std::size_t a = 0; a < alpha_; ++a) {
          if (auto c = trie_.child(u, joint(a, yn))) {
            next_level.push_back(*c);
          } else {
            extend.push_back({u, static_cast<std::int32_t>(a), d});
          }
        }
      }
      std::swap(level, next_level);
    }
    std::sort(terminal.begin(), terminal.end(), [](const auto& l, const auto& r) { return l.parent < r.parent; });
    std::sort(extend.begin(), extend.end(), [&](const CondOption& l, const CondOption& r) {
      if (l.depth != r.depth) return l.depth > r.depth;
      if (l.x_symbol != r.x_symbol) {
        const auto fl = edge_freq_[joint(l.x_symbol, y[pos + l.depth])];
        const auto fr = edge_freq_[joint(r.x_symbol, y[pos + r.depth])];
        if (fl != fr) return fl > fr;
        return l.x_symbol < r.x_symbol;
      }
      return l.parent < r.parent;
    });
    terminal.insert(terminal.end(), extend.begin(), extend.end());
    return terminal;
  }

  // Appends the option's x-symbols to out, inserts the new phrase, and
  // returns the number of positions consumed.
  std::size_t apply(const CondOption& o, std::span<const Symbol> y, std::size_t pos, std::vector<Symbol>& out) {
    const std::size_t start = out.size();
    out.resize(start + o.depth);
    for (std::uint32_t v = o.parent, k = o.depth; k > 0; v = trie_.node(v).parent) {
      out[start + --k] = static_cast<Symbol>(trie_.node(v).symbol / beta_);
    }
    if (o.x_symbol < 0) return o.depth;
    const Symbol js = joint(static_cast<std::size_t>(o.x_symbol), y[pos + o.depth]);
    trie_.add(o.parent, js);
    ++edge_freq_[js];
    out.push_back(static_cast<Symbol>(o.x_symbol));
    return o.depth + 1;
  }

  // The option the incremental parse of (x, y) takes at pos.
  CondOption true_option(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t pos) const {
    const std::size_t remaining = y.size() - pos;
    std::uint32_t u = 0;
    for (std::uint32_t d = 0;; ++d) {
      if (d == remaining) return {u, -1, d};
      auto c = trie_.child(u, joint(x[pos + d], y[pos + d]));
      if (!c) return {u, static_cast<std::int32_t>(x[pos + d]), d};
      u = *c;
    }
  }

 private:
  Symbol joint(std::size_t a, Symbol b) const { return static_cast<Symbol>(a * beta_ + b); }

  std::size_t alpha_, beta_;
  ParseTrie trie_;
  std::vector<std::uint64_t> edge_freq_;
};

namespace detail {

inline bool same_option(const CondOption& a, const CondOption& b) {
  return a.parent == b.parent && a.x_symbol == b.x_symbol && a.depth == b.depth;
}

inline std::size_t rank_of(const std::vector<CondOption>& opts, const CondOption& o) {
  for (std::size_t r = 0; r < opts.size(); ++r) {
    if (same_option(opts[r], o)) return r;
  }
  throw PreconditionError("phrase not among the conditional options");
}

inline unsigned rank_bits(std::size_t options, std::size_t rank) {
  if (options == 1) return 0;
  return rank == 0 ? 1U : 1U + ceil_log2(options - 1);
}

// log2 of the sampler's probability of choosing `rank`.
inline int rank_log2_mass(std::size_t options, std::size_t rank) {
  if (options == 1) return 0;
  if (rank == 0) return -1;
  const ModMass m(options - 1);
  return -1 + m.log2_mass(rank - 1);
}

// Visits the phrases of (x, y) in one block; visit(options, rank).
template <typename Visit>
void walk_cond_phrases(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha, std::size_t beta,
                       Visit&& visit) {
  CondLZState st(alpha, beta);
  std::vector<Symbol> scratch;
  for (std::size_t pos = 0; pos < y.size();) {
    const auto opts = st.options(y, pos);
    const CondOption o = st.true_option(x, y, pos);
    visit(opts.size(), rank_of(opts, o));
    scratch.clear();
    pos += st.apply(o, y, pos, scratch);
  }
}

inline void check_pair(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha, std::size_t beta) {
  if (x.size() != y.size()) throw PreconditionError("x and y lengths differ");
  if (x.empty()) throw PreconditionError("sequences must be nonempty");
  for (Symbol s : x) {
    if (s >= alpha) throw PreconditionError("x symbol out of range");
  }
  for (Symbol s : y) {
    if (s >= beta) throw PreconditionError("y symbol out of range");
  }
}

}  // namespace detail

inline Bits cond_code(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha, std::size_t beta) {
  detail::check_pair(x, y, alpha, beta);
  Bits out;
  detail::walk_cond_phrases(x, y, alpha, beta, [&](std::size_t k, std::size_t r) {
    if (k == 1) return;
    if (r == 0) {
      out.push_back(1);
    } else {
      out.push_back(0);
      put_bits(out, r - 1, ceil_log2(k - 1));
    }
  });
  return out;
}

inline Bits cond_code(const JointSeq& j) { return cond_code(j.x().symbols(), j.y().symbols(), j.alpha(), j.beta()); }

// L(x|y) in bits, without materializing the code.
inline std::uint64_t cond_code_length(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha,
                                      std::size_t beta) {
  detail::check_pair(x, y, alpha, beta);
  std::uint64_t bits = 0;
  detail::walk_cond_phrases(x, y, alpha, beta,
                            [&](std::size_t k, std::size_t r) { bits += detail::rank_bits(k, r); });
  return bits;
}

inline std::vector<Symbol> cond_decode(std::span<const std::uint8_t> bits, std::span<const Symbol> y,
                                       std::size_t alpha, std::size_t beta) {
  if (y.empty()) throw PreconditionError("y must be nonempty");
  CondLZState st(alpha, beta);
  BitCursor cur(bits);
  std::vector<Symbol> x;
  x.reserve(y.size());
  for (std::size_t pos = 0; pos < y.size();) {
    const auto opts = st.options(y, pos);
    std::size_t r = 0;
    if (opts.size() > 1 && cur.read(1) == 0) {
      const std::uint64_t v = cur.read(ceil_log2(opts.size() - 1));
      if (v >= opts.size() - 1) {
        throw DecodeError("option index " + std::to_string(v) + " beyond " + std::to_string(opts.size() - 1) +
                              " alternatives",
                          cur.position());
      }
      r = static_cast<std::size_t>(v) + 1;
    }
    pos += st.apply(opts[r], y, pos, x);
  }
  if (!cur.at_end()) throw DecodeError("trailing bits after the last phrase", cur.position());
  return x;
}

// Draws x given y by feeding the decoder random bits (index read mod the
// number of alternatives). emit(Symbol) -> bool may stop the draw early.
template <BitReader Source, typename Emit>
bool cond_generate(std::span<const Symbol> y, std::size_t alpha, std::size_t beta, Source& bits, Emit&& emit) {
  CondLZState st(alpha, beta);
  std::vector<Symbol> buf;
  for (std::size_t pos = 0; pos < y.size();) {
    const auto opts = st.options(y, pos);
    std::size_t r = 0;
    if (opts.size() > 1 && bits.read(1) == 0) {
      const ModMass m(opts.size() - 1);
      r = static_cast<std::size_t>(bits.read(m.width) % m.t) + 1;
    }
    buf.clear();
    pos += st.apply(opts[r], y, pos, buf);
    for (Symbol s : buf) {
      if (!emit(s)) return false;
    }
  }
  return true;
}

template <BitReader Source>
std::vector<Symbol> cond_sample(std::span<const Symbol> y, std::size_t alpha, std::size_t beta, Source& bits) {
  if (y.empty()) throw PreconditionError("y must be nonempty");
  std::vector<Symbol> x;
  x.reserve(y.size());
  cond_generate(y, alpha, beta, bits, [&](Symbol s) {
    x.push_back(s);
    return true;
  });
  return x;
}

inline DyadicProb cond_guess_prob(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha,
                                  std::size_t beta) {
  detail::check_pair(x, y, alpha, beta);
  int e = 0;
  detail::walk_cond_phrases(x, y, alpha, beta,
                            [&](std::size_t k, std::size_t r) { e += detail::rank_log2_mass(k, r); });
  return DyadicProb::pow2(static_cast<std::uint32_t>(-e));
}

inline double cond_guess_log2prob(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha,
                                  std::size_t beta) {
  detail::check_pair(x, y, alpha, beta);
  double e = 0;
  detail::walk_cond_phrases(x, y, alpha, beta,
                            [&](std::size_t k, std::size_t r) { e += detail::rank_log2_mass(k, r); });
  return e;
}

// Block-restarted variant: the joint dictionary is reset every ell positions.
inline double cond_block_guess_log2prob(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha,
                                        std::size_t beta, std::size_t ell) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  detail::check_pair(x, y, alpha, beta);
  double e = 0;
  for (std::size_t b = 0; b < x.size(); b += ell) {
    const std::size_t len = std::min(ell, x.size() - b);
    e += cond_guess_log2prob(x.subspan(b, len), y.subspan(b, len), alpha, beta);
  }
  return e;
}

inline DyadicProb cond_block_guess_prob(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha,
                                        std::size_t beta, std::size_t ell) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  detail::check_pair(x, y, alpha, beta);
  DyadicProb p = DyadicProb::one();
  for (std::size_t b = 0; b < x.size(); b += ell) {
    const std::size_t len = std::min(ell, x.size() - b);
    p *= cond_guess_prob(x.subspan(b, len), y.subspan(b, len), alpha, beta);
  }
  return p;
}

template <BitReader Source>
std::vector<Symbol> cond_block_sample(std::span<const Symbol> y, std::size_t alpha, std::size_t beta,
                                      std::size_t ell, Source& bits) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  std::vector<Symbol> x;
  for (std::size_t b = 0; b < y.size(); b += ell) {
    auto part = cond_sample(y.subspan(b, std::min(ell, y.size() - b)), alpha, beta, bits);
    x.insert(x.end(), part.begin(), part.end());
  }
  return x;
}

// One guess of x given y (ell = 0: no restarts).
template <BitReader Source>
bool cond_attempt(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha, std::size_t beta,
                  std::size_t ell, Source& bits) {
  const std::size_t step = ell == 0 ? y.size() : ell;
  for (std::size_t b = 0; b < y.size(); b += step) {
    const std::size_t len = std::min(step, y.size() - b);
    std::size_t i = b;
    if (!cond_generate(y.subspan(b, len), alpha, beta, bits, [&](Symbol s) { return s == x[i++]; })) return false;
  }
  return true;
}

// ε₁(n) = C (1 + log2 log2 n) / log2 n, with C fixed so that
// L(x|y) <= u + n ε₁(n) across the corpus pairs the tests exercise.
inline constexpr double kEpsilon1Constant = 2.0;

inline double epsilon_1(std::size_t n) {
  if (n < 2) throw PreconditionError("epsilon_1 needs n >= 2");
  const double l = std::log2(static_cast<double>(n));
  return kEpsilon1Constant * (1 + std::log2(l)) / l;
}

// Ĥ_ℓ(x|y) = H(joint ℓ-blocks) - H(y ℓ-blocks).
inline double cond_block_entropy(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t beta,
                                 std::size_t ell, bool* truncated = nullptr) {
  const auto js = pair_symbols(x, y, beta);
  const double h = block_entropy(js, ell, truncated) - block_entropy(y, ell);
  return std::max(0.0, h);
}

struct CondBoundReport {
  std::size_t n = 0;
  double zeta = 1, s = 1;
  std::size_t ell = 1;
  bool truncated = false;
  std::size_t c_xy = 0;
  double u = 0;
  std::uint64_t code_bits = 0;  // L(x|y)
  double h_cond = 0;            // Ĥ_ℓ(x|y)
  double q_log2 = 0;            // full conditional guesser
  double measured = 0;
  double converse_entropy = 0;
  double converse_u = 0;
  double direct = 0;
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

// δ for the conditional setting with ℓ fixed: K over the product alphabet.
inline double cond_delta(std::size_t n, double s, std::size_t ell, double zeta, std::size_t alpha, std::size_t beta) {
  const std::size_t ab = alpha * beta;
  return delta_bracket(n, s, ell, static_cast<double>(ab), phrase_count_bound(n, ab)) + detail::moment_slack(zeta, n);
}

inline CondBoundReport cond_bounds(std::span<const Symbol> x, std::span<const Symbol> y, std::size_t alpha,
                                   std::size_t beta, double s, std::size_t ell, double zeta) {
  detail::check_pair(x, y, alpha, beta);
  detail::check_s(s);
  if (x.size() < 2) throw PreconditionError("conditional bounds need n >= 2");
  CondBoundReport r;
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  r.n = n;
  r.zeta = zeta;
  r.s = s;
  r.ell = ell;
  const auto jp = joint_parse(x, y, alpha, beta);
  r.c_xy = jp.c_xy();
  r.u = jp.u;
  r.code_bits = cond_code_length(x, y, alpha, beta);
  r.h_cond = cond_block_entropy(x, y, beta, ell, &r.truncated);
  r.q_log2 = cond_guess_log2prob(x, y, alpha, beta);
  r.measured = exponent_from_q(r.q_log2, zeta, n);
  r.converse_entropy = std::max(0.0, converse_entropy_at(r.h_cond, ell, n, s, zeta));
  r.converse_u = std::max(0.0, zeta * (r.u / nd - cond_delta(n, s, ell, zeta, alpha, beta)));
  r.direct = zeta * (r.u / nd + epsilon_1(n));
  auto flag = [&](bool bad, const char* what) {
    if (bad) r.violations.emplace_back(what);
  };
  flag(r.converse_entropy > r.measured + kOrderingTolerance, "converse_entropy > measured");
  flag(r.converse_u > r.measured + kOrderingTolerance, "converse_u > measured");
  flag(r.measured > r.direct + kOrderingTolerance, "measured > direct");
  return r;
}

inline CondBoundReport cond_bounds(const JointSeq& j, double s, std::size_t ell, double zeta) {
  return cond_bounds(j.x().symbols(), j.y().symbols(), j.alpha(), j.beta(), s, ell, zeta);
}

// ---------------------------------------------------------------------------
// Conditional FSGM: fed ℓ-blocks of y. In state z with y-block b it reads
// Δ(z, b) bits as word w, emits the x-block f(z, b, w) and moves to g(z, b, w).
// y-blocks are indexed in base β, most significant first.

class CondFSGMSpec {
 public:
  CondFSGMSpec(std::size_t alpha, std::size_t beta, std::size_t ell, std::uint32_t initial,
               std::vector<std::vector<unsigned>> delta, std::vector<std::vector<std::vector<std::vector<Symbol>>>> output,
               std::vector<std::vector<std::vector<std::uint32_t>>> next)
      : alpha_(alpha), beta_(beta), ell_(ell), initial_(initial), delta_(std::move(delta)),
        output_(std::move(output)), next_(std::move(next)) {
    validate();
  }

  std::size_t alpha() const noexcept { return alpha_; }
  std::size_t beta() const noexcept { return beta_; }
  std::size_t ell() const noexcept { return ell_; }
  std::size_t states() const noexcept { return delta_.size(); }
  std::uint32_t initial() const noexcept { return initial_; }
  std::size_t y_blocks() const noexcept { return y_blocks_; }
  unsigned delta(std::uint32_t z, std::size_t b) const { return delta_[z][b]; }
  const std::vector<Symbol>& output(std::uint32_t z, std::size_t b, std::uint64_t w) const { return output_[z][b][w]; }
  std::uint32_t next(std::uint32_t z, std::size_t b, std::uint64_t w) const { return next_[z][b][w]; }

  std::size_t block_index(std::span<const Symbol> yb) const {
    std::size_t v = 0;
    for (Symbol s : yb) v = v * beta_ + s;
    return v;
  }

  // ℓ = 1 machine that ignores y.
  static CondFSGMSpec from_fsgm(const FSGMSpec& m, std::size_t beta) {
    const std::size_t S = m.states();
    std::vector<std::vector<unsigned>> d(S, std::vector<unsigned>(beta));
    std::vector<std::vector<std::vector<std::vector<Symbol>>>> out(S, std::vector<std::vector<std::vector<Symbol>>>(beta));
    std::vector<std::vector<std::vector<std::uint32_t>>> nx(S, std::vector<std::vector<std::uint32_t>>(beta));
    for (std::uint32_t z = 0; z < S; ++z) {
      for (std::size_t b = 0; b < beta; ++b) {
        d[z][b] = m.delta(z);
        for (std::uint64_t w = 0; w < (std::uint64_t{1} << m.delta(z)); ++w) {
          out[z][b].push_back({m.output(z, w)});
          nx[z][b].push_back(m.next(z, w));
        }
      }
    }
    return CondFSGMSpec(m.alpha(), beta, 1, m.initial(), std::move(d), std::move(out), std::move(nx));
  }

  // One state, no bits, x-block = y-block (needs alpha >= beta).
  static CondFSGMSpec copy_machine(std::size_t alpha, std::size_t beta, std::size_t ell) {
    if (alpha < beta) throw PreconditionError("copy machine needs alpha >= beta");
    std::size_t blocks = 1;
    for (std::size_t k = 0; k < ell; ++k) blocks *= beta;
    std::vector<std::vector<unsigned>> d(1, std::vector<unsigned>(blocks, 0));
    std::vector<std::vector<std::vector<std::vector<Symbol>>>> out(1, std::vector<std::vector<std::vector<Symbol>>>(blocks));
    std::vector<std::vector<std::vector<std::uint32_t>>> nx(1, std::vector<std::vector<std::uint32_t>>(blocks));
    for (std::size_t b = 0; b < blocks; ++b) {
      std::vector<Symbol> blk(ell);
      std::size_t v = b;
      for (std::size_t k = ell; k > 0; --k) {
        blk[k - 1] = static_cast<Symbol>(v % beta);
        v /= beta;
      }
      out[0][b] = {blk};
      nx[0][b] = {0};
    }
    return CondFSGMSpec(alpha, beta, ell, 0, std::move(d), std::move(out), std::move(nx));
  }

 private:
  void validate() {
    if (ell_ == 0) throw PreconditionError("block length must be >= 1");
    if (alpha_ < 2 || beta_ < 1) throw PreconditionError("bad alphabet sizes");
    y_blocks_ = 1;
    for (std::size_t k = 0; k < ell_; ++k) y_blocks_ *= beta_;
    const std::size_t S = delta_.size();
    if (S == 0 || initial_ >= S) throw PreconditionError("bad state set or initial state");
    if (output_.size() != S || next_.size() != S) throw PreconditionError("table sizes disagree with state count");
    for (std::size_t z = 0; z < S; ++z) {
      if (delta_[z].size() != y_blocks_ || output_[z].size() != y_blocks_ || next_[z].size() != y_blocks_) {
        throw PreconditionError("state " + std::to_string(z) + ": tables must cover every y-block");
      }
      for (std::size_t b = 0; b < y_blocks_; ++b) {
        if (delta_[z][b] > kMaxDelta) throw PreconditionError("delta above 16 bits");
        const std::size_t words = std::size_t{1} << delta_[z][b];
        if (output_[z][b].size() != words || next_[z][b].size() != words) {
          throw PreconditionError("state " + std::to_string(z) + ": tables must cover every word");
        }
        for (std::size_t w = 0; w < words; ++w) {
          if (output_[z][b][w].size() != ell_) throw PreconditionError("output block length must equal ell");
          for (Symbol s : output_[z][b][w]) {
            if (s >= alpha_) throw PreconditionError("output symbol out of range");
          }
          if (next_[z][b][w] >= S) throw PreconditionError("next state out of range");
        }
      }
    }
  }

  std::size_t alpha_, beta_, ell_;
  std::uint32_t initial_;
  std::size_t y_blocks_ = 1;
  std::vector<std::vector<unsigned>> delta_;
  std::vector<std::vector<std::vector<std::vector<Symbol>>>> output_;
  std::vector<std::vector<std::vector<std::uint32_t>>> next_;
};

struct CondRunTrace {
  std::vector<Symbol> output;
  std::vector<std::uint32_t> states;  // z_1 .. z_{m+1}
  std::uint64_t bits_consumed = 0;
};

template <BitReader Source>
CondRunTrace cond_fsgm_run(const CondFSGMSpec& spec, std::span<const Symbol> y, Source& bits) {
  const std::size_t ell = spec.ell();
  if (y.empty() || y.size() % ell != 0) throw PreconditionError("block length must divide n");
  CondRunTrace tr;
  std::uint32_t z = spec.initial();
  tr.states.push_back(z);
  for (std::size_t i = 0; i < y.size(); i += ell) {
    const std::size_t b = spec.block_index(y.subspan(i, ell));
    const unsigned d = spec.delta(z, b);
    const std::uint64_t w = d ? bits.read(d) : 0;
    tr.bits_consumed += d;
    const auto& blk = spec.output(z, b, w);
    tr.output.insert(tr.output.end(), blk.begin(), blk.end());
    z = spec.next(z, b, w);
    tr.states.push_back(z);
  }
  return tr;
}

// Exact P(x | y) by the forward recursion over states.
inline DyadicProb cond_sequence_prob(const CondFSGMSpec& spec, std::span<const Symbol> x, std::span<const Symbol> y) {
  const std::size_t ell = spec.ell();
  if (x.size() != y.size()) throw PreconditionError("x and y lengths differ");
  if (y.empty() || y.size() % ell != 0) throw PreconditionError("block length must divide n");
  std::vector<DyadicProb> f(spec.states(), DyadicProb::zero());
  f[spec.initial()] = DyadicProb::one();
  for (std::size_t i = 0; i < y.size(); i += ell) {
    const std::size_t b = spec.block_index(y.subspan(i, ell));
    const auto xb = x.subspan(i, ell);
    std::vector<DyadicProb> g(spec.states(), DyadicProb::zero());
    for (std::uint32_t z = 0; z < spec.states(); ++z) {
      if (f[z].is_zero()) continue;
      const unsigned d = spec.delta(z, b);
      const DyadicProb step = f[z] * DyadicProb::pow2(d);
      for (std::uint64_t w = 0; w < (std::uint64_t{1} << d); ++w) {
        const auto& out = spec.output(z, b, w);
        if (std::equal(out.begin(), out.end(), xb.begin())) g[spec.next(z, b, w)] += step;
      }
    }
    f = std::move(g);
  }
  DyadicProb total = DyadicProb::zero();
  for (const auto& p : f) total += p;
  return total;
}

// Full output law given y; refuses when the enumeration would be large.
inline std::map<std::vector<Symbol>, DyadicProb> cond_output_distribution(const CondFSGMSpec& spec,
                                                                           std::span<const Symbol> y) {
  const std::size_t ell = spec.ell();
  if (y.empty() || y.size() % ell != 0) throw PreconditionError("block length must divide n");
  const double size = std::pow(static_cast<double>(spec.alpha()), static_cast<double>(y.size())) *
                      static_cast<double>(spec.states());
  if (size > kMaxEnumeratedOutputs) throw BudgetError("exact conditional distribution too large to enumerate");
  std::map<std::pair<std::vector<Symbol>, std::uint32_t>, DyadicProb> cur{{{{}, spec.initial()}, DyadicProb::one()}};
  for (std::size_t i = 0; i < y.size(); i += ell) {
    const std::size_t b = spec.block_index(y.subspan(i, ell));
    std::map<std::pair<std::vector<Symbol>, std::uint32_t>, DyadicProb> nxt;
    for (const auto& [key, p] : cur) {
      const auto& [prefix, z] = key;
      const unsigned d = spec.delta(z, b);
      const DyadicProb step = p * DyadicProb::pow2(d);
      for (std::uint64_t w = 0; w < (std::uint64_t{1} << d); ++w) {
        auto ext = prefix;
        const auto& blk = spec.output(z, b, w);
        ext.insert(ext.end(), blk.begin(), blk.end());
        nxt[{std::move(ext), spec.next(z, b, w)}] += step;
      }
    }
    cur = std::move(nxt);
  }
  std::map<std::vector<Symbol>, DyadicProb> out;
  for (const auto& [key, p] : cur) out[key.first] += p;
  return out;
}

}  // namespace lzguess
