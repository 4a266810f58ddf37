#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lzguess/bitsource.hpp"
#include "lzguess/dyadic.hpp"
#include "lzguess/fsgm.hpp"
#include "lzguess/game.hpp"
#include "lzguess/lz78.hpp"
#include "lzguess/moments.hpp"
#include "lzguess/seqcore.hpp"

namespace lzguess {

// Bit masses of the modulo mappings used by the sampler: a w-bit value v
// selects item v mod t, so items below 2^w - t are hit twice.
struct ModMass {
  unsigned width;   // bits read
  std::uint64_t t;  // number of items

  explicit ModMass(std::uint64_t items) : width(ceil_log2(items)), t(items) {}
  // 1 + [i < 2^width - t]
  unsigned count(std::uint64_t i) const { return i < (std::uint64_t{1} << width) - t ? 2U : 1U; }
  // log2 of count(i) / 2^width
  int log2_mass(std::uint64_t i) const { return (count(i) == 2 ? 1 : 0) - static_cast<int>(width); }
};

// The randomized LZ78 decoder. Per phrase: t = current node count; read
// ceil(log2 t) bits, pointer = value mod t; then repeatedly read ceil(log2 a)
// bits, symbol = value mod a, descending while that child already exists; the
// first missing child becomes the new phrase. Every phrase is therefore new,
// so the incremental parse of the output reproduces the phrase path.
class LzSampler {
 public:
  explicit LzSampler(std::size_t alpha) : alpha_(alpha), sym_(alpha) {}

  // Streams the first n symbols to emit(Symbol) -> bool; stops early if emit
  // returns false. Returns true when all n symbols were emitted.
  template <BitReader Bits, typename Emit>
  bool generate(std::size_t n, Bits& bits, Emit&& emit) {
    reset();
    std::size_t produced = 0;
    std::vector<Symbol> word;
    while (produced < n) {
      const std::uint64_t t = parent_.size();
      const ModMass ptr(t);
      std::uint32_t u = static_cast<std::uint32_t>(bits.read(ptr.width) % t);
      std::uint32_t created = 0;
      for (;;) {
        const auto a = static_cast<Symbol>(bits.read(sym_.width) % alpha_);
        const std::uint32_t c = children_[u * alpha_ + a];
        if (c != 0) {
          u = c;
          continue;
        }
        created = add(u, a);
        break;
      }
      word.resize(depth_[created]);
      for (std::uint32_t v = created, k = depth_[created]; k > 0; v = parent_[v]) word[--k] = symbol_[v];
      for (Symbol s : word) {
        if (!emit(s)) return false;
        if (++produced == n) break;
      }
    }
    return true;
  }

  template <BitReader Bits>
  std::vector<Symbol> sample(std::size_t n, Bits& bits) {
    std::vector<Symbol> out;
    out.reserve(n);
    generate(n, bits, [&](Symbol s) {
      out.push_back(s);
      return true;
    });
    return out;
  }

  template <BitReader Bits>
  bool matches(std::span<const Symbol> x, Bits& bits) {
    std::size_t i = 0;
    return generate(x.size(), bits, [&](Symbol s) { return s == x[i++]; });
  }

 private:
  void reset() {
    parent_.assign(1, 0);
    symbol_.assign(1, 0);
    depth_.assign(1, 0);
    children_.assign(alpha_, 0);
  }
  std::uint32_t add(std::uint32_t u, Symbol a) {
    const auto id = static_cast<std::uint32_t>(parent_.size());
    children_[u * alpha_ + a] = id;
    parent_.push_back(u);
    symbol_.push_back(a);
    depth_.push_back(depth_[u] + 1);
    children_.resize(children_.size() + alpha_, 0);
    return id;
  }

  std::size_t alpha_;
  ModMass sym_;
  std::vector<std::uint32_t> parent_;
  std::vector<Symbol> symbol_;
  std::vector<std::uint32_t> depth_;
  std::vector<std::uint32_t> children_;  // 0 = absent (root is never a child)
};

template <BitReader Bits>
std::vector<Symbol> lz_sample(std::size_t alpha, std::size_t n, Bits& bits) {
  if (n == 0) throw PreconditionError("sample length must be >= 1");
  return LzSampler(alpha).sample(n, bits);
}

namespace detail {

// Collects the per-phrase probabilities of the sampler emitting x, each as a
// list of log2 terms (every term is a power of two). Walks the incremental
// parse of x; at phrase j the dictionary holds nodes 0..j-1.
template <typename Sink>
void lz_phrase_terms(std::span<const Symbol> x, std::size_t alpha, Sink&& sink) {
  const ParseResult p = incremental_parse(x, alpha);
  const ParseTrie& trie = p.trie;
  const ModMass sym(alpha);
  // doubled[v]: number of edges on the root path of v whose symbol mass is doubled.
  std::vector<int> doubled(trie.size(), 0);
  for (std::uint32_t v = 1; v < trie.size(); ++v) {
    const auto& nd = trie.node(v);
    doubled[v] = doubled[nd.parent] + (sym.count(nd.symbol) == 2 ? 1 : 0);
  }
  // Path mass from ancestor u down to v.
  auto path_log2 = [&](std::uint32_t u, std::uint32_t v) {
    const int steps = static_cast<int>(trie.node(v).depth - trie.node(u).depth);
    return doubled[v] - doubled[u] - steps * static_cast<int>(sym.width);
  };
  std::vector<int> terms;
  for (std::size_t j = 1; j <= p.phrases.size(); ++j) {
    const Phrase& ph = p.phrases[j - 1];
    const ModMass ptr(j);  // j nodes present: root + j-1 earlier phrases
    terms.clear();
    const bool complete = j < p.phrases.size() || p.last_complete;
    if (complete) {
      // Pointer at any ancestor u of the new node's parent, then the walk spells u -> node.
      for (std::uint32_t u = trie.node(ph.node).parent;; u = trie.node(u).parent) {
        terms.push_back(ptr.log2_mass(u) + path_log2(u, ph.node));
        if (u == 0) break;
      }
    } else {
      // Residual = existing node v: the drawn word has prefix v iff the pointer
      // lands in v's subtree, or at a proper ancestor whose walk passes v.
      const std::uint32_t v = ph.node;
      for (std::uint32_t u = 0; u < j; ++u) {
        if (trie.is_ancestor(v, u)) terms.push_back(ptr.log2_mass(u));
      }
      for (std::uint32_t u = trie.node(v).parent;; u = trie.node(u).parent) {
        terms.push_back(ptr.log2_mass(u) + path_log2(u, v));
        if (u == 0) break;
      }
    }
    sink(terms);
  }
}

inline double log2_sum_pow2(const std::vector<int>& terms) {
  const int top = *std::max_element(terms.begin(), terms.end());
  double s = 0;
  for (int e : terms) s += std::exp2(e - top);
  return top + std::log2(s);
}

inline DyadicProb dyadic_sum_pow2(const std::vector<int>& terms) {
  const int low = *std::min_element(terms.begin(), terms.end());
  if (low > 0) throw PreconditionError("probability term above 1");
  BigInt num = 0;
  for (int e : terms) num += BigInt(1) << (e - low);
  return DyadicProb(num, static_cast<std::uint32_t>(-low));
}

}  // namespace detail

// Exact probability that one run of the LZ sampler emits x.
inline DyadicProb lz_guess_prob(std::span<const Symbol> x, std::size_t alpha) {
  if (x.empty()) throw PreconditionError("target must be nonempty");
  DyadicProb p = DyadicProb::one();
  detail::lz_phrase_terms(x, alpha, [&](const std::vector<int>& t) { p *= detail::dyadic_sum_pow2(t); });
  return p;
}

// Same quantity in the log2 domain (no big integers).
inline double lz_guess_log2prob(std::span<const Symbol> x, std::size_t alpha) {
  if (x.empty()) throw PreconditionError("target must be nonempty");
  double lp = 0;
  detail::lz_phrase_terms(x, alpha, [&](const std::vector<int>& t) { lp += detail::log2_sum_pow2(t); });
  return lp;
}

inline DyadicProb lz_guess_prob(const SymbolSeq& x) { return lz_guess_prob(x.symbols(), x.alpha()); }

// Block-restarted guesser: the dictionary is reset every ell symbols; a final
// short block of length n mod ell runs the same process with that length.
inline DyadicProb block_guess_prob(std::span<const Symbol> x, std::size_t alpha, std::size_t ell) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  DyadicProb p = DyadicProb::one();
  for (std::size_t b = 0; b < x.size(); b += ell) {
    p *= lz_guess_prob(x.subspan(b, std::min(ell, x.size() - b)), alpha);
  }
  return p;
}

inline double block_guess_log2prob(std::span<const Symbol> x, std::size_t alpha, std::size_t ell) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  double lp = 0;
  for (std::size_t b = 0; b < x.size(); b += ell) {
    lp += lz_guess_log2prob(x.subspan(b, std::min(ell, x.size() - b)), alpha);
  }
  return lp;
}

template <BitReader Bits>
std::vector<Symbol> block_sample(std::size_t alpha, std::size_t n, std::size_t ell, Bits& bits) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  LzSampler s(alpha);
  std::vector<Symbol> out;
  out.reserve(n);
  for (std::size_t b = 0; b < n; b += ell) {
    auto blk = s.sample(std::min(ell, n - b), bits);
    out.insert(out.end(), blk.begin(), blk.end());
  }
  return out;
}

inline constexpr std::size_t kMaxCompiledStates = 4096;

struct CompiledBlockGuesser {
  FSGMSpec machine;
  std::size_t state_count;
  std::size_t state_bound;  // ell * alpha^ell
  unsigned start_bits;      // bits read once per block
};

// Realizes the block guesser as an FSGM. A start state reads D bits (D = the
// largest dyadic exponent among the block probabilities), which select a
// whole block with exactly its probability, and emits its first symbol; Δ = 0
// states then replay the remaining suffix. States: 1 + alpha + ... + alpha^(ell-1).
inline CompiledBlockGuesser compile_block_guesser_to_fsgm(std::size_t ell, std::size_t alpha) {
  if (ell == 0) throw PreconditionError("block length must be >= 1");
  double bound = static_cast<double>(ell) * std::pow(static_cast<double>(alpha), static_cast<double>(ell));
  if (bound > kMaxCompiledStates) {
    throw BudgetError("ell * alpha^ell = " + std::to_string(static_cast<long long>(bound)) +
                      " exceeds the 4096-state compilation budget");
  }
  const std::size_t blocks = static_cast<std::size_t>(std::llround(std::pow(alpha, ell)));
  std::vector<std::vector<Symbol>> words(blocks, std::vector<Symbol>(ell));
  std::vector<DyadicProb> probs(blocks);
  std::uint32_t max_exp = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t v = b;
    for (std::size_t k = ell; k > 0; --k) {
      words[b][k - 1] = static_cast<Symbol>(v % alpha);
      v /= alpha;
    }
    probs[b] = lz_guess_prob(words[b], alpha);
    max_exp = std::max(max_exp, probs[b].exponent());
  }
  if (max_exp > kMaxDelta) {
    throw BudgetError("block probabilities need " + std::to_string(max_exp) +
                      " bits of resolution; the start state may read at most 16");
  }
  // Suffix states are indexed by (length, value) with length 1..ell-1.
  std::vector<std::size_t> offset(ell + 1, 0);
  std::size_t count = 1;
  std::size_t pw = 1;
  for (std::size_t len = 1; len < ell; ++len) {
    pw *= alpha;
    offset[len] = count;
    count += pw;
  }
  auto suffix_state = [&](const std::vector<Symbol>& w, std::size_t from) -> std::uint32_t {
    const std::size_t len = w.size() - from;
    if (len == 0) return 0;
    std::size_t v = 0;
    for (std::size_t k = from; k < w.size(); ++k) v = v * alpha + w[k];
    return static_cast<std::uint32_t>(offset[len] + v);
  };
  std::vector<std::string> names(count);
  std::vector<unsigned> delta(count, 0);
  std::vector<std::vector<Symbol>> out(count);
  std::vector<std::vector<std::uint32_t>> next(count);
  names[0] = "start";
  delta[0] = max_exp;
  const std::uint64_t words_at_start = std::uint64_t{1} << max_exp;
  out[0].reserve(words_at_start);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto share = (probs[b].numerator() << (max_exp - probs[b].exponent())).convert_to<std::uint64_t>();
    for (std::uint64_t k = 0; k < share; ++k) {
      out[0].push_back(words[b][0]);
      next[0].push_back(suffix_state(words[b], 1));
    }
  }
  std::size_t per_len = 1;
  for (std::size_t len = 1; len < ell; ++len) {
    per_len *= alpha;
    for (std::size_t v = 0; v < per_len; ++v) {
      std::vector<Symbol> w(len);
      std::size_t r = v;
      for (std::size_t k = len; k > 0; --k) {
        w[k - 1] = static_cast<Symbol>(r % alpha);
        r /= alpha;
      }
      const std::size_t id = offset[len] + v;
      std::string nm = "emit";
      for (Symbol s : w) nm += "." + std::to_string(s);
      names[id] = nm;
      out[id] = {w[0]};
      next[id] = {suffix_state(w, 1)};
    }
  }
  return {FSGMSpec(alpha, std::move(names), 0, std::move(delta), std::move(out), std::move(next)),
          count, static_cast<std::size_t>(bound), max_exp};
}

// A randomized guessing strategy for length-n targets.
class Guesser {
 public:
  enum class Kind { lz_full, lz_block, uniform, fsgm };

  static Guesser lz_full(std::size_t alpha) { return Guesser(Kind::lz_full, alpha, 0, nullptr); }
  static Guesser lz_block(std::size_t alpha, std::size_t ell) {
    if (ell == 0) throw PreconditionError("lz_block requires ell >= 1");
    return Guesser(Kind::lz_block, alpha, ell, nullptr);
  }
  // Independent symbols, each ceil(log2 alpha) bits mod alpha.
  static Guesser uniform(std::size_t alpha) { return Guesser(Kind::uniform, alpha, 1, nullptr); }
  static Guesser fsgm(std::shared_ptr<const FSGMSpec> m) {
    const auto a = m->alpha();
    return Guesser(Kind::fsgm, a, 0, std::move(m));
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t alpha() const noexcept { return alpha_; }
  std::size_t ell() const noexcept { return ell_; }

  std::string name() const {
    switch (kind_) {
      case Kind::lz_full: return "lz";
      case Kind::lz_block: return "lz_block(" + std::to_string(ell_) + ")";
      case Kind::uniform: return "uniform";
      case Kind::fsgm: return "fsgm";
    }
    return "?";
  }

  DyadicProb exact_prob(std::span<const Symbol> x) const {
    switch (kind_) {
      case Kind::lz_full: return lz_guess_prob(x, alpha_);
      case Kind::lz_block:
      case Kind::uniform: return block_guess_prob(x, alpha_, ell_);
      case Kind::fsgm: return sequence_prob(*machine_, x);
    }
    return {};
  }

  double exact_log2prob(std::span<const Symbol> x) const {
    switch (kind_) {
      case Kind::lz_full: return lz_guess_log2prob(x, alpha_);
      case Kind::lz_block:
      case Kind::uniform: return block_guess_log2prob(x, alpha_, ell_);
      case Kind::fsgm: return sequence_prob(*machine_, x).log2();
    }
    return 0;
  }

  template <BitReader Bits>
  std::vector<Symbol> sample(std::size_t n, Bits& bits) const {
    switch (kind_) {
      case Kind::lz_full: return lz_sample(alpha_, n, bits);
      case Kind::lz_block:
      case Kind::uniform: return block_sample(alpha_, n, ell_, bits);
      case Kind::fsgm: return run(*machine_, bits, n).output;
    }
    return {};
  }

  // One guess against x, abandoning the draw at the first mismatch.
  template <BitReader Bits>
  bool attempt(std::span<const Symbol> x, Bits& bits) const {
    switch (kind_) {
      case Kind::lz_full: return LzSampler(alpha_).matches(x, bits);
      case Kind::lz_block:
      case Kind::uniform: {
        LzSampler s(alpha_);
        for (std::size_t b = 0; b < x.size(); b += ell_) {
          if (!s.matches(x.subspan(b, std::min(ell_, x.size() - b)), bits)) return false;
        }
        return true;
      }
      case Kind::fsgm: return run_matches(*machine_, bits, x);
    }
    return false;
  }

 private:
  Guesser(Kind k, std::size_t alpha, std::size_t ell, std::shared_ptr<const FSGMSpec> m)
      : kind_(k), alpha_(alpha), ell_(ell), machine_(std::move(m)) {
    if (alpha_ < 2) throw PreconditionError("alphabet size must be >= 2");
  }

  Kind kind_;
  std::size_t alpha_;
  std::size_t ell_;
  std::shared_ptr<const FSGMSpec> machine_;
};

inline constexpr std::uint64_t kDefaultCap = std::uint64_t{1} << 20;

// Exact and Monte-Carlo guessing moments for one target and one zeta.
struct MomentEstimate {
  double q_log2 = 0;
  std::optional<DyadicProb> q;  // present when computed exactly
  double zeta = 1;
  MomentValue exact;            // E[G^zeta] from q
  double exponent = 0;          // (1/n) log2 E[G^zeta], bits per symbol
  // Monte Carlo (absent when rounds == 0)
  std::size_t rounds = 0;
  double mc_mean = 0;           // mean of G^zeta, censored rounds counted at cap
  double mc_stderr = 0;
  double mc_ci = 0;             // 95% half-width, 1.96 * stderr
  std::size_t censored = 0;
};

inline MomentEstimate exact_moment(double q_log2, double zeta, std::size_t n) {
  MomentEstimate e;
  e.q_log2 = q_log2;
  e.zeta = zeta;
  e.exact = moment_exact_log2q(q_log2, zeta);
  e.exponent = e.exact.log2_value / static_cast<double>(n);
  return e;
}

inline void attach_samples(MomentEstimate& e, const GuessSamples& s) {
  const SampleMoment m = sample_moment(s, e.zeta);
  e.rounds = s.rounds();
  e.mc_mean = m.mean;
  e.mc_stderr = m.stderr_;
  e.mc_ci = 1.96 * m.stderr_;
  e.censored = s.censored_count();
}

// Exact dyadic q is kept when the target is short enough for big-integer
// arithmetic to be cheap; longer targets use the log2 route.
inline constexpr std::size_t kExactTargetLimit = 4096;

// Plays the guessing game (rounds may be 0 for exact-only evaluation). One set
// of samples serves every zeta.
inline std::vector<MomentEstimate> run_game(const Guesser& guesser, const SymbolSeq& x,
                                            const std::vector<double>& zetas, std::size_t rounds,
                                            std::uint64_t seed, std::uint64_t cap = kDefaultCap,
                                            unsigned jobs = 1) {
  if (x.empty()) throw PreconditionError("target must be nonempty");
  std::optional<DyadicProb> q;
  double q_log2;
  if (x.size() <= kExactTargetLimit) {
    q = guesser.exact_prob(x.symbols());
    q_log2 = q->log2();
  } else {
    q_log2 = guesser.exact_log2prob(x.symbols());
  }
  if (std::isinf(q_log2)) throw PreconditionError("target has zero probability under this guesser");
  std::optional<GuessSamples> samples;
  if (rounds > 0) {
    samples = play_rounds(rounds, seed, cap, jobs,
                          [&](BitSource& bits) { return guesser.attempt(x.symbols(), bits); });
  }
  std::vector<MomentEstimate> out;
  for (double z : zetas) {
    MomentEstimate e = exact_moment(q_log2, z, x.size());
    e.q = q;
    if (samples) attach_samples(e, *samples);
    out.push_back(std::move(e));
  }
  return out;
}

// Guessing rounds with a bare success probability q (each guess succeeds iff a
// 53-bit uniform falls below q); used to validate the moment evaluator.
inline GuessSamples simulate_geometric(double q, std::size_t rounds, std::uint64_t seed,
                                       std::uint64_t cap, unsigned jobs = 1) {
  if (!(q > 0 && q <= 1)) throw PreconditionError("q must lie in (0, 1]");
  return play_rounds(rounds, seed, cap, jobs, [q](BitSource& bits) { return bits.uniform01() < q; });
}

}  // namespace lzguess
