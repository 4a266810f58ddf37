#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lzguess/bitsource.hpp"
#include "lzguess/dyadic.hpp"
#include "lzguess/error.hpp"
#include "lzguess/game.hpp"
#include "lzguess/seqcore.hpp"

namespace lzguess {

inline constexpr unsigned kMaxDelta = 16;

// Finite-state guessing machine. At state z it reads delta(z) fresh bits as a
// word w (first bit most significant), emits output(z, w) and moves to
// next(z, w). Tables are total: every state has 2^delta(z) entries.
class FSGMSpec {
 public:
  FSGMSpec(std::size_t alpha, std::vector<std::string> names, std::uint32_t initial,
           std::vector<unsigned> delta, std::vector<std::vector<Symbol>> output,
           std::vector<std::vector<std::uint32_t>> next)
      : alpha_(alpha),
        names_(std::move(names)),
        initial_(initial),
        delta_(std::move(delta)),
        output_(std::move(output)),
        next_(std::move(next)) {
    validate();
  }

  std::size_t alpha() const noexcept { return alpha_; }
  std::size_t states() const noexcept { return delta_.size(); }
  std::uint32_t initial() const noexcept { return initial_; }
  unsigned delta(std::uint32_t z) const { return delta_.at(z); }
  unsigned max_delta() const {
    return delta_.empty() ? 0 : *std::max_element(delta_.begin(), delta_.end());
  }
  Symbol output(std::uint32_t z, std::uint64_t w) const { return output_[z][w]; }
  std::uint32_t next(std::uint32_t z, std::uint64_t w) const { return next_[z][w]; }
  const std::string& name(std::uint32_t z) const { return names_.at(z); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  // Drops states unreachable from the initial state; returns their names.
  std::vector<std::string> prune_unreachable() {
    std::vector<std::uint8_t> seen(states(), 0);
    std::vector<std::uint32_t> stack{initial_};
    seen[initial_] = 1;
    while (!stack.empty()) {
      const auto z = stack.back();
      stack.pop_back();
      for (auto nz : next_[z]) {
        if (!seen[nz]) {
          seen[nz] = 1;
          stack.push_back(nz);
        }
      }
    }
    std::vector<std::string> removed;
    std::vector<std::uint32_t> remap(states(), 0);
    std::uint32_t kept = 0;
    for (std::uint32_t z = 0; z < states(); ++z) {
      if (seen[z]) remap[z] = kept++;
      else removed.push_back(names_[z]);
    }
    if (removed.empty()) return removed;
    std::vector<std::string> names;
    std::vector<unsigned> delta;
    std::vector<std::vector<Symbol>> output;
    std::vector<std::vector<std::uint32_t>> next;
    for (std::uint32_t z = 0; z < states(); ++z) {
      if (!seen[z]) continue;
      names.push_back(names_[z]);
      delta.push_back(delta_[z]);
      output.push_back(output_[z]);
      auto nx = next_[z];
      for (auto& v : nx) v = remap[v];
      next.push_back(std::move(nx));
    }
    names_ = std::move(names);
    delta_ = std::move(delta);
    output_ = std::move(output);
    next_ = std::move(next);
    initial_ = remap[initial_];
    return removed;
  }

 private:
  void validate() const {
    const auto s = delta_.size();
    if (s == 0) throw PreconditionError("machine needs at least one state");
    if (alpha_ < 2) throw PreconditionError("output alphabet needs at least 2 symbols");
    if (names_.size() != s || output_.size() != s || next_.size() != s) {
      throw PreconditionError("state tables disagree on the number of states");
    }
    if (initial_ >= s) throw PreconditionError("initial state out of range");
    for (std::size_t z = 0; z < s; ++z) {
      if (delta_[z] > kMaxDelta) {
        throw PreconditionError("state '" + names_[z] + "' reads more than 16 bits per step");
      }
      const std::size_t words = std::size_t{1} << delta_[z];
      if (output_[z].size() != words || next_[z].size() != words) {
        throw PreconditionError("state '" + names_[z] + "' has a partial table");
      }
      for (std::size_t w = 0; w < words; ++w) {
        if (output_[z][w] >= alpha_) throw PreconditionError("output symbol out of range");
        if (next_[z][w] >= s) throw PreconditionError("next state out of range");
      }
    }
  }

  std::size_t alpha_;
  std::vector<std::string> names_;
  std::uint32_t initial_;
  std::vector<unsigned> delta_;
  std::vector<std::vector<Symbol>> output_;
  std::vector<std::vector<std::uint32_t>> next_;
};

struct RunTrace {
  std::vector<std::uint64_t> cursor;   // t_0 .. t_n
  std::vector<std::uint64_t> words;    // v_1 .. v_n as integers
  std::vector<unsigned> word_widths;   // |v_i| = delta(z_i)
  std::vector<std::uint32_t> states;   // z_1 .. z_{n+1}
  std::vector<Symbol> output;          // x̂_1 .. x̂_n

  std::uint64_t bits_consumed() const { return cursor.back(); }
};

template <BitReader Bits>
RunTrace run(const FSGMSpec& spec, Bits& bits, std::size_t n) {
  if (n == 0) throw PreconditionError("run length must be >= 1");
  RunTrace tr;
  tr.cursor.reserve(n + 1);
  tr.states.reserve(n + 1);
  tr.cursor.push_back(0);
  std::uint32_t z = spec.initial();
  tr.states.push_back(z);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned d = spec.delta(z);
    const std::uint64_t w = d ? bits.read(d) : 0;
    tr.cursor.push_back(tr.cursor.back() + d);
    tr.words.push_back(w);
    tr.word_widths.push_back(d);
    tr.output.push_back(spec.output(z, w));
    z = spec.next(z, w);
    tr.states.push_back(z);
  }
  return tr;
}

// Emits up to x.size() symbols, stopping at the first mismatch. True on a full match.
template <BitReader Bits>
bool run_matches(const FSGMSpec& spec, Bits& bits, std::span<const Symbol> x) {
  std::uint32_t z = spec.initial();
  for (Symbol want : x) {
    const unsigned d = spec.delta(z);
    const std::uint64_t w = d ? bits.read(d) : 0;
    if (spec.output(z, w) != want) return false;
    z = spec.next(z, w);
  }
  return true;
}

namespace detail {

// Transition kernel P(x̂, z' | z) = m(x̂, z' | z) * 2^-delta(z).
struct KernelEntry {
  Symbol out;
  std::uint32_t next;
  std::uint64_t count;
};

inline std::vector<std::vector<KernelEntry>> build_kernel(const FSGMSpec& spec) {
  std::vector<std::vector<KernelEntry>> k(spec.states());
  for (std::uint32_t z = 0; z < spec.states(); ++z) {
    std::map<std::pair<Symbol, std::uint32_t>, std::uint64_t> m;
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << spec.delta(z)); ++w) {
      ++m[{spec.output(z, w), spec.next(z, w)}];
    }
    for (const auto& [key, c] : m) k[z].push_back({key.first, key.second, c});
  }
  return k;
}

}  // namespace detail

// Exact P(x) for a single target by the forward recursion over states.
inline DyadicProb sequence_prob(const FSGMSpec& spec, std::span<const Symbol> x) {
  const auto kernel = detail::build_kernel(spec);
  std::vector<DyadicProb> alpha(spec.states());
  alpha[spec.initial()] = DyadicProb::one();
  for (Symbol sym : x) {
    std::vector<DyadicProb> nxt(spec.states());
    for (std::uint32_t z = 0; z < spec.states(); ++z) {
      if (alpha[z].is_zero()) continue;
      for (const auto& e : kernel[z]) {
        if (e.out != sym) continue;
        nxt[e.next] += alpha[z] * DyadicProb(e.count, spec.delta(z));
      }
    }
    alpha = std::move(nxt);
  }
  DyadicProb total;
  for (const auto& a : alpha) total += a;
  return total;
}

inline DyadicProb sequence_prob(const FSGMSpec& spec, const SymbolSeq& x) {
  return sequence_prob(spec, x.symbols());
}

inline constexpr double kMaxEnumeratedOutputs = 1 << 16;

using OutputDistribution = std::map<std::vector<Symbol>, DyadicProb>;

// Exact law of the first n outputs (only positive-probability sequences are
// listed). Refuses when alpha^n * s exceeds the enumeration budget.
inline OutputDistribution output_distribution(const FSGMSpec& spec, std::size_t n) {
  const double size = std::pow(static_cast<double>(spec.alpha()), static_cast<double>(n)) *
                      static_cast<double>(spec.states());
  if (size > kMaxEnumeratedOutputs) {
    throw BudgetError("output_distribution would enumerate alpha^n * s = " +
                      std::to_string(static_cast<long long>(size)) +
                      " entries (limit 65536); use sequence_prob for single targets");
  }
  const auto kernel = detail::build_kernel(spec);
  std::map<std::vector<Symbol>, std::vector<DyadicProb>> frontier;
  frontier[{}] = std::vector<DyadicProb>(spec.states());
  frontier[{}][spec.initial()] = DyadicProb::one();
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::vector<Symbol>, std::vector<DyadicProb>> grown;
    for (const auto& [prefix, dist] : frontier) {
      for (std::uint32_t z = 0; z < spec.states(); ++z) {
        if (dist[z].is_zero()) continue;
        for (const auto& e : kernel[z]) {
          auto key = prefix;
          key.push_back(e.out);
          auto& slot = grown[key];
          if (slot.empty()) slot.resize(spec.states());
          slot[e.next] += dist[z] * DyadicProb(e.count, spec.delta(z));
        }
      }
    }
    frontier = std::move(grown);
  }
  OutputDistribution out;
  for (auto& [seq, dist] : frontier) {
    DyadicProb p;
    for (const auto& d : dist) p += d;
    if (!p.is_zero()) out.emplace(seq, std::move(p));
  }
  return out;
}

// Guessing game with a fixed machine: each guess is a fresh run of n symbols.
inline GuessSamples simulate_guessing(const FSGMSpec& spec, const SymbolSeq& x, std::size_t rounds,
                                      std::uint64_t seed, std::uint64_t cap, unsigned jobs = 1) {
  if (sequence_prob(spec, x).is_zero()) {
    throw PreconditionError("unreachable target: the machine emits it with probability 0");
  }
  return play_rounds(rounds, seed, cap, jobs,
                     [&](BitSource& bits) { return run_matches(spec, bits, x.symbols()); });
}

// Per-state binary tree whose leaves carry (output, next state); the path to a
// leaf is the word of bits read.
struct TreeLeaf {
  std::string path;  // e.g. "10"; empty for a state that reads nothing
  Symbol output;
  std::uint32_t next;
};

struct TreeFSGMSpec {
  std::size_t alpha;
  std::vector<std::string> names;
  std::uint32_t initial = 0;
  std::vector<std::vector<TreeLeaf>> trees;
};

// Extends every tree to a full tree of depth delta(z) = deepest leaf; all
// descendants of a leaf inherit its labels, so the extra bits are ignored.
inline FSGMSpec expand_tree_machine(const TreeFSGMSpec& t) {
  const std::size_t s = t.trees.size();
  std::vector<unsigned> delta(s, 0);
  std::vector<std::vector<Symbol>> out(s);
  std::vector<std::vector<std::uint32_t>> next(s);
  for (std::size_t z = 0; z < s; ++z) {
    const auto& leaves = t.trees[z];
    const std::string& nm = z < t.names.size() ? t.names[z] : std::to_string(z);
    if (leaves.empty()) throw PreconditionError("state '" + nm + "' has an empty tree");
    unsigned depth = 0;
    for (const auto& lf : leaves) {
      if (lf.path.find_first_not_of("01") != std::string::npos) {
        throw PreconditionError("leaf path '" + lf.path + "' is not binary");
      }
      depth = std::max<unsigned>(depth, static_cast<unsigned>(lf.path.size()));
    }
    if (depth > kMaxDelta) throw PreconditionError("tree of state '" + nm + "' is deeper than 16");
    for (std::size_t a = 0; a < leaves.size(); ++a) {
      for (std::size_t b = 0; b < leaves.size(); ++b) {
        if (a != b && leaves[b].path.compare(0, leaves[a].path.size(), leaves[a].path) == 0 &&
            leaves[a].path.size() <= leaves[b].path.size()) {
          throw PreconditionError("tree of state '" + nm + "' is not prefix-free ('" +
                                  leaves[a].path + "' vs '" + leaves[b].path + "')");
        }
      }
    }
    const std::size_t words = std::size_t{1} << depth;
    std::vector<int> owner(words, -1);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const auto& p = leaves[li].path;
      std::uint64_t base = 0;
      for (char c : p) base = (base << 1) | static_cast<std::uint64_t>(c - '0');
      const unsigned free_bits = depth - static_cast<unsigned>(p.size());
      for (std::uint64_t tail = 0; tail < (std::uint64_t{1} << free_bits); ++tail) {
        owner[(base << free_bits) | tail] = static_cast<int>(li);
      }
    }
    delta[z] = depth;
    out[z].resize(words);
    next[z].resize(words);
    for (std::size_t w = 0; w < words; ++w) {
      if (owner[w] < 0) {
        std::string path;
        for (unsigned k = depth; k > 0; --k) path += ((w >> (k - 1)) & 1U) ? '1' : '0';
        throw PreconditionError("unlabeled leaf '" + path + "' in the tree of state '" + nm + "'");
      }
      out[z][w] = leaves[static_cast<std::size_t>(owner[w])].output;
      next[z][w] = leaves[static_cast<std::size_t>(owner[w])].next;
    }
  }
  std::vector<std::string> names = t.names;
  names.resize(s);
  for (std::size_t z = 0; z < s; ++z) {
    if (names[z].empty()) names[z] = std::to_string(z);
  }
  return FSGMSpec(t.alpha, std::move(names), t.initial, std::move(delta), std::move(out),
                  std::move(next));
}

// Variable-to-variable mapping 0 -> ab, 10 -> bac, 11 -> ca as a machine over
// {a, b, c}. Timing: each output is produced by the transition (z_i, v_i). The
// machine starts in A, so the first word "ab" is emitted before any bit is
// read; the final symbol of every word reads the (extended, two-bit) code of
// the next word. A reads nothing and moves to B; B, E and G read two bits.
inline FSGMSpec build_three_word_machine() {
  enum : std::uint32_t { A, B, C, D, E, F, G };
  constexpr Symbol a = 0, b = 1, c = 2;
  auto chooser = [&](Symbol out) {
    return std::vector<TreeLeaf>{{"0", out, A}, {"10", out, C}, {"11", out, F}};
  };
  TreeFSGMSpec t;
  t.alpha = 3;
  t.names = {"A", "B", "C", "D", "E", "F", "G"};
  t.initial = A;
  t.trees = {
      {{"", a, B}},  // A
      chooser(b),    // B: ends "ab"
      {{"", b, D}},  // C
      {{"", a, E}},  // D
      chooser(c),    // E: ends "bac"
      {{"", c, G}},  // F
      chooser(a),    // G: ends "ca"
  };
  return expand_tree_machine(t);
}

inline std::string word_string(std::uint64_t w, unsigned width) {
  if (width == 0) return "-";
  std::string s;
  for (unsigned k = width; k > 0; --k) s += ((w >> (k - 1)) & 1U) ? '1' : '0';
  return s;
}

// Text form:
//   alphabet <tokens>        e.g. "alphabet abc"
//   initial <state>
//   <state> <word|-> <output token> <next state>
// One line per (state, word). Words of one state either share a length (full
// table) or form a complete prefix-free tree, which is expanded. '#' starts a
// comment. Unreachable states are pruned; their names go to `warnings`.
inline FSGMSpec parse_fsgm_text(const std::string& text, AlphabetPtr* alphabet_out = nullptr,
                                std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(text);
  std::string line;
  std::optional<Alphabet> alphabet;
  std::string initial_name;
  std::vector<std::string> names;
  std::unordered_map<std::string, std::uint32_t> ids;
  auto id_of = [&](const std::string& nm) {
    auto [it, fresh] = ids.emplace(nm, static_cast<std::uint32_t>(names.size()));
    if (fresh) names.push_back(nm);
    return it->second;
  };
  struct Row {
    std::uint32_t state;
    std::string word;
    std::string out;
    std::uint32_t next;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "alphabet") {
      std::string spec;
      ls >> spec;
      alphabet = parse_alphabet_spec(spec);
      continue;
    }
    if (first == "initial") {
      ls >> initial_name;
      continue;
    }
    Row r;
    r.state = id_of(first);
    std::string next;
    if (!(ls >> r.word >> r.out >> next)) {
      throw PreconditionError("line " + std::to_string(lineno) +
                              ": expected '<state> <word> <output> <next>'");
    }
    r.next = id_of(next);
    r.line = lineno;
    if (r.word == "-") r.word.clear();
    rows.push_back(std::move(r));
  }
  if (!alphabet) throw PreconditionError("machine file lacks an 'alphabet' line");
  if (names.empty()) throw PreconditionError("machine file defines no transitions");
  TreeFSGMSpec t;
  t.alpha = alphabet->size();
  t.names = names;
  t.initial = initial_name.empty() ? 0 : id_of(initial_name);
  t.names = names;
  t.trees.resize(names.size());
  for (const auto& r : rows) {
    const Symbol* o = alphabet->find(r.out);
    if (!o) {
      throw PreconditionError("line " + std::to_string(r.line) + ": output '" + r.out +
                              "' not in the alphabet");
    }
    for (const auto& lf : t.trees[r.state]) {
      if (lf.path == r.word) {
        throw PreconditionError("line " + std::to_string(r.line) + ": duplicate word for state '" +
                                names[r.state] + "'");
      }
    }
    t.trees[r.state].push_back({r.word, *o, r.next});
  }
  for (std::size_t z = 0; z < names.size(); ++z) {
    if (t.trees[z].empty()) {
      throw PreconditionError("state '" + names[z] + "' is referenced but has no transitions");
    }
  }
  FSGMSpec spec = expand_tree_machine(t);
  auto removed = spec.prune_unreachable();
  for (const auto& r : removed) {
    const std::string msg = "pruned unreachable state '" + r + "'";
    if (warnings) warnings->push_back(msg);
    else std::cerr << "warning: " << msg << '\n';
  }
  if (alphabet_out) *alphabet_out = std::make_shared<const Alphabet>(*alphabet);
  return spec;
}

inline std::string render_fsgm_text(const FSGMSpec& spec, const Alphabet& alphabet) {
  std::ostringstream os;
  os << "alphabet ";
  for (const auto& tok : alphabet.tokens()) os << tok;
  os << "\ninitial " << spec.name(spec.initial()) << '\n';
  for (std::uint32_t z = 0; z < spec.states(); ++z) {
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << spec.delta(z)); ++w) {
      os << spec.name(z) << ' ' << word_string(w, spec.delta(z)) << ' '
         << alphabet.token(spec.output(z, w)) << ' ' << spec.name(spec.next(z, w)) << '\n';
    }
  }
  return os.str();
}

}  // namespace lzguess
