#pragma once

// Brute-force reference implementations used only by the tests. They share no
// code with the library beyond the value types.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lzguess/bitsource.hpp"
#include "lzguess/dyadic.hpp"
#include "lzguess/error.hpp"
#include "lzguess/seqcore.hpp"

namespace oracle {

using lzguess::DyadicProb;
using lzguess::Symbol;
using Word = std::vector<Symbol>;

// All alpha^n sequences in lexicographic order.
inline std::vector<Word> all_sequences(std::size_t n, std::size_t alpha) {
  std::vector<Word> out;
  Word w(n, 0);
  for (;;) {
    out.push_back(w);
    std::size_t i = n;
    while (i > 0 && w[i - 1] + 1 == alpha) w[--i] = 0;
    if (i == 0) break;
    ++w[i - 1];
  }
  return out;
}

inline Word from_bits(std::uint64_t v, std::size_t n) {
  Word w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<Symbol>((v >> (n - 1 - i)) & 1U);
  return w;
}

// Exact output law of a bit-driven process, by exploring every bit prefix it
// actually reads: run(bits) is retried with one more bit whenever the fixed
// supply runs dry. Each completed run of k bits carries mass 2^-k.
inline std::map<Word, DyadicProb> bit_tree_distribution(const std::function<Word(lzguess::FixedBits&)>& run,
                                                        std::size_t max_bits = 40) {
  std::map<Word, DyadicProb> dist;
  std::vector<std::vector<unsigned>> stack{{}};
  while (!stack.empty()) {
    auto prefix = std::move(stack.back());
    stack.pop_back();
    lzguess::FixedBits bits(prefix, false);
    try {
      Word out = run(bits);
      if (bits.consumed() != prefix.size()) throw std::logic_error("prefix not fully consumed");
      dist[out] += DyadicProb::pow2(static_cast<std::uint32_t>(prefix.size()));
    } catch (const lzguess::DecodeError&) {
      if (prefix.size() >= max_bits) throw std::logic_error("bit tree deeper than expected");
      for (unsigned b : {1U, 0U}) {
        auto next = prefix;
        next.push_back(b);
        stack.push_back(std::move(next));
      }
    }
  }
  return dist;
}

// Incremental parse on plain strings with a std::set dictionary.
struct NaiveParse {
  std::vector<Word> phrases;
  bool last_complete = true;
};

inline NaiveParse naive_parse(const Word& x) {
  NaiveParse p;
  std::set<Word> dict;
  Word cur;
  for (Symbol s : x) {
    cur.push_back(s);
    if (!dict.count(cur)) {
      dict.insert(cur);
      p.phrases.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) {
    p.phrases.push_back(cur);
    p.last_complete = false;
  }
  return p;
}

inline unsigned clog2(std::uint64_t v) {
  unsigned w = 0;
  while ((std::uint64_t{1} << w) < v) ++w;
  return w;
}

// Code length of the LZ78 code from the naive parse.
inline std::uint64_t naive_code_length(const Word& x, std::size_t alpha) {
  const auto p = naive_parse(x);
  std::uint64_t bits = 0;
  for (std::size_t j = 1; j <= p.phrases.size(); ++j) {
    const bool complete = j < p.phrases.size() || p.last_complete;
    bits += complete ? clog2(j) + clog2(alpha) : clog2(j);
  }
  return bits;
}

// Largest number of pairwise distinct phrases over all 2^(n-1) partitions.
inline std::size_t max_distinct_partition(const Word& x) {
  const std::size_t n = x.size();
  if (n == 0) return 0;
  std::size_t best = 0;
  for (std::uint64_t cuts = 0; cuts < (std::uint64_t{1} << (n - 1)); ++cuts) {
    std::set<Word> seen;
    bool ok = true;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= n && ok; ++i) {
      if (i == n || ((cuts >> (i - 1)) & 1U)) {
        ok = seen.insert(Word(x.begin() + static_cast<std::ptrdiff_t>(start), x.begin() + static_cast<std::ptrdiff_t>(i))).second;
        start = i;
      }
    }
    if (ok) best = std::max(best, seen.size());
  }
  return best;
}

}  // namespace oracle
