#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lzguess/error.hpp"
#include "lzguess/seqcore.hpp"

namespace lzguess {

// ceil(log2 v) for v >= 1; 0 for v <= 1.
constexpr unsigned ceil_log2(std::uint64_t v) noexcept {
  return v <= 1 ? 0U : static_cast<unsigned>(std::bit_width(v - 1));
}

// Phrase dictionary of an incremental parse. Node 0 is the empty word; node ids
// follow insertion order. Sibling edge symbols are distinct.
class ParseTrie {
 public:
  struct Node {
    std::uint32_t parent;
    Symbol symbol;
    std::uint32_t depth;
  };

  explicit ParseTrie(std::size_t alpha) : alpha_(alpha) { nodes_.push_back({0, 0, 0}); }

  std::size_t alpha() const noexcept { return alpha_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::uint32_t id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  std::optional<std::uint32_t> child(std::uint32_t id, Symbol s) const {
    auto it = edges_.find(key(id, s));
    if (it == edges_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t add(std::uint32_t parent, Symbol s) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    if (!edges_.emplace(key(parent, s), id).second) {
      throw PreconditionError("trie edge already present");
    }
    nodes_.push_back({parent, s, nodes_[parent].depth + 1});
    return id;
  }

  std::vector<Symbol> word(std::uint32_t id) const {
    std::vector<Symbol> w(nodes_.at(id).depth);
    for (auto k = w.size(); k > 0; --k) {
      w[k - 1] = nodes_[id].symbol;
      id = nodes_[id].parent;
    }
    return w;
  }

  // True if `anc` lies on the root path of `id` (inclusive).
  bool is_ancestor(std::uint32_t anc, std::uint32_t id) const {
    const auto d = nodes_[anc].depth;
    while (nodes_[id].depth > d) id = nodes_[id].parent;
    return id == anc;
  }

 private:
  std::uint64_t key(std::uint32_t id, Symbol s) const noexcept {
    return static_cast<std::uint64_t>(id) * alpha_ + s;
  }

  std::size_t alpha_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> edges_;
};

struct Phrase {
  std::size_t offset;
  std::size_t length;
  std::uint32_t node;  // trie node spelling this phrase
};

struct ParseResult {
  std::vector<Phrase> phrases;
  bool last_complete = true;
  ParseTrie trie;
  std::size_t alpha;
  std::uint64_t code_bits = 0;

  std::size_t c_lz() const noexcept { return phrases.size(); }
};

// Per-phrase cost of the LZ78 code: phrase j (1-based) points among the j
// current trie nodes, then names one symbol. An incomplete final phrase is a
// bare pointer.
inline std::uint64_t phrase_code_bits(std::size_t j, bool complete, std::size_t alpha) {
  return ceil_log2(j) + (complete ? ceil_log2(alpha) : 0U);
}

// LZ78 incremental parse: each phrase is the shortest string not yet seen as a
// phrase; the last phrase may repeat an earlier one (incomplete).
inline ParseResult incremental_parse(std::span<const Symbol> x, std::size_t alpha) {
  ParseResult r{{}, true, ParseTrie(alpha), alpha, 0};
  const std::size_t n = x.size();
  std::size_t i = 0;
  while (i < n) {
    std::uint32_t cur = 0;
    std::size_t j = i;
    while (j < n) {
      auto c = r.trie.child(cur, x[j]);
      if (!c) break;
      cur = *c;
      ++j;
    }
    const std::size_t index = r.phrases.size() + 1;
    if (j == n) {
      r.phrases.push_back({i, j - i, cur});
      r.last_complete = false;
      r.code_bits += phrase_code_bits(index, false, alpha);
      break;
    }
    const auto id = r.trie.add(cur, x[j]);
    r.phrases.push_back({i, j + 1 - i, id});
    r.code_bits += phrase_code_bits(index, true, alpha);
    i = j + 1;
  }
  return r;
}

inline ParseResult incremental_parse(const SymbolSeq& x) {
  return incremental_parse(x.symbols(), x.alpha());
}

inline std::uint64_t code_length(const ParseResult& p) { return p.code_bits; }

inline std::uint64_t code_length(std::span<const Symbol> x, std::size_t alpha) {
  return incremental_parse(x, alpha).code_bits;
}

using Bits = std::vector<std::uint8_t>;  // one bit per element, 0 or 1

inline void put_bits(Bits& out, std::uint64_t value, unsigned width) {
  for (unsigned k = width; k > 0; --k) out.push_back(static_cast<std::uint8_t>((value >> (k - 1)) & 1U));
}

// Bit reader over a Bits buffer that reports the failing position.
class BitCursor {
 public:
  explicit BitCursor(std::span<const std::uint8_t> bits) : bits_(bits) {}
  std::uint64_t read(unsigned width) {
    if (pos_ + width > bits_.size()) throw DecodeError("truncated code stream", bits_.size());
    std::uint64_t v = 0;
    for (unsigned k = 0; k < width; ++k) v = (v << 1) | (bits_[pos_++] & 1U);
    return v;
  }
  std::size_t position() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bits_.size(); }

 private:
  std::span<const std::uint8_t> bits_;
  std::size_t pos_ = 0;
};

inline Bits encode(std::span<const Symbol> x, std::size_t alpha) {
  const ParseResult p = incremental_parse(x, alpha);
  Bits out;
  out.reserve(p.code_bits);
  const unsigned sym_w = ceil_log2(alpha);
  for (std::size_t j = 1; j <= p.phrases.size(); ++j) {
    const Phrase& ph = p.phrases[j - 1];
    const bool complete = j < p.phrases.size() || p.last_complete;
    const std::uint32_t ptr = complete ? p.trie.node(ph.node).parent : ph.node;
    put_bits(out, ptr, ceil_log2(j));
    if (complete) put_bits(out, x[ph.offset + ph.length - 1], sym_w);
  }
  return out;
}

inline Bits encode(const SymbolSeq& x) { return encode(x.symbols(), x.alpha()); }

// Inverts encode given the true length n. A pointer whose word exactly fills
// the remaining length marks the incomplete final phrase.
inline std::vector<Symbol> decode(std::span<const std::uint8_t> bits, std::size_t n,
                                  std::size_t alpha) {
  ParseTrie trie(alpha);
  std::vector<std::vector<Symbol>> words{{}};
  std::vector<Symbol> out;
  out.reserve(n);
  BitCursor cur(bits);
  const unsigned sym_w = ceil_log2(alpha);
  std::size_t j = 0;
  while (out.size() < n) {
    ++j;
    const std::size_t at = cur.position();
    const auto ptr = cur.read(ceil_log2(j));
    if (ptr >= trie.size()) throw DecodeError("pointer beyond dictionary", at);
    const auto& w = words[ptr];
    const std::size_t remaining = n - out.size();
    if (w.size() > remaining) throw DecodeError("phrase overruns the declared length", at);
    out.insert(out.end(), w.begin(), w.end());
    if (w.size() == remaining) {
      if (ptr == 0) throw DecodeError("empty final phrase", at);
      break;
    }
    const std::size_t sym_at = cur.position();
    const auto s = cur.read(sym_w);
    if (s >= alpha) throw DecodeError("symbol index out of range", sym_at);
    if (trie.child(static_cast<std::uint32_t>(ptr), static_cast<Symbol>(s))) {
      throw DecodeError("phrase repeats an existing dictionary entry", sym_at);
    }
    trie.add(static_cast<std::uint32_t>(ptr), static_cast<Symbol>(s));
    auto nw = w;
    nw.push_back(static_cast<Symbol>(s));
    out.push_back(static_cast<Symbol>(s));
    words.push_back(std::move(nw));
  }
  if (!cur.at_end()) throw DecodeError("trailing bits after the last phrase", cur.position());
  return out;
}

inline SymbolSeq decode(std::span<const std::uint8_t> bits, std::size_t n, AlphabetPtr alphabet) {
  return SymbolSeq(alphabet, decode(bits, n, alphabet->size()));
}

// Packed form: 8-byte little-endian bit count, then bits MSB-first per byte.
inline std::vector<std::uint8_t> pack_bits(const Bits& bits) {
  std::vector<std::uint8_t> out(8 + (bits.size() + 7) / 8, 0);
  std::uint64_t count = bits.size();
  for (int k = 0; k < 8; ++k) out[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(count >> (8 * k));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[8 + i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return out;
}

inline Bits unpack_bits(std::span<const std::uint8_t> packed) {
  if (packed.size() < 8) throw DecodeError("missing 8-byte length header", 0);
  std::uint64_t count = 0;
  for (int k = 7; k >= 0; --k) count = (count << 8) | packed[static_cast<std::size_t>(k)];
  if ((count + 7) / 8 != packed.size() - 8) {
    throw DecodeError("packed payload size does not match header", 64);
  }
  Bits bits(count);
  for (std::size_t i = 0; i < count; ++i) bits[i] = (packed[8 + i / 8] >> (7 - i % 8)) & 1U;
  return bits;
}

inline constexpr std::size_t kMaxOracleLength = 24;

namespace detail {

// Identifies each substring x[b, b+len) by its first occurrence, so equal
// contents share one key regardless of alphabet size.
inline std::vector<std::uint64_t> first_occurrence_keys(std::span<const Symbol> x) {
  const std::size_t n = x.size();
  std::vector<std::uint64_t> keys(n * (n + 1), 0);
  for (std::size_t len = 1; len <= n; ++len) {
    for (std::size_t b = 0; b + len <= n; ++b) {
      std::size_t first = b;
      for (std::size_t a = 0; a < b; ++a) {
        if (std::equal(x.begin() + static_cast<std::ptrdiff_t>(a),
                       x.begin() + static_cast<std::ptrdiff_t>(a + len),
                       x.begin() + static_cast<std::ptrdiff_t>(b))) {
          first = a;
          break;
        }
      }
      keys[b * (n + 1) + len] = static_cast<std::uint64_t>(first) * 64 + len;
    }
  }
  return keys;
}

struct OracleSearch {
  std::span<const Symbol> x;
  std::vector<std::uint64_t> keys;
  std::vector<std::uint64_t> used;  // sorted
  std::unordered_map<std::string, int> memo;

  std::string state_key(std::size_t pos) const {
    std::string s(reinterpret_cast<const char*>(&pos), sizeof pos);
    s.append(reinterpret_cast<const char*>(used.data()), used.size() * sizeof(std::uint64_t));
    return s;
  }

  // Max number of further distinct phrases covering x[pos..); -1 if impossible.
  int best_from(std::size_t pos) {
    if (pos == x.size()) return 0;
    const std::string key = state_key(pos);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int best = -1;
    for (std::size_t len = 1; pos + len <= x.size(); ++len) {
      const auto k = keys[pos * (x.size() + 1) + len];
      auto where = std::lower_bound(used.begin(), used.end(), k);
      if (where != used.end() && *where == k) continue;
      where = used.insert(where, k);
      const int sub = best_from(pos + len);
      used.erase(std::lower_bound(used.begin(), used.end(), k));
      if (sub >= 0) best = std::max(best, sub + 1);
    }
    memo.emplace(key, best);
    return best;
  }
};

}  // namespace detail

// Largest number of pairwise distinct phrases whose concatenation is x.
inline std::size_t c_max_oracle(std::span<const Symbol> x) {
  if (x.size() > kMaxOracleLength) {
    throw BudgetError("c_max_oracle is exponential and capped at n <= 24 (got n = " +
                      std::to_string(x.size()) + "); use the incremental-parse count c_lz instead");
  }
  if (x.empty()) return 0;
  detail::OracleSearch s{x, detail::first_occurrence_keys(x), {}, {}};
  return static_cast<std::size_t>(s.best_from(0));
}

inline std::size_t c_max_oracle(const SymbolSeq& x) { return c_max_oracle(x.symbols()); }

}  // namespace lzguess
