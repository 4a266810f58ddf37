#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lzguess/error.hpp"

namespace lzguess {

using Symbol = std::uint32_t;

// Ordered set of distinct tokens; token i has index i.
class Alphabet {
 public:
  explicit Alphabet(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2) {
      throw PreconditionError("alphabet needs at least 2 distinct symbols");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<Symbol>(i)).second) {
        throw PreconditionError("duplicate alphabet token '" + tokens_[i] + "'");
      }
    }
  }

  // Binary alphabet {"0","1"} (or any two tokens).
  static Alphabet binary() { return Alphabet({"0", "1"}); }

  // Tokens "0".."k-1" for k <= 10, otherwise decimal indices.
  static Alphabet numeric(std::size_t size) {
    std::vector<std::string> t;
    t.reserve(size);
    for (std::size_t i = 0; i < size; ++i) t.push_back(std::to_string(i));
    return Alphabet(std::move(t));
  }

  // One token per byte value 0..255.
  static Alphabet bytes() {
    std::vector<std::string> t;
    for (int b = 0; b < 256; ++b) t.emplace_back(1, static_cast<char>(b));
    return Alphabet(std::move(t));
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(Symbol s) const { return tokens_.at(s); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool contains(std::string_view tok) const { return index_.count(std::string(tok)) != 0; }
  Symbol index_of(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    if (it == index_.end()) throw PreconditionError("token not in alphabet");
    return it->second;
  }
  const Symbol* find(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    return it == index_.end() ? nullptr : &it->second;
  }

  bool operator==(const Alphabet& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Symbol> index_;
};

using AlphabetPtr = std::shared_ptr<const Alphabet>;

// An individual sequence over a shared alphabet.
class SymbolSeq {
 public:
  SymbolSeq(AlphabetPtr alphabet, std::vector<Symbol> symbols)
      : alphabet_(std::move(alphabet)), symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (symbols_[i] >= alphabet_->size()) {
        throw PreconditionError("symbol index out of range at position " + std::to_string(i + 1));
      }
    }
  }

  const Alphabet& alphabet() const noexcept { return *alphabet_; }
  const AlphabetPtr& alphabet_ptr() const noexcept { return alphabet_; }
  std::size_t alpha() const noexcept { return alphabet_->size(); }
  std::size_t size() const noexcept { return symbols_.size(); }
  bool empty() const noexcept { return symbols_.empty(); }
  std::span<const Symbol> symbols() const noexcept { return symbols_; }
  Symbol operator[](std::size_t i) const { return symbols_[i]; }

  SymbolSeq slice(std::size_t begin, std::size_t len) const {
    return SymbolSeq(alphabet_, {symbols_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 symbols_.begin() + static_cast<std::ptrdiff_t>(begin + len)});
  }

  bool operator==(const SymbolSeq& o) const {
    return *alphabet_ == *o.alphabet_ && symbols_ == o.symbols_;
  }

 private:
  AlphabetPtr alphabet_;
  std::vector<Symbol> symbols_;
};

namespace detail {

// Splits UTF-8 text into scalar values, each returned as its byte sequence.
inline std::vector<std::string> utf8_scalars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    if (i + len > text.size()) len = text.size() - i;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace detail

enum class IngestMode {
  text,             // one token per Unicode scalar value; CR/LF skipped unless in alphabet
  bytes,            // one token per byte
  symbol_per_line,  // one token per non-empty line
};

// Tokenizes raw input according to mode.
inline std::vector<std::string> tokenize(std::string_view input, IngestMode mode) {
  std::vector<std::string> toks;
  switch (mode) {
    case IngestMode::text:
      return detail::utf8_scalars(input);
    case IngestMode::bytes:
      for (char c : input) toks.emplace_back(1, c);
      return toks;
    case IngestMode::symbol_per_line: {
      std::size_t start = 0;
      while (start <= input.size()) {
        auto end = input.find('\n', start);
        if (end == std::string_view::npos) end = input.size();
        std::string_view line = input.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) toks.emplace_back(line);
        start = end + 1;
      }
      return toks;
    }
  }
  return toks;
}

// Alphabet given inline as its tokens, e.g. "ab" -> {a, b}.
inline Alphabet parse_alphabet_spec(std::string_view spec) {
  return Alphabet(detail::utf8_scalars(spec));
}

// Distinct tokens of the input, sorted bytewise.
inline Alphabet infer_alphabet(const std::vector<std::string>& toks) {
  std::vector<std::string> distinct(toks.begin(), toks.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.empty()) throw IngestError("cannot infer an alphabet from empty input", 0);
  if (distinct.size() < 2) {
    throw IngestError("input has a single distinct symbol; declare the alphabet explicitly", 0);
  }
  return Alphabet(std::move(distinct));
}

// Maps input tokens to indices. A null alphabet means "infer from the input".
inline SymbolSeq ingest(std::string_view input, AlphabetPtr alphabet,
                        IngestMode mode = IngestMode::text) {
  auto toks = tokenize(input, mode);
  if (!alphabet) alphabet = std::make_shared<const Alphabet>(infer_alphabet(toks));
  std::vector<Symbol> idx;
  idx.reserve(toks.size());
  std::size_t position = 0;
  for (const auto& t : toks) {
    ++position;
    if (const Symbol* s = alphabet->find(t)) {
      idx.push_back(*s);
    } else if (mode == IngestMode::text && (t == "\n" || t == "\r")) {
      continue;
    } else {
      throw IngestError("unknown token '" + t + "' at position " + std::to_string(position),
                        position);
    }
  }
  return SymbolSeq(std::move(alphabet), std::move(idx));
}

inline SymbolSeq ingest(std::string_view input, const Alphabet& alphabet,
                        IngestMode mode = IngestMode::text) {
  return ingest(input, std::make_shared<const Alphabet>(alphabet), mode);
}

// Inverse of ingest for text/bytes mode; symbol_per_line joins with '\n'.
inline std::string render(const SymbolSeq& seq, IngestMode mode = IngestMode::text) {
  std::string out;
  for (Symbol s : seq.symbols()) {
    out += seq.alphabet().token(s);
    if (mode == IngestMode::symbol_per_line) out += '\n';
  }
  return out;
}

// Convenience for tests and examples: "abba" over alphabet "ab".
inline SymbolSeq make_seq(std::string_view text, std::string_view alphabet_spec) {
  return ingest(text, parse_alphabet_spec(alphabet_spec));
}

}  // namespace lzguess
