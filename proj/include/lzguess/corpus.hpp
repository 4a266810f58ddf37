#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <variant>

#include "lzguess/bitsource.hpp"
#include "lzguess/seqcore.hpp"

namespace lzguess {

struct PeriodicCorpus {
  std::string pattern;
};
struct BernoulliCorpus {
  double p = 0.5;  // probability of the second alphabet symbol
  std::uint64_t seed = 0;
};
struct ThueMorseCorpus {};
struct FileCorpus {
  std::string path;
  IngestMode mode = IngestMode::text;
};

using CorpusKind = std::variant<PeriodicCorpus, BernoulliCorpus, ThueMorseCorpus, FileCorpus>;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Deterministic test corpora. Binary kinds use the first two alphabet symbols.
inline SymbolSeq generate_corpus(const CorpusKind& kind, std::size_t n, AlphabetPtr alphabet) {
  if (n == 0) throw PreconditionError("corpus length must be >= 1");
  if (!alphabet) alphabet = std::make_shared<const Alphabet>(parse_alphabet_spec("ab"));
  std::vector<Symbol> out;
  out.reserve(n);

  if (const auto* per = std::get_if<PeriodicCorpus>(&kind)) {
    if (per->pattern.empty()) throw PreconditionError("periodic pattern must be nonempty");
    const SymbolSeq pat = ingest(per->pattern, alphabet);
    if (pat.empty()) throw PreconditionError("periodic pattern must be nonempty");
    for (std::size_t i = 0; i < n; ++i) out.push_back(pat[i % pat.size()]);
  } else if (const auto* ber = std::get_if<BernoulliCorpus>(&kind)) {
    if (!(ber->p >= 0.0 && ber->p <= 1.0)) throw PreconditionError("bernoulli p must lie in [0,1]");
    BitSource bits(ber->seed, 0);
    for (std::size_t i = 0; i < n; ++i) out.push_back(bits.uniform01() < ber->p ? 1 : 0);
  } else if (std::holds_alternative<ThueMorseCorpus>(kind)) {
    // t(k) = parity of popcount(k), i.e. t(2k) = t(k), t(2k+1) = 1 - t(k).
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::popcount(i) & 1U);
  } else {
    const auto& file = std::get<FileCorpus>(kind);
    SymbolSeq all = ingest(read_file(file.path), alphabet, file.mode);
    if (all.size() < n) {
      throw PreconditionError("file '" + file.path + "' has only " + std::to_string(all.size()) +
                              " symbols, " + std::to_string(n) + " requested");
    }
    return all.slice(0, n);
  }
  return SymbolSeq(std::move(alphabet), std::move(out));
}

// Parses "periodic:ab", "bernoulli:0.5:7", "thue_morse", "file:path".
inline CorpusKind parse_corpus_kind(const std::string& spec) {
  auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "periodic") return PeriodicCorpus{rest};
  if (head == "thue_morse" || head == "thue-morse") return ThueMorseCorpus{};
  if (head == "file") return FileCorpus{rest};
  if (head == "bernoulli") {
    BernoulliCorpus b;
    auto c2 = rest.find(':');
    try {
      b.p = std::stod(rest.substr(0, c2));
      if (c2 != std::string::npos) b.seed = std::stoull(rest.substr(c2 + 1));
    } catch (const std::exception&) {
      throw PreconditionError("malformed bernoulli corpus spec '" + spec + "'");
    }
    return b;
  }
  throw PreconditionError("unknown corpus kind '" + spec + "'");
}

}  // namespace lzguess
