#include <gtest/gtest.h>

#include <random>

#include "lzguess/corpus.hpp"
#include "lzguess/lz78.hpp"
#include "oracles.hpp"

using namespace lzguess;

namespace {

std::vector<std::string> phrase_strings(const SymbolSeq& x, const ParseResult& p) {
  std::vector<std::string> out;
  for (const auto& ph : p.phrases) out.push_back(render(x.slice(ph.offset, ph.length)));
  return out;
}

}  // namespace

TEST(IncrementalParse, WorkedExample) {
  auto x = make_seq("abbabaabbaaabaa", "ab");
  auto p = incremental_parse(x);
  EXPECT_EQ(phrase_strings(x, p), (std::vector<std::string>{"a", "b", "ba", "baa", "bb", "aa", "ab", "aa"}));
  EXPECT_EQ(p.c_lz(), 8u);
  EXPECT_FALSE(p.last_complete);
}

TEST(IncrementalParse, SmallCases) {
  auto x = make_seq("aaaa", "ab");
  auto p = incremental_parse(x);
  EXPECT_EQ(phrase_strings(x, p), (std::vector<std::string>{"a", "aa", "a"}));
  EXPECT_FALSE(p.last_complete);
  auto y = make_seq("aab", "ab");
  EXPECT_TRUE(incremental_parse(y).last_complete);
}

TEST(IncrementalParse, MatchesNaiveParseExhaustively) {
  for (std::size_t n = 1; n <= 10; ++n) {
    for (const auto& x : oracle::all_sequences(n, 2)) {
      auto p = incremental_parse(x, 2);
      auto q = oracle::naive_parse(x);
      ASSERT_EQ(p.c_lz(), q.phrases.size());
      ASSERT_EQ(p.last_complete, q.last_complete);
      for (std::size_t j = 0; j < p.c_lz(); ++j) {
        ASSERT_EQ(p.trie.word(p.phrases[j].node), q.phrases[j]);
      }
      ASSERT_EQ(code_length(p), oracle::naive_code_length(x, 2));
    }
  }
}

TEST(IncrementalParse, TernaryAgainstNaive) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<Symbol> x(1 + rng() % 300);
    for (auto& s : x) s = static_cast<Symbol>(rng() % 3);
    ASSERT_EQ(code_length(x, 3), oracle::naive_code_length(x, 3));
  }
}

TEST(CodeLength, KraftExhaustive) {
  for (std::size_t n = 1; n <= 12; ++n) {
    DyadicProb sum;
    for (const auto& x : oracle::all_sequences(n, 2)) sum += DyadicProb::pow2(static_cast<std::uint32_t>(code_length(x, 2)));
    EXPECT_LE(sum, DyadicProb::one()) << "n=" << n;
  }
}

TEST(Codec, RoundTripExhaustive) {
  for (std::size_t n = 1; n <= 10; ++n) {
    for (const auto& x : oracle::all_sequences(n, 2)) {
      auto bits = encode(x, 2);
      ASSERT_EQ(bits.size(), code_length(x, 2));
      ASSERT_EQ(decode(bits, n, 2), x);
    }
  }
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const auto& x : oracle::all_sequences(n, 3)) ASSERT_EQ(decode(encode(x, 3), n, 3), x);
  }
}

TEST(Codec, RoundTripCorpora) {
  auto A = std::make_shared<const Alphabet>(parse_alphabet_spec("ab"));
  for (const char* k : {"periodic:ab", "bernoulli:0.3:1", "thue_morse"}) {
    auto x = generate_corpus(parse_corpus_kind(k), 4096, A);
    auto packed = pack_bits(encode(x));
    EXPECT_EQ(decode(unpack_bits(packed), x.size(), A), x) << k;
  }
}

TEST(Codec, CorruptStreamsAreRejected) {
  auto x = make_seq("abbabaabbaaabaa", "ab");
  auto bits = encode(x);
  auto truncated = bits;
  truncated.pop_back();
  EXPECT_THROW(decode(truncated, x.size(), 2), DecodeError);
  auto extra = bits;
  extra.push_back(0);
  EXPECT_THROW(decode(extra, x.size(), 2), DecodeError);
  // Second phrase pointer 1 (="a") with symbol 0 gives "aa"; then phrase 3
  // pointer 3 is beyond a 3-entry dictionary.
  Bits bad{0, 1, 0, 1, 1, 0};
  EXPECT_THROW(decode(bad, 6, 2), DecodeError);
  // Symbol 2 is out of range for alpha = 3 when coded in 2 bits as 3.
  Bits sym{1, 1};
  EXPECT_THROW(decode(sym, 1, 3), DecodeError);
  // Phrase 2 = pointer 0 + symbol 0 repeats phrase 1.
  Bits dup{0, 0, 0};
  EXPECT_THROW(decode(dup, 2, 2), DecodeError);
}

TEST(Codec, PackedHeader) {
  Bits b{1, 0, 1, 1, 0, 0, 0, 0, 1};
  auto p = pack_bits(b);
  ASSERT_EQ(p.size(), 10u);
  EXPECT_EQ(p[0], 9u);
  EXPECT_EQ(p[8], 0xB0u);
  EXPECT_EQ(p[9], 0x80u);
  EXPECT_EQ(unpack_bits(p), b);
  p.pop_back();
  EXPECT_THROW(unpack_bits(p), DecodeError);
}

TEST(Oracle, MatchesBruteForcePartitions) {
  for (std::size_t n = 1; n <= 10; ++n) {
    for (const auto& x : oracle::all_sequences(n, 2)) {
      ASSERT_EQ(c_max_oracle(x), oracle::max_distinct_partition(x)) << n;
    }
  }
}

TEST(Oracle, CLzWithinOneOfMaximum) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    std::vector<Symbol> x(11 + rng() % 4);
    for (auto& s : x) s = static_cast<Symbol>(rng() & 1U);
    ASSERT_LE(incremental_parse(x, 2).c_lz(), c_max_oracle(x) + 1);
  }
}

TEST(Oracle, RefusesLargeInputs) {
  std::vector<Symbol> x(25, 0);
  EXPECT_THROW(c_max_oracle(x), BudgetError);
  EXPECT_EQ(c_max_oracle(std::vector<Symbol>{}), 0u);
}
