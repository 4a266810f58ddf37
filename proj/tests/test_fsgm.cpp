#include <gtest/gtest.h>

#include <random>

#include "lzguess/bounds.hpp"
#include "lzguess/fsgm.hpp"
#include "oracles.hpp"

using namespace lzguess;

namespace {

FSGMSpec random_machine(std::size_t states, std::size_t alpha, std::mt19937_64& rng, unsigned max_delta = 2) {
  std::vector<std::string> names;
  std::vector<unsigned> delta;
  std::vector<std::vector<Symbol>> out;
  std::vector<std::vector<std::uint32_t>> next;
  for (std::size_t z = 0; z < states; ++z) {
    names.push_back("s" + std::to_string(z));
    const unsigned d = static_cast<unsigned>(rng() % (max_delta + 1));
    delta.push_back(d);
    out.emplace_back();
    next.emplace_back();
    for (std::size_t w = 0; w < (std::size_t{1} << d); ++w) {
      out.back().push_back(static_cast<Symbol>(rng() % alpha));
      next.back().push_back(static_cast<std::uint32_t>(rng() % states));
    }
  }
  return FSGMSpec(alpha, names, 0, delta, out, next);
}

std::string as_text(const std::vector<Symbol>& v) {
  std::string s;
  for (Symbol x : v) s += static_cast<char>('a' + x);
  return s;
}

std::vector<Symbol> from_text(const std::string& s) {
  std::vector<Symbol> v;
  for (char c : s) v.push_back(static_cast<Symbol>(c - 'a'));
  return v;
}

}  // namespace

TEST(FSGMSpec, Validation) {
  EXPECT_THROW(FSGMSpec(2, {"z"}, 0, {1}, {{0}}, {{0, 0}}), PreconditionError);       // partial output table
  EXPECT_THROW(FSGMSpec(2, {"z"}, 0, {0}, {{0}}, {{1}}), PreconditionError);          // next out of range
  EXPECT_THROW(FSGMSpec(2, {"z"}, 0, {0}, {{2}}, {{0}}), PreconditionError);          // output out of range
  EXPECT_THROW(FSGMSpec(2, {"z"}, 0, {17}, {{}}, {{}}), PreconditionError);           // too many bits
  EXPECT_THROW(FSGMSpec(2, {"z"}, 1, {0}, {{0}}, {{0}}), PreconditionError);          // initial
  EXPECT_NO_THROW(FSGMSpec(2, {"z"}, 0, {1}, {{0, 1}}, {{0, 0}}));
}

TEST(Run, TraceFollowsRecursion) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    auto m = random_machine(3, 3, rng);
    BitSource bits(9, static_cast<std::uint64_t>(t));
    auto tr = run(m, bits, 20);
    ASSERT_EQ(tr.output.size(), 20u);
    ASSERT_EQ(tr.states.front(), m.initial());
    for (std::size_t i = 0; i < 20; ++i) {
      const auto z = tr.states[i];
      ASSERT_EQ(tr.cursor[i + 1], tr.cursor[i] + m.delta(z));
      ASSERT_EQ(tr.word_widths[i], m.delta(z));
      ASSERT_EQ(tr.output[i], m.output(z, tr.words[i]));
      ASSERT_EQ(tr.states[i + 1], m.next(z, tr.words[i]));
    }
    ASSERT_EQ(tr.bits_consumed(), bits.consumed());
  }
}

TEST(ThreeWordMachine, AllZerosRepeatsFirstWord) {
  auto m = build_three_word_machine();
  EXPECT_EQ(m.states(), 7u);
  FixedBits zeros({});
  EXPECT_EQ(as_text(run(m, zeros, 6).output), "ababab");
}

TEST(ThreeWordMachine, ForcedPrefix) {
  auto m = build_three_word_machine();
  EXPECT_EQ(sequence_prob(m, from_text("ab")), DyadicProb::one());
  EXPECT_TRUE(sequence_prob(m, from_text("ba")).is_zero());
  EXPECT_EQ(sequence_prob(m, from_text("abb")), DyadicProb(1, 2));
  EXPECT_EQ(sequence_prob(m, from_text("abc")), DyadicProb(1, 2));
}

TEST(ThreeWordMachine, MapsEveryFourBitInput) {
  const std::map<std::string, std::string> words{{"00", "ab"}, {"01", "ab"}, {"10", "bac"}, {"11", "ca"}};
  auto m = build_three_word_machine();
  for (unsigned v = 0; v < 16; ++v) {
    std::vector<unsigned> bits{(v >> 3) & 1U, (v >> 2) & 1U, (v >> 1) & 1U, v & 1U};
    const std::string c1{char('0' + bits[0]), char('0' + bits[1])};
    const std::string c2{char('0' + bits[2]), char('0' + bits[3])};
    const std::string expect = "ab" + words.at(c1) + words.at(c2);
    FixedBits src(bits, true);
    auto tr = run(m, src, expect.size());
    EXPECT_EQ(as_text(tr.output), expect) << c1 << c2;
    // Bits are read at the last symbol of each word.
    EXPECT_EQ(tr.cursor[2], 2u);
    EXPECT_EQ(tr.cursor[2 + words.at(c1).size()], 4u);
  }
}

TEST(SequenceProb, MatchesBitTreeOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 40; ++t) {
    auto m = random_machine(1 + rng() % 3, 2, rng);
    const std::size_t n = 1 + rng() % 5;
    auto dist = oracle::bit_tree_distribution([&](FixedBits& b) { return run(m, b, n).output; });
    DyadicProb total;
    for (const auto& x : oracle::all_sequences(n, 2)) {
      const auto p = sequence_prob(m, x);
      auto it = dist.find(x);
      ASSERT_EQ(p, it == dist.end() ? DyadicProb::zero() : it->second);
      total += p;
    }
    ASSERT_EQ(total, DyadicProb::one());
  }
}

TEST(OutputDistribution, AgreesWithSequenceProb) {
  std::mt19937_64 rng(3);
  auto m = random_machine(3, 3, rng);
  auto d = output_distribution(m, 5);
  DyadicProb total;
  for (const auto& [x, p] : d) {
    EXPECT_EQ(p, sequence_prob(m, x));
    total += p;
  }
  EXPECT_EQ(total, DyadicProb::one());
  EXPECT_THROW(output_distribution(m, 20), BudgetError);
}

TEST(TreeMachine, ExpansionInheritsLabels) {
  TreeFSGMSpec t{2, {"A", "B"}, 0, {{{"0", 0, 0}, {"10", 1, 1}, {"11", 1, 0}}, {{"", 0, 0}}}};
  auto m = expand_tree_machine(t);
  EXPECT_EQ(m.delta(0), 2u);
  EXPECT_EQ(m.output(0, 0b00), 0u);
  EXPECT_EQ(m.output(0, 0b01), 0u);
  EXPECT_EQ(m.next(0, 0b10), 1u);
  EXPECT_EQ(m.delta(1), 0u);
}

TEST(TreeMachine, RejectsBadTrees) {
  TreeFSGMSpec gap{2, {"A"}, 0, {{{"0", 0, 0}, {"10", 1, 0}}}};
  EXPECT_THROW(expand_tree_machine(gap), PreconditionError);
  TreeFSGMSpec overlap{2, {"A"}, 0, {{{"0", 0, 0}, {"01", 1, 0}, {"1", 1, 0}}}};
  EXPECT_THROW(expand_tree_machine(overlap), PreconditionError);
}

TEST(TextFormat, ParseRenderRoundTrip) {
  const std::string text =
      "# toy machine\n"
      "alphabet ab\n"
      "initial P\n"
      "P 0 a P\n"
      "P 1 b Q\n"
      "Q - a P   # idle state\n"
      "R - b R\n";
  AlphabetPtr A;
  std::vector<std::string> warnings;
  auto m = parse_fsgm_text(text, &A, &warnings);
  EXPECT_EQ(m.states(), 2u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("'R'"), std::string::npos);
  auto again = parse_fsgm_text(render_fsgm_text(m, *A));
  EXPECT_EQ(render_fsgm_text(again, *A), render_fsgm_text(m, *A));
  EXPECT_EQ(sequence_prob(m, std::vector<Symbol>{1, 0}), DyadicProb(1, 1));
}

TEST(TextFormat, Errors) {
  EXPECT_THROW(parse_fsgm_text("P 0 a P\nP 1 a P\n"), PreconditionError);                      // no alphabet
  EXPECT_THROW(parse_fsgm_text("alphabet ab\nP 0 c P\nP 1 a P\n"), PreconditionError);         // bad output
  EXPECT_THROW(parse_fsgm_text("alphabet ab\nP 0 a P\n"), PreconditionError);                  // unlabeled leaf
  EXPECT_THROW(parse_fsgm_text("alphabet ab\nP 0 a Q\nP 1 a P\n"), PreconditionError);         // Q undefined
  EXPECT_THROW(parse_fsgm_text("alphabet ab\nP 0 a P\nP 0 b P\nP 1 a P\n"), PreconditionError);  // duplicate
  EXPECT_THROW(parse_fsgm_text("alphabet ab\nP 0 a\n"), PreconditionError);                    // short line
}

TEST(Guessing, MonteCarloMeanMatchesOneOverQ) {
  auto m = build_three_word_machine();
  std::vector<Symbol> x = from_text("abbac");
  const double q = sequence_prob(m, x).to_double();
  ASSERT_DOUBLE_EQ(q, 0.25);
  auto s = simulate_guessing(m, SymbolSeq(std::make_shared<const Alphabet>(parse_alphabet_spec("abc")), x), 20000, 4,
                             1 << 20, 2);
  auto mm = sample_moment(s, 1.0);
  EXPECT_NEAR(mm.mean, 1 / q, 3 * mm.stderr_);
  EXPECT_EQ(s.censored_count(), 0u);
  auto unreachable = SymbolSeq(std::make_shared<const Alphabet>(parse_alphabet_spec("abc")), from_text("ba"));
  EXPECT_THROW(simulate_guessing(m, unreachable, 10, 1, 10), PreconditionError);
}

// Output law of an s-state machine satisfies the block-entropy converse.
TEST(HiddenMarkov, BlockEntropyConverse) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const std::size_t s = 2 + t % 2;
    auto m = random_machine(s, 2, rng, 3);
    for (const auto& [x, p] : output_distribution(m, 8)) {
      for (std::size_t ell : {2u, 4u}) {
        const double rhs = (8.0 / ell) * (block_entropy(x, ell) - (3 * std::log2(double(s)) + std::numbers::log2e));
        ASSERT_GE(-p.log2(), rhs - 1e-12);
      }
    }
  }
}
