#include <gtest/gtest.h>

#include <random>

#include "lzguess/corpus.hpp"
#include "lzguess/guessers.hpp"
#include "oracles.hpp"

using namespace lzguess;

TEST(LzGuessProb, Examples) {
  EXPECT_EQ(lz_guess_prob(std::vector<Symbol>{0}, 2), DyadicProb(1, 1));
  EXPECT_EQ(lz_guess_prob(std::vector<Symbol>{0, 0}, 2), DyadicProb(3, 3));
  EXPECT_THROW(lz_guess_prob(std::vector<Symbol>{}, 2), PreconditionError);
}

TEST(LzGuessProb, MatchesSamplerBitTree) {
  for (std::size_t alpha : {2u, 3u}) {
    for (std::size_t n = 1; n <= (alpha == 2 ? 6u : 4u); ++n) {
      auto dist = oracle::bit_tree_distribution([&](FixedBits& b) { return lz_sample(alpha, n, b); });
      for (const auto& x : oracle::all_sequences(n, alpha)) {
        auto it = dist.find(x);
        ASSERT_EQ(lz_guess_prob(x, alpha), it == dist.end() ? DyadicProb::zero() : it->second)
            << "alpha=" << alpha << " n=" << n;
      }
    }
  }
}

TEST(LzGuessProb, NormalizedExactly) {
  for (std::size_t n = 1; n <= 8; ++n) {
    DyadicProb total;
    for (const auto& x : oracle::all_sequences(n, 2)) total += lz_guess_prob(x, 2);
    EXPECT_EQ(total, DyadicProb::one()) << n;
  }
}

TEST(LzGuessProb, DominatesCodeLength) {
  for (std::size_t n = 1; n <= 10; ++n) {
    for (const auto& x : oracle::all_sequences(n, 2)) {
      ASSERT_GE(lz_guess_prob(x, 2), DyadicProb::pow2(static_cast<std::uint32_t>(code_length(x, 2))));
    }
  }
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    std::vector<Symbol> x(256);
    for (auto& s : x) s = static_cast<Symbol>(rng() % 3);
    ASSERT_GE(lz_guess_prob(x, 3), DyadicProb::pow2(static_cast<std::uint32_t>(code_length(x, 3))));
  }
}

TEST(LzGuessProb, Log2RouteAgrees) {
  auto A = std::make_shared<const Alphabet>(parse_alphabet_spec("ab"));
  for (const char* k : {"periodic:ab", "bernoulli:0.5:7", "thue_morse"}) {
    auto x = generate_corpus(parse_corpus_kind(k), 2048, A);
    EXPECT_NEAR(lz_guess_log2prob(x.symbols(), 2), lz_guess_prob(x).log2(), 1e-8) << k;
  }
}

TEST(LzSampler, FrequenciesMatchExact) {
  const std::size_t n = 5, rounds = 1000000;
  std::map<std::vector<Symbol>, std::size_t> counts;
  BitSource bits(21, 0);
  LzSampler s(2);
  for (std::size_t r = 0; r < rounds; ++r) ++counts[s.sample(n, bits)];
  for (const auto& x : oracle::all_sequences(n, 2)) {
    const double p = lz_guess_prob(x, 2).to_double();
    const double sd = std::sqrt(rounds * p * (1 - p));
    EXPECT_NEAR(static_cast<double>(counts[x]), rounds * p, 3 * sd + 1e-9);
  }
}

TEST(LzSampler, MatchesEqualsSample) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 200; ++t) {
    std::vector<Symbol> x(1 + rng() % 12);
    for (auto& s : x) s = static_cast<Symbol>(rng() & 1U);
    BitSource a(t, 0), b(t, 0);
    const bool hit = LzSampler(2).matches(x, a);
    ASSERT_EQ(hit, LzSampler(2).sample(x.size(), b) == x);
  }
}

TEST(BlockGuesser, Examples) {
  std::vector<Symbol> z4(4, 0);
  EXPECT_EQ(block_guess_prob(z4, 2, 2), DyadicProb(9, 6));
  for (const auto& x : oracle::all_sequences(6, 2)) {
    ASSERT_EQ(block_guess_prob(x, 2, 1), DyadicProb::pow2(6));
    ASSERT_EQ(block_guess_prob(x, 2, 6), lz_guess_prob(x, 2));
    auto prod = lz_guess_prob(std::span(x).subspan(0, 4), 2) * lz_guess_prob(std::span(x).subspan(4, 2), 2);
    ASSERT_EQ(block_guess_prob(x, 2, 4), prod);  // remainder block of length 2
  }
}

TEST(BlockGuesser, NormalizedWithRemainder) {
  for (std::size_t ell : {2u, 3u}) {
    DyadicProb total;
    for (const auto& x : oracle::all_sequences(7, 2)) total += block_guess_prob(x, 2, ell);
    EXPECT_EQ(total, DyadicProb::one());
  }
}

TEST(BlockGuesser, SamplerMatchesBitTree) {
  auto dist = oracle::bit_tree_distribution([](FixedBits& b) { return block_sample(2, 5, 2, b); });
  for (const auto& x : oracle::all_sequences(5, 2)) {
    ASSERT_EQ(dist[x], block_guess_prob(x, 2, 2));
  }
}

TEST(Uniform, IsAlphaToMinusN) {
  auto g = Guesser::uniform(2);
  EXPECT_EQ(g.exact_prob(std::vector<Symbol>{0, 1, 1}), DyadicProb::pow2(3));
  // alpha = 3 spends 2 bits per symbol; symbol 0 is hit by two of the four patterns.
  auto g3 = Guesser::uniform(3);
  EXPECT_EQ(g3.exact_prob(std::vector<Symbol>{0}), DyadicProb(1, 1));
  EXPECT_EQ(g3.exact_prob(std::vector<Symbol>{2}), DyadicProb(1, 2));
}

TEST(Compile, MatchesBlockProduct) {
  auto c = compile_block_guesser_to_fsgm(2, 2);
  EXPECT_LE(c.state_count, c.state_bound);
  EXPECT_EQ(c.state_bound, 8u);
  auto d = output_distribution(c.machine, 4);
  for (const auto& x : oracle::all_sequences(4, 2)) {
    ASSERT_EQ(d[x], block_guess_prob(x, 2, 2));
  }
  auto c1 = compile_block_guesser_to_fsgm(1, 2);
  EXPECT_EQ(c1.state_count, 1u);
}

TEST(Compile, LargerCasesAndRefusal) {
  for (auto [ell, alpha] : {std::pair<std::size_t, std::size_t>{3, 2}, {2, 3}}) {
    auto c = compile_block_guesser_to_fsgm(ell, alpha);
    EXPECT_LE(c.state_count, c.state_bound);
    for (const auto& x : oracle::all_sequences(2 * ell, alpha)) {
      ASSERT_EQ(sequence_prob(c.machine, x), block_guess_prob(x, alpha, ell));
    }
  }
  EXPECT_THROW(compile_block_guesser_to_fsgm(10, 2), BudgetError);
}

TEST(Guesser, KindsAgree) {
  auto x = std::vector<Symbol>{0, 1, 1, 0, 1};
  auto m = std::make_shared<const FSGMSpec>(compile_block_guesser_to_fsgm(1, 2).machine);
  EXPECT_EQ(Guesser::fsgm(m).exact_prob(x), Guesser::uniform(2).exact_prob(x));
  EXPECT_EQ(Guesser::lz_block(2, 5).exact_prob(x), Guesser::lz_full(2).exact_prob(x));
  EXPECT_THROW(Guesser::lz_block(2, 0), PreconditionError);
  EXPECT_EQ(Guesser::lz_block(2, 3).name(), "lz_block(3)");
}

TEST(RunGame, LzFullOnDoubleZero) {
  auto x = make_seq("aa", "ab");
  auto est = run_game(Guesser::lz_full(2), x, {1.0, 2.0}, 100000, 7);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_EQ(*est[0].q, DyadicProb(3, 3));
  EXPECT_NEAR(est[0].exact.value(), 8.0 / 3, 1e-12);
  EXPECT_NEAR(est[0].mc_mean, 8.0 / 3, 3 * est[0].mc_stderr);
  EXPECT_NEAR(est[1].mc_mean, est[1].exact.value(), 3 * est[1].mc_stderr);
  EXPECT_NEAR(est[0].mc_ci, 1.96 * est[0].mc_stderr, 1e-15);
}

TEST(RunGame, UniformMeanIsFour) {
  auto x = make_seq("ba", "ab");
  auto est = run_game(Guesser::uniform(2), x, {1.0}, 100000, 3);
  EXPECT_NEAR(est[0].mc_mean, 4.0, 3 * est[0].mc_stderr);
  EXPECT_NEAR(est[0].exponent, 1.0, 1e-12);
}

TEST(RunGame, ZeroProbabilityTarget) {
  auto m = std::make_shared<const FSGMSpec>(build_three_word_machine());
  auto x = make_seq("ba", "abc");
  EXPECT_THROW(run_game(Guesser::fsgm(m), x, {1.0}, 10, 1), PreconditionError);
}

TEST(RunGame, DeterministicAcrossJobs) {
  auto x = make_seq("abab", "ab");
  auto a = run_game(Guesser::lz_full(2), x, {1.0}, 2000, 5, 1u << 20, 1);
  auto b = run_game(Guesser::lz_full(2), x, {1.0}, 2000, 5, 1u << 20, 3);
  EXPECT_EQ(a[0].mc_mean, b[0].mc_mean);
}
