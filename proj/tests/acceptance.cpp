// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "lzguess.hpp"
#include "oracles.hpp"

using namespace lzguess;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream note;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) note << "first failure: " << what << "; ";
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(int id, const char* title, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.note << "exception: " << e.what() << "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s C%d %s (%.1fs) %s\n", c.ok ? "PASS" : "FAIL", id, title, secs, c.note.str().c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

AlphabetPtr ab() { return std::make_shared<const Alphabet>(parse_alphabet_spec("ab")); }

SymbolSeq corpus(const std::string& kind, std::size_t n) { return generate_corpus(parse_corpus_kind(kind), n, ab()); }

std::vector<Symbol> symbols(const SymbolSeq& s) { return {s.symbols().begin(), s.symbols().end()}; }

std::vector<Symbol> random_seq(std::mt19937_64& rng, std::size_t n, std::size_t alpha) {
  std::vector<Symbol> v(n);
  for (auto& s : v) s = static_cast<Symbol>(rng() % alpha);
  return v;
}

FSGMSpec random_machine(std::size_t states, std::mt19937_64& rng) {
  std::vector<std::string> names;
  std::vector<unsigned> delta;
  std::vector<std::vector<Symbol>> out;
  std::vector<std::vector<std::uint32_t>> next;
  for (std::size_t z = 0; z < states; ++z) {
    names.push_back("s" + std::to_string(z));
    const unsigned d = static_cast<unsigned>(rng() % 4);
    delta.push_back(d);
    out.emplace_back();
    next.emplace_back();
    for (std::size_t w = 0; w < (std::size_t{1} << d); ++w) {
      out.back().push_back(static_cast<Symbol>(rng() % 2));
      next.back().push_back(static_cast<std::uint32_t>(rng() % states));
    }
  }
  return FSGMSpec(2, names, 0, delta, out, next);
}

std::string letters(const std::vector<Symbol>& v) {
  std::string s;
  for (Symbol x : v) s += static_cast<char>('a' + x);
  return s;
}

}  // namespace

int main() {
  criterion(1, "incremental parse of the worked example", [](Check& c) {
    auto x = make_seq("abbabaabbaaabaa", "ab");
    auto p = incremental_parse(x);
    std::vector<std::string> got;
    for (const auto& ph : p.phrases) got.push_back(render(x.slice(ph.offset, ph.length)));
    const std::vector<std::string> want{"a", "b", "ba", "baa", "bb", "aa", "ab", "aa"};
    c.expect(got == want, "phrase list");
    c.expect(p.c_lz() == 8, "c_lz == 8");
    c.expect(!p.last_complete, "last phrase incomplete");
  });

  criterion(2, "Kraft sum of the LZ code and normalization of the LZ guesser", [](Check& c) {
    for (std::size_t n = 1; n <= 12; ++n) {
      DyadicProb kraft;
      for (const auto& x : oracle::all_sequences(n, 2)) {
        kraft += DyadicProb::pow2(static_cast<std::uint32_t>(code_length(x, 2)));
      }
      c.expect(kraft <= DyadicProb::one(), "Kraft at n=" + std::to_string(n));
    }
    for (std::size_t n = 1; n <= 8; ++n) {
      DyadicProb total;
      for (const auto& x : oracle::all_sequences(n, 2)) total += lz_guess_prob(x, 2);
      c.expect(total == DyadicProb::one(), "sum q == 1 at n=" + std::to_string(n));
    }
  });

  criterion(3, "guesser probability dominates the code weight", [](Check& c) {
    for (std::size_t n = 1; n <= 10; ++n) {
      for (const auto& x : oracle::all_sequences(n, 2)) {
        if (lz_guess_prob(x, 2) < DyadicProb::pow2(static_cast<std::uint32_t>(code_length(x, 2)))) {
          c.expect(false, "exhaustive n=" + std::to_string(n));
        }
      }
    }
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 1000; ++t) {
      auto x = random_seq(rng, 256, 2);
      if (lz_guess_prob(x, 2) < DyadicProb::pow2(static_cast<std::uint32_t>(code_length(x, 2)))) {
        c.expect(false, "random n=256 case " + std::to_string(t));
      }
    }
  });

  criterion(4, "geometric moments: closed forms, Monte Carlo, lower bound", [](Check& c) {
    for (int i = 0; i <= 200; ++i) {
      const double q = std::pow(10.0, -12.0 * i / 200.0);
      const double m1 = moment_exact(q, 1).value();
      const double m2 = moment_exact(q, 2).value();
      const double r1 = 1 / q, r2 = (2 - q) / (q * q);
      c.expect(std::fabs(m1 - r1) / r1 < 1e-12, "zeta=1 at q=" + std::to_string(q));
      c.expect(std::fabs(m2 - r2) / r2 < 1e-12, "zeta=2 at q=" + std::to_string(q));
    }
    for (double q : {0.5, 0.1, 0.01}) {
      auto s = simulate_geometric(q, 100000, 17, std::uint64_t{1} << 40, 4);
      auto m = sample_moment(s, 1);
      c.expect(std::fabs(m.mean - 1 / q) <= 3 * m.stderr_, "MC mean at q=" + std::to_string(q));
    }
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> lq(-40, -1), zd(0.25, 3);
    for (int t = 0; t < 1000; ++t) {
      const double l = lq(rng), z = zd(rng);
      c.expect(moment_lower_bound_log2(l, z) <= moment_exact_log2q(l, z).log2_value, "lower bound");
    }
  });

  criterion(5, "finite-n sandwich ordering and exponent levels", [](Check& c) {
    const std::vector<std::pair<std::string, SymbolSeq>> seqs{
        {"periodic", corpus("periodic:ab", 4096)},
        {"thue_morse", corpus("thue_morse", 4096)},
        {"bernoulli", corpus("bernoulli:0.5:7", 4096)}};
    const auto g = Guesser::lz_full(2);
    for (const auto& [id, x] : seqs) {
      for (double z : {0.5, 1.0, 2.0}) {
        for (double s : {2.0, 4.0}) {
          auto r = sandwich(x, z, s, g, id);
          c.expect(r.ok(), id + " ordering at zeta=" + std::to_string(z) + " s=" + std::to_string(s));
        }
      }
    }
    const double per = sandwich(seqs[0].second, 1, 2, g).measured;
    const double ber = sandwich(seqs[2].second, 1, 2, g).measured;
    c.note << "periodic exponent " << per << ", bernoulli exponent " << ber << "; ";
    c.expect(per <= 0.15, "periodic exponent <= 0.15");
    c.expect(ber >= 0.8, "bernoulli exponent >= 0.8");
  });

  criterion(6, "compiled block guesser realizes the block distribution", [](Check& c) {
    auto comp = compile_block_guesser_to_fsgm(2, 2);
    auto d = output_distribution(comp.machine, 4);
    for (const auto& x : oracle::all_sequences(4, 2)) {
      c.expect(d[x] == block_guess_prob(x, 2, 2), "distribution at " + letters(x));
    }
    c.note << "states " << comp.state_count << " vs bound " << comp.state_bound << "; ";
    c.expect(comp.state_bound == 8 && comp.state_count <= comp.state_bound, "state count within 8");
  });

  criterion(7, "hidden-Markov block-entropy converse", [](Check& c) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
      const std::size_t s = 2 + t % 2;
      auto m = random_machine(s, rng);
      for (const auto& [x, p] : output_distribution(m, 8)) {
        for (std::size_t ell : {2u, 4u}) {
          const double rhs = (8.0 / ell) * (block_entropy(x, ell) - (3 * std::log2(double(s)) + std::numbers::log2e));
          c.expect(-p.log2() >= rhs - 1e-12, "machine " + std::to_string(t) + " output " + letters(x));
        }
      }
    }
  });

  criterion(8, "example machine word mapping", [](Check& c) {
    const std::map<std::string, std::string> words{{"00", "ab"}, {"01", "ab"}, {"10", "bac"}, {"11", "ca"}};
    auto m = build_three_word_machine();
    FixedBits zeros({});
    c.expect(letters(run(m, zeros, 4).output) == "abab", "zero words give abab");
    for (unsigned v = 0; v < 16; ++v) {
      std::vector<unsigned> bits{(v >> 3) & 1U, (v >> 2) & 1U, (v >> 1) & 1U, v & 1U};
      const std::string c1{char('0' + bits[0]), char('0' + bits[1])};
      const std::string c2{char('0' + bits[2]), char('0' + bits[3])};
      const std::string want = "ab" + words.at(c1) + words.at(c2);
      // The last symbol of the second word reads the choice of a third; supply "00".
      auto six = bits;
      six.insert(six.end(), {0U, 0U});
      FixedBits src(six, false);
      auto tr = run(m, src, want.size());
      c.expect(letters(tr.output) == want && tr.bits_consumed() == 6, "input " + c1 + c2);
    }
  });

  criterion(9, "side information: u, Kraft, round trip, self code, ordering", [](Check& c) {
    std::vector<std::vector<Symbol>> xs;
    for (const char* k : {"periodic:ab", "thue_morse", "bernoulli:0.5:7", "bernoulli:0.2:3"}) {
      xs.push_back(symbols(corpus(k, 4096)));
    }
    for (const auto& x : xs) c.expect(joint_parse(x, x, 2, 2).u == 0.0, "u(x,x) == 0");
    for (std::size_t n = 1; n <= 6; ++n) {
      for (const auto& y : oracle::all_sequences(n, 2)) {
        DyadicProb kraft;
        for (const auto& x : oracle::all_sequences(n, 2)) {
          auto bits = cond_code(x, y, 2, 2);
          kraft += DyadicProb::pow2(static_cast<std::uint32_t>(bits.size()));
          if (cond_decode(bits, y, 2, 2) != x) c.expect(false, "round trip n=" + std::to_string(n));
        }
        c.expect(kraft <= DyadicProb::one(), "conditional Kraft n=" + std::to_string(n));
      }
    }
    const auto& b = xs[2];
    const double ratio = static_cast<double>(cond_code_length(b, b, 2, 2)) / 4096.0;
    c.note << "L(x|x)/n " << ratio << "; ";
    c.expect(ratio <= 0.25, "L(x|x)/n <= 0.25");
    const auto noise = symbols(corpus("bernoulli:0.1:5", 4096));
    const auto indep = symbols(corpus("bernoulli:0.5:99", 4096));
    for (const auto& x : xs) {
      std::vector<Symbol> noisy(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) noisy[i] = x[i] ^ noise[i];
      for (const std::vector<Symbol>* y : {&x, static_cast<const std::vector<Symbol>*>(&noisy), &indep}) {
        for (std::size_t ell : {1u, 4u}) {
          c.expect(cond_bounds(x, *y, 2, 2, 2, ell, 1).ok(), "conditional ordering");
        }
      }
    }
  });

  criterion(10, "tail of the guess count is geometric", [](Check& c) {
    auto x = make_seq("0000000000000000", "01");
    const auto g = Guesser::lz_full(2);
    const double q = g.exact_prob(x.symbols()).to_double();
    auto s = play_rounds(100000, 31, 100, 4, [&](BitSource& b) { return g.attempt(x.symbols(), b); });
    for (std::uint64_t k : {2u, 10u, 100u}) {
      const double p = std::pow(1 - q, static_cast<double>(k - 1));
      const double sigma = std::sqrt(p * (1 - p) / 100000.0);
      const double emp = s.tail(k);
      c.note << "k=" << k << " emp " << emp << " model " << p << "; ";
      c.expect(std::fabs(emp - p) <= 3 * sigma, "tail at k=" + std::to_string(k));
    }
  });

  criterion(11, "incremental phrase count against the distinct-partition optimum", [](Check& c) {
    for (std::size_t n = 1; n <= 10; ++n) {
      for (const auto& x : oracle::all_sequences(n, 2)) {
        if (incremental_parse(x, 2).c_lz() > c_max_oracle(x) + 1) c.expect(false, "exhaustive n=" + std::to_string(n));
      }
    }
    std::mt19937_64 rng(11);
    for (int t = 0; t < 1000; ++t) {
      auto x = random_seq(rng, 11 + rng() % 4, 2);
      if (incremental_parse(x, 2).c_lz() > c_max_oracle(x) + 1) c.expect(false, "random case " + std::to_string(t));
    }
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
