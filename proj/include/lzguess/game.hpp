#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lzguess/bitsource.hpp"
#include "lzguess/error.hpp"
#include "lzguess/parallel.hpp"

namespace lzguess {

// Outcome of repeated guessing games. A censored round hit `cap` guesses
// without success; its recorded value is cap and its true G exceeds cap.
struct GuessSamples {
  std::vector<std::uint64_t> g;
  std::vector<std::uint8_t> censored;
  std::uint64_t cap = 0;

  std::size_t rounds() const noexcept { return g.size(); }

  std::size_t censored_count() const noexcept {
    std::size_t c = 0;
    for (auto f : censored) c += f;
    return c;
  }

  // Empirical Pr{G >= k}; needs k <= cap + 1 to be exact under censoring.
  double tail(std::uint64_t k) const {
    if (k > cap + 1) throw PreconditionError("tail beyond the censoring cap");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < g.size(); ++i) hits += (censored[i] || g[i] >= k) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(g.size());
  }
};

struct SampleMoment {
  double mean = 0;
  double stderr_ = 0;  // standard error of the mean
};

// Mean of G^zeta with censored rounds counted at cap (a lower estimate).
inline SampleMoment sample_moment(const GuessSamples& s, double zeta) {
  const auto n = static_cast<double>(s.g.size());
  double sum = 0, sumsq = 0;
  for (auto v : s.g) {
    const double t = std::pow(static_cast<double>(v), zeta);
    sum += t;
    sumsq += t * t;
  }
  SampleMoment m;
  m.mean = sum / n;
  const double var = n > 1 ? (sumsq - n * m.mean * m.mean) / (n - 1) : 0.0;
  m.stderr_ = std::sqrt(std::max(var, 0.0) / n);
  return m;
}

// Plays `rounds` independent games. Round k draws all of its guesses from
// BitSource(seed, k); attempt(bits) makes one guess and reports a hit.
template <typename Attempt>
GuessSamples play_rounds(std::size_t rounds, std::uint64_t seed, std::uint64_t cap, unsigned jobs,
                         Attempt&& attempt) {
  if (rounds == 0) throw PreconditionError("rounds must be >= 1");
  if (cap == 0) throw PreconditionError("cap must be >= 1");
  GuessSamples s;
  s.cap = cap;
  s.g.assign(rounds, 0);
  s.censored.assign(rounds, 0);
  parallel_for(rounds, jobs, [&](std::size_t k) {
    BitSource bits(seed, k);
    for (std::uint64_t guess = 1; guess <= cap; ++guess) {
      if (attempt(bits)) {
        s.g[k] = guess;
        return;
      }
    }
    s.g[k] = cap;
    s.censored[k] = 1;
  });
  return s;
}

}  // namespace lzguess
