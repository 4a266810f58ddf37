#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <ostream>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "lzguess/error.hpp"

namespace lzguess {

using BigInt = boost::multiprecision::cpp_int;

// Exact probability m / 2^e. Canonical form: m odd, or e == 0.
class DyadicProb {
 public:
  DyadicProb() = default;  // zero

  DyadicProb(BigInt numerator, std::uint32_t exponent)
      : num_(std::move(numerator)), exp_(exponent) {
    if (num_ < 0) throw PreconditionError("dyadic numerator must be nonnegative");
    normalize();
  }

  static DyadicProb zero() { return {}; }
  static DyadicProb one() { return DyadicProb(1, 0); }
  // 2^-e
  static DyadicProb pow2(std::uint32_t e) { return DyadicProb(1, e); }

  const BigInt& numerator() const noexcept { return num_; }
  std::uint32_t exponent() const noexcept { return exp_; }
  bool is_zero() const noexcept { return num_ == 0; }
  bool is_probability() const { return num_ <= (BigInt(1) << exp_); }

  DyadicProb& operator+=(const DyadicProb& o) {
    if (o.exp_ > exp_) {
      num_ <<= (o.exp_ - exp_);
      exp_ = o.exp_;
      num_ += o.num_;
    } else {
      num_ += o.num_ << (exp_ - o.exp_);
    }
    normalize();
    return *this;
  }
  DyadicProb& operator*=(const DyadicProb& o) {
    num_ *= o.num_;
    exp_ += o.exp_;
    normalize();
    return *this;
  }
  friend DyadicProb operator+(DyadicProb a, const DyadicProb& b) { return a += b; }
  friend DyadicProb operator*(DyadicProb a, const DyadicProb& b) { return a *= b; }

  // 1 - p, for p <= 1.
  DyadicProb complement() const {
    BigInt whole = BigInt(1) << exp_;
    if (num_ > whole) throw PreconditionError("complement of a value above 1");
    return DyadicProb(whole - num_, exp_);
  }

  friend bool operator==(const DyadicProb& a, const DyadicProb& b) {
    return a.num_ == b.num_ && a.exp_ == b.exp_;
  }
  friend std::strong_ordering operator<=>(const DyadicProb& a, const DyadicProb& b) {
    const std::uint32_t e = std::max(a.exp_, b.exp_);
    const BigInt lhs = a.num_ << (e - a.exp_);
    const BigInt rhs = b.num_ << (e - b.exp_);
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  // log2 of the value; -inf for zero. Accurate even when the value underflows double.
  double log2() const {
    if (num_ == 0) return -INFINITY;
    const unsigned bits = static_cast<unsigned>(boost::multiprecision::msb(num_)) + 1;
    if (bits <= 60) return std::log2(num_.convert_to<double>()) - exp_;
    const unsigned shift = bits - 60;
    const double top = BigInt(num_ >> shift).convert_to<double>();
    return std::log2(top) + shift - static_cast<double>(exp_);
  }

  double to_double() const { return num_ == 0 ? 0.0 : std::exp2(log2()); }

  std::string str() const {
    return num_.str() + "/2^" + std::to_string(exp_);
  }

  friend std::ostream& operator<<(std::ostream& os, const DyadicProb& p) { return os << p.str(); }

 private:
  void normalize() {
    if (num_ == 0) {
      exp_ = 0;
      return;
    }
    const auto tz = static_cast<std::uint32_t>(boost::multiprecision::lsb(num_));
    const std::uint32_t shift = std::min(tz, exp_);
    if (shift) {
      num_ >>= shift;
      exp_ -= shift;
    }
  }

  BigInt num_ = 0;
  std::uint32_t exp_ = 0;
};

}  // namespace lzguess
