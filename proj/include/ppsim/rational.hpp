#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ppsim {

// Exact rational time value. All schedule arithmetic runs on these so
// makespans and bubble ratios compare bit-exactly. Intermediate products use
// 128-bit integers; anything that will not narrow back to 64 bits throws.
class Rat {
 public:
  constexpr Rat() = default;
  constexpr Rat(std::int64_t n) : num_(n) {}
  Rat(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize128(n, d); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  static Rat parse(const std::string& s) {
    auto slash = s.find('/');
    try {
      if (slash == std::string::npos) {
        std::size_t used = 0;
        std::int64_t n = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return Rat(n);
      }
      std::size_t un = 0, ud = 0;
      std::int64_t n = std::stoll(s.substr(0, slash), &un);
      std::int64_t d = std::stoll(s.substr(slash + 1), &ud);
      if (un != slash || ud != s.size() - slash - 1) throw std::invalid_argument(s);
      return Rat(n, d);
    } catch (const std::out_of_range&) {
      throw std::overflow_error("rational parse overflow: " + s);
    }
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Largest integer <= value.
  std::int64_t floor() const {
    std::int64_t q = num_ / den_;
    if (num_ % den_ != 0 && num_ < 0) --q;
    return q;
  }

  Rat operator-() const { return make(-static_cast<i128>(num_), den_); }

  friend Rat operator+(const Rat& a, const Rat& b) {
    return make(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                static_cast<i128>(a.den_) * b.den_);
  }
  friend Rat operator-(const Rat& a, const Rat& b) { return a + (-b); }
  friend Rat operator*(const Rat& a, const Rat& b) {
    return make(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
  }
  friend Rat operator/(const Rat& a, const Rat& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return make(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
  }

  Rat& operator+=(const Rat& o) { return *this = *this + o; }
  Rat& operator-=(const Rat& o) { return *this = *this - o; }
  Rat& operator*=(const Rat& o) { return *this = *this * o; }
  Rat& operator/=(const Rat& o) { return *this = *this / o; }

  friend bool operator==(const Rat& a, const Rat& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rat& a, const Rat& b) { return !(a == b); }
  friend bool operator<(const Rat& a, const Rat& b) {
    return static_cast<i128>(a.num_) * b.den_ < static_cast<i128>(b.num_) * a.den_;
  }
  friend bool operator>(const Rat& a, const Rat& b) { return b < a; }
  friend bool operator<=(const Rat& a, const Rat& b) { return !(b < a); }
  friend bool operator>=(const Rat& a, const Rat& b) { return !(a < b); }

 private:
  using i128 = __int128;

  static Rat make(i128 n, i128 d) {
    Rat r;
    r.normalize128(n, d);
    return r;
  }

  void normalize128(i128 n, i128 d) {
    if (d == 0) throw std::domain_error("rational with zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    i128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    constexpr i128 lo = INT64_MIN, hi = INT64_MAX;
    if (n < lo || n > hi || d > hi) throw std::overflow_error("rational overflow");
    num_ = static_cast<std::int64_t>(n);
    den_ = static_cast<std::int64_t>(d);
  }

  static i128 gcd128(i128 a, i128 b) {
    while (b != 0) {
      i128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline Rat min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat max(const Rat& a, const Rat& b) { return a < b ? b : a; }

}  // namespace ppsim
