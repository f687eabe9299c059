#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace starris {

using Complex = std::complex<double>;
using Rng = std::mt19937_64;

// The two sides of the surface: transmission (t) and reflection (r). Each side
// hosts one information user and one energy user.
enum class Side : int { kT = 0, kR = 1 };
inline constexpr std::array<Side, 2> kSides{Side::kT, Side::kR};

inline constexpr int idx(Side s) { return static_cast<int>(s); }
inline constexpr Side other(Side s) { return s == Side::kT ? Side::kR : Side::kT; }
inline const char* to_string(Side s) { return s == Side::kT ? "t" : "r"; }

template <class T>
struct PerSide {
  std::array<T, 2> v{};

  T& operator[](Side s) { return v[idx(s)]; }
  const T& operator[](Side s) const { return v[idx(s)]; }
  bool operator==(const PerSide&) const = default;
};

// Raised when a caller violates a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace starris
