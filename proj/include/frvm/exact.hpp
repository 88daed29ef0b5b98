#pragma once

// Exact rational versions of the closed forms, for small parameters.

#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

#include "frvm/error.hpp"

namespace frvm::exact {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Integer choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  Integer r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

/// C(n,x) C(N-n,k-x) / C(N,k) as an exact fraction.
inline Rational asp_static_exact(std::uint64_t N, std::uint64_t n, std::uint64_t k, std::uint64_t x) {
  if (n > N || k > N || x > n) throw DomainError("invalid hypergeometric parameters");
  if (x > k || k - x > N - n) return 0;
  return Rational(choose(n, x) * choose(N - n, k - x), choose(N, k));
}

inline Rational asp_static_at_least_one(std::uint64_t N, std::uint64_t n, std::uint64_t k) {
  if (n > N || k > N) throw DomainError("invalid hypergeometric parameters");
  if (n == 0 || k == 0) return 0;
  return Rational(1) - Rational(choose(N - n, k), choose(N, k));
}

/// C(k,x) p^x (1-p)^(k-x) with p = num/den.
inline Rational asp_frvm_pmf(std::uint64_t k, std::uint64_t x, const Rational& p) {
  if (x > k || p < 0 || p > 1) throw DomainError("invalid binomial parameters");
  Rational r = Rational(choose(k, x));
  for (std::uint64_t i = 0; i < x; ++i) r *= p;
  const Rational q = Rational(1) - p;
  for (std::uint64_t i = 0; i < k - x; ++i) r *= q;
  return r;
}

}  // namespace frvm::exact
