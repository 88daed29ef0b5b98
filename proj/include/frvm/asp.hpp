#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "frvm/error.hpp"

namespace frvm {

/// Parameters of an attack-success-probability evaluation.
///   N  address-space size, n  live hosts, k  probes, x  hosts to discover.
struct AspModel {
  std::uint64_t N = 1;
  std::uint64_t n = 1;
  std::uint64_t k = 0;
  std::uint64_t x = 0;

  double p() const { return static_cast<double>(n) / static_cast<double>(N); }

  /// Throws DomainError unless k >= x, N >= n >= x and 0 < p <= 1.
  void validate() const {
    if (N == 0) throw DomainError("address space must be non-empty");
    if (n == 0) throw DomainError("at least one live host is required");
    if (n > N) throw DomainError("more live hosts than addresses");
    if (x > n) throw DomainError("threshold exceeds live hosts");
    if (x > k) throw DomainError("threshold exceeds probe count");
  }
};

namespace detail {

inline double log_choose(std::uint64_t n, std::uint64_t k) {
  if (k == 0 || k == n) return 0.0;
  const auto dn = static_cast<double>(n);
  const auto dk = static_cast<double>(k);
  return std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0);
}

inline void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail

/// P(exactly x of n hosts found) by k distinct probes of a static space:
/// C(n,x) C(N-n,k-x) / C(N,k). Impossible combinations give 0.
inline double asp_static_exact(std::uint64_t N, std::uint64_t n, std::uint64_t k, std::uint64_t x) {
  detail::require(n <= N, "more live hosts than addresses");
  detail::require(k <= N, "more distinct probes than addresses");
  detail::require(x <= n, "threshold exceeds live hosts");
  if (x > k || k - x > N - n) return 0.0;
  return std::exp(detail::log_choose(n, x) + detail::log_choose(N - n, k - x) - detail::log_choose(N, k));
}

/// P(at least one of n hosts found) by k distinct probes: 1 - C(N-n,k)/C(N,k).
inline double asp_static_at_least_one(std::uint64_t N, std::uint64_t n, std::uint64_t k) {
  detail::require(N >= 1, "address space must be non-empty");
  detail::require(n <= N, "more live hosts than addresses");
  detail::require(k <= N, "more distinct probes than addresses");
  if (n == 0 || k == 0) return 0.0;
  if (k > N - n) return 1.0;
  // C(N-n,k)/C(N,k) = prod_{i<k} (N-n-i)/(N-i)
  if (k <= 4096) {
    double log_miss = 0.0;
    for (std::uint64_t i = 0; i < k; ++i) {
      log_miss += std::log1p(-static_cast<double>(n) / static_cast<double>(N - i));
    }
    return -std::expm1(log_miss);
  }
  return -std::expm1(detail::log_choose(N - n, k) - detail::log_choose(N, k));
}

/// Static tail P(X >= x) for the hypergeometric count.
inline double asp_static_tail(std::uint64_t N, std::uint64_t n, std::uint64_t k, std::uint64_t x) {
  if (x == 0) return 1.0;
  if (x == 1) return asp_static_at_least_one(N, n, k);
  // Direct sum over the (at most n) upper terms avoids cancellation.
  double tail = 0.0;
  for (std::uint64_t j = x; j <= std::min(n, k); ++j) tail += asp_static_exact(N, n, k, j);
  return tail > 1.0 ? 1.0 : tail;
}

/// Binomial pmf C(k,x) p^x (1-p)^(k-x).
inline double asp_frvm_pmf(std::uint64_t k, std::uint64_t x, double p) {
  detail::require(p >= 0.0 && p <= 1.0, "probability must lie in [0, 1]");
  detail::require(x <= k, "threshold exceeds probe count");
  if (p == 0.0) return x == 0 ? 1.0 : 0.0;
  if (p == 1.0) return x == k ? 1.0 : 0.0;
  const auto dx = static_cast<double>(x);
  const auto dmiss = static_cast<double>(k - x);
  return std::exp(detail::log_choose(k, x) + dx * std::log(p) + dmiss * std::log1p(-p));
}

/// Single target under per-probe remapping: 1 - (1 - 1/N)^k.
inline double asp_frvm_at_least_one(std::uint64_t N, std::uint64_t k) {
  detail::require(N >= 1, "address space must be non-empty");
  if (N == 1) return k == 0 ? 0.0 : 1.0;
  return -std::expm1(static_cast<double>(k) * std::log1p(-1.0 / static_cast<double>(N)));
}

/// Binomial tail P(X >= x) with p = n/N.
inline double asp_frvm_multi(std::uint64_t N, std::uint64_t n, std::uint64_t k, std::uint64_t x) {
  AspModel{N, n, k, x}.validate();
  if (x == 0) return 1.0;
  const double p = static_cast<double>(n) / static_cast<double>(N);
  if (x == 1) return -std::expm1(static_cast<double>(k) * std::log1p(-p));
  // Above the mean the upper tail is small: sum it directly, stopping once the
  // terms no longer matter. Below the mean the complement is the small side.
  const auto kd = static_cast<double>(k);
  if (static_cast<double>(x) > kd * p) {
    double tail = 0.0;
    for (std::uint64_t j = x; j <= k; ++j) {
      const double term = asp_frvm_pmf(k, j, p);
      tail += term;
      if (term < tail * 1e-18) break;
    }
    return tail > 1.0 ? 1.0 : tail;
  }
  double below = 0.0;
  for (std::uint64_t j = 0; j < x; ++j) below += asp_frvm_pmf(k, j, p);
  const double tail = 1.0 - below;
  return tail < 0.0 ? 0.0 : tail;
}

/// Probes in one epoch when a fraction q of an N-address space is scanned.
inline std::uint64_t partial_scan_count(std::uint64_t N, double q) {
  detail::require(q >= 0.0 && q <= 1.0, "scan fraction must lie in [0, 1]");
  return static_cast<std::uint64_t>(std::llround(q * static_cast<double>(N)));
}

/// Edge flow entries for n hosts with m services each.
constexpr std::uint64_t overhead_flow_entries(std::uint64_t n, std::uint64_t m) { return n * m; }

/// Mean over `k_grid` of static(n hosts) / FRVM(single target) at-least-one ASP.
/// Points where the FRVM value is zero are skipped.
inline double mean_reduction_ratio(std::uint64_t N, std::uint64_t n, std::span<const std::uint64_t> k_grid) {
  double sum = 0.0;
  std::size_t used = 0;
  for (auto k : k_grid) {
    const double frvm = asp_frvm_at_least_one(N, k);
    if (frvm == 0.0) continue;
    sum += asp_static_at_least_one(N, n, k) / frvm;
    ++used;
  }
  if (used == 0) throw DomainError("reduction ratio needs at least one k with non-zero ASP");
  return sum / static_cast<double>(used);
}

}  // namespace frvm
