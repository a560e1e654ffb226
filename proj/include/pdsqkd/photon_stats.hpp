#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <optional>
#include <type_traits>
#include <vector>

#include "pdsqkd/core.hpp"

namespace pdsqkd::stats {

/// Weak coherent laser source. Pulses carry Poisson-distributed photon
/// numbers with mean `mu`; `decoy_mu` is the intensity of the optional
/// decoy source.
struct SourceModel {
  double mu;
  double pulse_rate_hz;
  std::optional<double> decoy_mu;

  SourceModel(double mu_, double pulse_rate_hz_,
              std::optional<double> decoy = std::nullopt)
      : mu(mu_), pulse_rate_hz(pulse_rate_hz_), decoy_mu(decoy) {
    detail::check_domain(mu > 0.0, "SourceModel: mu must be > 0");
    detail::check_domain(pulse_rate_hz > 0.0,
                         "SourceModel: pulse_rate must be > 0");
    if (decoy_mu) {
      detail::check_domain(*decoy_mu > 0.0,
                           "SourceModel: decoy_mu must be > 0");
      detail::check_domain(*decoy_mu != mu,
                           "SourceModel: decoy_mu must differ from mu");
    }
  }
};

/// Photon-number-resolving detector. `resolving_power` is the largest
/// photon count the detector reports exactly (arrivals above it read as the
/// cap); an empty optional means unbounded resolution.
struct DetectorModel {
  std::optional<int> resolving_power;
  double dark_rate_hz = 0.0;

  DetectorModel(std::optional<int> resolving = std::nullopt,
                double dark_hz = 0.0)
      : resolving_power(resolving), dark_rate_hz(dark_hz) {
    if (resolving_power) {
      detail::check_domain(*resolving_power >= 1,
                           "DetectorModel: resolving_power must be >= 1");
    }
    detail::check_domain(dark_rate_hz >= 0.0,
                         "DetectorModel: dark_rate_hz must be >= 0");
  }
};

namespace detail {

inline constexpr int kLogFactorialTableSize = 4096;

inline double log_factorial(int n) {
  static const std::array<double, kLogFactorialTableSize> table = [] {
    std::array<double, kLogFactorialTableSize> t{};
    long double acc = 0.0L;
    t[0] = 0.0;
    for (int i = 1; i < kLogFactorialTableSize; ++i) {
      acc += std::log(static_cast<long double>(i));
      t[i] = static_cast<double>(acc);
    }
    return t;
  }();
  if (n < kLogFactorialTableSize) return table[static_cast<std::size_t>(n)];
  // Stirling with the 1/(12n) correction; plenty for the tail guard paths.
  const double x = n + 1.0;
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * M_PI) +
         1.0 / (12.0 * x);
}

inline double log_binomial(int m, int k) {
  return log_factorial(m) - log_factorial(k) - log_factorial(m - k);
}

}  // namespace detail

/// Poisson probability mass mu^n e^(-mu) / n!, evaluated in the log domain.
inline double poisson_pmf(double mu, int n) {
  pdsqkd::detail::check_domain(mu >= 0.0, "poisson_pmf: mu must be >= 0");
  pdsqkd::detail::check_domain(n >= 0, "poisson_pmf: n must be >= 0");
  if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(mu) - mu - detail::log_factorial(n));
}

/// Upper Poisson tail P(N > n). Below the mode the head sum is short and the
/// tail is of order one, so 1 - head is exact enough; above the mode the
/// tail is summed upward directly so no cancellation occurs even when it is
/// far below machine epsilon.
inline double poisson_tail(double mu, int n) {
  pdsqkd::detail::check_domain(mu >= 0.0, "poisson_tail: mu must be >= 0");
  pdsqkd::detail::check_domain(n >= 0, "poisson_tail: n must be >= 0");
  if (mu > n + 1) {
    double head = 0.0;
    for (int k = 0; k <= n; ++k) head += poisson_pmf(mu, k);
    return 1.0 - head;
  }
  double term = poisson_pmf(mu, n + 1);
  double sum = 0.0;
  int k = n + 1;
  while (term > 0.0) {
    sum += term;
    ++k;
    term *= mu / k;
    if (k > mu && term < sum * 1e-18) break;
    if (k > n + 100000) break;
  }
  return sum;
}

/// Poisson distribution truncated at n_trunc, together with the neglected
/// tail mass.
struct PhotonDistribution {
  std::vector<double> probs;
  double trunc_tail;
};

inline PhotonDistribution truncated_poisson(double mu,
                                            int n_trunc = kDefaultTruncation) {
  pdsqkd::detail::check_domain(n_trunc >= 0,
                               "truncated_poisson: n_trunc must be >= 0");
  PhotonDistribution dist;
  dist.probs.resize(static_cast<std::size_t>(n_trunc) + 1);
  for (int n = 0; n <= n_trunc; ++n) {
    dist.probs[static_cast<std::size_t>(n)] = poisson_pmf(mu, n);
  }
  dist.trunc_tail = poisson_tail(mu, n_trunc);
  return dist;
}

/// Photon-number distribution seen behind a channel of transmittance eta:
/// Poisson thinning keeps the Poisson form with mean eta*mu. The same
/// expression covers signal and decoy pulses up to the intensity.
inline double detected_pmf(double mu, double eta, int n) {
  pdsqkd::detail::check_domain(eta >= 0.0 && eta <= 1.0,
                               "detected_pmf: eta must be in [0, 1]");
  return poisson_pmf(eta * mu, n);
}

/// Probability that k of m held photons are forwarded when each one is
/// independently transmitted with probability eta.
inline double forward_prob(int m, int k, double eta) {
  pdsqkd::detail::check_domain(m >= 0, "forward_prob: m must be >= 0");
  pdsqkd::detail::check_domain(k >= 0 && k <= m,
                               "forward_prob: k must be in [0, m]");
  pdsqkd::detail::check_domain(eta >= 0.0 && eta <= 1.0,
                               "forward_prob: eta must be in [0, 1]");
  if (eta == 0.0) return k == 0 ? 1.0 : 0.0;
  if (eta == 1.0) return k == m ? 1.0 : 0.0;
  return std::exp(detail::log_binomial(m, k) + k * std::log(eta) +
                  (m - k) * std::log1p(-eta));
}

/// Anything callable as f(m, k): the probability that Eve forwards k photons
/// out of a pulse of m. Rows f(m, .) are expected to be distributions.
template <typename F>
concept ForwardingStrategy =
    std::invocable<const F&, int, int> &&
    std::convertible_to<std::invoke_result_t<const F&, int, int>, double>;

/// The beam-splitter attack: every photon forwarded independently with
/// probability eta, f(m, k) = C(m, k) eta^k (1-eta)^(m-k).
struct BeamSplitterForwarding {
  double eta;
  double operator()(int m, int k) const {
    if (k < 0 || k > m) return 0.0;
    return forward_prob(m, k, eta);
  }
};

/// Everything forwarded untouched, f(m, m) = 1.
struct IdentityForwarding {
  double operator()(int m, int k) const { return k == m ? 1.0 : 0.0; }
};

/// Everything blocked, f(m, 0) = 1.
struct BlockAllForwarding {
  double operator()(int, int k) const { return k == 0 ? 1.0 : 0.0; }
};

/// Single-photon pulses blocked outright; multiphoton pulses treated as by
/// the beam splitter.
struct BlockSinglesForwarding {
  double eta;
  double operator()(int m, int k) const {
    if (k < 0 || k > m) return 0.0;
    if (m == 1) return k == 0 ? 1.0 : 0.0;
    return forward_prob(m, k, eta);
  }
};

/// Left-hand side minus right-hand side of the photon-number balance that an
/// undetected PNS attack must satisfy at count n:
///
///   p_mu[n] (1 - sum_{i<n} f(n,i)) + sum_{j>n} p_mu[j] f(j,n)  vs  p_{eta mu}[n]
///
/// The j-sum is truncated at n_trunc; the neglected Poisson tail must be
/// below kTailBound or a TruncationError is raised.
template <ForwardingStrategy F>
double pns_balance_residual(double mu, double eta, int n, const F& strategy,
                            int n_trunc = kDefaultTruncation) {
  pdsqkd::detail::check_domain(mu >= 0.0,
                               "pns_balance_residual: mu must be >= 0");
  pdsqkd::detail::check_domain(eta >= 0.0 && eta <= 1.0,
                               "pns_balance_residual: eta must be in [0, 1]");
  pdsqkd::detail::check_domain(n >= 0 && n <= n_trunc,
                               "pns_balance_residual: need 0 <= n <= n_trunc");
  if (poisson_tail(mu, n_trunc) >= kTailBound) {
    throw TruncationError(
        "pns_balance_residual: n_trunc too small to bound the Poisson tail "
        "below 1e-15");
  }
  double forwarded_below = 0.0;
  for (int i = 0; i < n; ++i) forwarded_below += strategy(n, i);
  double lhs = poisson_pmf(mu, n) * (1.0 - forwarded_below);
  for (int j = n + 1; j <= n_trunc; ++j) {
    lhs += poisson_pmf(mu, j) * strategy(j, n);
  }
  return lhs - detected_pmf(mu, eta, n);
}

/// Necessary condition for an undetected no-decoy PNS attack at count n:
/// the strategy must supply at least as many n-photon arrivals as the lossy
/// channel would. True iff LHS >= RHS within kPnsTolerance.
template <ForwardingStrategy F>
bool pns_condition_holds(double mu, double eta, int n, const F& strategy,
                         int n_trunc = kDefaultTruncation) {
  return pns_balance_residual(mu, eta, n, strategy, n_trunc) >=
         -kPnsTolerance;
}

/// Dark counts per detected pulse, d = r_dark / (r_pul mu eta). The formula
/// exceeds 1 under extreme loss; the value is clamped with a flag instead of
/// erroring so long-distance scans stay total.
inline ClampedValue normalized_dark_rate(double dark_rate_hz,
                                         double pulse_rate_hz, double mu,
                                         double eta) {
  pdsqkd::detail::check_domain(dark_rate_hz >= 0.0,
                               "normalized_dark_rate: dark rate must be >= 0");
  pdsqkd::detail::check_domain(pulse_rate_hz > 0.0,
                               "normalized_dark_rate: pulse rate must be > 0");
  pdsqkd::detail::check_domain(mu > 0.0, "normalized_dark_rate: mu must be > 0");
  pdsqkd::detail::check_domain(eta > 0.0,
                               "normalized_dark_rate: eta must be > 0");
  const double d = dark_rate_hz / (pulse_rate_hz * mu * eta);
  if (d > 1.0) return {1.0, true};
  return {d, false};
}

/// Same quantity from the per-pulse background click probability
/// p = r_dark / r_pul quoted by the experiments.
inline ClampedValue normalized_dark_rate_per_pulse(double dark_click_prob,
                                                   double mu, double eta) {
  pdsqkd::detail::check_domain(
      dark_click_prob >= 0.0 && dark_click_prob <= 1.0,
      "normalized_dark_rate_per_pulse: probability must be in [0, 1]");
  pdsqkd::detail::check_domain(
      mu > 0.0, "normalized_dark_rate_per_pulse: mu must be > 0");
  pdsqkd::detail::check_domain(
      eta > 0.0, "normalized_dark_rate_per_pulse: eta must be > 0");
  const double d = dark_click_prob / (mu * eta);
  if (d > 1.0) return {1.0, true};
  return {d, false};
}

/// Dark-count weight d^n. Note this is not a normalized distribution; it is
/// kept verbatim as a diagnostic for dark-count subtraction.
inline double dark_pmf(double d, int n) {
  pdsqkd::detail::check_domain(d >= 0.0 && d <= 1.0,
                               "dark_pmf: d must be in [0, 1]");
  pdsqkd::detail::check_domain(n >= 0, "dark_pmf: n must be >= 0");
  return std::pow(d, n);
}

}  // namespace pdsqkd::stats
