#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>

#include "pdsqkd/core.hpp"

namespace pdsqkd::attacks {

/// Binary entropy h(x) = -x log2 x - (1-x) log2(1-x), with the continuity
/// convention h(0) = h(1) = 0.
inline double binary_entropy(double x) {
  pdsqkd::detail::check_domain(x >= 0.0 && x <= 1.0,
                               "binary_entropy: x must be in [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return (-x * std::log(x) - (1.0 - x) * std::log1p(-x)) / std::numbers::ln2;
}

/// Maximal information per photon from the symmetric individual attack at
/// quantum bit error rate e: I_SI = 1 - h((1 + 2 sqrt(e - e^2)) / 2).
inline double si_information(double e) {
  pdsqkd::detail::check_domain(e >= 0.0 && e <= 0.5,
                               "si_information: e must be in [0, 0.5]");
  return 1.0 - binary_entropy(0.5 + std::sqrt(e * (1.0 - e)));
}

/// Maximal information from a coherent measurement on the probes attached to
/// all n photons of one pulse:
///
///   I_CMP(n) = 1 - (f^n + e^n) h((1 + sqrt(1 - (1-2e)^(2n))) / 2),  f = 1-e.
///
/// Reduces to si_information for n = 1.
inline double cmp_information(int n, double e) {
  pdsqkd::detail::check_domain(n >= 1, "cmp_information: n must be >= 1");
  pdsqkd::detail::check_domain(e >= 0.0 && e <= 0.5,
                               "cmp_information: e must be in [0, 0.5]");
  const double f = 1.0 - e;
  const double inconclusive = std::pow(f, n) + std::pow(e, n);
  const double overlap = std::pow(1.0 - 2.0 * e, 2.0 * n);
  const double arg = 0.5 * (1.0 + std::sqrt(1.0 - overlap));
  return 1.0 - inconclusive * binary_entropy(arg);
}

/// Eavesdropper information for an n-photon pulse at error rate `qber`,
/// bundled with the per-photon SI figure for comparison.
struct AttackInfo {
  int n;
  double qber;
  double fidelity;
  double i_si;
  double i_cmp;
};

inline AttackInfo attack_info(int n, double e) {
  return {n, e, 1.0 - e, si_information(e), cmp_information(n, e)};
}

namespace detail {

/// Bisection for a sign change of f on [lo, hi]. Throws NoRootError if the
/// endpoints do not bracket a root.
template <std::invocable<double> F>
double bisect_root(const F& f, double lo, double hi, double tol,
                   int* iterations = nullptr) {
  double flo = f(lo);
  double fhi = f(hi);
  if (!(flo == 0.0 || fhi == 0.0 || (flo > 0.0) != (fhi > 0.0))) {
    throw NoRootError("bisect_root: no sign change in bracket");
  }
  int iters = 0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    ++iters;
    if (fmid == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((fmid > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  if (iterations) *iterations = iters;
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Root of I_CMP(n, e) - n I_SI(e) on (0, 0.5). Below the root a coherent
/// attack on one n-photon pulse beats n independent per-photon attacks.
struct CrossoverResult {
  /// n = 1: the two quantities coincide identically, there is no crossover.
  bool degenerate_identity;
  double qber;
  double gap_at_root;
  int iterations;
};

inline CrossoverResult crossover_qber(int n) {
  pdsqkd::detail::check_domain(n >= 1, "crossover_qber: n must be >= 1");
  if (n == 1) {
    return {true, std::numeric_limits<double>::quiet_NaN(), 0.0, 0};
  }
  const auto gap = [n](double e) {
    return cmp_information(n, e) - n * si_information(e);
  };
  int iters = 0;
  const double root =
      detail::bisect_root(gap, 1e-6, 0.5 - 1e-6, 1e-9, &iters);
  return {false, root, gap(root), iters};
}

/// Transmittance below which a no-decoy protocol with intensity mu is fully
/// compromised by photon-number splitting:
/// eta* = (1 - e^(-mu) - mu e^(-mu)) / mu.
inline double pns_full_info_threshold(double mu) {
  pdsqkd::detail::check_domain(mu > 0.0,
                               "pns_full_info_threshold: mu must be > 0");
  return (-std::expm1(-mu) - mu * std::exp(-mu)) / mu;
}

}  // namespace pdsqkd::attacks
