#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "pdsqkd/attacks.hpp"
#include "pdsqkd/core.hpp"
#include "pdsqkd/photon_stats.hpp"

namespace pdsqkd::rate {

/// Fraction of sifted-key counts that originate from multiphoton emissions
/// when only single-photon detections are kept: Delta = 1 - e^(-mu (1-eta)).
inline double tagged_fraction(double mu, double eta) {
  pdsqkd::detail::check_domain(mu > 0.0, "tagged_fraction: mu must be > 0");
  pdsqkd::detail::check_domain(eta >= 0.0 && eta <= 1.0,
                               "tagged_fraction: eta must be in [0, 1]");
  return -std::expm1(-mu * (1.0 - eta));
}

/// High-loss limit Delta_0 = 1 - e^(-mu). Upper bound on the tagged fraction
/// for any eta, and its limit (hence also a lower bound) as eta -> 0.
inline double tagged_fraction_limit(double mu) {
  pdsqkd::detail::check_domain(mu > 0.0,
                               "tagged_fraction_limit: mu must be > 0");
  return -std::expm1(-mu);
}

/// Residual tagged fraction leaking past a detector that resolves at most n0
/// photons: the Poisson tail beyond n0 over the single-photon detection
/// probability mu eta e^(-mu eta) (closed form of the defining series).
inline double residual_tagged_fraction(double mu, double eta, int n0) {
  pdsqkd::detail::check_domain(mu > 0.0,
                               "residual_tagged_fraction: mu must be > 0");
  pdsqkd::detail::check_domain(eta > 0.0 && eta <= 1.0,
                               "residual_tagged_fraction: eta must be in (0, 1]");
  pdsqkd::detail::check_domain(n0 >= 1,
                               "residual_tagged_fraction: n0 must be >= 1");
  const double numerator = stats::poisson_tail(mu, n0);
  const double denominator = mu * eta * std::exp(-mu * eta);
  return numerator / denominator;
}

/// Total quantum bit error rate e = e0 + d/2, clamped at 1/2.
inline ClampedValue total_qber(double e0, double d) {
  pdsqkd::detail::check_domain(e0 >= 0.0 && e0 <= 0.5,
                               "total_qber: e0 must be in [0, 0.5]");
  pdsqkd::detail::check_domain(d >= 0.0 && d <= 1.0,
                               "total_qber: d must be in [0, 1]");
  const double e = e0 + 0.5 * d;
  if (e > 0.5) return {0.5, true};
  return {e, false};
}

/// Optical-setup error plus dark-count error, with the combined QBER.
struct ErrorModel {
  double e0;
  double d;
  double e_total;
  bool clamped;

  ErrorModel(double e0_, double d_) : e0(e0_), d(d_) {
    const ClampedValue e = total_qber(e0, d);
    e_total = e.value;
    clamped = e.clamped;
  }
};

/// Asymptotic secret-key fraction of sifted key with a tagged fraction delta:
/// R = (1 - delta) - h(e) - h(e + delta). May be negative (no secure key).
inline double gllp_rate(double e, double delta) {
  pdsqkd::detail::check_domain(e >= 0.0 && e <= 0.5,
                               "gllp_rate: e must be in [0, 0.5]");
  pdsqkd::detail::check_domain(delta >= 0.0 && delta < 1.0,
                               "gllp_rate: delta must be in [0, 1)");
  pdsqkd::detail::check_domain(e + delta <= 1.0,
                               "gllp_rate: e + delta must be <= 1");
  return (1.0 - delta) - attacks::binary_entropy(e) -
         attacks::binary_entropy(e + delta);
}

/// Key fraction of the photon-number-sifted key:
/// R = (1 - d0) - h(e) - (1 - d0) h(e / (1 - d0)).
/// The conditional-entropy argument may exceed 1/2 at high loss; the formula
/// is evaluated verbatim and negativity signals "no key". An argument above 1
/// is outside h's domain and raises a domain error.
inline double sifted_rate(double e, double delta0) {
  pdsqkd::detail::check_domain(e >= 0.0 && e <= 0.5,
                               "sifted_rate: e must be in [0, 0.5]");
  pdsqkd::detail::check_domain(delta0 >= 0.0 && delta0 < 1.0,
                               "sifted_rate: delta0 must be in [0, 1)");
  const double untagged = 1.0 - delta0;
  return untagged - attacks::binary_entropy(e) -
         untagged * attacks::binary_entropy(e / untagged);
}

/// Final key rate per emitted pulse,
/// R_f = (1/4) mu (1 - d0) eta [ (1-d0) - h(e) - (1-d0) h(e/(1-d0)) ],
/// with d0 = 1 - e^(-mu). Reported unclamped so callers can bracket the zero
/// crossing; negative values mean no secure key.
inline double final_key_rate(double mu, double eta, double e) {
  pdsqkd::detail::check_domain(mu > 0.0, "final_key_rate: mu must be > 0");
  pdsqkd::detail::check_domain(eta > 0.0 && eta <= 1.0,
                               "final_key_rate: eta must be in (0, 1]");
  const double delta0 = tagged_fraction_limit(mu);
  return 0.25 * mu * (1.0 - delta0) * eta * sifted_rate(e, delta0);
}

/// Everything the analytic pipeline produces for one (mu, eta) operating
/// point. `rate_defined` is false when e/(1 - Delta_0) leaves [0, 1]; the
/// rate formulas are then meaningless and the rate fields are NaN.
struct KeyRateReport {
  double mu = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double delta0 = 0.0;
  double delta_prime = 0.0;
  double dark_per_detected = 0.0;
  bool dark_clamped = false;
  double e_total = 0.0;
  bool e_clamped = false;
  double r_sifted = 0.0;
  double r_final = 0.0;
  double raw_rate = 0.0;
  bool rate_defined = true;
};

/// Physical inputs of one link evaluation. `dark_click_prob` is the
/// background click probability per pulse window; an empty resolving power
/// means an unbounded detector (delta_prime = 0).
struct LinkInputs {
  double mu;
  double eta;
  double e0 = 0.0;
  double dark_click_prob = 0.0;
  std::optional<int> resolving_power = std::nullopt;
};

inline KeyRateReport evaluate_link(const LinkInputs& in) {
  KeyRateReport rep;
  rep.mu = in.mu;
  rep.eta = in.eta;
  const ClampedValue d =
      stats::normalized_dark_rate_per_pulse(in.dark_click_prob, in.mu, in.eta);
  rep.dark_per_detected = d.value;
  rep.dark_clamped = d.clamped;
  const ClampedValue e = total_qber(in.e0, d.value);
  rep.e_total = e.value;
  rep.e_clamped = e.clamped;
  rep.delta = tagged_fraction(in.mu, in.eta);
  rep.delta0 = tagged_fraction_limit(in.mu);
  rep.delta_prime = in.resolving_power
                        ? residual_tagged_fraction(in.mu, in.eta,
                                                   *in.resolving_power)
                        : 0.0;
  rep.raw_rate = 0.25 * in.mu * in.eta;
  if (rep.e_total / (1.0 - rep.delta0) > 1.0) {
    rep.rate_defined = false;
    rep.r_sifted = std::numeric_limits<double>::quiet_NaN();
    rep.r_final = std::numeric_limits<double>::quiet_NaN();
  } else {
    rep.r_sifted = sifted_rate(rep.e_total, rep.delta0);
    rep.r_final = final_key_rate(in.mu, in.eta, rep.e_total);
  }
  return rep;
}

}  // namespace pdsqkd::rate
