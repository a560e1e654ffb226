#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <vector>

#include "pdsqkd/channel.hpp"
#include "pdsqkd/core.hpp"
#include "pdsqkd/security_rate.hpp"

namespace pdsqkd::optimize {

// Search caps. Beyond these the weak-coherent model is meaningless.
inline constexpr double kMuSearchLo = 1e-4;
inline constexpr double kMuSearchHi = 2.0;
inline constexpr double kMuTolerance = 1e-4;
inline constexpr double kDistanceCapKm = 500.0;
inline constexpr double kDistanceTolKm = 0.01;

/// One pipeline evaluation: preset -> eta(L) -> dark -> QBER -> rates.
struct PipelinePoint {
  double distance_km;
  rate::KeyRateReport report;
};

inline PipelinePoint evaluate_at(const channel::ExperimentPreset& preset,
                                 double mu, double distance_km) {
  const double eta = preset.transmittance_at(distance_km);
  rate::LinkInputs in{mu, eta, preset.e0, preset.dark_click_prob,
                      preset.resolving_power};
  return {distance_km, rate::evaluate_link(in)};
}

namespace detail {

/// Final rate as a totalized objective: undefined regions count as no key.
inline double rate_or_neg_inf(const channel::ExperimentPreset& preset,
                              double mu, double distance_km) {
  const auto point = evaluate_at(preset, mu, distance_km);
  if (!point.report.rate_defined) {
    return -std::numeric_limits<double>::infinity();
  }
  return point.report.r_final;
}

}  // namespace detail

template <typename F>
concept ScalarObjective = std::invocable<const F&, double> &&
    std::convertible_to<std::invoke_result_t<const F&, double>, double>;

struct ScalarMax {
  double x;
  double fx;
  int iterations;
};

/// Golden-section maximization on [lo, hi] to absolute tolerance tol in x.
/// Assumes unimodality; callers pair it with grid_argmax when that is only
/// a hypothesis.
template <ScalarObjective F>
ScalarMax golden_section_maximize(const F& f, double lo, double hi,
                                  double tol) {
  pdsqkd::detail::check_domain(lo < hi && tol > 0.0,
                               "golden_section_maximize: bad bracket");
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  int iters = 0;
  while (b - a > tol) {
    ++iters;
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x), iters};
}

/// Exhaustive scan with the given step; the brute-force oracle the solver is
/// validated against.
template <ScalarObjective F>
ScalarMax grid_argmax(const F& f, double lo, double hi, double step) {
  pdsqkd::detail::check_domain(lo <= hi && step > 0.0,
                               "grid_argmax: bad range");
  double best_x = lo;
  double best_f = f(lo);
  int n = 1;
  for (double x = lo + step; x <= hi + 0.5 * step; x += step) {
    const double clipped = std::min(x, hi);
    const double fx = f(clipped);
    ++n;
    if (fx > best_f) {
      best_f = fx;
      best_x = clipped;
    }
  }
  return {best_x, best_f, n};
}

struct OptimumReport {
  double mu_star = 0.0;
  double rate_at_optimum = 0.0;
  double distance_km = 0.0;
  double bracket_lo = kMuSearchLo;
  double bracket_hi = kMuSearchHi;
  int iterations = 0;
  bool positive_rate = false;
  /// Golden section disagreed with the grid oracle; the grid result is
  /// reported.
  bool grid_override = false;
};

/// Source intensity maximizing the final key rate at a fixed distance.
/// Golden-section search, always validated against a kMuTolerance-step grid
/// scan; on disagreement the grid wins.
inline OptimumReport optimal_mu(const channel::ExperimentPreset& preset,
                                double distance_km) {
  preset.validate();
  pdsqkd::detail::check_domain(distance_km >= 0.0,
                               "optimal_mu: distance must be >= 0");
  const auto objective = [&](double mu) {
    return detail::rate_or_neg_inf(preset, mu, distance_km);
  };
  const ScalarMax golden =
      golden_section_maximize(objective, kMuSearchLo, kMuSearchHi,
                              kMuTolerance);
  const ScalarMax grid =
      grid_argmax(objective, kMuSearchLo, kMuSearchHi, kMuTolerance);

  OptimumReport report;
  report.distance_km = distance_km;
  report.iterations = golden.iterations;
  if (std::abs(golden.x - grid.x) <= 2.0 * kMuTolerance) {
    report.mu_star = golden.x;
    report.rate_at_optimum = golden.fx;
  } else {
    report.mu_star = grid.x;
    report.rate_at_optimum = grid.fx;
    report.grid_override = true;
  }
  report.positive_rate = report.rate_at_optimum > 0.0;
  return report;
}

struct DistanceResult {
  double km = 0.0;
  bool positive_rate = false;
  /// The rate stayed positive all the way to the search cap.
  bool capped = false;
};

/// Largest distance with a positive final key rate at fixed mu, by bisection
/// to kDistanceTolKm. The positive region is an interval starting at L = 0:
/// the QBER grows monotonically with distance and the rate never recovers
/// once it goes negative.
inline DistanceResult max_distance(const channel::ExperimentPreset& preset,
                                   double mu) {
  preset.validate();
  pdsqkd::detail::check_domain(mu > 0.0, "max_distance: mu must be > 0");
  const auto rate_at = [&](double km) {
    return detail::rate_or_neg_inf(preset, mu, km);
  };
  if (rate_at(0.0) <= 0.0) return {0.0, false, false};
  if (rate_at(kDistanceCapKm) > 0.0) return {kDistanceCapKm, true, true};
  double lo = 0.0, hi = kDistanceCapKm;
  while (hi - lo > kDistanceTolKm) {
    const double mid = 0.5 * (lo + hi);
    if (rate_at(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, true, false};
}

enum class SweepVariable { distance, mu };

/// One sweep row. A flagged row hit a domain failure (for example an
/// undefined entropy argument); its rate fields are NaN.
struct SweepRow {
  double mu = 0.0;
  double distance_km = 0.0;
  double eta = 0.0;
  double e_total = 0.0;
  double delta0 = 0.0;
  double r_final = 0.0;
  bool flagged = false;
};

struct SweepTable {
  SweepVariable variable = SweepVariable::distance;
  std::vector<SweepRow> rows;
};

/// Deterministic table of pipeline evaluations over distance (at fixed mu)
/// or over mu (at fixed distance). `fixed` carries the non-swept variable;
/// for a distance sweep it defaults to the preset intensity.
inline SweepTable sweep(const channel::ExperimentPreset& preset,
                        SweepVariable variable, double lo, double hi,
                        int steps, std::optional<double> fixed = std::nullopt) {
  preset.validate();
  pdsqkd::detail::check_domain(steps >= 2, "sweep: steps must be >= 2");
  pdsqkd::detail::check_domain(lo <= hi, "sweep: lo must be <= hi");
  if (variable == SweepVariable::mu && !fixed) {
    throw std::domain_error("sweep: a mu sweep needs a fixed distance");
  }
  SweepTable table;
  table.variable = variable;
  table.rows.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double x = lo + (hi - lo) * i / (steps - 1);
    const double mu =
        variable == SweepVariable::mu ? x : fixed.value_or(preset.mu);
    const double km = variable == SweepVariable::distance ? x : *fixed;
    SweepRow row;
    row.mu = mu;
    row.distance_km = km;
    try {
      const auto point = evaluate_at(preset, mu, km);
      row.eta = point.report.eta;
      row.e_total = point.report.e_total;
      row.delta0 = point.report.delta0;
      row.r_final = point.report.r_final;
      row.flagged = !point.report.rate_defined;
    } catch (const std::domain_error&) {
      row.eta = row.e_total = row.delta0 = row.r_final =
          std::numeric_limits<double>::quiet_NaN();
      row.flagged = true;
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace pdsqkd::optimize
