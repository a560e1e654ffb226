// Acceptance suite: every release criterion evaluated end to end, one
// PASS/FAIL line each, followed by the calibration report for the
// distance-curve reproduction. Exit code = number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pdsqkd/attacks.hpp"
#include "pdsqkd/channel.hpp"
#include "pdsqkd/cli.hpp"
#include "pdsqkd/montecarlo.hpp"
#include "pdsqkd/optimize.hpp"
#include "pdsqkd/security_rate.hpp"
#include "support/oracles.hpp"

using namespace pdsqkd;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(const std::string& id, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] %-3s %s (%.2f s)\n", pass ? "PASS" : "FAIL", id.c_str(),
              detail.c_str(), seconds);
  if (!pass) ++g_failures;
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream out;
  out.precision(digits);
  out << v;
  return out.str();
}

mc::SimConfig mc_config(double mu, double eta, std::uint64_t pulses,
                        std::uint64_t seed) {
  return mc::SimConfig{stats::SourceModel(mu, 1e6), eta,
                       stats::DetectorModel(std::nullopt, 0.0), pulses, seed};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- criteria -------------------------------------------------------------

void criterion_1_crossovers() {
  Timer timer;
  const auto c2 = attacks::crossover_qber(2);
  const auto c3 = attacks::crossover_qber(3);
  const bool ok2 = std::abs(c2.qber - 0.110) <= 0.005;
  const bool ok3 = std::abs(c3.qber - 0.068) <= 0.003;
  const double sec = timer.seconds();
  report("C1", ok2 && ok3 && sec < 1.0,
         "crossover QBERs: e*(2) = " + fmt(c2.qber) +
             " within 0.110+-0.005, e*(3) = " + fmt(c3.qber) +
             " within 0.068+-0.003",
         sec);
}

void criterion_2_ordering() {
  Timer timer;
  bool ordering = true;
  for (double e = 1e-3; e < 0.11; e += 1e-3) {
    if (!(attacks::cmp_information(2, e) > 2.0 * attacks::si_information(e))) {
      ordering = false;
      break;
    }
  }
  double worst_identity = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double e = 0.5 * i / 1000.0;
    worst_identity =
        std::max(worst_identity, std::abs(attacks::cmp_information(1, e) -
                                          attacks::si_information(e)));
  }
  const bool identity = worst_identity <= 1e-12;
  const double sec = timer.seconds();
  report("C2", ordering && identity && sec < 1.0,
         "I_CMP(2) > 2 I_SI on (0, 0.11); n = 1 identity within " +
             fmt(worst_identity, 2),
         sec);
}

void criterion_3_residual() {
  Timer timer;
  const double r4 = rate::residual_tagged_fraction(0.1, 1e-3, 4);
  const double r10 = rate::residual_tagged_fraction(0.1, 1e-3, 10);
  const bool ok = r4 > 5e-4 && r4 < 1e-3 && r10 < 1e-10;
  const double sec = timer.seconds();
  report("C3", ok && sec < 1.0,
         "residual fraction: n0 = 4 gives " + fmt(r4) +
             " in (5e-4, 1e-3); n0 = 10 gives " + fmt(r10, 3) + " < 1e-10",
         sec);
}

void criterion_4_balance() {
  Timer timer;
  double worst = 0.0;
  for (double mu : {0.1, 0.5, 1.0}) {
    for (double eta : {1e-3, 0.1, 0.9}) {
      const stats::BeamSplitterForwarding strategy{eta};
      for (int n = 0; n <= 10; ++n) {
        worst = std::max(
            worst, std::abs(stats::pns_balance_residual(mu, eta, n, strategy)));
      }
    }
  }
  const double sec = timer.seconds();
  report("C4", worst < 1e-12 && sec < 1.0,
         "beam-splitter balance residual below 1e-12 on the full grid "
         "(worst " +
             fmt(worst, 2) + ")",
         sec);
}

void criterion_5_montecarlo() {
  Timer timer;
  const double mu = 0.5, eta = 0.1;
  const auto result = mc::simulate(mc_config(mu, eta, 10000000, 20240042), 4);
  const auto [delta, err] = mc::estimate_delta(result);
  const double target = oracle::frozen::kTaggedMu05Eta01;
  const bool delta_ok = std::abs(delta - target) < 3.0 * err;

  const std::vector<std::uint64_t> counts(result.counts_by_detected_n.begin(),
                                          result.counts_by_detected_n.end());
  const auto gof = oracle::chi2_gof(
      counts, [&](int n) { return stats::detected_pmf(mu, eta, n); },
      result.config.n_pulses, 8);
  const bool chi_ok = gof.p_value > 1e-3;
  const double sec = timer.seconds();
  report("C5", delta_ok && chi_ok && sec < 60.0,
         "Monte Carlo at 1e7 pulses: |" + fmt(delta) + " - " + fmt(target) +
             "| < 3 x " + fmt(err, 3) + "; chi2 p = " + fmt(gof.p_value, 3),
         sec);
}

void criterion_6_decoy() {
  Timer timer;
  const double eta = 0.1;
  const auto honest_signal = mc::simulate(mc_config(0.1, eta, 10000000, 61), 4);
  const auto honest_decoy = mc::simulate(mc_config(0.3, eta, 10000000, 62), 4);
  const auto honest =
      mc::verify_decoy_consistency(honest_signal, honest_decoy, 1e-3);

  auto aware_signal_cfg = mc_config(0.1, eta, 10000000, 63);
  aware_signal_cfg.eve_strategy = mc::binomial_forwarding_table(eta, 30);
  auto aware_decoy_cfg = mc_config(0.3, eta, 10000000, 64);
  aware_decoy_cfg.eve_strategy = mc::single_tampering_table(eta, 0.10, 30);
  const auto aware = mc::verify_decoy_consistency(
      mc::simulate(aware_signal_cfg, 4), mc::simulate(aware_decoy_cfg, 4),
      1e-3);
  bool rejected_at_one = false;
  for (const auto& row : aware.rows) {
    if (row.n == 1 && row.reject) rejected_at_one = true;
  }
  const double sec = timer.seconds();
  report("C6", honest.pass && !aware.pass && rejected_at_one && sec < 120.0,
         std::string("decoy consistency: beam splitter ") +
             (honest.pass ? "passes" : "fails") +
             "; intensity-aware Eve rejected at n = 1: " +
             (rejected_at_one ? "yes" : "no"),
         sec);
}

struct Figure2Outcome {
  double mu_dist = 0.0;       // intensity maximizing reach
  double l_max = 0.0;         // maximum distance at mu_dist
  double l_base = 0.0;        // max distance at mu = 0.1
  double mu_star_near = 0.0;  // optimal_mu just inside the boundary
  double pert_low = 0.0;      // relative distance change at 0.8 mu_dist
  double pert_high = 0.0;     // relative distance change at 1.2 mu_dist
};

// The reach differences probed here sit near the stability threshold, so the
// intensity that maximizes reach is located with a finer distance bisection
// than the 0.01 km the production solver uses (whose quantization would bias
// the argmax toward smaller mu on the flat top).
double fine_max_distance(const channel::ExperimentPreset& preset, double mu) {
  const auto rate_at = [&](double km) {
    return optimize::detail::rate_or_neg_inf(preset, mu, km);
  };
  if (rate_at(0.0) <= 0.0) return 0.0;
  double lo = 0.0, hi = optimize::kDistanceCapKm;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (rate_at(mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

void criterion_7_figure2() {
  Timer timer;
  const auto preset = channel::load_preset("gys");
  Figure2Outcome out;

  // Reach as a function of intensity: coarse scan, then local refinement.
  double coarse_best_mu = 0.1, coarse_best = -1.0;
  for (double mu = 0.05; mu <= 1.5 + 1e-12; mu += 0.005) {
    const double km = fine_max_distance(preset, mu);
    if (km > coarse_best) {
      coarse_best = km;
      coarse_best_mu = mu;
    }
  }
  out.mu_dist = coarse_best_mu;
  out.l_max = coarse_best;
  for (double mu = coarse_best_mu - 0.01; mu <= coarse_best_mu + 0.01;
       mu += 2.5e-4) {
    const double km = fine_max_distance(preset, mu);
    if (km > out.l_max) {
      out.l_max = km;
      out.mu_dist = mu;
    }
  }
  out.l_base = optimize::max_distance(preset, 0.1).km;

  // (a) R_f(mu) forms one positive hump at every tested distance, and the
  // golden-section solver agrees with its grid oracle there.
  bool unimodal = true;
  bool solver_agrees = true;
  const std::vector<double> tested_distances = {
      0.0, 40.0, 80.0, 110.0, 125.0, out.l_max - 5.0, out.l_max - 1.0};
  for (double km : tested_distances) {
    std::vector<double> rates;
    for (double mu = 0.01; mu <= 2.0 + 1e-12; mu += 1e-3) {
      const double r = optimize::detail::rate_or_neg_inf(preset, mu, km);
      rates.push_back(std::isinf(r) ? -1.0 : r);
    }
    if (!oracle::single_positive_hump(rates)) unimodal = false;
    if (optimize::optimal_mu(preset, km).grid_override) solver_agrees = false;
  }

  // (b) the rate-optimal intensity just inside the reach boundary.
  out.mu_star_near = optimize::optimal_mu(preset, out.l_max - 0.5).mu_star;
  const bool mu_in_band = out.mu_star_near >= 0.5 && out.mu_star_near <= 0.9;

  // (c) the optimal intensity buys more than 10 km over mu = 0.1.
  const double gap = out.l_max - out.l_base;
  const bool gap_ok = gap > 10.0;

  // (d) +-20% perturbations of the optimal intensity barely move the reach.
  const double low = fine_max_distance(preset, 0.8 * out.mu_dist);
  const double high = fine_max_distance(preset, 1.2 * out.mu_dist);
  out.pert_low = (low - out.l_max) / out.l_max;
  out.pert_high = (high - out.l_max) / out.l_max;
  const bool stable = std::abs(out.pert_low) < 0.005 &&
                      std::abs(out.pert_high) < 0.005;

  const double sec = timer.seconds();
  report("C7a", unimodal && solver_agrees && sec < 30.0,
         "R_f(mu) is a single positive hump at all tested distances; solver "
         "matches grid",
         sec);
  report("C7b", mu_in_band,
         "optimal mu near maximum distance: mu* = " + fmt(out.mu_star_near) +
             " (required band [0.5, 0.9])",
         sec);
  report("C7c", gap_ok,
         "reach gain of the optimal intensity over mu = 0.1: " + fmt(gap, 4) +
             " km > 10 km",
         sec);
  report("C7d", stable,
         "+-20% perturbation of mu* moves the reach by " +
             fmt(100.0 * out.pert_low, 3) + "% / " +
             fmt(100.0 * out.pert_high, 3) + "% (< 0.5% required)",
         sec);

  // Calibration report: published reference figures for this experiment
  // against what the pipeline yields with the shipped preset values.
  std::ostringstream cal;
  cal << "calibration report (gys preset: 0.21 dB/km, eta_Bob = 0.045, e0 = "
         "0.033, background 1.7e-6/pulse)\n"
      << "  quantity                        reference    measured     "
         "deviation\n"
      << "  max distance at mu = 0.1        140.2 km     " << fmt(out.l_base, 5)
      << " km    " << fmt(out.l_base - 140.2, 4) << " km\n"
      << "  max distance at optimal mu      164.1 km     " << fmt(out.l_max, 5)
      << " km    " << fmt(out.l_max - 164.1, 4) << " km\n"
      << "  optimal-intensity reach gain    23.9 km      " << fmt(gap, 4)
      << " km     " << fmt(gap - 23.9, 3) << " km\n"
      << "  optimal intensity               ~0.7         "
      << fmt(out.mu_dist, 4) << "       " << fmt(out.mu_dist - 0.7, 3) << "\n"
      << "  reach change at mu* +- 20%      < 0.3%       "
      << fmt(100.0 * std::max(std::abs(out.pert_low), std::abs(out.pert_high)),
             3)
      << "%\n"
      << "  note: the reference figures rest on calibration values their\n"
      << "  source does not print. With the shipped preset the reach-optimal\n"
      << "  intensity sits near 0.41; reproducing the reference optimum of\n"
      << "  ~0.7 requires an optical error rate e0 near 0.005-0.01 instead\n"
      << "  of the 0.033 the cited experiment reports (at e0 = 0.005 the\n"
      << "  modeled reach gain is 23.96 km, matching the published 23.9 km).\n";
  std::fputs(cal.str().c_str(), stdout);
  std::ofstream("calibration_report.txt") << cal.str();
}

void criterion_8_threshold() {
  Timer timer;
  const double impl = attacks::pns_full_info_threshold(0.1);
  const long double mu = 0.1L;
  const long double independent =
      (-std::expm1(-mu) - mu * std::exp(-mu)) / mu;
  const bool pinned = std::abs(impl - 0.04679) <= 1e-5;
  const bool agrees =
      std::abs(impl - static_cast<double>(independent)) < 1e-12;
  const double ratio =
      attacks::pns_full_info_threshold(1e-3) / (1e-3 / 2.0);
  const bool limit_ok = std::abs(ratio - 1.0) <= 0.01;
  const double sec = timer.seconds();
  report("C8", pinned && agrees && limit_ok,
         "PNS threshold: eta*(0.1) = " + fmt(impl) +
             " within 1e-5 of 0.04679; small-mu ratio " + fmt(ratio),
         sec);
}

void criterion_9_determinism() {
  Timer timer;
  const auto dir = fs::temp_directory_path() / "pdsqkd_acceptance";
  fs::create_directories(dir);
  const auto out1 = dir / "det_a.json";
  const auto out2 = dir / "det_b.json";
  const auto out4 = dir / "det_c.json";
  const std::vector<std::string> base = {
      "simulate", "--preset", "ideal", "--mu",   "0.5",  "--eta", "0.1",
      "--pulses", "1000000",  "--seed", "42"};
  auto a = base, b = base, c = base;
  a.insert(a.end(), {"--output", out1.string()});
  b.insert(b.end(), {"--output", out2.string()});
  c.insert(c.end(), {"--threads", "8", "--output", out4.string()});
  bool ok = cli::run(a) == 0 && cli::run(b) == 0 && cli::run(c) == 0;
  const auto bytes = slurp(out1);
  ok = ok && !bytes.empty() && bytes == slurp(out2) && bytes == slurp(out4);
  const double sec = timer.seconds();
  report("C9", ok,
         "simulate with a fixed seed is byte-identical across runs and "
         "across 1 vs 8 threads",
         sec);
}

}  // namespace

int main() {
  criterion_1_crossovers();
  criterion_2_ordering();
  criterion_3_residual();
  criterion_4_balance();
  criterion_5_montecarlo();
  criterion_6_decoy();
  criterion_7_figure2();
  criterion_8_threshold();
  criterion_9_determinism();
  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criterion(s) failed\n", g_failures);
  }
  return g_failures;
}
