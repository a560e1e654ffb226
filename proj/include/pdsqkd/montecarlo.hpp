#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "pdsqkd/core.hpp"
#include "pdsqkd/photon_stats.hpp"

namespace pdsqkd::mc {

/// Photon numbers tracked individually; anything larger lands in the last
/// bin. Far beyond reach for mu <= 2.
inline constexpr int kMaxTracked = 64;

inline constexpr std::uint64_t kMaxPulses = 1'000'000'000'000ULL;

/// Eve as a beam splitter: each photon forwarded independently with the
/// channel transmittance.
struct BeamSplitterEve {};

/// Eve blocks single-photon pulses outright and beam-splits the rest.
struct BlockSinglesEve {};

/// Explicit forwarding table: rows[m][k] is the probability of forwarding k
/// of m photons. Each row must be a distribution over k = 0..m. Pulses
/// larger than the table fall back to the beam splitter.
struct ForwardingTable {
  std::vector<std::vector<double>> rows;
};

using EveStrategy =
    std::variant<BeamSplitterEve, BlockSinglesEve, ForwardingTable>;

inline ForwardingTable binomial_forwarding_table(double eta, int max_m) {
  pdsqkd::detail::check_domain(max_m >= 0, "forwarding table: max_m >= 0");
  ForwardingTable table;
  table.rows.resize(static_cast<std::size_t>(max_m) + 1);
  for (int m = 0; m <= max_m; ++m) {
    auto& row = table.rows[static_cast<std::size_t>(m)];
    row.resize(static_cast<std::size_t>(m) + 1);
    for (int k = 0; k <= m; ++k) row[static_cast<std::size_t>(k)] =
        stats::forward_prob(m, k, eta);
  }
  return table;
}

/// Binomial table with an extra fraction of single-photon pulses blocked --
/// an intensity-aware Eve used to demonstrate decoy-consistency rejection.
inline ForwardingTable single_tampering_table(double eta, double extra_block,
                                              int max_m) {
  pdsqkd::detail::check_domain(extra_block >= 0.0 && extra_block <= 1.0,
                               "tampering table: extra_block in [0, 1]");
  ForwardingTable table = binomial_forwarding_table(eta, max_m);
  if (max_m >= 1) {
    const double keep = eta * (1.0 - extra_block);
    table.rows[1] = {1.0 - keep, keep};
  }
  return table;
}

struct SimConfig {
  stats::SourceModel source;
  double eta;
  stats::DetectorModel detector;
  std::uint64_t n_pulses;
  std::uint64_t seed;
  EveStrategy eve_strategy = BeamSplitterEve{};

  /// Background click probability per pulse window.
  double dark_click_prob() const {
    return detector.dark_rate_hz / source.pulse_rate_hz;
  }

  void validate() const {
    pdsqkd::detail::check_domain(eta >= 0.0 && eta <= 1.0,
                                 "SimConfig: eta must be in [0, 1]");
    // The product sampler draws O(mu) uniforms and needs exp(-mu) > 0.
    pdsqkd::detail::check_domain(source.mu <= 100.0,
                                 "SimConfig: mu too large to simulate");
    pdsqkd::detail::check_domain(n_pulses >= 1,
                                 "SimConfig: n_pulses must be >= 1");
    if (n_pulses > kMaxPulses) {
      throw ConfigError("SimConfig: n_pulses too large for exact counters");
    }
    if (dark_click_prob() > 1.0) {
      throw ConfigError(
          "SimConfig: dark rate exceeds one click per pulse window");
    }
    if (const auto* table = std::get_if<ForwardingTable>(&eve_strategy)) {
      for (std::size_t m = 0; m < table->rows.size(); ++m) {
        const auto& row = table->rows[m];
        if (row.size() != m + 1) {
          throw ConfigError("forwarding table: row m must have m+1 entries");
        }
        double sum = 0.0;
        for (double p : row) {
          if (!(p >= 0.0)) {
            throw ConfigError("forwarding table: negative entry");
          }
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw ConfigError("forwarding table: row does not sum to 1");
        }
      }
    }
  }
};

/// Compact echo of the configuration a result came from, kept for
/// compatibility checks and report output.
struct SimConfigSummary {
  double mu = 0.0;
  double eta = 0.0;
  double dark_click_prob = 0.0;
  std::optional<int> resolving_power;
  std::uint64_t n_pulses = 0;
  std::uint64_t seed = 0;
  int strategy_kind = 0;  // index into EveStrategy
};

struct McResult {
  SimConfigSummary config;
  std::array<std::uint64_t, kMaxTracked> counts_by_detected_n{};
  std::array<std::uint64_t, kMaxTracked> emissions_by_n{};
  std::array<std::uint64_t, kMaxTracked> detections_by_emitted_n{};
  std::uint64_t sifted_singles = 0;
  std::uint64_t tagged_singles = 0;
  std::uint64_t dark_contaminated = 0;
  /// Tagged fraction estimate; NaN when no pulse survived sifting.
  double empirical_delta = std::numeric_limits<double>::quiet_NaN();
  double stderr_delta = std::numeric_limits<double>::quiet_NaN();

  void merge_from(const McResult& other) {
    for (int i = 0; i < kMaxTracked; ++i) {
      counts_by_detected_n[static_cast<std::size_t>(i)] +=
          other.counts_by_detected_n[static_cast<std::size_t>(i)];
      emissions_by_n[static_cast<std::size_t>(i)] +=
          other.emissions_by_n[static_cast<std::size_t>(i)];
      detections_by_emitted_n[static_cast<std::size_t>(i)] +=
          other.detections_by_emitted_n[static_cast<std::size_t>(i)];
    }
    sifted_singles += other.sifted_singles;
    tagged_singles += other.tagged_singles;
    dark_contaminated += other.dark_contaminated;
  }
};

/// Tagged-fraction estimate with its binomial standard error.
inline std::pair<double, double> estimate_delta(const McResult& result) {
  if (result.sifted_singles == 0) {
    throw InsufficientDataError("estimate_delta: no sifted singles");
  }
  const double n = static_cast<double>(result.sifted_singles);
  const double p = static_cast<double>(result.tagged_singles) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

namespace detail {

/// Counter-based generator: pulse i draws from a stream keyed by (seed, i),
/// so any batch partition of the index space reproduces the sequential run
/// bit for bit.
class PulseRng {
 public:
  PulseRng(std::uint64_t seed, std::uint64_t pulse_index)
      : state_(mix(seed ^ mix(pulse_index + 0x9E3779B97F4A7C15ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

/// Knuth product sampler; O(mu) uniforms per draw, fine for weak pulses.
inline int sample_poisson(PulseRng& rng, double exp_neg_mu) {
  int k = -1;
  double p = 1.0;
  do {
    p *= rng.next_unit();
    ++k;
  } while (p > exp_neg_mu);
  return k;
}

struct PulseContext {
  double eta;
  double exp_neg_mu;
  double dark_prob;
  std::optional<int> resolving_power;
  const EveStrategy* strategy;
};

inline int forward_count(PulseRng& rng, int n, const PulseContext& ctx) {
  const auto beam_split = [&](int photons) {
    int kept = 0;
    for (int j = 0; j < photons; ++j) {
      if (rng.next_unit() < ctx.eta) ++kept;
    }
    return kept;
  };
  return std::visit(
      [&](const auto& strategy) -> int {
        using T = std::decay_t<decltype(strategy)>;
        if constexpr (std::is_same_v<T, BeamSplitterEve>) {
          return beam_split(n);
        } else if constexpr (std::is_same_v<T, BlockSinglesEve>) {
          if (n == 1) return 0;
          return beam_split(n);
        } else {
          if (static_cast<std::size_t>(n) < strategy.rows.size()) {
            const auto& row = strategy.rows[static_cast<std::size_t>(n)];
            const double u = rng.next_unit();
            double cdf = 0.0;
            for (int k = 0; k <= n; ++k) {
              cdf += row[static_cast<std::size_t>(k)];
              if (u < cdf) return k;
            }
            return n;
          }
          return beam_split(n);
        }
      },
      *ctx.strategy);
}

inline void run_pulse(std::uint64_t seed, std::uint64_t index,
                      const PulseContext& ctx, McResult& acc) {
  PulseRng rng(seed, index);
  const int emitted = sample_poisson(rng, ctx.exp_neg_mu);
  const int forwarded = forward_count(rng, emitted, ctx);
  int clicks = forwarded;
  bool dark_click = false;
  if (ctx.dark_prob > 0.0 && rng.next_unit() < ctx.dark_prob) {
    ++clicks;
    dark_click = true;
  }
  int reading = clicks;
  if (ctx.resolving_power && reading > *ctx.resolving_power) {
    reading = *ctx.resolving_power;
  }
  const auto bin = [](int v) {
    return static_cast<std::size_t>(v < kMaxTracked ? v : kMaxTracked - 1);
  };
  acc.counts_by_detected_n[bin(reading)] += 1;
  acc.emissions_by_n[bin(emitted)] += 1;
  if (reading >= 1) acc.detections_by_emitted_n[bin(emitted)] += 1;
  if (reading == 1) {
    acc.sifted_singles += 1;
    if (emitted >= 2) acc.tagged_singles += 1;
    if (forwarded == 0 && dark_click) acc.dark_contaminated += 1;
  }
}

}  // namespace detail

/// Pulse-level simulation of source -> Eve -> photon-number-resolving
/// detection, with strict exactly-one sifting (a single photon plus a dark
/// click reads as 2 and is discarded). Deterministic for a given config and
/// seed, independent of the thread count.
inline McResult simulate(const SimConfig& config, int threads = 1) {
  config.validate();
  pdsqkd::detail::check_domain(threads >= 1, "simulate: threads must be >= 1");

  detail::PulseContext ctx{config.eta, std::exp(-config.source.mu),
                           config.dark_click_prob(),
                           config.detector.resolving_power,
                           &config.eve_strategy};

  McResult total;
  if (threads == 1) {
    for (std::uint64_t i = 0; i < config.n_pulses; ++i) {
      detail::run_pulse(config.seed, i, ctx, total);
    }
  } else {
    constexpr std::uint64_t kBatch = 1u << 16;
    const std::uint64_t n_batches = (config.n_pulses + kBatch - 1) / kBatch;
    std::atomic<std::uint64_t> next_batch{0};
    std::vector<McResult> partials(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        McResult& local = partials[static_cast<std::size_t>(t)];
        for (;;) {
          const std::uint64_t b = next_batch.fetch_add(1);
          if (b >= n_batches) break;
          const std::uint64_t begin = b * kBatch;
          const std::uint64_t end =
              std::min(begin + kBatch, config.n_pulses);
          for (std::uint64_t i = begin; i < end; ++i) {
            detail::run_pulse(config.seed, i, ctx, local);
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    // Counter merging is plain integer addition, so the batch-to-thread
    // assignment cannot influence the totals.
    for (const auto& partial : partials) total.merge_from(partial);
  }

  total.config = SimConfigSummary{config.source.mu,
                                  config.eta,
                                  config.dark_click_prob(),
                                  config.detector.resolving_power,
                                  config.n_pulses,
                                  config.seed,
                                  static_cast<int>(config.eve_strategy.index())};
  if (total.sifted_singles > 0) {
    const auto [delta, err] = estimate_delta(total);
    total.empirical_delta = delta;
    total.stderr_delta = err;
  }
  return total;
}

/// Verdict of the per-n yield comparison between a signal and a decoy run.
struct DecoyRow {
  int n = 0;
  std::uint64_t emissions_signal = 0;
  std::uint64_t detections_signal = 0;
  std::uint64_t emissions_decoy = 0;
  std::uint64_t detections_decoy = 0;
  double yield_signal = 0.0;
  double yield_decoy = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool tested = false;
  bool reject = false;
};

struct DecoyReport {
  double alpha = 0.0;
  std::vector<DecoyRow> rows;
  bool pass = true;
};

/// Two-proportion test, per emitted photon number, that the signal and decoy
/// runs saw the same yield Y_n. This is the verification test the decoy
/// method rests on: an eavesdropper acting on photon number alone cannot
/// make the yields differ.
inline DecoyReport verify_decoy_consistency(const McResult& signal,
                                            const McResult& decoy,
                                            double alpha) {
  pdsqkd::detail::check_domain(alpha > 0.0 && alpha < 1.0,
                               "verify_decoy_consistency: alpha in (0, 1)");
  if (signal.config.n_pulses == 0 || decoy.config.n_pulses == 0) {
    throw InsufficientDataError("verify_decoy_consistency: empty run");
  }
  if (signal.config.eta != decoy.config.eta) {
    throw ConfigError("verify_decoy_consistency: differing channel eta");
  }
  if (signal.config.strategy_kind != decoy.config.strategy_kind) {
    throw ConfigError("verify_decoy_consistency: differing Eve strategies");
  }
  if (signal.config.resolving_power != decoy.config.resolving_power) {
    throw ConfigError("verify_decoy_consistency: differing detectors");
  }

  DecoyReport report;
  report.alpha = alpha;
  for (int n = 0; n < kMaxTracked; ++n) {
    const auto i = static_cast<std::size_t>(n);
    DecoyRow row;
    row.n = n;
    row.emissions_signal = signal.emissions_by_n[i];
    row.detections_signal = signal.detections_by_emitted_n[i];
    row.emissions_decoy = decoy.emissions_by_n[i];
    row.detections_decoy = decoy.detections_by_emitted_n[i];
    if (row.emissions_signal == 0 && row.emissions_decoy == 0) continue;
    const double n1 = static_cast<double>(row.emissions_signal);
    const double n2 = static_cast<double>(row.emissions_decoy);
    if (n1 > 0) row.yield_signal = static_cast<double>(row.detections_signal) / n1;
    if (n2 > 0) row.yield_decoy = static_cast<double>(row.detections_decoy) / n2;
    if (n1 > 0 && n2 > 0) {
      const double pooled =
          static_cast<double>(row.detections_signal + row.detections_decoy) /
          (n1 + n2);
      const double expected_min =
          std::min({n1 * pooled, n1 * (1.0 - pooled), n2 * pooled,
                    n2 * (1.0 - pooled)});
      row.tested = expected_min >= 5.0;
      if (row.tested) {
        const double se =
            std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
        row.z = (row.yield_signal - row.yield_decoy) / se;
        row.p_value = std::erfc(std::abs(row.z) / std::sqrt(2.0));
        row.reject = row.p_value < alpha;
      }
    }
    if (row.reject) report.pass = false;
    report.rows.push_back(row);
  }
  if (report.rows.empty()) {
    throw InsufficientDataError("verify_decoy_consistency: no data rows");
  }
  return report;
}

}  // namespace pdsqkd::mc
