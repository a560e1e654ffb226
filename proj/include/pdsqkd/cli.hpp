#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdsqkd/attacks.hpp"
#include "pdsqkd/channel.hpp"
#include "pdsqkd/core.hpp"
#include "pdsqkd/io.hpp"
#include "pdsqkd/montecarlo.hpp"
#include "pdsqkd/optimize.hpp"
#include "pdsqkd/security_rate.hpp"

namespace pdsqkd::cli {

enum class Format { csv, json };

/// Fully resolved invocation: one command plus its inputs and output sink.
struct RunConfig {
  std::string command;
  std::string preset_name = "gys";
  std::optional<std::filesystem::path> preset_file;
  std::optional<std::filesystem::path> overrides_file;
  std::filesystem::path output;
  Format format = Format::csv;
  std::uint64_t seed = 1;
};

namespace detail {

inline channel::ExperimentPreset resolve_preset(const RunConfig& rc) {
  channel::ExperimentPreset preset =
      rc.preset_file ? channel::load_preset_file(*rc.preset_file,
                                                 rc.preset_name)
                     : channel::load_preset(rc.preset_name);
  if (rc.overrides_file) channel::apply_overrides(preset, *rc.overrides_file);
  return preset;
}

inline void write_table(const io::Table& table, const RunConfig& rc,
                        const io::json& config, const io::json& summary) {
  if (rc.format == Format::csv) {
    io::write_csv_file(rc.output, table);
  } else {
    io::write_json_file(
        rc.output, io::make_report(config, io::table_to_json(table), summary));
  }
}

inline io::json preset_json(const channel::ExperimentPreset& p) {
  io::json j;
  j["name"] = p.name;
  j["attenuation_db_per_km"] = p.attenuation_db_per_km;
  j["receiver_efficiency"] = p.receiver_efficiency;
  j["e0"] = p.e0;
  j["dark_click_prob"] = p.dark_click_prob;
  j["pulse_rate"] = p.pulse_rate_hz;
  j["mu"] = p.mu;
  if (p.decoy_mu) j["decoy_mu"] = *p.decoy_mu;
  if (p.resolving_power) j["resolving_power"] = *p.resolving_power;
  return j;
}

inline io::json mc_result_json(const mc::McResult& r) {
  const auto trim = [](const auto& arr) {
    int last = 0;
    for (int i = 0; i < mc::kMaxTracked; ++i) {
      if (arr[static_cast<std::size_t>(i)] != 0) last = i;
    }
    return last;
  };
  io::json config;
  config["mu"] = r.config.mu;
  config["eta"] = r.config.eta;
  config["dark_click_prob"] = r.config.dark_click_prob;
  if (r.config.resolving_power) {
    config["resolving_power"] = *r.config.resolving_power;
  } else {
    config["resolving_power"] = nullptr;
  }
  config["n_pulses"] = r.config.n_pulses;
  config["seed"] = r.config.seed;
  config["strategy_kind"] = r.config.strategy_kind;

  io::json rows = io::json::array();
  const int last = trim(r.counts_by_detected_n);
  for (int n = 0; n <= last; ++n) {
    rows.push_back({{"n", n},
                    {"count", r.counts_by_detected_n[static_cast<std::size_t>(n)]}});
  }

  io::json summary;
  summary["sifted_singles"] = r.sifted_singles;
  summary["tagged_singles"] = r.tagged_singles;
  summary["dark_contaminated"] = r.dark_contaminated;
  if (r.sifted_singles > 0) {
    summary["empirical_delta"] = r.empirical_delta;
    summary["stderr_delta"] = r.stderr_delta;
  } else {
    summary["empirical_delta"] = nullptr;
    summary["stderr_delta"] = nullptr;
  }
  const int last_emit = trim(r.emissions_by_n);
  io::json emissions = io::json::array();
  io::json detections = io::json::array();
  for (int n = 0; n <= last_emit; ++n) {
    emissions.push_back(r.emissions_by_n[static_cast<std::size_t>(n)]);
    detections.push_back(
        r.detections_by_emitted_n[static_cast<std::size_t>(n)]);
  }
  summary["emissions_by_n"] = std::move(emissions);
  summary["detections_by_emitted_n"] = std::move(detections);
  return io::make_report(config, rows, summary);
}

/// Companion gnuplot script plotting selected table columns (1-based,
/// x_col on the abscissa).
inline void write_plot_script(const std::filesystem::path& csv_path,
                              std::size_t x_col,
                              const std::vector<std::size_t>& y_cols,
                              bool log_y, const std::string& x_label,
                              const std::string& y_label) {
  std::filesystem::path script = csv_path;
  script.replace_extension(".gp");
  std::ofstream out(script, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + script.string());
  }
  out << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set xlabel '" << x_label << "'\n"
      << "set ylabel '" << y_label << "'\n";
  if (log_y) out << "set logscale y\n";
  out << "plot";
  for (std::size_t i = 0; i < y_cols.size(); ++i) {
    out << (i == 0 ? " " : ", ") << "'" << csv_path.filename().string()
        << "' using " << x_col << ':' << y_cols[i] << " with lines";
  }
  out << '\n';
}

struct SimulateArgs {
  std::optional<double> mu;
  std::optional<double> eta;
  double distance_km = 0.0;
  std::optional<double> dark_prob;
  std::optional<int> resolving;
  std::uint64_t pulses = 1000000;
  int threads = 1;
  std::string eve = "beam_splitter";
};

inline mc::SimConfig make_sim_config(const channel::ExperimentPreset& preset,
                                     const SimulateArgs& a,
                                     std::uint64_t seed) {
  const double mu = a.mu.value_or(preset.mu);
  const double eta =
      a.eta ? *a.eta : preset.transmittance_at(a.distance_km);
  const double dark = a.dark_prob.value_or(preset.dark_click_prob);
  const std::optional<int> resolving =
      a.resolving ? a.resolving : preset.resolving_power;
  stats::SourceModel source(mu, preset.pulse_rate_hz);
  stats::DetectorModel detector(resolving, dark * preset.pulse_rate_hz);
  mc::SimConfig config{source, eta, detector, a.pulses, seed};
  if (a.eve == "block_singles") {
    config.eve_strategy = mc::BlockSinglesEve{};
  } else if (a.eve == "beam_splitter") {
    config.eve_strategy = mc::BeamSplitterEve{};
  } else {
    throw ConfigError("unknown eve strategy: " + a.eve);
  }
  return config;
}

}  // namespace detail

/// Entry point behind main(). Returns 0 on success, 1 on domain/data errors,
/// 2 on usage errors.
inline int run(std::vector<std::string> args) {
  CLI::App app{"Security analysis for photon-number-resolving decoy-state BB84"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string format_name = "csv";

  // Each subcommand owns its output path; a shared variable would let the
  // setup-time defaults of later subcommands clobber earlier ones.
  std::map<const CLI::App*, std::filesystem::path> command_output;
  const auto add_common = [&](CLI::App* cmd, const char* default_output,
                              bool with_preset = true) {
    auto& out = command_output[cmd];
    out = default_output;
    cmd->add_option("-o,--output", out, "Output file");
    if (with_preset) {
      cmd->add_option("--preset", rc.preset_name, "Preset name")
          ->default_val("gys");
      cmd->add_option("--preset-file", rc.preset_file,
                      "Preset file (key-value sections)");
      cmd->add_option("--overrides", rc.overrides_file,
                      "Flat key = value override file");
    }
  };
  const auto add_format = [&](CLI::App* cmd) {
    cmd->add_option("--format", format_name, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->default_val("csv");
  };

  // attack-info: information-vs-QBER grid for n = 1..n_max.
  auto* attack_cmd = app.add_subcommand(
      "attack-info", "Tabulate n*I_SI and I_CMP(n) over a QBER grid");
  double e_min = 0.0, e_max = 0.25;
  int e_steps = 51, n_max = 5;
  bool attack_plot = false;
  attack_cmd->add_option("--e-min", e_min)->default_val(0.0);
  attack_cmd->add_option("--e-max", e_max)->default_val(0.25);
  attack_cmd->add_option("--steps", e_steps)->default_val(51);
  attack_cmd->add_option("--n-max", n_max)->default_val(5);
  attack_cmd->add_flag("--plot-script", attack_plot,
                       "Also write a gnuplot script next to the table");
  add_common(attack_cmd, "attack_info.csv", false);
  add_format(attack_cmd);

  // crossover: QBER at which the coherent attack stops beating n SI attacks.
  auto* crossover_cmd = app.add_subcommand(
      "crossover", "QBER where I_CMP(n) = n*I_SI");
  int crossover_n = 2;
  crossover_cmd->add_option("n", crossover_n, "Photon number")->required();
  add_common(crossover_cmd, "crossover.csv", false);
  add_format(crossover_cmd);

  // rate-curve: final key rate vs distance.
  auto* curve_cmd = app.add_subcommand(
      "rate-curve", "Final key rate vs transmission distance");
  std::vector<double> curve_mus;
  double km_min = 0.0, km_max = 170.0;
  int km_steps = 171;
  bool curve_plot = false;
  curve_cmd->add_option("--mu", curve_mus, "Source intensity (repeatable)");
  curve_cmd->add_option("--min-km", km_min)->default_val(0.0);
  curve_cmd->add_option("--max-km", km_max)->default_val(170.0);
  curve_cmd->add_option("--steps", km_steps)->default_val(171);
  curve_cmd->add_flag("--plot-script", curve_plot,
                      "Also write a gnuplot script next to the table");
  add_common(curve_cmd, "rate_curve.csv");
  add_format(curve_cmd);

  // optimize-mu
  auto* optmu_cmd =
      app.add_subcommand("optimize-mu", "Intensity maximizing the key rate");
  double opt_distance = 0.0;
  optmu_cmd->add_option("--distance", opt_distance, "Distance in km")
      ->required();
  add_common(optmu_cmd, "optimize_mu.json");

  // max-distance
  auto* maxd_cmd =
      app.add_subcommand("max-distance", "Largest distance with positive rate");
  std::optional<double> maxd_mu;
  maxd_cmd->add_option("--mu", maxd_mu, "Source intensity");
  add_common(maxd_cmd, "max_distance.json");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Pulse-level Monte Carlo");
  detail::SimulateArgs sim;
  sim_cmd->add_option("--mu", sim.mu);
  auto* sim_eta = sim_cmd->add_option("--eta", sim.eta, "Transmittance");
  sim_cmd->add_option("--distance", sim.distance_km)->excludes(sim_eta);
  sim_cmd->add_option("--pulses", sim.pulses)->default_val(1000000);
  sim_cmd->add_option("--threads", sim.threads)->default_val(1);
  sim_cmd->add_option("--dark-prob", sim.dark_prob,
                      "Background click probability per pulse");
  sim_cmd->add_option("--resolving", sim.resolving,
                      "Detector resolving power");
  sim_cmd->add_option("--eve", sim.eve, "beam_splitter or block_singles")
      ->default_val("beam_splitter");
  sim_cmd->add_option("--seed", rc.seed)->default_val(1);
  add_common(sim_cmd, "simulate.json");

  // decoy-check
  auto* decoy_cmd = app.add_subcommand(
      "decoy-check", "Signal/decoy yield consistency test");
  detail::SimulateArgs dc;
  std::optional<double> decoy_mu;
  double alpha = 1e-3, tamper = 0.0;
  decoy_cmd->add_option("--mu", dc.mu);
  decoy_cmd->add_option("--decoy-mu", decoy_mu);
  auto* dc_eta = decoy_cmd->add_option("--eta", dc.eta, "Transmittance");
  decoy_cmd->add_option("--distance", dc.distance_km)->excludes(dc_eta);
  decoy_cmd->add_option("--pulses", dc.pulses)->default_val(1000000);
  decoy_cmd->add_option("--threads", dc.threads)->default_val(1);
  decoy_cmd->add_option("--dark-prob", dc.dark_prob);
  decoy_cmd->add_option("--alpha", alpha, "Per-n significance")
      ->default_val(1e-3);
  decoy_cmd->add_option("--tamper-singles", tamper,
                        "Extra fraction of decoy singles Eve blocks")
      ->default_val(0.0);
  decoy_cmd->add_option("--seed", rc.seed)->default_val(1);
  add_common(decoy_cmd, "decoy_check.json");

  // pns-threshold
  auto* thr_cmd = app.add_subcommand(
      "pns-threshold", "Transmittance below which PNS leaks everything");
  double thr_mu = 0.1;
  thr_cmd->add_option("--mu", thr_mu)->default_val(0.1);
  add_common(thr_cmd, "pns_threshold.csv", false);
  add_format(thr_cmd);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  rc.format = format_name == "json" ? Format::json : Format::csv;
  for (const auto& [cmd, path] : command_output) {
    if (cmd->parsed()) rc.output = path;
  }

  try {
    if (*attack_cmd) {
      rc.command = "attack-info";
      pdsqkd::detail::check_domain(e_steps >= 2, "attack-info: steps >= 2");
      pdsqkd::detail::check_domain(n_max >= 1, "attack-info: n-max >= 1");
      io::Table table;
      table.columns.push_back("e");
      for (int n = 1; n <= n_max; ++n) {
        table.columns.push_back("i_si_" + std::to_string(n));
        table.columns.push_back("i_cmp_" + std::to_string(n));
      }
      for (int i = 0; i < e_steps; ++i) {
        const double e = e_min + (e_max - e_min) * i / (e_steps - 1);
        std::vector<double> row{e};
        const double si = attacks::si_information(e);
        for (int n = 1; n <= n_max; ++n) {
          row.push_back(n * si);
          row.push_back(attacks::cmp_information(n, e));
        }
        table.rows.push_back(std::move(row));
      }
      detail::write_table(table, rc,
                          {{"e_min", e_min},
                           {"e_max", e_max},
                           {"steps", e_steps},
                           {"n_max", n_max}},
                          {{"rows", table.rows.size()}});
      if (attack_plot) {
        std::vector<std::size_t> y_cols;
        for (std::size_t c = 2; c <= table.columns.size(); ++c) {
          y_cols.push_back(c);
        }
        detail::write_plot_script(rc.output, 1, y_cols, false, "QBER",
                                  "information (bits)");
      }
      std::cout << "attack-info: " << table.rows.size() << " QBER points, n=1.."
                << n_max << " -> " << rc.output.string() << '\n';
    } else if (*crossover_cmd) {
      rc.command = "crossover";
      const auto result = attacks::crossover_qber(crossover_n);
      io::Table table;
      table.columns = {"n", "e_star"};
      table.rows = {{static_cast<double>(crossover_n), result.qber}};
      detail::write_table(table, rc, {{"n", crossover_n}},
                          {{"degenerate_identity", result.degenerate_identity},
                           {"iterations", result.iterations}});
      if (result.degenerate_identity) {
        std::cout << "crossover: n=1 is degenerate, I_CMP(1) == I_SI for all e -> "
                  << rc.output.string() << '\n';
      } else {
        std::cout << "crossover: n=" << crossover_n
                  << " e* = " << io::format_number(result.qber) << " -> "
                  << rc.output.string() << '\n';
      }
    } else if (*curve_cmd) {
      rc.command = "rate-curve";
      const auto preset = detail::resolve_preset(rc);
      if (curve_mus.empty()) curve_mus.push_back(preset.mu);
      io::Table table;
      const bool multi = curve_mus.size() > 1;
      if (multi) table.columns.push_back("mu");
      table.columns.insert(table.columns.end(),
                           {"distance_km", "eta", "e_total", "delta0",
                            "r_final"});
      for (double mu : curve_mus) {
        const auto sweep_table =
            optimize::sweep(preset, optimize::SweepVariable::distance, km_min,
                            km_max, km_steps, mu);
        for (const auto& row : sweep_table.rows) {
          std::vector<double> out;
          if (multi) out.push_back(row.mu);
          out.insert(out.end(), {row.distance_km, row.eta, row.e_total,
                                 row.delta0, row.r_final});
          table.rows.push_back(std::move(out));
        }
      }
      detail::write_table(table, rc,
                          {{"preset", preset.name},
                           {"mu", curve_mus},
                           {"min_km", km_min},
                           {"max_km", km_max},
                           {"steps", km_steps}},
                          {{"rows", table.rows.size()}});
      if (curve_plot) {
        // distance on the abscissa, final rate on the ordinate
        const std::size_t x_col = multi ? 2 : 1;
        detail::write_plot_script(rc.output, x_col, {table.columns.size()},
                                  true, "distance (km)", "key rate per pulse");
      }
      std::cout << "rate-curve: preset " << preset.name << ", "
                << table.rows.size() << " rows -> " << rc.output.string()
                << '\n';
    } else if (*optmu_cmd) {
      rc.command = "optimize-mu";
      const auto preset = detail::resolve_preset(rc);
      const auto report = optimize::optimal_mu(preset, opt_distance);
      io::json row{{"mu_star", report.mu_star},
                   {"rate_at_optimum", report.rate_at_optimum},
                   {"distance_km", report.distance_km},
                   {"bracket_lo", report.bracket_lo},
                   {"bracket_hi", report.bracket_hi},
                   {"iterations", report.iterations},
                   {"positive_rate", report.positive_rate},
                   {"grid_override", report.grid_override}};
      io::write_json_file(
          rc.output,
          io::make_report(
              {{"preset", detail::preset_json(preset)},
               {"distance_km", opt_distance}},
              io::json::array({row}),
              {{"mu_star", report.mu_star},
               {"positive_rate", report.positive_rate}}));
      if (report.positive_rate) {
        std::cout << "optimize-mu: mu* = " << io::format_number(report.mu_star)
                  << " R_f = " << io::format_number(report.rate_at_optimum)
                  << " at " << io::format_number(opt_distance) << " km -> "
                  << rc.output.string() << '\n';
      } else {
        std::cout << "optimize-mu: no positive rate at "
                  << io::format_number(opt_distance) << " km -> "
                  << rc.output.string() << '\n';
      }
    } else if (*maxd_cmd) {
      rc.command = "max-distance";
      const auto preset = detail::resolve_preset(rc);
      const double mu = maxd_mu.value_or(preset.mu);
      const auto result = optimize::max_distance(preset, mu);
      io::json row{{"mu", mu},
                   {"max_distance_km", result.km},
                   {"positive_rate", result.positive_rate},
                   {"capped", result.capped}};
      io::write_json_file(
          rc.output,
          io::make_report({{"preset", detail::preset_json(preset)}, {"mu", mu}},
                          io::json::array({row}),
                          {{"max_distance_km", result.km},
                           {"capped", result.capped}}));
      std::cout << "max-distance: mu = " << io::format_number(mu) << " -> "
                << io::format_number(result.km) << " km"
                << (result.capped ? " (search cap)" : "")
                << (result.positive_rate ? "" : " (no positive rate)") << " -> "
                << rc.output.string() << '\n';
    } else if (*sim_cmd) {
      rc.command = "simulate";
      const auto preset = detail::resolve_preset(rc);
      const auto config = detail::make_sim_config(preset, sim, rc.seed);
      const auto result = mc::simulate(config, sim.threads);
      io::write_json_file(rc.output, detail::mc_result_json(result));
      std::cout << "simulate: " << result.config.n_pulses << " pulses, sifted "
                << result.sifted_singles << ", delta "
                << (result.sifted_singles
                        ? io::format_number(result.empirical_delta)
                        : std::string("n/a"))
                << " -> " << rc.output.string() << '\n';
    } else if (*decoy_cmd) {
      rc.command = "decoy-check";
      const auto preset = detail::resolve_preset(rc);
      detail::SimulateArgs signal_args = dc;
      detail::SimulateArgs decoy_args = dc;
      decoy_args.mu = decoy_mu ? decoy_mu
                               : (preset.decoy_mu
                                      ? std::optional<double>(*preset.decoy_mu)
                                      : std::nullopt);
      if (!decoy_args.mu) {
        throw ConfigError(
            "decoy-check: no decoy intensity (preset lacks decoy_mu and "
            "--decoy-mu not given)");
      }
      auto signal_config = detail::make_sim_config(preset, signal_args, rc.seed);
      auto decoy_config =
          detail::make_sim_config(preset, decoy_args, rc.seed + 1);
      if (tamper > 0.0) {
        signal_config.eve_strategy =
            mc::binomial_forwarding_table(signal_config.eta, 30);
        decoy_config.eve_strategy =
            mc::single_tampering_table(decoy_config.eta, tamper, 30);
      }
      const auto signal = mc::simulate(signal_config, dc.threads);
      const auto decoy = mc::simulate(decoy_config, dc.threads);
      const auto verdict = mc::verify_decoy_consistency(signal, decoy, alpha);
      io::json rows = io::json::array();
      for (const auto& row : verdict.rows) {
        rows.push_back({{"n", row.n},
                        {"emissions_signal", row.emissions_signal},
                        {"detections_signal", row.detections_signal},
                        {"emissions_decoy", row.emissions_decoy},
                        {"detections_decoy", row.detections_decoy},
                        {"yield_signal", row.yield_signal},
                        {"yield_decoy", row.yield_decoy},
                        {"z", row.z},
                        {"p_value", row.p_value},
                        {"tested", row.tested},
                        {"reject", row.reject}});
      }
      io::write_json_file(
          rc.output,
          io::make_report({{"preset", detail::preset_json(preset)},
                           {"mu", signal.config.mu},
                           {"decoy_mu", decoy.config.mu},
                           {"eta", signal.config.eta},
                           {"pulses", dc.pulses},
                           {"alpha", alpha},
                           {"tamper_singles", tamper},
                           {"seed", rc.seed}},
                          std::move(rows), {{"pass", verdict.pass}}));
      std::cout << "decoy-check: " << (verdict.pass ? "PASS" : "REJECT")
                << " (mu = " << io::format_number(signal.config.mu)
                << ", mu' = " << io::format_number(decoy.config.mu) << ") -> "
                << rc.output.string() << '\n';
    } else if (*thr_cmd) {
      rc.command = "pns-threshold";
      const double threshold = attacks::pns_full_info_threshold(thr_mu);
      io::Table table;
      table.columns = {"mu", "eta_threshold"};
      table.rows = {{thr_mu, threshold}};
      detail::write_table(table, rc, {{"mu", thr_mu}}, io::json::object());
      std::cout << "pns-threshold: mu = " << io::format_number(thr_mu)
                << " eta* = " << io::format_number(threshold) << " -> "
                << rc.output.string() << '\n';
    }
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace pdsqkd::cli
