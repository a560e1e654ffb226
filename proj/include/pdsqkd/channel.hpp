#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pdsqkd/core.hpp"

namespace pdsqkd::channel {

/// Fiber link plus lumped receiver: eta = eff * 10^(-alpha L / 10).
struct ChannelModel {
  double attenuation_db_per_km;
  double length_km;
  double receiver_efficiency;

  void validate() const {
    pdsqkd::detail::check_domain(attenuation_db_per_km >= 0.0,
                                 "ChannelModel: attenuation must be >= 0");
    pdsqkd::detail::check_domain(length_km >= 0.0,
                                 "ChannelModel: length must be >= 0");
    pdsqkd::detail::check_domain(
        receiver_efficiency > 0.0 && receiver_efficiency <= 1.0,
        "ChannelModel: receiver efficiency must be in (0, 1]");
  }
};

inline double transmittance(const ChannelModel& ch) {
  ch.validate();
  return ch.receiver_efficiency *
         std::pow(10.0, -ch.attenuation_db_per_km * ch.length_km / 10.0);
}

/// Inverse of transmittance in the length argument.
inline double length_for_transmittance(double attenuation_db_per_km,
                                       double receiver_efficiency,
                                       double eta) {
  pdsqkd::detail::check_domain(attenuation_db_per_km > 0.0,
                               "length_for_transmittance: attenuation must be > 0");
  pdsqkd::detail::check_domain(
      eta > 0.0 && eta <= receiver_efficiency,
      "length_for_transmittance: eta must be in (0, receiver_efficiency]");
  return 10.0 * std::log10(receiver_efficiency / eta) / attenuation_db_per_km;
}

/// A named set of calibration inputs. The numeric values come from the cited
/// experimental literature, not from first principles; they live in the
/// preset data file so recalibration never touches code.
struct ExperimentPreset {
  std::string name;
  double attenuation_db_per_km = 0.0;
  double receiver_efficiency = 1.0;
  double e0 = 0.0;
  double dark_click_prob = 0.0;  // background click probability per pulse
  double pulse_rate_hz = 1e6;
  double mu = 0.1;
  std::optional<double> decoy_mu;
  std::optional<int> resolving_power;  // empty = unbounded detector

  void validate() const {
    ChannelModel ch{attenuation_db_per_km, 0.0, receiver_efficiency};
    ch.validate();
    pdsqkd::detail::check_domain(e0 >= 0.0 && e0 <= 0.5,
                                 "preset: e0 must be in [0, 0.5]");
    pdsqkd::detail::check_domain(
        dark_click_prob >= 0.0 && dark_click_prob <= 1.0,
        "preset: dark_click_prob must be in [0, 1]");
    pdsqkd::detail::check_domain(pulse_rate_hz > 0.0,
                                 "preset: pulse_rate must be > 0");
    pdsqkd::detail::check_domain(mu > 0.0, "preset: mu must be > 0");
    if (decoy_mu) {
      pdsqkd::detail::check_domain(*decoy_mu > 0.0 && *decoy_mu != mu,
                                   "preset: decoy_mu must be > 0 and != mu");
    }
    if (resolving_power) {
      pdsqkd::detail::check_domain(*resolving_power >= 1,
                                   "preset: resolving_power must be >= 1");
    }
  }

  double transmittance_at(double distance_km) const {
    return transmittance(
        ChannelModel{attenuation_db_per_km, distance_km, receiver_efficiency});
  }
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "attenuation_db_per_km", "receiver_efficiency", "e0",
      "dark_click_prob",       "dark_rate_hz",        "pulse_rate",
      "mu",                    "decoy_mu",            "resolving_power"};
  return keys;
}

/// Fill preset fields from one key-value section. Both dark-count forms are
/// accepted: a per-pulse probability, or a rate in Hz converted through the
/// pulse rate.
inline void apply_section(ExperimentPreset& preset,
                          const boost::property_tree::ptree& section,
                          const std::string& where) {
  for (const auto& kv : section) {
    if (!known_keys().count(kv.first)) {
      throw PresetError(where + ": unknown key '" + kv.first + "'");
    }
  }
  const auto get = [&](const char* key) {
    return section.get_optional<double>(key);
  };
  if (auto v = get("attenuation_db_per_km")) preset.attenuation_db_per_km = *v;
  if (auto v = get("receiver_efficiency")) preset.receiver_efficiency = *v;
  if (auto v = get("e0")) preset.e0 = *v;
  if (auto v = get("pulse_rate")) preset.pulse_rate_hz = *v;
  if (auto v = get("mu")) preset.mu = *v;
  if (auto v = get("decoy_mu")) preset.decoy_mu = *v;
  if (auto v = section.get_optional<int>("resolving_power")) {
    preset.resolving_power = *v;
  }
  const auto dark_prob = get("dark_click_prob");
  const auto dark_hz = get("dark_rate_hz");
  if (dark_prob && dark_hz) {
    throw PresetError(where +
                      ": give dark_click_prob or dark_rate_hz, not both");
  }
  if (dark_prob) preset.dark_click_prob = *dark_prob;
  if (dark_hz) preset.dark_click_prob = *dark_hz / preset.pulse_rate_hz;
}

inline boost::property_tree::ptree read_ini_file(
    const std::filesystem::path& file) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(file.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw PresetError(std::string("cannot read preset file: ") + e.what());
  }
  return tree;
}

}  // namespace detail

/// Preset file resolution order: $PDSQKD_PRESET_DIR/presets.ini, then the
/// data file shipped with the build.
inline std::filesystem::path default_preset_file() {
  if (const char* dir = std::getenv("PDSQKD_PRESET_DIR")) {
    return std::filesystem::path(dir) / "presets.ini";
  }
#ifdef PDSQKD_DEFAULT_PRESET_FILE
  return std::filesystem::path(PDSQKD_DEFAULT_PRESET_FILE);
#else
  throw PresetError(
      "no preset file: set PDSQKD_PRESET_DIR or build with "
      "PDSQKD_DEFAULT_PRESET_FILE");
#endif
}

inline std::vector<std::string> preset_names(
    const std::filesystem::path& file) {
  std::vector<std::string> names;
  for (const auto& section : detail::read_ini_file(file)) {
    if (!section.second.empty()) names.push_back(section.first);
  }
  return names;
}

inline ExperimentPreset load_preset_file(const std::filesystem::path& file,
                                         std::string_view name) {
  const auto tree = detail::read_ini_file(file);
  for (const auto& section : tree) {
    if (section.first == name) {
      ExperimentPreset preset;
      preset.name = std::string(name);
      detail::apply_section(preset, section.second,
                            "preset '" + preset.name + "'");
      preset.validate();
      return preset;
    }
  }
  std::ostringstream msg;
  msg << "unknown preset '" << name << "' in " << file.string()
      << "; available:";
  for (const auto& n : preset_names(file)) msg << ' ' << n;
  throw PresetError(msg.str());
}

inline ExperimentPreset load_preset(std::string_view name) {
  return load_preset_file(default_preset_file(), name);
}

/// Apply a flat key = value override file (same keys as a preset section) on
/// top of an already loaded preset.
inline void apply_overrides(ExperimentPreset& preset,
                            const std::filesystem::path& file) {
  const auto tree = detail::read_ini_file(file);
  boost::property_tree::ptree flat;
  for (const auto& kv : tree) {
    if (kv.second.empty()) {
      flat.push_back(kv);
    } else {
      throw PresetError("override file must be flat key = value lines: " +
                        file.string());
    }
  }
  detail::apply_section(preset, flat, "overrides " + file.string());
  preset.validate();
}

}  // namespace pdsqkd::channel
