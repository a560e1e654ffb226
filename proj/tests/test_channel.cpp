#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pdsqkd/channel.hpp"
#include "support/oracles.hpp"

using namespace pdsqkd;
using namespace pdsqkd::channel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::filesystem::path write_temp_ini(const std::string& name,
                                     const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("transmittance follows the fiber loss law") {
  CHECK_THAT(transmittance({0.21, 100.0, 0.045}),
             WithinRel(oracle::frozen::kTransmittance100km, 1e-13));
  CHECK(transmittance({0.21, 0.0, 0.045}) == 0.045);
  CHECK(transmittance({0.0, 1000.0, 1.0}) == 1.0);
  SECTION("strictly decreasing in length and attenuation") {
    double prev = 1.0;
    for (double km : {1.0, 10.0, 50.0, 200.0, 400.0}) {
      const double eta = transmittance({0.21, km, 0.045});
      CHECK(eta < prev);
      prev = eta;
    }
    CHECK(transmittance({0.3, 50.0, 0.045}) < transmittance({0.2, 50.0, 0.045}));
  }
  CHECK_THROWS_AS(transmittance({-0.1, 10.0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(transmittance({0.2, -1.0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(transmittance({0.2, 10.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS(transmittance({0.2, 10.0, 1.5}), std::domain_error);
}

TEST_CASE("length round-trips through transmittance") {
  for (double km : {0.0, 3.7, 42.0, 123.456, 310.0}) {
    const double eta = transmittance({0.21, km, 0.045});
    CHECK_THAT(length_for_transmittance(0.21, 0.045, eta),
               WithinAbs(km, 1e-9));
  }
  CHECK_THROWS_AS(length_for_transmittance(0.21, 0.045, 0.05),
                  std::domain_error);
}

TEST_CASE("shipped presets load and validate") {
  const auto gys = load_preset("gys");
  CHECK(gys.name == "gys");
  CHECK(gys.attenuation_db_per_km == 0.21);
  CHECK(gys.receiver_efficiency == 0.045);
  CHECK(gys.e0 == 0.033);
  CHECK(gys.dark_click_prob == 1.7e-6);
  CHECK(gys.mu == 0.1);
  REQUIRE(gys.decoy_mu.has_value());
  CHECK(*gys.decoy_mu == 0.3);
  REQUIRE(gys.resolving_power.has_value());
  CHECK(*gys.resolving_power == 10);

  const auto ideal = load_preset("ideal");
  CHECK(ideal.attenuation_db_per_km == 0.0);
  CHECK(ideal.receiver_efficiency == 1.0);
  CHECK(ideal.e0 == 0.0);
  CHECK(ideal.dark_click_prob == 0.0);
  CHECK_FALSE(ideal.resolving_power.has_value());
  CHECK(ideal.transmittance_at(1e4) == 1.0);

  // The filtered preset exercises the Hz + pulse-rate dark form.
  const auto filtered = load_preset("filtered");
  CHECK_THAT(filtered.dark_click_prob, WithinRel(5e-8, 1e-12));
}

TEST_CASE("unknown preset names list what is available") {
  try {
    load_preset("bogus");
    FAIL("expected PresetError");
  } catch (const PresetError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("gys") != std::string::npos);
    CHECK(msg.find("ideal") != std::string::npos);
  }
}

TEST_CASE("preset directory env var takes precedence") {
  const auto dir = std::filesystem::temp_directory_path() / "pdsqkd_env_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "presets.ini");
    out << "[custom]\nattenuation_db_per_km = 0.3\nreceiver_efficiency = "
           "0.5\nmu = 0.2\npulse_rate = 1e6\n";
  }
  setenv("PDSQKD_PRESET_DIR", dir.c_str(), 1);
  const auto preset = load_preset("custom");
  unsetenv("PDSQKD_PRESET_DIR");
  CHECK(preset.attenuation_db_per_km == 0.3);
  CHECK(preset.mu == 0.2);
}

TEST_CASE("preset parsing is strict") {
  const auto bad_key = write_temp_ini(
      "pdsqkd_bad_key.ini", "[x]\nattenuaton = 0.2\nmu = 0.1\n");
  CHECK_THROWS_AS(load_preset_file(bad_key, "x"), PresetError);

  const auto both_darks = write_temp_ini(
      "pdsqkd_both_darks.ini",
      "[x]\nmu = 0.1\ndark_click_prob = 1e-6\ndark_rate_hz = 0.05\n");
  CHECK_THROWS_AS(load_preset_file(both_darks, "x"), PresetError);

  const auto bad_value = write_temp_ini(
      "pdsqkd_bad_value.ini", "[x]\nmu = -0.5\n");
  CHECK_THROWS_AS(load_preset_file(bad_value, "x"), std::domain_error);

  CHECK_THROWS_AS(load_preset_file("/nonexistent/nowhere.ini", "x"),
                  PresetError);
}

TEST_CASE("hz dark form converts through the pulse rate") {
  const auto path = write_temp_ini(
      "pdsqkd_hz_form.ini",
      "[x]\nmu = 0.1\npulse_rate = 2e6\ndark_rate_hz = 0.05\n");
  const auto preset = load_preset_file(path, "x");
  CHECK_THAT(preset.dark_click_prob, WithinRel(2.5e-8, 1e-12));
}

TEST_CASE("override files adjust loaded presets") {
  auto preset = load_preset("gys");
  const auto overrides = write_temp_ini("pdsqkd_overrides.ini",
                                        "mu = 0.7\ne0 = 0.02\n");
  apply_overrides(preset, overrides);
  CHECK(preset.mu == 0.7);
  CHECK(preset.e0 == 0.02);
  CHECK(preset.attenuation_db_per_km == 0.21);  // untouched

  const auto sectioned = write_temp_ini("pdsqkd_sectioned.ini",
                                        "[gys]\nmu = 0.7\n");
  CHECK_THROWS_AS(apply_overrides(preset, sectioned), PresetError);
}
