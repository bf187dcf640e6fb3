#pragma once

// Pinned model constants. The compiled-in defaults equal the shipped
// calibration/default.cal; a different file can be loaded explicitly or via
// the HOTBOXSIM_CALIBRATION environment variable.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hotbox/device.hpp"
#include "hotbox/error.hpp"
#include "hotbox/impairments.hpp"
#include "hotbox/io.hpp"
#include "hotbox/link.hpp"
#include "hotbox/thermal.hpp"

namespace hotbox {

inline constexpr int kCalibrationFormat = 1;
inline constexpr const char* kCalibrationEnv = "HOTBOXSIM_CALIBRATION";

struct Calibration {
  std::string id = "default";

  double env_temp = 22.0;
  thermal::PlantParams plant{};

  double tx_power_dbm = 0.0;
  double path_loss_db = 101.7;
  double base_noise_dbm = -100.0;

  double tx_temp_coeff = -0.013;
  double rx_gain_temp_coeff = -0.013;
  double rx_noise_temp_coeff = 0.033;
  double reference_temp = 30.0;
  double susceptibility = 1.0;
  double msk_slicer_offset = 0.35;

  double lqi_score_low = 20.88;
  double lqi_score_high = 32.0;
  int sync_min_preamble_symbols = 4;

  // SNRs at which a beta=1 and a beta=0 receiver lose most but not all
  // packets to corruption; used for the MSB-skew measurements.
  double skew_snr_db = -2.95;
  double coherent_skew_snr_db = -9.8;

  DeviceProfile device(std::string label = "mote") const {
    DeviceProfile d;
    d.label = std::move(label);
    d.tx_temp_coeff = tx_temp_coeff;
    d.rx_gain_temp_coeff = rx_gain_temp_coeff;
    d.rx_noise_temp_coeff = rx_noise_temp_coeff;
    d.reference_temp = reference_temp;
    d.susceptibility = susceptibility;
    d.msk_slicer_offset = msk_slicer_offset;
    return d;
  }
  impairments::LinkGeometry geometry() const { return {path_loss_db, tx_power_dbm}; }
  link::ReceiverParams receiver() const {
    link::ReceiverParams r;
    r.sync.min_preamble_symbols = sync_min_preamble_symbols;
    r.lqi = {lqi_score_low, lqi_score_high};
    return r;
  }
  // SNR of the link with both motes at the reference temperature.
  double baseline_snr_db() const { return tx_power_dbm - path_loss_db - base_noise_dbm; }

  void validate() const {
    device().validate();
    geometry().validate();
    plant.validate();
    if (!std::isfinite(env_temp) || env_temp >= plant.max_temp) {
      throw CalibrationError("env_temp must be finite and below max_temp");
    }
    if (!std::isfinite(base_noise_dbm)) throw CalibrationError("base_noise_dbm must be finite");
    if (!(lqi_score_high > lqi_score_low)) {
      throw CalibrationError("lqi_score_high must exceed lqi_score_low");
    }
    if (sync_min_preamble_symbols < 1 || sync_min_preamble_symbols > static_cast<int>(phy::kPreambleSymbols)) {
      throw CalibrationError("sync_min_preamble_symbols must lie in [1, 8]");
    }
  }

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

namespace detail {

template <class F>
void for_each_field(Calibration& c, F&& f) {
  f("env_temp", c.env_temp);
  f("heat_rate_full", c.plant.heat_rate_full);
  f("cooling_time_constant", c.plant.cooling_time_constant);
  f("mote_lag_constant", c.plant.mote_lag_constant);
  f("max_temp", c.plant.max_temp);
  f("controller_time_constant", c.plant.controller_time_constant);
  f("tx_power_dbm", c.tx_power_dbm);
  f("path_loss_db", c.path_loss_db);
  f("base_noise_dbm", c.base_noise_dbm);
  f("tx_temp_coeff", c.tx_temp_coeff);
  f("rx_gain_temp_coeff", c.rx_gain_temp_coeff);
  f("rx_noise_temp_coeff", c.rx_noise_temp_coeff);
  f("reference_temp", c.reference_temp);
  f("susceptibility", c.susceptibility);
  f("msk_slicer_offset", c.msk_slicer_offset);
  f("lqi_score_low", c.lqi_score_low);
  f("lqi_score_high", c.lqi_score_high);
  f("sync_min_preamble_symbols", c.sync_min_preamble_symbols);
  f("skew_snr_db", c.skew_snr_db);
  f("coherent_skew_snr_db", c.coherent_skew_snr_db);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& text, const std::string& where) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw CalibrationError(where + ": not a number: '" + text + "'");
  return v;
}

}  // namespace detail

inline std::string to_text(const Calibration& cal) {
  std::string out = fmt::format("# hotboxsim calibration\nformat = {}\nid = {}\n",
                                kCalibrationFormat, cal.id);
  Calibration copy = cal;
  detail::for_each_field(copy, [&](const char* key, auto& v) {
    out += fmt::format("{} = {}\n", key, v);
  });
  return out;
}

using KeyValues = std::map<std::string, std::pair<std::string, int>>;  // key -> (value, line)

// Flat `key = value` text with '#' comments; duplicate keys are rejected.
inline KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = fmt::format("{}:{}", source, lineno);
    if (eq == std::string::npos) throw CalibrationError(where + ": expected key = value");
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    if (!kv.emplace(key, std::make_pair(value, lineno)).second) {
      throw CalibrationError(where + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

// Every key must be present exactly once; unknown keys are rejected so a
// typo cannot silently fall back to a default.
inline Calibration parse_calibration(const std::string& text, const std::string& source = "calibration") {
  KeyValues kv = parse_key_values(text, source);
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw CalibrationError(source + ": missing key '" + key + "'");
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  auto [fmt_text, fmt_line] = take("format");
  const int format = detail::parse_number<int>(fmt_text, fmt::format("{}:{}", source, fmt_line));
  if (format != kCalibrationFormat) {
    throw CalibrationError(fmt::format("{}: unsupported calibration format {}", source, format));
  }
  Calibration cal;
  cal.id = take("id").first;
  if (cal.id.empty()) throw CalibrationError(source + ": empty id");
  detail::for_each_field(cal, [&](const char* key, auto& v) {
    auto [value, where] = take(key);
    v = detail::parse_number<std::remove_reference_t<decltype(v)>>(
        value, fmt::format("{}:{}", source, where));
  });
  if (!kv.empty()) {
    const auto& [key, v] = *kv.begin();
    throw CalibrationError(fmt::format("{}:{}: unknown key '{}'", source, v.second, key));
  }
  try {
    cal.validate();
  } catch (const ConfigError& e) {
    throw CalibrationError(source + ": " + e.what());
  }
  return cal;
}

inline Calibration load_calibration(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw CalibrationError(e.what());
  }
  return parse_calibration(text, path.string());
}

// Explicit path, else the environment override, else the compiled defaults.
inline Calibration resolve_calibration(const std::filesystem::path& explicit_path = {}) {
  if (!explicit_path.empty()) return load_calibration(explicit_path);
  if (const char* env = std::getenv(kCalibrationEnv); env != nullptr && *env != '\0') {
    return load_calibration(env);
  }
  return Calibration{};
}

inline void save_calibration(const Calibration& cal, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_text(cal));
}

}  // namespace hotbox
