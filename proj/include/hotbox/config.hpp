#pragma once

// Declarative description of one experiment run, loaded from YAML.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "hotbox/calibration.hpp"
#include "hotbox/device.hpp"
#include "hotbox/error.hpp"
#include "hotbox/impairments.hpp"
#include "hotbox/phy.hpp"
#include "hotbox/thermal.hpp"

namespace hotbox {

inline constexpr std::size_t kMacHeaderLength = 9;
inline constexpr std::size_t kMaxPayloadLength =
    phy::kMaxPsduLength - kMacHeaderLength - phy::kFcsLength;

// Box A hosts the mote described by tx_profile, box B the one described by
// rx_profile. The heated side names the role whose box follows the schedule.
enum class HeatedSide { Transmitter, Receiver, Both, None };

inline const char* to_string(HeatedSide h) {
  switch (h) {
    case HeatedSide::Transmitter: return "transmitter";
    case HeatedSide::Receiver: return "receiver";
    case HeatedSide::Both: return "both";
    case HeatedSide::None: return "none";
  }
  return "?";
}

inline std::optional<HeatedSide> heated_side_from_string(const std::string& s) {
  if (s == "transmitter") return HeatedSide::Transmitter;
  if (s == "receiver") return HeatedSide::Receiver;
  if (s == "both") return HeatedSide::Both;
  if (s == "none") return HeatedSide::None;
  return std::nullopt;
}

struct ExperimentConfig {
  std::size_t packets_per_run = 180000;
  std::size_t payload_len = 80;
  HeatedSide heated_side = HeatedSide::Receiver;
  std::vector<thermal::ScheduleStep> schedule{{30.0, 1200.0}};
  double constant_side_temp = 30.0;
  impairments::LinkGeometry geometry;
  DeviceProfile tx_profile;
  DeviceProfile rx_profile;
  std::uint64_t seed = 1;
  double inter_packet_interval = 0.1;
  bool roles_swapped = false;

  static ExperimentConfig defaults(const Calibration& cal) {
    ExperimentConfig c;
    c.geometry = cal.geometry();
    c.tx_profile = cal.device("A");
    c.rx_profile = cal.device("B");
    return c;
  }

  bool box_a_heated() const {
    return heated_side == HeatedSide::Transmitter || heated_side == HeatedSide::Both;
  }
  bool box_b_heated() const {
    return heated_side == HeatedSide::Receiver || heated_side == HeatedSide::Both;
  }

  void validate(const thermal::PlantParams& plant, double env_temp) const {
    if (packets_per_run < 1) throw ConfigError("packets_per_run must be >= 1");
    if (payload_len < 1 || payload_len > kMaxPayloadLength) {
      throw ConfigError(fmt::format("payload_len must lie in [1, {}]", kMaxPayloadLength));
    }
    if (!(inter_packet_interval > 0.0) || !std::isfinite(inter_packet_interval)) {
      throw ConfigError("inter_packet_interval must be positive");
    }
    if (schedule.empty()) throw ConfigError("schedule must have at least one step");
    for (const auto& s : schedule) {
      if (!std::isfinite(s.target_temp) || s.target_temp > plant.max_temp) {
        throw ConfigError(fmt::format("schedule target {} °C exceeds {} °C", s.target_temp,
                                      plant.max_temp));
      }
      if (!(s.dwell_seconds >= 0.0) || !std::isfinite(s.dwell_seconds)) {
        throw ConfigError("dwell_seconds must be finite and >= 0");
      }
    }
    if (!(constant_side_temp >= env_temp && constant_side_temp <= plant.max_temp)) {
      throw ConfigError("constant_side_temp must lie between the room temperature and max_temp");
    }
    geometry.validate();
    tx_profile.validate();
    rx_profile.validate();
    for (const auto* p : {&tx_profile, &rx_profile}) {
      if (p->label.empty() || p->label.find_first_not_of(
                                  "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
                                  "0123456789_.-") != std::string::npos) {
        throw ConfigError("profile labels must be non-empty [A-Za-z0-9_.-]");
      }
    }
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Profiles trade places; the flag moves the run onto separate RNG substreams.
inline ExperimentConfig swap_roles(ExperimentConfig c) {
  std::swap(c.tx_profile, c.rx_profile);
  c.roles_swapped = !c.roles_swapped;
  return c;
}

// Heats with zero dwell time to measure the time spent settling, then gives
// each step an equal share of the rest of the run.
inline std::vector<thermal::ScheduleStep> spread_dwells(std::vector<double> targets,
                                                        double run_seconds, double start_temp,
                                                        const Calibration& cal) {
  std::vector<thermal::ScheduleStep> steps;
  for (double t : targets) steps.push_back({t, 0.0});
  const auto run = thermal::run_schedule(thermal::ThermalState::at_rest(start_temp, cal.env_temp),
                                         steps, cal.plant);
  const double settle = run.samples.back().state.sim_time;
  const double dwell = std::max(0.0, (run_seconds - settle) / static_cast<double>(steps.size()));
  for (auto& s : steps) s.dwell_seconds = std::floor(dwell);
  return steps;
}

namespace detail {

inline std::string where(const YAML::Node& n, const std::string& source) {
  const YAML::Mark m = n.Mark();
  if (m.is_null()) return source;
  return fmt::format("{}:{}:{}", source, m.line + 1, m.column + 1);
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key, const std::string& source) {
  if (!n.IsScalar()) throw ConfigError(where(n, source) + ": '" + key + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(n, source) + ": invalid value for '" + key + "': " + n.Scalar());
  }
}

// Applies each present key through `handlers`; anything else is an error.
template <class Handler>
void each_key(const YAML::Node& map, const std::string& context, const std::string& source,
              Handler&& handle) {
  if (!map.IsMap()) throw ConfigError(where(map, source) + ": '" + context + "' must be a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!handle(key, kv.second)) {
      throw ConfigError(where(kv.first, source) + ": unknown key '" + key + "' in " + context);
    }
  }
}

inline void read_profile(const YAML::Node& n, DeviceProfile& p, const std::string& context,
                         const std::string& source) {
  each_key(n, context, source, [&](const std::string& k, const YAML::Node& v) {
    if (k == "label") p.label = scalar<std::string>(v, k, source);
    else if (k == "tx_temp_coeff") p.tx_temp_coeff = scalar<double>(v, k, source);
    else if (k == "rx_gain_temp_coeff") p.rx_gain_temp_coeff = scalar<double>(v, k, source);
    else if (k == "rx_noise_temp_coeff") p.rx_noise_temp_coeff = scalar<double>(v, k, source);
    else if (k == "reference_temp") p.reference_temp = scalar<double>(v, k, source);
    else if (k == "susceptibility") p.susceptibility = scalar<double>(v, k, source);
    else if (k == "msk_slicer_offset") p.msk_slicer_offset = scalar<double>(v, k, source);
    else return false;
    return true;
  });
}

}  // namespace detail

// A schedule is either an explicit list of {target_temp, dwell_seconds} or a
// staircase {from, to, increment, dwell_seconds}. dwell_seconds may be
// "even" in the staircase form, which needs the run length to resolve.
struct ScheduleSpec {
  std::vector<double> targets;
  std::vector<double> dwells;  // empty when spread evenly
};

inline ScheduleSpec read_schedule(const YAML::Node& n, const std::string& source) {
  using detail::scalar;
  ScheduleSpec spec;
  if (n.IsSequence()) {
    for (const auto& item : n) {
      thermal::ScheduleStep step;
      bool have_target = false;
      detail::each_key(item, "schedule step", source, [&](const std::string& k, const YAML::Node& v) {
        if (k == "target_temp") { step.target_temp = scalar<double>(v, k, source); have_target = true; }
        else if (k == "dwell_seconds") step.dwell_seconds = scalar<double>(v, k, source);
        else return false;
        return true;
      });
      if (!have_target) throw ConfigError(detail::where(item, source) + ": step needs target_temp");
      spec.targets.push_back(step.target_temp);
      spec.dwells.push_back(step.dwell_seconds);
    }
    if (spec.targets.empty()) throw ConfigError(detail::where(n, source) + ": empty schedule");
    return spec;
  }
  double from = 30, to = 30, inc = 5, dwell = 0;
  bool even = false;
  detail::each_key(n, "schedule", source, [&](const std::string& k, const YAML::Node& v) {
    if (k == "from") from = scalar<double>(v, k, source);
    else if (k == "to") to = scalar<double>(v, k, source);
    else if (k == "increment") inc = scalar<double>(v, k, source);
    else if (k == "dwell_seconds") {
      if (v.IsScalar() && v.Scalar() == "even") even = true;
      else dwell = scalar<double>(v, k, source);
    } else return false;
    return true;
  });
  if (!(inc > 0) || to < from) {
    throw ConfigError(detail::where(n, source) + ": staircase needs from <= to and increment > 0");
  }
  for (const auto& s : thermal::staircase(from, to, inc, dwell)) {
    spec.targets.push_back(s.target_temp);
    if (!even) spec.dwells.push_back(s.dwell_seconds);
  }
  return spec;
}

inline std::vector<thermal::ScheduleStep> resolve_schedule(const ScheduleSpec& spec,
                                                           double run_seconds, double start_temp,
                                                           const Calibration& cal) {
  if (spec.dwells.empty()) return spread_dwells(spec.targets, run_seconds, start_temp, cal);
  std::vector<thermal::ScheduleStep> steps;
  for (std::size_t k = 0; k < spec.targets.size(); ++k) {
    steps.push_back({spec.targets[k], spec.dwells[k]});
  }
  return steps;
}

// Fields absent from the document keep the calibration-derived defaults.
inline ExperimentConfig parse_config(const std::string& text, const Calibration& cal,
                                     const std::string& source = "config") {
  using detail::scalar;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}:{}: {}", source, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  ExperimentConfig c = ExperimentConfig::defaults(cal);
  std::optional<ScheduleSpec> spec;
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  detail::each_key(root, "config", source, [&](const std::string& k, const YAML::Node& v) {
    if (k == "packets_per_run") {
      const auto n = scalar<long long>(v, k, source);
      if (n < 1) throw ConfigError(detail::where(v, source) + ": packets_per_run must be >= 1");
      c.packets_per_run = static_cast<std::size_t>(n);
    } else if (k == "payload_len") {
      const auto n = scalar<long long>(v, k, source);
      if (n < 1) throw ConfigError(detail::where(v, source) + ": payload_len must be >= 1");
      c.payload_len = static_cast<std::size_t>(n);
    } else if (k == "heated_side") {
      auto h = heated_side_from_string(scalar<std::string>(v, k, source));
      if (!h) {
        throw ConfigError(detail::where(v, source) +
                          ": heated_side must be transmitter, receiver, both or none");
      }
      c.heated_side = *h;
    } else if (k == "schedule") {
      spec = read_schedule(v, source);
    } else if (k == "constant_side_temp") {
      c.constant_side_temp = scalar<double>(v, k, source);
    } else if (k == "geometry") {
      detail::each_key(v, "geometry", source, [&](const std::string& g, const YAML::Node& gv) {
        if (g == "path_loss_db") c.geometry.path_loss_db = scalar<double>(gv, g, source);
        else if (g == "tx_power_dbm") c.geometry.tx_power_dbm = scalar<double>(gv, g, source);
        else return false;
        return true;
      });
    } else if (k == "tx_profile") {
      detail::read_profile(v, c.tx_profile, "tx_profile", source);
    } else if (k == "rx_profile") {
      detail::read_profile(v, c.rx_profile, "rx_profile", source);
    } else if (k == "seed") {
      c.seed = scalar<std::uint64_t>(v, k, source);
    } else if (k == "inter_packet_interval") {
      c.inter_packet_interval = scalar<double>(v, k, source);
    } else if (k == "roles_swapped") {
      c.roles_swapped = scalar<bool>(v, k, source);
    } else {
      return false;
    }
    return true;
  });
  if (spec) {
    c.schedule = resolve_schedule(*spec, static_cast<double>(c.packets_per_run) * c.inter_packet_interval,
                                  c.constant_side_temp, cal);
  }
  try {
    c.validate(cal.plant, cal.env_temp);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const Calibration& cal) {
  return parse_config(io::read_file(path), cal, path.string());
}

// Complete, explicit YAML: every field written, numbers in shortest
// round-trip form, so the snapshot alone reproduces the run.
inline std::string to_yaml(const ExperimentConfig& c) {
  std::string out;
  out += fmt::format("packets_per_run: {}\n", c.packets_per_run);
  out += fmt::format("payload_len: {}\n", c.payload_len);
  out += fmt::format("heated_side: {}\n", to_string(c.heated_side));
  out += "schedule:\n";
  for (const auto& s : c.schedule) {
    out += fmt::format("  - {{target_temp: {}, dwell_seconds: {}}}\n", s.target_temp, s.dwell_seconds);
  }
  out += fmt::format("constant_side_temp: {}\n", c.constant_side_temp);
  out += fmt::format("geometry: {{path_loss_db: {}, tx_power_dbm: {}}}\n", c.geometry.path_loss_db,
                     c.geometry.tx_power_dbm);
  for (const auto& [name, p] : {std::pair{"tx_profile", &c.tx_profile}, std::pair{"rx_profile", &c.rx_profile}}) {
    out += fmt::format("{}:\n", name);
    out += fmt::format("  label: {}\n", p->label);
    out += fmt::format("  tx_temp_coeff: {}\n", p->tx_temp_coeff);
    out += fmt::format("  rx_gain_temp_coeff: {}\n", p->rx_gain_temp_coeff);
    out += fmt::format("  rx_noise_temp_coeff: {}\n", p->rx_noise_temp_coeff);
    out += fmt::format("  reference_temp: {}\n", p->reference_temp);
    out += fmt::format("  susceptibility: {}\n", p->susceptibility);
    out += fmt::format("  msk_slicer_offset: {}\n", p->msk_slicer_offset);
  }
  out += fmt::format("seed: {}\n", c.seed);
  out += fmt::format("inter_packet_interval: {}\n", c.inter_packet_interval);
  out += fmt::format("roles_swapped: {}\n", c.roles_swapped ? "true" : "false");
  return out;
}

}  // namespace hotbox
