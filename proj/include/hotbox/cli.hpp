#pragma once

// Command-line front end: argument parsing and dispatch, kept apart from
// main() so tests can drive it with in-memory streams.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "hotbox/analysis.hpp"
#include "hotbox/calibrate.hpp"
#include "hotbox/calibration.hpp"
#include "hotbox/config.hpp"
#include "hotbox/csv.hpp"
#include "hotbox/error.hpp"
#include "hotbox/io.hpp"
#include "hotbox/orchestrator.hpp"
#include "hotbox/phy.hpp"
#include "hotbox/thermal.hpp"
#include "hotbox/trace_io.hpp"

namespace hotbox::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kCalibration = 4,
  kIo = 5,
  kAnalysis = 6,
};

struct SimulateCmd {
  fs::path config;
  fs::path out;
};

struct ThermalCmd {
  fs::path schedule;                 // YAML file, or empty with a staircase
  std::vector<double> staircase;     // from, to, increment, dwell
  double initial_temp = 30.0;
  double dt = thermal::kDefaultDt;
  fs::path out;
};

struct CalibrateCmd {
  fs::path targets;
  fs::path out;
};

struct AnalyzeCmd {
  fs::path trace;
  fs::path out_dir;
  std::string bins = "dwell";
  bool include_transitional = false;
};

struct CodebookCmd {
  fs::path out;
};

struct Command {
  std::variant<SimulateCmd, ThermalCmd, CalibrateCmd, AnalyzeCmd, CodebookCmd> action;
  fs::path calibration;
  bool quiet = false;
};

// --help is not an error; the text goes to stdout and the exit code is 0.
struct HelpRequested {
  std::string text;
};

inline std::variant<Command, HelpRequested> parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Thermal chamber and 802.15.4 link simulator", "hotboxsim"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Command cmd;
  app.add_option("--calibration", cmd.calibration,
                 std::string("Calibration file (default: $") + kCalibrationEnv + " or built-in)");
  app.add_flag("-q,--quiet", cmd.quiet, "No progress output");

  SimulateCmd sim;
  auto* s = app.add_subcommand("simulate", "Run an experiment and write a packet trace");
  s->add_option("-c,--config", sim.config, "Experiment YAML")->required();
  s->add_option("-o,--out", sim.out, "Trace file")->required();

  ThermalCmd th;
  auto* t = app.add_subcommand("thermal", "Simulate a chamber schedule and write a temperature CSV");
  auto* sched = t->add_option("-s,--schedule", th.schedule, "Schedule YAML");
  auto* stair = t->add_option("--staircase", th.staircase, "FROM TO INCREMENT DWELL_S")->expected(4);
  sched->excludes(stair);
  t->add_option("--initial-temp", th.initial_temp, "Chamber and mote temperature at t = 0");
  t->add_option("--dt", th.dt, "Integration step in seconds")->check(CLI::PositiveNumber);
  t->add_option("-o,--out", th.out, "CSV file")->required();

  CalibrateCmd cal;
  auto* c = app.add_subcommand("calibrate", "Fit the model constants and write a calibration file");
  c->add_option("-t,--targets", cal.targets, "Target file (key = value)");
  c->add_option("-o,--out", cal.out, "Calibration file")->required();

  AnalyzeCmd an;
  auto* a = app.add_subcommand("analyze", "Per-bit, per-nibble and link statistics of a trace");
  a->add_option("-t,--trace", an.trace, "Trace file")->required();
  a->add_option("-o,--out", an.out_dir, "Output directory")->required();
  a->add_option("--bins", an.bins, "'dwell' or a bin width in seconds");
  a->add_flag("--include-transitional", an.include_transitional,
              "Count packets sent while the chamber was settling");

  CodebookCmd cb;
  auto* k = app.add_subcommand("codebook", "Write the chip table and its MSK view as CSV");
  k->add_option("-o,--out", cb.out, "CSV file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    return HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    return HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\n" + app.help());
  }

  if (s->parsed()) cmd.action = sim;
  else if (t->parsed()) {
    if (th.schedule.empty() && th.staircase.empty()) {
      throw UsageError("thermal needs --schedule or --staircase\n" + t->help());
    }
    cmd.action = th;
  } else if (c->parsed()) cmd.action = cal;
  else if (a->parsed()) {
    if (an.bins != "dwell") {
      double w = 0;
      try {
        std::size_t used = 0;
        w = std::stod(an.bins, &used);
        if (used != an.bins.size()) w = 0;
      } catch (const std::exception&) {
      }
      if (!(w > 0)) throw UsageError("--bins must be 'dwell' or a positive number of seconds");
    }
    cmd.action = an;
  } else cmd.action = cb;
  return cmd;
}

namespace detail {

// Thermal-only schedule file: `schedule:` in either config form plus
// optional `initial_temp` and `dt`.
inline void read_thermal_yaml(ThermalCmd& cmd, std::vector<thermal::ScheduleStep>& steps) {
  const std::string source = cmd.schedule.string();
  const std::string text = io::read_file(cmd.schedule);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}:{}: {}", source, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  std::optional<ScheduleSpec> spec;
  hotbox::detail::each_key(root, "thermal", source, [&](const std::string& k, const YAML::Node& v) {
    if (k == "schedule") spec = read_schedule(v, source);
    else if (k == "initial_temp") cmd.initial_temp = hotbox::detail::scalar<double>(v, k, source);
    else if (k == "dt") cmd.dt = hotbox::detail::scalar<double>(v, k, source);
    else return false;
    return true;
  });
  if (!spec) throw ConfigError(source + ": missing schedule");
  if (spec->dwells.size() != spec->targets.size()) {
    throw ConfigError(source + ": dwell_seconds \"even\" needs an experiment length; give seconds");
  }
  for (std::size_t k = 0; k < spec->targets.size(); ++k) steps.push_back({spec->targets[k], spec->dwells[k]});
}

inline std::string codebook_csv() {
  const auto& book = phy::build_codebook();
  auto bits = [](phy::ChipWord w) {
    std::string s;
    for (std::size_t k = 0; k < phy::kChipsPerSymbol; ++k) s += ((w >> k) & 1u) ? '1' : '0';
    return s;
  };
  std::string out = "symbol,chips,msk_chips\n";
  for (std::size_t n = 0; n < phy::kNibbleValues; ++n) {
    out += fmt::format("{:X},{},{}\n", n, bits(book.entries[n]), bits(book.msk_entries[n]));
  }
  return out;
}

inline std::string analysis_metadata(const Trace& trace, const AnalyzeCmd& cmd) {
  const auto& c = trace.config;
  auto side = [&](bool heated) { return heated ? "heated" : "constant"; };
  std::string out = "# hotboxsim analysis\n";
  out += fmt::format("trace = {}\ncalibration = {}\npackets = {}\nheated_side = {}\n", cmd.trace.string(),
                     trace.calibration_id, trace.records.size(), to_string(c.heated_side));
  out += fmt::format("AB = mote A ({}) sends to mote B ({})\n", side(c.box_a_heated()), side(c.box_b_heated()));
  out += fmt::format("BA = mote B ({}) sends to mote A ({})\n", side(c.box_b_heated()), side(c.box_a_heated()));
  out += fmt::format("bins = {}\ninclude_transitional = {}\n", cmd.bins, cmd.include_transitional);
  out += fmt::format("bit_index = 8 * byte + bit, least significant bit first, byte 0 = length octet\n");
  out += fmt::format("header_bits = {}\n", 8 * (1 + trace.header_len));
  return out;
}

}  // namespace detail

inline int run_simulate(const Command& cmd, const SimulateCmd& s, std::ostream& err) {
  const Calibration cal = resolve_calibration(cmd.calibration);
  const ExperimentConfig config = load_config(s.config, cal);
  ProgressFn progress;
  if (!cmd.quiet) {
    progress = [&err](std::size_t done, std::size_t total) {
      err << fmt::format("\r{}/{} packets", done, total) << std::flush;
    };
  }
  const Trace trace = run_experiment(config, cal, progress);
  if (!cmd.quiet) err << "\n";
  write_trace(trace, s.out);
  if (!cmd.quiet) err << fmt::format("wrote {} records to {}\n", trace.records.size(), s.out.string());
  return kOk;
}

inline int run_thermal(const Command& cmd, ThermalCmd t, std::ostream& err) {
  const Calibration cal = resolve_calibration(cmd.calibration);
  std::vector<thermal::ScheduleStep> steps;
  if (!t.schedule.empty()) {
    detail::read_thermal_yaml(t, steps);
  } else {
    steps = thermal::staircase(t.staircase[0], t.staircase[1], t.staircase[2], t.staircase[3]);
  }
  if (!(t.dt > 0)) throw ConfigError("dt must be positive");
  const auto run =
      thermal::run_schedule(thermal::ThermalState::at_rest(t.initial_temp, cal.env_temp), steps, cal.plant, t.dt);
  std::ostringstream os;
  thermal::write_csv(os, run.samples);
  io::write_file_atomic(t.out, os.str());
  if (!cmd.quiet) {
    for (const auto& e : run.events) {
      err << fmt::format("{:>10.1f} s  step {} {} at {} °C\n", e.sim_time, e.step,
                         e.kind == thermal::EventKind::DwellStart ? "dwell start" : "dwell end", e.target);
    }
  }
  return kOk;
}

inline int run_calibrate(const Command& cmd, const CalibrateCmd& c, std::ostream& err) {
  const Calibration base = resolve_calibration(cmd.calibration);
  CalibrationTargets targets;
  if (!c.targets.empty()) {
    std::string text;
    try {
      text = io::read_file(c.targets);
    } catch (const IoError& e) {
      throw CalibrationError(e.what());
    }
    targets = parse_targets(text, c.targets.string());
  }
  LogFn log;
  if (!cmd.quiet) log = [&err](const std::string& line) { err << line << "\n"; };
  const auto report = calibrate_defaults(base, targets, log);
  save_calibration(report.calibration, c.out);
  if (!cmd.quiet) err << fmt::format("minimum margin {:.3f} dB, wrote {}\n", report.min_margin, c.out.string());
  return kOk;
}

inline int run_analyze(const Command& cmd, const AnalyzeCmd& a, std::ostream& err) {
  // Everything is computed before the first file is written, so a bad trace
  // leaves the output directory untouched.
  const Trace trace = read_trace(a.trace);
  const analysis::Binning binning =
      a.bins == "dwell" ? analysis::Binning::per_dwell() : analysis::Binning::per_seconds(std::stod(a.bins));
  std::vector<std::pair<fs::path, std::string>> files;
  for (Direction d : {Direction::AB, Direction::BA}) {
    analysis::RecordFilter f;
    f.direction = d;
    f.include_transitional = a.include_transitional;
    const std::string p = d == Direction::AB ? "ab_" : "ba_";
    const auto stats = analysis::nibble_stats(trace, f);
    files.emplace_back(a.out_dir / (p + "bit_errors.csv"), csv::to_csv(analysis::per_bit_histogram(trace, f)));
    files.emplace_back(a.out_dir / (p + "nibbles.csv"), csv::to_csv(stats));
    files.emplace_back(a.out_dir / (p + "msb.csv"), csv::msb_summary_csv(stats));
    files.emplace_back(a.out_dir / (p + "link.csv"), csv::to_csv(analysis::link_summary(trace, binning, f)));
  }
  files.emplace_back(a.out_dir / "metadata.txt", detail::analysis_metadata(trace, a));

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", a.out_dir.string(), ec.message()));
  for (const auto& [path, text] : files) io::write_file_atomic(path, text);
  if (!cmd.quiet) err << fmt::format("wrote {} files to {}\n", files.size(), a.out_dir.string());
  return kOk;
}

inline int execute(const Command& cmd, std::ostream& err) {
  return std::visit(
      [&](const auto& action) -> int {
        using T = std::decay_t<decltype(action)>;
        if constexpr (std::is_same_v<T, SimulateCmd>) return run_simulate(cmd, action, err);
        else if constexpr (std::is_same_v<T, ThermalCmd>) return run_thermal(cmd, action, err);
        else if constexpr (std::is_same_v<T, CalibrateCmd>) return run_calibrate(cmd, action, err);
        else if constexpr (std::is_same_v<T, AnalyzeCmd>) return run_analyze(cmd, action, err);
        else {
          io::write_file_atomic(action.out, detail::codebook_csv());
          return kOk;
        }
      },
      cmd.action);
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const ThermalError*>(&e)) return kConfig;
  if (dynamic_cast<const TempOutOfRange*>(&e)) return kConfig;
  if (dynamic_cast<const CalibrationError*>(&e)) return kCalibration;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const AnalysisError*>(&e)) return kAnalysis;
  return kFailure;
}

// Full run: parse, execute, map failures to exit codes.
inline int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    auto parsed = parse_args(args);
    if (auto* help = std::get_if<HelpRequested>(&parsed)) {
      out << help->text;
      return kOk;
    }
    return execute(std::get<Command>(parsed), err);
  } catch (const std::exception& e) {
    err << "hotboxsim: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace hotbox::cli
