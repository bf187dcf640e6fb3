// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <sys/wait.h>

#include <fmt/format.h>

#include "hotbox/analysis.hpp"
#include "hotbox/calibrate.hpp"
#include "hotbox/calibration.hpp"
#include "hotbox/config.hpp"
#include "hotbox/orchestrator.hpp"
#include "hotbox/thermal.hpp"

using namespace hotbox;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

Verdict thermal_envelope(const Calibration& cal) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto start = thermal::ThermalState::at_rest(30.0, cal.env_temp);
  const auto run = thermal::run_schedule(start, {{90.0, 0.0}}, cal.plant);
  double reach85 = NAN;
  for (const auto& s : run.samples) {
    if (s.state.air_temp >= 85.0) {
      reach85 = s.state.sim_time;
      break;
    }
  }
  const double settled90 = run.events.front().sim_time;
  const auto cool = thermal::run_open_loop(thermal::ThermalState::at_rest(90.0, cal.env_temp), 0.0, cal.plant,
                                           thermal::kDefaultDt, 6 * 3600.0,
                                           [](const auto& s) { return s.air_temp <= 30.0; });
  const double heat_min = reach85 / 60.0;
  const double top_min = (settled90 - reach85) / 60.0;
  const double cool_min = cool.back().sim_time / 60.0;
  const double wall = seconds_since(t0);
  const bool ok = in(heat_min, 15, 25) && in(top_min, 10, 30) && in(cool_min, 90, 150) && wall < 5.0;
  return {ok, fmt::format("30->85 {:.2f} min, 85->90 {:.2f} min, cool 90->30 {:.2f} min, {:.2f} s wall", heat_min,
                          top_min, cool_min, wall)};
}

Verdict no_overshoot(const Calibration& cal) {
  const auto steps = thermal::staircase(30.0, 90.0, 5.0, 1200.0);
  const auto run = thermal::run_schedule(thermal::ThermalState::at_rest(30.0, cal.env_temp), steps, cal.plant);
  double worst = -1e9;
  for (const auto& s : run.samples) worst = std::max(worst, s.state.air_temp - s.target);
  double lo = 1e9, hi = 0.0;
  double last_end = 0.0;
  std::size_t dwells = 0;
  for (const auto& e : run.events) {
    if (e.kind == thermal::EventKind::DwellEnd) {
      last_end = e.sim_time;
    } else {
      ++dwells;
      if (e.step == 0) continue;
      const double m = (e.sim_time - last_end) / 60.0;
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
  }
  const bool ok = worst <= 0.5 && lo >= 5.0 && hi <= 20.0 && dwells == 13;
  return {ok, fmt::format("max air - target {:+.3f} C, settle per step {:.2f}..{:.2f} min, {} dwells", worst, lo,
                          hi, dwells)};
}

Verdict noiseless_fidelity(const Calibration& cal) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = fixed_snr_config(cal, cal.device(), 20.0, 1000, 3);
  const Trace t = run_experiment(c, cal);
  std::size_t ok = 0, bit_errors = 0;
  for (const auto& r : t.records) {
    ok += r.outcome == Outcome::Ok;
    if (r.outcome != Outcome::Lost) bit_errors += analysis::bit_error_count(r.sent, r.received_bytes());
  }
  const double wall = seconds_since(t0);
  return {ok == 1000 && bit_errors == 0 && wall < 10.0,
          fmt::format("{}/1000 ok, {} bit errors, {:.2f} s wall", ok, bit_errors, wall)};
}

// Staircase 30..80 °C in 10 °C steps; a packet every 0.5 s gives 10 000
// packets per direction in each 10 000 s dwell.
ExperimentConfig heated_run(const Calibration& cal, HeatedSide side) {
  ExperimentConfig c = ExperimentConfig::defaults(cal);
  c.heated_side = side;
  c.inter_packet_interval = 0.5;
  c.schedule = thermal::staircase(30.0, 80.0, 10.0, 10000.0);
  c.seed = 4300;
  // Settling from one target to the next takes under 25 min.
  c.packets_per_run = static_cast<std::size_t>((6 * 10000.0 + 5 * 1500.0) / c.inter_packet_interval);
  return c;
}

std::vector<analysis::LinkBin> forward_bins(const Trace& t) {
  analysis::RecordFilter f;
  f.direction = Direction::AB;
  return analysis::link_summary(t, analysis::Binning::per_dwell(), f);
}

struct HeatedRuns {
  std::vector<analysis::LinkBin> rx, tx;
  double wall = 0.0;
};

HeatedRuns heated_runs(const Calibration& cal) {
  const auto t0 = std::chrono::steady_clock::now();
  HeatedRuns h;
  h.rx = forward_bins(run_experiment(heated_run(cal, HeatedSide::Receiver), cal));
  h.tx = forward_bins(run_experiment(heated_run(cal, HeatedSide::Transmitter), cal));
  h.wall = seconds_since(t0);
  return h;
}

Verdict thresholds(const HeatedRuns& h) {
  using analysis::find_bin_by_target;
  const auto* rx70 = find_bin_by_target(h.rx, 70.0);
  const auto* rx80 = find_bin_by_target(h.rx, 80.0);
  const auto* tx80 = find_bin_by_target(h.tx, 80.0);
  if (!rx70 || !rx80 || !tx80) return {false, "missing dwell bins"};
  bool ordered = true;
  std::string order;
  std::size_t min_packets = SIZE_MAX;
  for (const auto& b : h.rx) {
    min_packets = std::min<std::size_t>(min_packets, b.packets);
    const auto* t = find_bin_by_target(h.tx, b.target);
    if (!t) return {false, fmt::format("transmitter run lacks the {} C dwell", b.target)};
    min_packets = std::min<std::size_t>(min_packets, t->packets);
    if (b.target >= 40.0) {
      ordered = ordered && b.per() >= t->per();
      order += fmt::format(" {:.0f}C {:.3f}/{:.3f}", b.target, b.per(), t->per());
    }
  }
  const bool ok = rx70->per() > 0.5 && rx80->per() >= 0.99 && tx80->per() > 0.2 && tx80->per() < 0.99 && ordered &&
                  min_packets >= 10000 && h.wall < 180.0;
  return {ok, fmt::format("rx-heated PER 70C {:.4f}, 80C {:.4f}; tx-heated PER 80C {:.4f}; rx/tx PER{}; "
                          "{} packets/dwell min; {:.1f} s wall",
                          rx70->per(), rx80->per(), tx80->per(), order, min_packets, h.wall)};
}

Verdict rssi_vs_ber(const HeatedRuns& h) {
  double worst = 0.0;
  std::size_t matched = 0;
  for (const auto& b : h.rx) {
    const auto* t = analysis::find_bin_by_target(h.tx, b.target);
    if (!t || std::isnan(b.mean_rssi_dbm) || std::isnan(t->mean_rssi_dbm)) continue;
    worst = std::max(worst, std::abs(b.mean_rssi_dbm - t->mean_rssi_dbm));
    ++matched;
  }
  const auto* rx70 = analysis::find_bin_by_target(h.rx, 70.0);
  const auto* tx70 = analysis::find_bin_by_target(h.tx, 70.0);
  if (!rx70 || !tx70) return {false, "missing 70 C dwell"};
  const double ratio = rx70->ber / tx70->ber;
  const bool ok = matched >= 5 && worst <= 1.0 && ratio >= 2.0;
  return {ok, fmt::format("max RSSI gap {:.3f} dB over {} matched dwells; BER at 70C rx-heated {:.3e} vs "
                          "tx-heated {:.3e} (x{:.2f})",
                          worst, matched, rx70->ber, tx70->ber, ratio)};
}

struct Skew {
  double ratio;
  std::uint64_t corrupt;
};

// Grows the run until it holds at least `corrupt_min` corrupt packets.
Skew skew_at(const Calibration& cal, const DeviceProfile& device, double snr_db, std::uint64_t corrupt_min) {
  std::size_t packets = 15000;
  for (int attempt = 0; attempt < 5; ++attempt) {
    const Trace t = run_experiment(fixed_snr_config(cal, device, snr_db, packets, 600 + attempt), cal);
    std::uint64_t corrupt = 0;
    for (const auto& r : t.records) corrupt += r.outcome == Outcome::Corrupt;
    if (corrupt >= corrupt_min) return {analysis::nibble_stats(t).susceptibility_ratio, corrupt};
    packets = static_cast<std::size_t>(1.15 * packets * corrupt_min / std::max<std::uint64_t>(corrupt, 1)) + 1;
  }
  return {NAN, 0};
}

Verdict msb_skew(const Calibration& cal) {
  const auto t0 = std::chrono::steady_clock::now();
  DeviceProfile msk = cal.device();
  msk.susceptibility = 1.0;
  DeviceProfile coherent = cal.device();
  coherent.susceptibility = 0.0;
  const Skew a = skew_at(cal, msk, cal.skew_snr_db, 10000);
  const Skew b = skew_at(cal, coherent, cal.coherent_skew_snr_db, 10000);
  const double wall = seconds_since(t0);
  const bool ok = in(a.ratio, 1.6, 2.4) && in(b.ratio, 0.85, 1.15) && a.corrupt >= 10000 && b.corrupt >= 10000 &&
                  wall < 120.0;
  return {ok, fmt::format("beta=1 ratio {:.3f} ({} corrupt at {} dB); beta=0 ratio {:.3f} ({} corrupt at {} dB); "
                          "{:.1f} s wall",
                          a.ratio, a.corrupt, cal.skew_snr_db, b.ratio, b.corrupt, cal.coherent_skew_snr_db, wall)};
}

Verdict distribution_invariance(const Calibration& cal) {
  ExperimentConfig c = ExperimentConfig::defaults(cal);
  c.heated_side = HeatedSide::Receiver;
  c.inter_packet_interval = 0.5;
  c.schedule = {{30.0, 30000.0}, {70.0, 30000.0}};
  c.packets_per_run = static_cast<std::size_t>((60000.0 + 2400.0) / c.inter_packet_interval);
  c.seed = 7070;
  const Trace t = run_experiment(c, cal);
  analysis::RecordFilter f;
  f.direction = Direction::AB;
  f.step = 0;
  const auto h30 = analysis::per_bit_histogram(t, f);
  f.step = 1;
  const auto h70 = analysis::per_bit_histogram(t, f);
  const double r = analysis::distribution_similarity(h30, h70);
  const double growth = static_cast<double>(h70.total()) / static_cast<double>(h30.total());
  return {r > 0.9 && growth >= 5.0,
          fmt::format("Pearson {:.4f} ({} and {} corrupt packets), bit errors x{:.2f} from 30C to 70C", r,
                      h30.total_corrupt_packets, h70.total_corrupt_packets, growth)};
}

Verdict property_suites() {
  const std::string cmd = std::string(HOTBOX_UNIT_TESTS) +
                          " --gtest_brief=1 --gtest_filter='Property.*:Despread.SingleChipFlipIsCorrected'"
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code == 0, code == 0 ? "all property tests passed" : fmt::format("unit test binary exit {}", code)};
}

}  // namespace

int main() {
  const Calibration cal = resolve_calibration();
  int failed = 0;
  auto report = [&](int n, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << fmt::format("criterion {} {}: {} ({})", n, name, v.pass ? "PASS" : "FAIL", v.detail) << std::endl;
  };
  report(1, "thermal envelope", [&] { return thermal_envelope(cal); });
  report(2, "no overshoot", [&] { return no_overshoot(cal); });
  report(3, "noiseless fidelity", [&] { return noiseless_fidelity(cal); });
  HeatedRuns runs;
  report(4, "heated-side thresholds", [&] {
    runs = heated_runs(cal);
    return thresholds(runs);
  });
  report(5, "RSSI symmetry and BER asymmetry", [&] { return rssi_vs_ber(runs); });
  report(6, "MSB skew", [&] { return msb_skew(cal); });
  report(7, "bit-error distribution invariance", [&] { return distribution_invariance(cal); });
  report(8, "property suites", [&] { return property_suites(); });
  return failed == 0 ? 0 : 1;
}
