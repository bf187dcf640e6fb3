#pragma once

// Fits the temperature slopes, the baseline link budget, the slicer offset
// and the read-out constants so that the desk-scale experiment lands on the
// packet-level thresholds in CalibrationTargets.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hotbox/analysis.hpp"
#include "hotbox/calibration.hpp"
#include "hotbox/config.hpp"
#include "hotbox/orchestrator.hpp"

namespace hotbox {

struct CalibrationTargets {
  std::string id = "default";

  // Packet error rates at the dwells of the heated runs.
  double rx70_per_min = 0.5;
  double rx80_per_min = 0.99;
  double tx80_per_min = 0.2;
  double tx80_per_max = 0.99;
  // The unheated link should be good but not error-free, so that a 30 °C
  // dwell still yields a bit-error distribution.
  double baseline_per_min = 0.05;
  double baseline_per_max = 0.2;
  // Bit error rate ratios at the 70 °C dwell: heated receiver over heated
  // transmitter, and heated receiver over the unheated link.
  double ber_asymmetry_70 = 2.0;
  double ber_rise_70 = 5.0;
  // The shape of the per-bit error histogram drifts as SNR falls (adjacent
  // half-dB steps correlate at about 0.98, a 2.5 dB gap at about 0.9), so
  // the receiver-heated SNR drop from 30 to 70 °C is capped.
  double similarity_drop_max_db = 2.0;

  double skew_ratio = 2.0;
  double skew_operating_per = 0.75;
  std::vector<double> slicer_offsets{0.25, 0.30, 0.35, 0.40, 0.45};
  double slicer_probe_snr_db = -3.0;
  std::size_t slicer_packets = 3000;

  double snr_min_db = -7.0;
  double snr_max_db = 1.0;
  double coherent_snr_min_db = -12.0;
  double coherent_snr_max_db = -6.0;
  double snr_step_db = 0.25;
  std::size_t packets_per_point = 1000;
  std::uint64_t seed = 20240101;

  // Search grid.
  double baseline_step_db = 0.05;
  double slope_max = 0.06;       // dB/°C, gain slope
  double noise_slope_max = 0.1;  // dB/°C
  double slope_step = 0.001;
};

inline CalibrationTargets parse_targets(const std::string& text, const std::string& source = "targets") {
  CalibrationTargets t;
  for (const auto& [key, entry] : parse_key_values(text, source)) {
    const auto& [value, line] = entry;
    const std::string where = fmt::format("{}:{}", source, line);
    auto real = [&](double& v) { v = detail::parse_number<double>(value, where); };
    auto count = [&](std::size_t& v) { v = detail::parse_number<std::size_t>(value, where); };
    if (key == "id") t.id = value;
    else if (key == "rx70_per_min") real(t.rx70_per_min);
    else if (key == "rx80_per_min") real(t.rx80_per_min);
    else if (key == "tx80_per_min") real(t.tx80_per_min);
    else if (key == "tx80_per_max") real(t.tx80_per_max);
    else if (key == "baseline_per_min") real(t.baseline_per_min);
    else if (key == "baseline_per_max") real(t.baseline_per_max);
    else if (key == "ber_asymmetry_70") real(t.ber_asymmetry_70);
    else if (key == "ber_rise_70") real(t.ber_rise_70);
    else if (key == "similarity_drop_max_db") real(t.similarity_drop_max_db);
    else if (key == "skew_ratio") real(t.skew_ratio);
    else if (key == "skew_operating_per") real(t.skew_operating_per);
    else if (key == "slicer_probe_snr_db") real(t.slicer_probe_snr_db);
    else if (key == "slicer_packets") count(t.slicer_packets);
    else if (key == "snr_min_db") real(t.snr_min_db);
    else if (key == "snr_max_db") real(t.snr_max_db);
    else if (key == "coherent_snr_min_db") real(t.coherent_snr_min_db);
    else if (key == "coherent_snr_max_db") real(t.coherent_snr_max_db);
    else if (key == "snr_step_db") real(t.snr_step_db);
    else if (key == "packets_per_point") count(t.packets_per_point);
    else if (key == "seed") t.seed = detail::parse_number<std::uint64_t>(value, where);
    else if (key == "baseline_step_db") real(t.baseline_step_db);
    else if (key == "slope_max") real(t.slope_max);
    else if (key == "noise_slope_max") real(t.noise_slope_max);
    else if (key == "slope_step") real(t.slope_step);
    else if (key == "slicer_offsets") {
      t.slicer_offsets.clear();
      std::istringstream in(value);
      std::string item;
      while (std::getline(in, item, ',')) {
        t.slicer_offsets.push_back(detail::parse_number<double>(detail::trim(item), where));
      }
    } else {
      throw CalibrationError(fmt::format("{}: unknown key '{}'", where, key));
    }
  }
  if (t.slicer_offsets.empty() || t.packets_per_point == 0 || t.slicer_packets == 0 ||
      !(t.snr_step_db > 0) || !(t.slope_step > 0) || !(t.baseline_step_db > 0) ||
      t.snr_max_db <= t.snr_min_db || t.coherent_snr_max_db <= t.coherent_snr_min_db) {
    throw CalibrationError(source + ": inconsistent search settings");
  }
  return t;
}

struct CurvePoint {
  double snr_db = 0.0;
  double per = 0.0;
  double ber = 0.0;
  double mean_score = 0.0;  // despread score behind the LQI read-out
  double susceptibility_ratio = 0.0;
};

// Both motes at the reference temperature with `device` on both ends and
// the path loss set for the requested SNR.
inline ExperimentConfig fixed_snr_config(const Calibration& cal, const DeviceProfile& device,
                                         double snr_db, std::size_t packets, std::uint64_t seed) {
  ExperimentConfig c = ExperimentConfig::defaults(cal);
  c.heated_side = HeatedSide::None;
  c.constant_side_temp = device.reference_temp;
  c.schedule = {{device.reference_temp, 0.0}};
  c.packets_per_run = packets;
  c.seed = seed;
  c.tx_profile = device;
  c.rx_profile = device;
  c.tx_profile.label = "A";
  c.rx_profile.label = "B";
  c.geometry.path_loss_db = cal.tx_power_dbm - cal.base_noise_dbm - snr_db;
  return c;
}

inline CurvePoint measure_point(const Calibration& cal, const DeviceProfile& device, double snr_db,
                                std::size_t packets, std::uint64_t seed) {
  Calibration probe = cal;
  probe.lqi_score_low = 0.0;
  probe.lqi_score_high = 32.0;
  const Trace trace = run_experiment(fixed_snr_config(probe, device, snr_db, packets, seed), probe);
  const auto bins = analysis::link_summary(trace, analysis::Binning::per_dwell());
  CurvePoint p;
  p.snr_db = snr_db;
  p.per = bins.front().per();
  p.ber = std::isnan(bins.front().ber) ? 0.5 : bins.front().ber;
  p.mean_score = std::isnan(bins.front().mean_lqi) ? 0.0 : bins.front().mean_lqi * 32.0 / 255.0;
  p.susceptibility_ratio = analysis::nibble_stats(trace).susceptibility_ratio;
  return p;
}

// Monotone non-increasing interpolant of a quantity against SNR, linear in a
// transformed domain (logit for rates near 0 and 1, log for BER).
class Curve {
 public:
  enum class Domain { Logit, Log, Linear };

  Curve(std::vector<double> snr, std::vector<double> value, Domain domain, double floor)
      : snr_(std::move(snr)), domain_(domain), floor_(floor) {
    for (std::size_t k = value.size(); k-- > 1;) value[k - 1] = std::max(value[k - 1], value[k]);
    for (double v : value) y_.push_back(forward(v));
  }

  double at(double snr) const {
    if (snr <= snr_.front()) return back(y_.front());
    if (snr >= snr_.back()) return back(y_.back());
    const auto it = std::upper_bound(snr_.begin(), snr_.end(), snr);
    const std::size_t k = static_cast<std::size_t>(it - snr_.begin());
    const double f = (snr - snr_[k - 1]) / (snr_[k] - snr_[k - 1]);
    return back(y_[k - 1] + f * (y_[k] - y_[k - 1]));
  }

  // Highest SNR at which the curve still reaches `value`.
  double snr_for(double value) const {
    const double y = forward(value);
    for (std::size_t k = y_.size(); k-- > 0;) {
      if (y_[k] >= y) {
        if (k + 1 == y_.size() || y_[k] == y_[k + 1]) return snr_[k];
        const double f = (y_[k] - y) / (y_[k] - y_[k + 1]);
        return snr_[k] + f * (snr_[k + 1] - snr_[k]);
      }
    }
    return snr_.front();
  }

 private:
  double forward(double v) const {
    switch (domain_) {
      case Domain::Logit: {
        const double p = std::clamp(v, floor_, 1.0 - floor_);
        return std::log(p / (1.0 - p));
      }
      case Domain::Log: return std::log(std::max(v, floor_));
      case Domain::Linear: return v;
    }
    return v;
  }
  double back(double y) const {
    switch (domain_) {
      case Domain::Logit: return 1.0 / (1.0 + std::exp(-y));
      case Domain::Log: return std::exp(y);
      case Domain::Linear: return y;
    }
    return y;
  }

  std::vector<double> snr_;
  std::vector<double> y_;
  Domain domain_;
  double floor_;
};

struct Margin {
  std::string name;
  double db;  // SNR slack before the target is violated; negative = violated
};

struct CalibrationReport {
  Calibration calibration;
  std::vector<std::pair<double, double>> slicer_ratios;  // offset -> MSB ratio
  std::vector<CurvePoint> curve;
  std::vector<CurvePoint> coherent_curve;
  std::vector<Margin> margins;
  double min_margin = 0.0;
};

struct LinkModel {
  double baseline;  // SNR at 30 °C on both sides
  double gain;      // dB/°C lost on either side
  double noise;     // dB/°C noise rise at the receiver
  double rx_heated(double t) const { return baseline - (gain + noise) * (t - 30.0); }
  double tx_heated(double t) const { return baseline - gain * (t - 30.0); }
};

inline std::vector<Margin> target_margins(const LinkModel& m, const Curve& per, const Curve& ber,
                                          const CalibrationTargets& t) {
  const double rx70 = m.rx_heated(70), rx80 = m.rx_heated(80);
  const double tx70 = m.tx_heated(70), tx80 = m.tx_heated(80);
  return {
      {"rx70_per_min", per.snr_for(t.rx70_per_min) - rx70},
      {"rx80_per_min", per.snr_for(t.rx80_per_min) - rx80},
      {"tx80_per_min", per.snr_for(t.tx80_per_min) - tx80},
      {"tx80_per_max", tx80 - per.snr_for(t.tx80_per_max)},
      {"baseline_per_min", per.snr_for(t.baseline_per_min) - m.baseline},
      {"baseline_per_max", m.baseline - per.snr_for(t.baseline_per_max)},
      {"ber_asymmetry_70", ber.snr_for(t.ber_asymmetry_70 * ber.at(tx70)) - rx70},
      {"ber_rise_70", ber.snr_for(t.ber_rise_70 * ber.at(m.baseline)) - rx70},
      {"similarity_drop_max_db", t.similarity_drop_max_db - (m.baseline - rx70)},
  };
}

using LogFn = std::function<void(const std::string&)>;

inline std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(std::round((lo + k * step) * 1e6) / 1e6);
  return out;
}

inline CalibrationReport calibrate_defaults(const Calibration& base, const CalibrationTargets& t,
                                            const LogFn& log = {}) {
  auto say = [&](const std::string& s) { if (log) log(s); };
  CalibrationReport rep;
  Calibration cal = base;
  cal.id = t.id;
  cal.susceptibility = 1.0;
  std::uint64_t seed = t.seed;

  // Slicer offset: the MSB skew of a beta = 1 receiver.
  double best_gap = 1e300;
  for (double offset : t.slicer_offsets) {
    DeviceProfile d = cal.device();
    d.msk_slicer_offset = offset;
    const auto p = measure_point(cal, d, t.slicer_probe_snr_db, t.slicer_packets, seed++);
    rep.slicer_ratios.emplace_back(offset, p.susceptibility_ratio);
    say(fmt::format("slicer offset {:.3f}: MSB ratio {:.3f}", offset, p.susceptibility_ratio));
    const double gap = std::abs(p.susceptibility_ratio - t.skew_ratio);
    if (gap < best_gap) {
      best_gap = gap;
      cal.msk_slicer_offset = offset;
    }
  }

  auto sweep = [&](const DeviceProfile& d, double lo, double hi) {
    std::vector<CurvePoint> pts;
    for (double s : grid(lo, hi, t.snr_step_db)) {
      pts.push_back(measure_point(cal, d, s, t.packets_per_point, seed++));
      say(fmt::format("  snr {:6.2f} dB: per {:.4f} ber {:.2e} score {:.2f}", s, pts.back().per,
                      pts.back().ber, pts.back().mean_score));
    }
    return pts;
  };
  say("packet error curve, beta = 1");
  rep.curve = sweep(cal.device(), t.snr_min_db, t.snr_max_db);
  DeviceProfile coherent = cal.device();
  coherent.susceptibility = 0.0;
  say("packet error curve, beta = 0");
  rep.coherent_curve = sweep(coherent, t.coherent_snr_min_db, t.coherent_snr_max_db);

  auto column = [](const std::vector<CurvePoint>& pts, double CurvePoint::*f) {
    std::vector<double> out;
    for (const auto& p : pts) out.push_back(p.*f);
    return out;
  };
  const double floor = 0.5 / static_cast<double>(t.packets_per_point);
  const auto snrs = column(rep.curve, &CurvePoint::snr_db);
  const Curve per(snrs, column(rep.curve, &CurvePoint::per), Curve::Domain::Logit, floor);
  const Curve ber(snrs, column(rep.curve, &CurvePoint::ber), Curve::Domain::Log, 1e-7);
  const Curve coherent_per(column(rep.coherent_curve, &CurvePoint::snr_db),
                           column(rep.coherent_curve, &CurvePoint::per), Curve::Domain::Logit, floor);
  std::vector<double> score = column(rep.curve, &CurvePoint::mean_score);
  for (auto& s : score) s = -s;  // scores rise with SNR; negate for the decreasing interpolant
  const Curve neg_score(snrs, score, Curve::Domain::Linear, 0.0);

  // Link slopes: maximise the smallest margin, then the capped total.
  double best_min = -1e300, best_sum = -1e300;
  LinkModel best{};
  for (double x : grid(t.snr_min_db, t.snr_max_db, t.baseline_step_db)) {
    for (double g : grid(t.slope_step, t.slope_max, t.slope_step)) {
      for (double n : grid(t.slope_step, t.noise_slope_max, t.slope_step)) {
        const LinkModel m{x, g, n};
        double lo = 1e300, sum = 0.0;
        for (const auto& mg : target_margins(m, per, ber, t)) {
          lo = std::min(lo, mg.db);
          sum += std::min(mg.db, 1.5);
        }
        if (lo > best_min + 1e-9 || (lo > best_min - 1e-9 && sum > best_sum + 1e-9)) {
          best_min = lo;
          best_sum = sum;
          best = m;
        }
      }
    }
  }
  rep.margins = target_margins(best, per, ber, t);
  rep.min_margin = best_min;
  for (const auto& m : rep.margins) say(fmt::format("margin {:18s} {:+.3f} dB", m.name, m.db));
  if (best_min <= 0.0) {
    const auto worst = std::min_element(rep.margins.begin(), rep.margins.end(),
                                        [](auto& a, auto& b) { return a.db < b.db; });
    throw CalibrationInfeasible(fmt::format(
        "no grid point meets every target; nearest miss: baseline {:.2f} dB, gain slope {:.3f}, "
        "noise slope {:.3f}, worst target {} short by {:.3f} dB",
        best.baseline, best.gain, best.noise, worst->name, -worst->db));
  }

  cal.tx_temp_coeff = -best.gain;
  cal.rx_gain_temp_coeff = -best.gain;
  cal.rx_noise_temp_coeff = best.noise;
  cal.path_loss_db = std::round((cal.tx_power_dbm - cal.base_noise_dbm - best.baseline) * 1e6) / 1e6;
  auto round_to = [](double v, double q) { return std::round(v / q) / (1.0 / q); };
  cal.skew_snr_db = round_to(per.snr_for(t.skew_operating_per), 0.05);
  cal.coherent_skew_snr_db = round_to(coherent_per.snr_for(t.skew_operating_per), 0.05);
  // LQI 0 where the link stops carrying packets, 255 for a clean capture.
  cal.lqi_score_low = round_to(-neg_score.at(per.snr_for(t.rx80_per_min)), 0.01);
  cal.lqi_score_high = 32.0;
  cal.validate();
  rep.calibration = cal;
  return rep;
}

}  // namespace hotbox
