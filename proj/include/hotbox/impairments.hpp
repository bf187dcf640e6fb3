#pragma once

// Temperature-dependent link budget and the AWGN channel.

#include <cmath>
#include <complex>
#include <vector>
#include <limits>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "hotbox/device.hpp"
#include "hotbox/error.hpp"
#include "hotbox/phy.hpp"

namespace hotbox::impairments {

inline constexpr double kMinTemp = -20.0;
inline constexpr double kMaxTemp = 120.0;
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

// Distance and the fixed antenna orientation of both harnesses collapse into
// a single path loss.
struct LinkGeometry {
  double path_loss_db = 0.0;
  double tx_power_dbm = 0.0;

  void validate() const {
    if (!std::isfinite(path_loss_db) || path_loss_db < 0.0) {
      throw ConfigError("path_loss_db must be finite and >= 0");
    }
    if (!std::isfinite(tx_power_dbm)) throw ConfigError("tx_power_dbm must be finite");
  }
  friend bool operator==(const LinkGeometry&, const LinkGeometry&) = default;
};

struct ChannelState {
  double snr_db = 0.0;
  double rssi_dbm = 0.0;
  double noise_floor_dbm = 0.0;
};

inline ChannelState link_state(const DeviceProfile& tx, double tx_temp, const DeviceProfile& rx,
                               double rx_temp, const LinkGeometry& geometry,
                               double base_noise_dbm) {
  for (double t : {tx_temp, rx_temp}) {
    if (!(t >= kMinTemp && t <= kMaxTemp)) {
      throw TempOutOfRange("temperature " + std::to_string(t) + " °C outside [-20, 120]");
    }
  }
  ChannelState s;
  s.rssi_dbm = geometry.tx_power_dbm - geometry.path_loss_db +
               tx.tx_temp_coeff * (tx_temp - tx.reference_temp) +
               rx.rx_gain_temp_coeff * (rx_temp - rx.reference_temp);
  s.noise_floor_dbm = base_noise_dbm + rx.rx_noise_temp_coeff * (rx_temp - rx.reference_temp);
  s.snr_db = s.rssi_dbm - s.noise_floor_dbm;
  return s;
}

// Per-sample complex noise power for a unit-power signal at `snr_db`.
inline double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

// Adds independent zero-mean Gaussian noise to both rails in place; each rail
// carries half of the noise power. An infinite SNR leaves the signal untouched.
template <class Urbg>
void add_awgn(phy::BasebandSignal& signal, double snr_db, Urbg& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  if (!std::isfinite(snr_db)) throw PhyError("SNR must be finite or +inf");
  boost::random::normal_distribution<double> gauss(0.0, std::sqrt(noise_variance(snr_db) / 2.0));
  for (std::size_t m = 0; m < signal.i.size(); ++m) {
    signal.i[m] += gauss(rng);
    signal.q[m] += gauss(rng);
  }
}

// The same channel seen after the receiver's integrate-and-dump windows of a
// signal with `signal_len` samples per rail. Windows cover disjoint sample
// ranges, so the summed noise in each is an independent Gaussian whose
// variance scales with the window's sample count. Equivalent in distribution
// to add_awgn followed by phy::detector_windows, with one draw per window
// and rail instead of one per sample.
template <class Urbg>
void add_window_noise(std::vector<std::complex<double>>& windows, std::size_t signal_len,
                      int samples_per_chip, double snr_db, Urbg& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  if (!std::isfinite(snr_db)) throw PhyError("SNR must be finite or +inf");
  const double rail_var = noise_variance(snr_db) / 2.0;
  const auto spc = static_cast<std::size_t>(samples_per_chip);
  const double full = std::sqrt(rail_var * static_cast<double>(spc));
  boost::random::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto [lo, hi] = phy::window_bounds(k, samples_per_chip, signal_len);
    const double sigma =
        hi - lo == spc ? full : std::sqrt(rail_var * static_cast<double>(hi - lo));
    const double re = unit(rng), im = unit(rng);
    windows[k] += std::complex<double>(sigma * re, sigma * im);
  }
}

template <class Urbg>
phy::BasebandSignal apply_awgn(phy::BasebandSignal signal, double snr_db, Urbg& rng) {
  add_awgn(signal, snr_db, rng);
  return signal;
}

template <class Urbg>
phy::BasebandSignal apply_awgn(phy::BasebandSignal signal, const ChannelState& state, Urbg& rng) {
  return apply_awgn(std::move(signal), state.snr_db, rng);
}

}  // namespace hotbox::impairments
