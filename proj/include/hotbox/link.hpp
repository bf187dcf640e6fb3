#pragma once

// One packet over the air: spread, modulate, add channel noise, detect,
// synchronise and decode at the receiving mote.

#include <complex>
#include <optional>
#include <vector>

#include "hotbox/device.hpp"
#include "hotbox/impairments.hpp"
#include "hotbox/phy.hpp"

namespace hotbox::link {

struct ReceiverParams {
  phy::SyncParams sync;
  phy::LqiMap lqi;
  int samples_per_chip = phy::kDefaultSamplesPerChip;
};

struct Reception {
  phy::SyncOutcome sync;
  std::optional<phy::Bytes> decoded;  // length octet + PSDU, present iff synced
  std::optional<int> rssi_dbm;
  std::optional<int> lqi;
};

// Reusable buffers for the per-packet chain. One per worker thread; the
// results depend only on the inputs and the RNG, never on buffer history.
class Transceiver {
 public:
  explicit Transceiver(ReceiverParams params = {}) : params_(params) {}

  const ReceiverParams& params() const { return params_; }

  // The receiver decodes as many symbols as the transmitted length octet
  // announces; symbols past the end of the capture decode as 0.
  template <class Urbg>
  Reception transceive(const phy::Frame& frame, const impairments::ChannelState& channel,
                       const DeviceProfile& receiver, Urbg& rng) {
    const phy::Codebook& book = phy::build_codebook();
    chips_tx_ = phy::spread(phy::frame_to_nibbles(frame), book);
    phy::modulate_oqpsk_into(chips_tx_, params_.samples_per_chip, signal_);
    const int rssi = phy::compute_rssi(signal_, channel.rssi_dbm);
    phy::detector_windows_into(signal_, windows_);
    impairments::add_window_noise(windows_, signal_.size(), params_.samples_per_chip,
                                  channel.snr_db, rng);
    phy::decide_chips_into(windows_, params_.samples_per_chip, receiver, rx_);

    const double beta = receiver.susceptibility;
    Reception r;
    r.sync = phy::detect_sync(rx_, book, beta, params_.sync);
    if (!r.sync.detected) return r;

    const std::size_t first = r.sync.start_chip + phy::kShrSymbols * phy::kChipsPerSymbol;
    const std::size_t wanted = 2 * (1 + static_cast<std::size_t>(frame.length));
    const std::size_t available =
        first >= rx_.size() ? 0 : (rx_.size() - first) / phy::kChipsPerSymbol;
    phy::DespreadResult body =
        phy::despread_range(rx_, book, beta, first, std::min(wanted, available));
    body.nibbles.resize(wanted, 0);
    body.scores.resize(wanted, 0.0);

    r.decoded = phy::nibbles_to_bytes(body.nibbles);
    r.rssi_dbm = rssi;
    r.lqi = phy::compute_lqi(body.scores, params_.lqi);
    return r;
  }

 private:
  ReceiverParams params_;
  phy::ChipStream chips_tx_;
  phy::BasebandSignal signal_;
  std::vector<std::complex<double>> windows_;
  phy::ChipDecisions rx_;
};

template <class Urbg>
Reception transceive(const phy::Frame& frame, const impairments::ChannelState& channel,
                     const DeviceProfile& receiver, const ReceiverParams& params, Urbg& rng) {
  Transceiver t(params);
  return t.transceive(frame, channel, receiver, rng);
}

}  // namespace hotbox::link
