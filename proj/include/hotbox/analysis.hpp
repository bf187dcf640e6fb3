#pragma once

// Statistics over traces: where bit errors land, which nibble values break,
// and per-temperature link metrics.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/statistics/bivariate_statistics.hpp>

#include "hotbox/error.hpp"
#include "hotbox/orchestrator.hpp"
#include "hotbox/phy.hpp"

namespace hotbox::analysis {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RecordFilter {
  std::optional<Direction> direction;
  bool include_transitional = false;
  std::optional<std::size_t> step;  // restrict to one schedule step

  bool accepts(const PacketRecord& r) const {
    if (direction && r.direction != *direction) return false;
    if (r.transitional && !include_transitional) return false;
    if (step && r.step != *step) return false;
    return true;
  }
};

// Bit k of byte j has index 8j + k, least significant bit first, matching
// the order bits go over the air.
inline std::vector<std::size_t> bit_errors(std::span<const std::uint8_t> sent,
                                           std::span<const std::uint8_t> received) {
  if (sent.size() != received.size()) {
    throw LengthMismatch("bit strings differ in length: " + std::to_string(sent.size()) + " vs " +
                         std::to_string(received.size()) + " bytes");
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < sent.size(); ++j) {
    unsigned diff = sent[j] ^ received[j];
    while (diff) {
      const int k = std::countr_zero(diff);
      out.push_back(8 * j + static_cast<std::size_t>(k));
      diff &= diff - 1;
    }
  }
  return out;
}

inline std::size_t bit_error_count(std::span<const std::uint8_t> sent,
                                   std::span<const std::uint8_t> received) {
  if (sent.size() != received.size()) throw LengthMismatch("bit strings differ in length");
  std::size_t n = 0;
  for (std::size_t j = 0; j < sent.size(); ++j) n += std::popcount(unsigned(sent[j] ^ received[j]));
  return n;
}

struct BitErrorHistogram {
  std::vector<std::uint64_t> counts;
  std::size_t header_bits = 0;  // bits [0, header_bits) are length octet + MAC header
  std::uint64_t total_corrupt_packets = 0;

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  std::vector<double> normalized() const {
    const double t = static_cast<double>(total());
    std::vector<double> out(counts.size(), 0.0);
    if (t > 0) {
      for (std::size_t k = 0; k < counts.size(); ++k) out[k] = static_cast<double>(counts[k]) / t;
    }
    return out;
  }
  friend bool operator==(const BitErrorHistogram&, const BitErrorHistogram&) = default;
};

inline std::size_t frame_bits(const Trace& t) {
  return 8 * (1 + t.header_len + t.config.payload_len + phy::kFcsLength);
}

inline BitErrorHistogram per_bit_histogram(const Trace& trace, const RecordFilter& filter = {}) {
  BitErrorHistogram h;
  h.counts.assign(frame_bits(trace), 0);
  h.header_bits = 8 * (1 + trace.header_len);
  for (const auto& r : trace.records) {
    if (r.outcome != Outcome::Corrupt || !filter.accepts(r)) continue;
    ++h.total_corrupt_packets;
    for (auto k : bit_errors(r.sent, r.received)) {
      if (k >= h.counts.size()) h.counts.resize(k + 1, 0);
      ++h.counts[k];
    }
  }
  return h;
}

struct NibbleStats {
  std::array<std::uint64_t, 16> transmitted{};
  std::array<std::uint64_t, 16> erroneous{};
  std::array<double, 16> error_rate{};
  double msb0_rate = kNaN;
  double msb1_rate = kNaN;
  double susceptibility_ratio = kNaN;
  std::uint64_t packets = 0;  // received packets contributing
};

inline double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? kNaN : static_cast<double>(num) / static_cast<double>(den);
}

inline void finish_rates(NibbleStats& s) {
  std::uint64_t t0 = 0, e0 = 0, t1 = 0, e1 = 0;
  for (std::size_t v = 0; v < 16; ++v) {
    s.error_rate[v] = ratio(s.erroneous[v], s.transmitted[v]);
    (v < 8 ? t0 : t1) += s.transmitted[v];
    (v < 8 ? e0 : e1) += s.erroneous[v];
  }
  s.msb0_rate = ratio(e0, t0);
  s.msb1_rate = ratio(e1, t1);
  s.susceptibility_ratio = (e0 == 0 && e1 == 0) ? kNaN : s.msb1_rate / s.msb0_rate;
}

// Payload nibbles only, over packets that were received (ok or corrupt).
// A nibble is erroneous if any of its four bits flipped.
inline NibbleStats nibble_stats(const Trace& trace, const RecordFilter& filter = {}) {
  const phy::Bytes pattern = build_payload(trace.config.payload_len);
  const std::size_t offset = 1 + trace.header_len;
  NibbleStats s;
  for (const auto& r : trace.records) {
    if (r.outcome == Outcome::Lost || !filter.accepts(r)) continue;
    if (r.sent.size() < offset + pattern.size() ||
        !std::equal(pattern.begin(), pattern.end(), r.sent.begin() + static_cast<std::ptrdiff_t>(offset))) {
      throw UnknownPayloadPattern("packet " + std::to_string(r.seq) +
                                  " does not carry the standard payload pattern");
    }
    const phy::Bytes& rx = r.received_bytes();
    if (rx.size() != r.sent.size()) throw LengthMismatch("received length differs from sent");
    ++s.packets;
    for (std::size_t j = 0; j < pattern.size(); ++j) {
      const std::uint8_t diff = r.sent[offset + j] ^ rx[offset + j];
      const std::uint8_t v = pattern[j];
      ++s.transmitted[v & 0x0F];
      ++s.transmitted[v >> 4];
      if (diff & 0x0F) ++s.erroneous[v & 0x0F];
      if (diff & 0xF0) ++s.erroneous[v >> 4];
    }
  }
  finish_rates(s);
  return s;
}

// Pearson correlation of the two normalised histograms.
inline double distribution_similarity(const BitErrorHistogram& a, const BitErrorHistogram& b) {
  if (a.counts.size() != b.counts.size()) throw LengthMismatch("histograms differ in length");
  if (a.total() == 0 || b.total() == 0) throw DegenerateHistogram("histogram has no errors");
  const auto u = a.normalized(), v = b.normalized();
  auto constant = [](const std::vector<double>& x) {
    return std::all_of(x.begin(), x.end(), [&](double y) { return y == x.front(); });
  };
  if (constant(u) || constant(v)) throw DegenerateHistogram("histogram has no variation");
  return boost::math::statistics::correlation_coefficient(u, v);
}

// Average ranks with ties sharing the mean rank.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw AnalysisError("spearman needs two equal series");
  return boost::math::statistics::correlation_coefficient(ranks(x), ranks(y));
}

struct Binning {
  enum class Kind { PerDwell, PerSeconds } kind = Kind::PerDwell;
  double seconds = 0.0;

  static Binning per_dwell() { return {}; }
  static Binning per_seconds(double s) {
    if (!(s > 0)) throw AnalysisError("bin width must be positive");
    return {Kind::PerSeconds, s};
  }
};

struct LinkBin {
  std::size_t bin = 0;  // schedule step, or time-bin index
  double target = kNaN;
  double start = kNaN;
  double end = kNaN;
  std::uint64_t packets = 0;
  std::uint64_t ok = 0;
  std::uint64_t corrupt = 0;
  std::uint64_t lost = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_received = 0;
  double mean_tx_temp = kNaN;
  double mean_rx_temp = kNaN;
  double mean_rssi_dbm = kNaN;
  double mean_lqi = kNaN;
  double ber = kNaN;
  double prr_ok = kNaN;
  double prr_corrupt = kNaN;
  double prr_lost = kNaN;

  double per() const { return 1.0 - prr_ok; }
};

// BER counts only received packets; RSSI and LQI average only received
// packets and are absent (NaN) for a bin where everything was lost.
inline std::vector<LinkBin> link_summary(const Trace& trace, const Binning& binning = {},
                                         const RecordFilter& filter = {}) {
  struct Acc {
    LinkBin b;
    long double tx = 0, rx = 0;
    long long rssi = 0, lqi = 0;
    std::uint64_t received = 0;
  };
  std::map<std::size_t, Acc> bins;
  for (const auto& r : trace.records) {
    if (!filter.accepts(r)) continue;
    const std::size_t key = binning.kind == Binning::Kind::PerDwell
                                ? r.step
                                : static_cast<std::size_t>(std::floor(r.sim_time / binning.seconds));
    Acc& a = bins[key];
    LinkBin& b = a.b;
    if (b.packets == 0) {
      b.bin = key;
      b.start = b.end = r.sim_time;
      if (binning.kind == Binning::Kind::PerDwell) b.target = r.target;
    }
    b.start = std::min(b.start, r.sim_time);
    b.end = std::max(b.end, r.sim_time);
    ++b.packets;
    a.tx += r.tx_temp;
    a.rx += r.rx_temp;
    switch (r.outcome) {
      case Outcome::Ok: ++b.ok; break;
      case Outcome::Corrupt: ++b.corrupt; break;
      case Outcome::Lost: ++b.lost; break;
    }
    if (r.outcome != Outcome::Lost) {
      ++a.received;
      a.rssi += *r.rssi_dbm;
      a.lqi += *r.lqi;
      b.bits_received += 8 * r.sent.size();
      if (r.outcome == Outcome::Corrupt) b.bit_errors += bit_error_count(r.sent, r.received);
    }
  }
  std::vector<LinkBin> out;
  for (auto& [key, a] : bins) {
    LinkBin& b = a.b;
    const double n = static_cast<double>(b.packets);
    b.mean_tx_temp = static_cast<double>(a.tx / n);
    b.mean_rx_temp = static_cast<double>(a.rx / n);
    if (binning.kind == Binning::Kind::PerSeconds) b.target = kNaN;
    b.prr_ok = static_cast<double>(b.ok) / n;
    b.prr_corrupt = static_cast<double>(b.corrupt) / n;
    b.prr_lost = static_cast<double>(b.lost) / n;
    if (a.received > 0) {
      b.mean_rssi_dbm = static_cast<double>(a.rssi) / static_cast<double>(a.received);
      b.mean_lqi = static_cast<double>(a.lqi) / static_cast<double>(a.received);
      b.ber = static_cast<double>(b.bit_errors) / static_cast<double>(b.bits_received);
    }
    out.push_back(b);
  }
  return out;
}

inline const LinkBin* find_bin_by_target(const std::vector<LinkBin>& bins, double target) {
  for (const auto& b : bins) {
    if (std::abs(b.target - target) < 1e-9) return &b;
  }
  return nullptr;
}

}  // namespace hotbox::analysis
