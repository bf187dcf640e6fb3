#pragma once

// IEEE 802.15.4 2.4 GHz physical layer: framing, DSSS spreading, half-sine
// O-QPSK modulation, the two chip detectors (coherent and MSK-style
// differential) and the receiver read-outs.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "hotbox/device.hpp"
#include "hotbox/error.hpp"

namespace hotbox::phy {

inline constexpr std::size_t kChipsPerSymbol = 32;
inline constexpr std::size_t kNibbleValues = 16;
inline constexpr double kChipRate = 2.0e6;  // chips/s
inline constexpr std::size_t kMaxPsduLength = 127;
inline constexpr std::size_t kFcsLength = 2;
inline constexpr std::size_t kPreambleLength = 4;
inline constexpr std::uint8_t kSfd = 0xA7;
inline constexpr std::size_t kPreambleSymbols = 2 * kPreambleLength;
inline constexpr std::size_t kShrSymbols = kPreambleSymbols + 2;
inline constexpr int kDefaultSamplesPerChip = 4;
inline constexpr std::size_t kLqiSymbols = 8;

using Bytes = std::vector<std::uint8_t>;
using Nibble = std::uint8_t;
// 32 chips of one symbol; bit k holds chip k (chip 0 is transmitted first).
using ChipWord = std::uint32_t;

// ---------------------------------------------------------------------------
// Framing

// CRC-16/KERMIT: x^16 + x^12 + x^5 + 1, reflected, zero init.
inline std::uint16_t fcs16(std::span<const std::uint8_t> bytes) {
  boost::crc_optimal<16, 0x1021, 0, 0, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return static_cast<std::uint16_t>(crc.checksum());
}

struct Frame {
  std::array<std::uint8_t, kPreambleLength> preamble{};
  std::uint8_t sfd = kSfd;
  std::uint8_t length = 0;  // octets in header + payload + fcs
  Bytes header;
  Bytes payload;
  std::uint16_t fcs = 0;

  // header | payload | fcs, fcs little-endian.
  Bytes psdu() const {
    Bytes out;
    out.reserve(header.size() + payload.size() + kFcsLength);
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), payload.begin(), payload.end());
    out.push_back(static_cast<std::uint8_t>(fcs & 0xFF));
    out.push_back(static_cast<std::uint8_t>(fcs >> 8));
    return out;
  }

  // Length octet followed by the PSDU: everything after the SFD, which is what
  // the receiving mote hands up for comparison.
  Bytes phy_bytes() const {
    Bytes out;
    out.reserve(1 + length);
    out.push_back(length);
    const Bytes body = psdu();
    out.insert(out.end(), body.begin(), body.end());
    return out;
  }

  Bytes ppdu() const {
    Bytes out(preamble.begin(), preamble.end());
    out.push_back(sfd);
    const Bytes rest = phy_bytes();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

  bool fcs_valid() const {
    Bytes covered(header);
    covered.insert(covered.end(), payload.begin(), payload.end());
    return fcs16(covered) == fcs;
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline Frame encode_frame(std::span<const std::uint8_t> header,
                          std::span<const std::uint8_t> payload) {
  const std::size_t octets = header.size() + payload.size() + kFcsLength;
  if (octets > kMaxPsduLength) {
    throw OversizeFrame("frame of " + std::to_string(octets) + " octets exceeds the " +
                        std::to_string(kMaxPsduLength) + "-octet PSDU bound");
  }
  Frame f;
  f.header.assign(header.begin(), header.end());
  f.payload.assign(payload.begin(), payload.end());
  f.length = static_cast<std::uint8_t>(octets);
  Bytes covered(f.header);
  covered.insert(covered.end(), f.payload.begin(), f.payload.end());
  f.fcs = fcs16(covered);
  return f;
}

// Low nibble of each octet goes first.
inline std::vector<Nibble> bytes_to_nibbles(std::span<const std::uint8_t> bytes) {
  std::vector<Nibble> out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(b & 0x0F);
    out.push_back(b >> 4);
  }
  return out;
}

inline Bytes nibbles_to_bytes(std::span<const Nibble> nibbles) {
  if (nibbles.size() % 2 != 0) throw LengthError("odd nibble count");
  Bytes out(nibbles.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>((nibbles[2 * i] & 0x0F) | ((nibbles[2 * i + 1] & 0x0F) << 4));
  }
  return out;
}

inline std::vector<Nibble> frame_to_nibbles(const Frame& frame) {
  return bytes_to_nibbles(frame.ppdu());
}

// Inverse of frame_to_nibbles. The header/payload split is not carried on air,
// so the caller supplies the header length.
inline Frame nibbles_to_frame(std::span<const Nibble> nibbles, std::size_t header_len) {
  const Bytes bytes = nibbles_to_bytes(nibbles);
  const std::size_t fixed = kPreambleLength + 2;
  if (bytes.size() < fixed) throw LengthError("nibble stream shorter than the sync header");
  Frame f;
  std::copy_n(bytes.begin(), kPreambleLength, f.preamble.begin());
  f.sfd = bytes[kPreambleLength];
  f.length = bytes[kPreambleLength + 1];
  if (bytes.size() != fixed + f.length || f.length < header_len + kFcsLength) {
    throw LengthError("length field " + std::to_string(f.length) +
                      " inconsistent with nibble stream");
  }
  auto body = bytes.begin() + static_cast<std::ptrdiff_t>(fixed);
  f.header.assign(body, body + static_cast<std::ptrdiff_t>(header_len));
  f.payload.assign(body + static_cast<std::ptrdiff_t>(header_len),
                   body + static_cast<std::ptrdiff_t>(f.length - kFcsLength));
  f.fcs = static_cast<std::uint16_t>(bytes[fixed + f.length - 2] |
                                     (bytes[fixed + f.length - 1] << 8));
  return f;
}

// ---------------------------------------------------------------------------
// Chips and baseband

struct ChipStream {
  std::vector<std::uint8_t> chips;  // 0 or 1
  double chip_rate = kChipRate;

  std::size_t size() const { return chips.size(); }
  friend bool operator==(const ChipStream& a, const ChipStream& b) { return a.chips == b.chips; }
};

struct BasebandSignal {
  std::vector<double> i;
  std::vector<double> q;
  int samples_per_chip = kDefaultSamplesPerChip;

  std::size_t size() const { return i.size(); }
};

inline ChipWord pack_chips(std::span<const std::uint8_t> chips32) {
  ChipWord w = 0;
  for (std::size_t k = 0; k < kChipsPerSymbol; ++k) {
    w |= static_cast<ChipWord>(chips32[k] & 1u) << k;
  }
  return w;
}

inline void append_word(std::vector<std::uint8_t>& chips, ChipWord w) {
  for (std::size_t k = 0; k < kChipsPerSymbol; ++k) chips.push_back((w >> k) & 1u);
}

inline double pulse_sample(int j, int samples_per_chip) {
  return std::sin(std::numbers::pi * (j + 0.5) / (2.0 * samples_per_chip));
}

// Half-sine O-QPSK. Chip k is a half-sine pulse spanning chips k..k+1 on the I
// rail (k even) or Q rail (k odd), so Q lags I by one chip period, half the
// pulse length. Sample m sits at time (m + 0.5) / samples_per_chip chips; the
// stream carries one extra chip period of tail for the last pulse.
inline void modulate_oqpsk_into(const ChipStream& chips, int samples_per_chip, BasebandSignal& out) {
  if (samples_per_chip < 2 || samples_per_chip % 2 != 0) {
    throw PhyError("samples_per_chip must be even and >= 2");
  }
  const auto spc = static_cast<std::size_t>(samples_per_chip);
  const std::size_t n = chips.size();
  out.samples_per_chip = samples_per_chip;
  const std::size_t len = n == 0 ? 0 : n * spc + spc;
  out.i.assign(len, 0.0);
  out.q.assign(len, 0.0);
  std::array<double, 64> pulse{};
  if (2 * spc > pulse.size()) throw PhyError("samples_per_chip too large");
  for (std::size_t j = 0; j < 2 * spc; ++j) pulse[j] = pulse_sample(static_cast<int>(j), samples_per_chip);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = chips.chips[k] ? 1.0 : -1.0;
    double* dst = ((k % 2 == 0) ? out.i.data() : out.q.data()) + k * spc;
    for (std::size_t j = 0; j < 2 * spc; ++j) dst[j] += a * pulse[j];
  }
}

inline BasebandSignal modulate_oqpsk(const ChipStream& chips,
                                     int samples_per_chip = kDefaultSamplesPerChip) {
  BasebandSignal s;
  modulate_oqpsk_into(chips, samples_per_chip, s);
  return s;
}

inline std::size_t chip_count(const BasebandSignal& s) {
  const auto spc = static_cast<std::size_t>(s.samples_per_chip);
  if (s.i.size() != s.q.size()) throw LengthError("I and Q rails differ in length");
  if (s.i.empty()) return 0;
  if (spc == 0 || s.i.size() < spc || (s.i.size() - spc) % spc != 0) {
    throw LengthError("signal length is not a whole number of chips");
  }
  return (s.i.size() - spc) / spc;
}

// Integrate-and-dump windows, one chip period wide. Window k is centred on the
// pulse peak of chip k - 1; window 0 precedes the first peak.
// Sample range [first, second) of window k, clipped to the signal.
inline std::pair<std::size_t, std::size_t> window_bounds(std::size_t k, int samples_per_chip,
                                                         std::size_t signal_len) {
  const auto spc = static_cast<std::size_t>(samples_per_chip);
  const std::size_t lo = k * spc >= spc / 2 ? k * spc - spc / 2 : 0;
  const std::size_t hi = std::min(signal_len, k * spc + spc / 2);
  return {std::min(lo, hi), hi};
}

inline void detector_windows_into(const BasebandSignal& s, std::vector<std::complex<double>>& w) {
  const std::size_t n = chip_count(s);
  w.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const auto [lo, hi] = window_bounds(k, s.samples_per_chip, s.i.size());
    double re = 0.0, im = 0.0;
    for (std::size_t m = lo; m < hi; ++m) {
      re += s.i[m];
      im += s.q[m];
    }
    w[k] = {re, im};
  }
}

inline std::vector<std::complex<double>> detector_windows(const BasebandSignal& s) {
  std::vector<std::complex<double>> w;
  detector_windows_into(s, w);
  return w;
}

// Differential decisions: the sign of the phase advance between the peaks of
// chips k-1 and k, compared against the device's slicer offset. Chip 0 has no
// reference and is decided 0.
inline void msk_decisions_into(std::span<const std::complex<double>> windows, double slicer_offset,
                               ChipStream& out) {
  const std::size_t n = windows.empty() ? 0 : windows.size() - 1;
  out.chips.assign(n, 0);
  for (std::size_t k = 1; k < n; ++k) {
    const std::complex<double> p = windows[k + 1] * std::conj(windows[k]);
    const double mag = std::sqrt(std::norm(p));
    if (mag == 0.0) continue;
    out.chips[k] = (p.imag() / mag + slicer_offset) > 0.0 ? 1 : 0;
  }
}

inline ChipStream msk_decisions(std::span<const std::complex<double>> windows,
                                double slicer_offset) {
  ChipStream out;
  msk_decisions_into(windows, slicer_offset, out);
  return out;
}

// Window amplitude of a clean chip at its pulse peak.
inline double chip_amplitude(int samples_per_chip) {
  double a = 0.0;
  for (int j = samples_per_chip / 2; j < 3 * samples_per_chip / 2; ++j) {
    a += pulse_sample(j, samples_per_chip);
  }
  return a;
}

// Matched-filter estimate of each chip, read on the rail that carries it and
// scaled so a clean chip reads +1 or -1.
inline void coherent_soft_into(std::span<const std::complex<double>> windows, int samples_per_chip,
                               std::vector<double>& out) {
  const std::size_t n = windows.empty() ? 0 : windows.size() - 1;
  const double scale = 1.0 / chip_amplitude(samples_per_chip);
  out.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = scale * ((k % 2 == 0) ? windows[k + 1].real() : windows[k + 1].imag());
  }
}

inline ChipStream coherent_decisions(std::span<const std::complex<double>> windows) {
  ChipStream out;
  const std::size_t n = windows.empty() ? 0 : windows.size() - 1;
  out.chips.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double v = (k % 2 == 0) ? windows[k + 1].real() : windows[k + 1].imag();
    out.chips[k] = v > 0.0 ? 1 : 0;
  }
  return out;
}

inline ChipStream demodulate_chips(const BasebandSignal& signal, const DeviceProfile& profile) {
  const auto w = detector_windows(signal);
  return msk_decisions(w, profile.msk_slicer_offset);
}

inline ChipStream demodulate_chips_coherent(const BasebandSignal& signal) {
  const auto w = detector_windows(signal);
  return coherent_decisions(w);
}

// What the receiver hands to the despreader: soft coherent chip estimates and
// hard differential decisions for the same capture.
struct ChipDecisions {
  std::vector<double> coherent;
  ChipStream msk;

  std::size_t size() const { return msk.size(); }

  // Both branches see the same hard chips.
  static ChipDecisions from_hard(const ChipStream& chips) {
    ChipDecisions d;
    d.coherent.reserve(chips.size());
    for (std::uint8_t c : chips.chips) d.coherent.push_back(c ? 1.0 : -1.0);
    d.msk = chips;
    return d;
  }
};

inline void decide_chips_into(std::span<const std::complex<double>> windows, int samples_per_chip,
                              const DeviceProfile& profile, ChipDecisions& out) {
  coherent_soft_into(windows, samples_per_chip, out.coherent);
  msk_decisions_into(windows, profile.msk_slicer_offset, out.msk);
}

inline void receive_chips_into(const BasebandSignal& signal, const DeviceProfile& profile,
                               std::vector<std::complex<double>>& windows, ChipDecisions& out) {
  detector_windows_into(signal, windows);
  decide_chips_into(windows, signal.samples_per_chip, profile, out);
}

inline ChipDecisions receive_chips(const BasebandSignal& signal, const DeviceProfile& profile) {
  std::vector<std::complex<double>> windows;
  ChipDecisions d;
  receive_chips_into(signal, profile, windows, d);
  return d;
}

// ---------------------------------------------------------------------------
// Codebook

struct Codebook {
  std::array<ChipWord, kNibbleValues> entries{};
  std::array<ChipWord, kNibbleValues> msk_entries{};
};

namespace detail {

// Symbol 0 of the 2.4 GHz chip table, chip 0 first. Symbols 1-7 rotate it by
// 4 chips each; 8-15 repeat 0-7 with the odd-indexed chips inverted.
inline constexpr char kSymbolZero[] = "11011001110000110101001000101110";

inline std::array<ChipWord, kNibbleValues> standard_entries() {
  std::array<std::uint8_t, kChipsPerSymbol> base{};
  for (std::size_t k = 0; k < kChipsPerSymbol; ++k) base[k] = kSymbolZero[k] == '1';
  std::array<ChipWord, kNibbleValues> out{};
  for (std::size_t n = 0; n < 8; ++n) {
    std::array<std::uint8_t, kChipsPerSymbol> rot{};
    for (std::size_t k = 0; k < kChipsPerSymbol; ++k) {
      rot[(k + 4 * n) % kChipsPerSymbol] = base[k];
    }
    out[n] = pack_chips(rot);
    for (std::size_t k = 1; k < kChipsPerSymbol; k += 2) rot[k] ^= 1u;
    out[n + 8] = pack_chips(rot);
  }
  return out;
}

// What the differential detector reports for symbol n sent in steady state,
// i.e. preceded by itself. Derived by running the noiseless chain.
inline std::array<ChipWord, kNibbleValues> msk_translation(
    const std::array<ChipWord, kNibbleValues>& entries) {
  std::array<ChipWord, kNibbleValues> out{};
  for (std::size_t n = 0; n < kNibbleValues; ++n) {
    ChipStream pair;
    append_word(pair.chips, entries[n]);
    append_word(pair.chips, entries[n]);
    const ChipStream d = msk_decisions(detector_windows(modulate_oqpsk(pair)), 0.0);
    out[n] = pack_chips(std::span(d.chips).subspan(kChipsPerSymbol, kChipsPerSymbol));
  }
  return out;
}

}  // namespace detail

inline const Codebook& build_codebook() {
  static const Codebook book = [] {
    Codebook b;
    b.entries = detail::standard_entries();
    b.msk_entries = detail::msk_translation(b.entries);
    return b;
  }();
  return book;
}

inline ChipStream spread(std::span<const Nibble> nibbles, const Codebook& book) {
  ChipStream out;
  out.chips.reserve(nibbles.size() * kChipsPerSymbol);
  for (Nibble n : nibbles) {
    if (n >= kNibbleValues) throw PhyError("nibble value out of range");
    append_word(out.chips, book.entries[n]);
  }
  return out;
}

inline int chip_distance(ChipWord a, ChipWord b) { return std::popcount(a ^ b); }

// Bipolar correlation of two 32-chip words, in [-32, 32].
inline int correlate(ChipWord a, ChipWord b) {
  return static_cast<int>(kChipsPerSymbol) - 2 * chip_distance(a, b);
}

// ---------------------------------------------------------------------------
// Despreading and synchronisation

struct SymbolDecision {
  Nibble nibble = 0;
  double score = 0.0;
};

// Correlation of soft chip estimates with the bipolar form of `word`.
inline double correlate(std::span<const double> soft32, ChipWord word) {
  double acc = 0.0;
  for (std::size_t k = 0; k < kChipsPerSymbol; ++k) {
    acc += ((word >> k) & 1u) ? soft32[k] : -soft32[k];
  }
  return acc;
}

// score(n) = (1 - beta) * corr(coherent, entry[n]) + beta * corr(msk, msk_entry[n]);
// ties go to the lowest nibble.
inline SymbolDecision decide_symbol(std::span<const double> coherent32, ChipWord msk,
                                    const Codebook& book, double beta) {
  SymbolDecision best{0, -1e300};
  for (std::size_t n = 0; n < kNibbleValues; ++n) {
    double s = 0.0;
    if (beta < 1.0) s += (1.0 - beta) * correlate(coherent32, book.entries[n]);
    if (beta > 0.0) s += beta * correlate(msk, book.msk_entries[n]);
    if (s > best.score) best = {static_cast<Nibble>(n), s};
  }
  return best;
}

struct DespreadResult {
  std::vector<Nibble> nibbles;
  std::vector<double> scores;  // winning score per symbol
};

// Despreads `symbols` 32-chip blocks starting at chip `first_chip`.
inline DespreadResult despread_range(const ChipDecisions& d, const Codebook& book, double beta,
                                     std::size_t first_chip, std::size_t symbols) {
  if (d.coherent.size() != d.msk.size()) throw LengthError("detector outputs differ in length");
  if (first_chip + symbols * kChipsPerSymbol > d.size()) {
    throw LengthError("despread range runs past the end of the chip stream");
  }
  DespreadResult r;
  r.nibbles.reserve(symbols);
  r.scores.reserve(symbols);
  const std::span<const double> coh(d.coherent);
  const std::span<const std::uint8_t> msk(d.msk.chips);
  for (std::size_t s = 0; s < symbols; ++s) {
    const std::size_t at = first_chip + s * kChipsPerSymbol;
    const SymbolDecision sd = decide_symbol(coh.subspan(at, kChipsPerSymbol),
                                            pack_chips(msk.subspan(at, kChipsPerSymbol)), book, beta);
    r.nibbles.push_back(sd.nibble);
    r.scores.push_back(sd.score);
  }
  return r;
}

inline DespreadResult despread(const ChipDecisions& d, const Codebook& book, double beta) {
  if (d.size() % kChipsPerSymbol != 0) {
    throw LengthError("chip count " + std::to_string(d.size()) + " is not a multiple of 32");
  }
  return despread_range(d, book, beta, 0, d.size() / kChipsPerSymbol);
}

inline DespreadResult despread(const ChipDecisions& d, const Codebook& book,
                               const DeviceProfile& profile) {
  return despread(d, book, profile.susceptibility);
}

inline DespreadResult despread(const ChipStream& chips, const Codebook& book, double beta) {
  return despread(ChipDecisions::from_hard(chips), book, beta);
}

struct SyncParams {
  int min_preamble_symbols = 4;     // of the 8 zero nibbles
  std::size_t search_chips = 32;    // candidate start offsets scanned
};

struct SyncOutcome {
  bool detected = false;
  std::size_t start_chip = 0;  // chip index of the first preamble chip

  static SyncOutcome lost() { return {}; }
  static SyncOutcome at(std::size_t chip) { return {true, chip}; }
  std::size_t start_sample(int samples_per_chip) const {
    return start_chip * static_cast<std::size_t>(samples_per_chip);
  }
  friend bool operator==(const SyncOutcome&, const SyncOutcome&) = default;
};

// Looks for the preamble + SFD at each chip offset in the search span. A start
// is accepted when enough preamble symbols decode to 0 and both SFD nibbles
// decode exactly.
inline SyncOutcome detect_sync(const ChipDecisions& d, const Codebook& book, double beta,
                               const SyncParams& params = {}) {
  const std::size_t shr_chips = kShrSymbols * kChipsPerSymbol;
  if (d.size() < shr_chips) return SyncOutcome::lost();
  const std::size_t last = std::min(params.search_chips, d.size() - shr_chips + 1);
  const Nibble sfd_lo = kSfd & 0x0F;
  const Nibble sfd_hi = kSfd >> 4;
  for (std::size_t off = 0; off < last; ++off) {
    const DespreadResult r = despread_range(d, book, beta, off, kShrSymbols);
    if (r.nibbles[kPreambleSymbols] != sfd_lo || r.nibbles[kPreambleSymbols + 1] != sfd_hi) continue;
    const auto zeros = std::count(r.nibbles.begin(), r.nibbles.begin() + kPreambleSymbols, Nibble{0});
    if (zeros >= params.min_preamble_symbols) return SyncOutcome::at(off);
  }
  return SyncOutcome::lost();
}

inline SyncOutcome detect_sync(const ChipStream& chips, const Codebook& book, double beta = 1.0,
                               const SyncParams& params = {}) {
  return detect_sync(ChipDecisions::from_hard(chips), book, beta, params);
}

// ---------------------------------------------------------------------------
// Read-outs

// Mean power of the signal in dB, offset by the receive chain gain and rounded
// to whole dB like the radio's register.
inline int compute_rssi(const BasebandSignal& s, double rx_gain_db) {
  if (s.i.empty()) throw EmptySignal("RSSI of an empty signal");
  double acc = 0.0;
  for (std::size_t m = 0; m < s.i.size(); ++m) acc += s.i[m] * s.i[m] + s.q[m] * s.q[m];
  const double mean = acc / static_cast<double>(s.i.size());
  return static_cast<int>(std::lround(10.0 * std::log10(mean) + rx_gain_db));
}

// Endpoints of the affine map from mean winning correlation to LQI.
struct LqiMap {
  double score_low = 0.0;   // maps to 0
  double score_high = 32.0; // maps to 255
};

inline int compute_lqi(std::span<const double> scores, const LqiMap& map = {}) {
  if (scores.size() < kLqiSymbols) {
    throw InsufficientSymbols("LQI needs " + std::to_string(kLqiSymbols) + " symbol scores, got " +
                              std::to_string(scores.size()));
  }
  double mean = 0.0;
  for (std::size_t k = 0; k < kLqiSymbols; ++k) mean += scores[k];
  mean /= static_cast<double>(kLqiSymbols);
  const double x = 255.0 * (mean - map.score_low) / (map.score_high - map.score_low);
  return static_cast<int>(std::lround(std::clamp(x, 0.0, 255.0)));
}

}  // namespace hotbox::phy
