#pragma once

// Two chambers, two motes taking turns, one shared simulated clock.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hotbox/calibration.hpp"
#include "hotbox/config.hpp"
#include "hotbox/impairments.hpp"
#include "hotbox/link.hpp"
#include "hotbox/phy.hpp"
#include "hotbox/rng.hpp"
#include "hotbox/thermal.hpp"

namespace hotbox {

enum class Direction { AB, BA };
enum class Outcome { Ok, Corrupt, Lost };

inline const char* to_string(Direction d) { return d == Direction::AB ? "AB" : "BA"; }
inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Ok: return "ok";
    case Outcome::Corrupt: return "corrupt";
    case Outcome::Lost: return "lost";
  }
  return "?";
}

inline constexpr std::uint16_t kPanId = 0x0022;
inline constexpr std::uint16_t kAddressA = 0x0001;
inline constexpr std::uint16_t kAddressB = 0x0002;

// 00 00 11 11 ... FF FF, repeated and cut to length.
inline phy::Bytes build_payload(std::size_t len) {
  phy::Bytes out(len);
  for (std::size_t k = 0; k < len; ++k) out[k] = static_cast<std::uint8_t>(((k % 32) / 2) * 0x11);
  return out;
}

// Data frame, no security, PAN ID compression, short addresses.
inline phy::Bytes mac_header(std::uint8_t seq, std::uint16_t dst, std::uint16_t src) {
  return {0x41,
          0x88,
          seq,
          static_cast<std::uint8_t>(kPanId & 0xFF),
          static_cast<std::uint8_t>(kPanId >> 8),
          static_cast<std::uint8_t>(dst & 0xFF),
          static_cast<std::uint8_t>(dst >> 8),
          static_cast<std::uint8_t>(src & 0xFF),
          static_cast<std::uint8_t>(src >> 8)};
}

inline Outcome classify(const phy::Frame& sent, const phy::SyncOutcome& sync,
                        const std::optional<phy::Bytes>& decoded) {
  if (!sync.detected || !decoded) return Outcome::Lost;
  return *decoded == sent.phy_bytes() ? Outcome::Ok : Outcome::Corrupt;
}

struct PacketRecord {
  std::uint64_t seq = 0;
  Direction direction = Direction::AB;
  double sim_time = 0.0;
  double tx_temp = 0.0;
  double rx_temp = 0.0;
  Outcome outcome = Outcome::Lost;
  phy::Bytes sent;      // length octet + PSDU
  phy::Bytes received;  // only kept for corrupt packets
  std::optional<int> rssi_dbm;
  std::optional<int> lqi;

  // Schedule step the packet is attributed to. Transitional packets were
  // sent while settling toward that step's target.
  std::size_t step = 0;
  double target = 0.0;
  bool transitional = false;

  const phy::Bytes& received_bytes() const {
    return outcome == Outcome::Ok ? sent : received;
  }
  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

// Dwell of the reference chamber on the thermal grid; end is absent while
// the dwell is still open when the run stops.
struct Dwell {
  std::size_t step = 0;
  double target = 0.0;
  double start = 0.0;
  std::optional<double> end;
  friend bool operator==(const Dwell&, const Dwell&) = default;
};

struct Trace {
  ExperimentConfig config;
  std::string calibration_id;
  std::size_t header_len = kMacHeaderLength;
  double thermal_dt = thermal::kDefaultDt;
  std::vector<Dwell> dwells;
  std::vector<PacketRecord> records;
};

// Number of thermal steps taken before a packet sent at time t.
inline long long thermal_steps_at(double t, double dt) {
  return static_cast<long long>(std::floor(t / dt + 1e-6));
}

// The chamber whose schedule defines the dwells: the heated one, or box A
// when neither or both are heated.
inline std::vector<thermal::ScheduleStep> reference_schedule(const ExperimentConfig& c) {
  if (c.heated_side == HeatedSide::None) return {{c.constant_side_temp, 0.0}};
  return c.schedule;
}

inline void tag_records(Trace& trace) {
  const auto schedule = reference_schedule(trace.config);
  const double dt = trace.thermal_dt;
  auto grid = [dt](double t) { return std::llround(t / dt); };
  for (auto& r : trace.records) {
    const long long s = thermal_steps_at(r.sim_time, dt);
    const Dwell* inside = nullptr;
    const Dwell* upcoming = nullptr;
    const Dwell* previous = nullptr;
    for (const auto& d : trace.dwells) {
      const long long a = grid(d.start);
      if (a > s) {
        upcoming = &d;
        break;
      }
      if (!d.end || s < grid(*d.end)) {
        inside = &d;
        break;
      }
      previous = &d;
    }
    if (inside) {
      r.step = inside->step;
      r.target = inside->target;
      r.transitional = false;
    } else {
      r.step = upcoming ? upcoming->step
                        : std::min(previous ? previous->step + 1 : 0, schedule.size() - 1);
      r.target = upcoming ? upcoming->target : schedule[r.step].target_temp;
      r.transitional = true;
    }
  }
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

inline Trace run_experiment(const ExperimentConfig& config, const Calibration& cal,
                            const ProgressFn& progress = {}) {
  config.validate(cal.plant, cal.env_temp);
  const double dt = thermal::kDefaultDt;
  const std::vector<thermal::ScheduleStep> hold{{config.constant_side_temp, 0.0}};
  const auto start = thermal::ThermalState::at_rest(config.constant_side_temp, cal.env_temp);
  thermal::ScheduleRunner box_a(start, config.box_a_heated() ? config.schedule : hold, cal.plant, dt);
  thermal::ScheduleRunner box_b(start, config.box_b_heated() ? config.schedule : hold, cal.plant, dt);
  const bool reference_is_b = config.heated_side == HeatedSide::Receiver;

  std::vector<thermal::ScheduleEvent> ref_events, other_events;
  auto advance = [&](auto fn) {
    fn(box_a, reference_is_b ? other_events : ref_events);
    fn(box_b, reference_is_b ? ref_events : other_events);
    other_events.clear();
  };
  advance([](auto& box, auto& ev) { box.resolve(ev); });

  Trace trace;
  trace.config = config;
  trace.calibration_id = cal.id;
  trace.thermal_dt = dt;
  trace.records.reserve(config.packets_per_run);

  const phy::Bytes payload = build_payload(config.payload_len);
  link::Transceiver xcv(cal.receiver());
  const std::uint64_t stream_base = config.roles_swapped ? 2 : 0;
  long long steps_done = 0;

  for (std::uint64_t seq = 0; seq < config.packets_per_run; ++seq) {
    const double t = static_cast<double>(seq) * config.inter_packet_interval;
    for (const long long due = thermal_steps_at(t, dt); steps_done < due; ++steps_done) {
      advance([](auto& box, auto& ev) { box.step(ev); });
    }
    const Direction dir = seq % 2 == 0 ? Direction::AB : Direction::BA;
    const bool ab = dir == Direction::AB;
    const DeviceProfile& sender = ab ? config.tx_profile : config.rx_profile;
    const DeviceProfile& receiver = ab ? config.rx_profile : config.tx_profile;
    const double tx_temp = (ab ? box_a : box_b).state().mote_temp;
    const double rx_temp = (ab ? box_b : box_a).state().mote_temp;

    const auto channel =
        impairments::link_state(sender, tx_temp, receiver, rx_temp, config.geometry, cal.base_noise_dbm);
    const phy::Frame frame =
        phy::encode_frame(mac_header(static_cast<std::uint8_t>(seq & 0xFF), ab ? kAddressB : kAddressA,
                                     ab ? kAddressA : kAddressB),
                          payload);
    auto rng = rng::substream(config.seed, stream_base + (ab ? 0 : 1), seq);
    const link::Reception rx = xcv.transceive(frame, channel, receiver, rng);

    PacketRecord rec;
    rec.seq = seq;
    rec.direction = dir;
    rec.sim_time = t;
    rec.tx_temp = tx_temp;
    rec.rx_temp = rx_temp;
    rec.outcome = classify(frame, rx.sync, rx.decoded);
    rec.sent = frame.phy_bytes();
    if (rec.outcome == Outcome::Corrupt) rec.received = *rx.decoded;
    if (rec.outcome != Outcome::Lost) {
      rec.rssi_dbm = rx.rssi_dbm;
      rec.lqi = rx.lqi;
    }
    trace.records.push_back(std::move(rec));
    if (progress && (seq + 1) % 10000 == 0) progress(seq + 1, config.packets_per_run);
  }

  // The final target is held after the schedule runs out, so the last dwell
  // stays open to the end of the run.
  const std::size_t last_step = reference_schedule(config).size() - 1;
  for (const auto& e : ref_events) {
    if (e.kind == thermal::EventKind::DwellStart) {
      trace.dwells.push_back({e.step, e.target, e.sim_time, std::nullopt});
    } else if (e.step != last_step) {
      trace.dwells.back().end = e.sim_time;
    }
  }
  tag_records(trace);
  return trace;
}

}  // namespace hotbox
