#include <gtest/gtest.h>

#include <string>

#include "common.hpp"
#include "hotbox/orchestrator.hpp"
#include "hotbox/trace_io.hpp"

using namespace hotbox;

namespace {

const Trace& small_trace() {
  static const Trace t = run_experiment(test::small_config(Calibration{}), Calibration{});
  return t;
}

std::string io_error(const std::string& text) {
  try {
    parse_trace(text, "t.trace");
  } catch (const IoError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Frames, PayloadPattern) {
  const auto p = build_payload(36);
  ASSERT_EQ(p.size(), 36u);
  EXPECT_EQ(p[0], 0x00);
  EXPECT_EQ(p[1], 0x00);
  EXPECT_EQ(p[2], 0x11);
  EXPECT_EQ(p[31], 0xFF);
  EXPECT_EQ(p[32], 0x00);
  EXPECT_EQ(p[35], 0x11);
}

TEST(Frames, MacHeader) {
  EXPECT_EQ(mac_header(0x5A, kAddressB, kAddressA),
            (phy::Bytes{0x41, 0x88, 0x5A, 0x22, 0x00, 0x02, 0x00, 0x01, 0x00}));
}

TEST(Experiment, RecordsAlternateAndFollowTheClock) {
  const Trace& t = small_trace();
  ASSERT_EQ(t.records.size(), 400u);
  for (const auto& r : t.records) {
    EXPECT_EQ(r.direction, r.seq % 2 == 0 ? Direction::AB : Direction::BA);
    EXPECT_DOUBLE_EQ(r.sim_time, 10.0 * static_cast<double>(r.seq));
    EXPECT_EQ(r.sent.size(), 1u + kMacHeaderLength + 20 + 2);
    EXPECT_EQ(r.sent[3], static_cast<std::uint8_t>(r.seq & 0xFF));
    if (r.outcome == Outcome::Lost) {
      EXPECT_FALSE(r.rssi_dbm);
    } else {
      EXPECT_TRUE(r.rssi_dbm);
      EXPECT_EQ(r.received_bytes().size(), r.sent.size());
    }
    if (r.outcome == Outcome::Corrupt) {
      EXPECT_NE(r.received, r.sent);
    }
  }
}

TEST(Experiment, OnlyTheReceiverSideIsHeated) {
  const Trace& t = small_trace();
  const auto& last = t.records.back();  // BA: mote B sends
  EXPECT_NEAR(last.tx_temp, 40.0, 0.6);
  EXPECT_NEAR(last.rx_temp, 30.0, 1e-6);
  const auto& prev = t.records[t.records.size() - 2];
  EXPECT_NEAR(prev.rx_temp, 40.0, 0.6);
  EXPECT_NEAR(prev.tx_temp, 30.0, 1e-6);
}

TEST(Experiment, DwellsAndTransitionalTags) {
  const Trace& t = small_trace();
  ASSERT_EQ(t.dwells.size(), 2u);
  EXPECT_EQ(t.dwells[0].start, 0.0);
  ASSERT_TRUE(t.dwells[0].end);
  EXPECT_EQ(*t.dwells[0].end, 600.0);
  EXPECT_FALSE(t.dwells[1].end);  // the final target is held to the end
  for (const auto& r : t.records) {
    if (r.sim_time < 600.0) {
      EXPECT_FALSE(r.transitional);
      EXPECT_EQ(r.step, 0u);
    } else if (r.sim_time < t.dwells[1].start) {
      EXPECT_TRUE(r.transitional);
      EXPECT_EQ(r.step, 1u);
      EXPECT_EQ(r.target, 40.0);
    } else {
      EXPECT_FALSE(r.transitional);
      EXPECT_EQ(r.step, 1u);
    }
  }
}

TEST(Experiment, SeedsAndRoleSwapSelectSubstreams) {
  const Calibration cal;
  ExperimentConfig c = test::small_config(cal, 60);
  c.geometry.path_loss_db = cal.path_loss_db + 1.5;  // lossy enough for outcomes to vary
  const Trace a = run_experiment(c, cal);
  EXPECT_EQ(a.records, run_experiment(c, cal).records);
  ExperimentConfig other = c;
  other.seed = 2;
  EXPECT_NE(a.records, run_experiment(other, cal).records);
  // Identical profiles: swapping changes only the substreams.
  EXPECT_NE(a.records, run_experiment(swap_roles(c), cal).records);
}

TEST(Experiment, RejectsInvalidConfig) {
  const Calibration cal;
  ExperimentConfig c = test::small_config(cal);
  c.schedule = {{95.0, 0.0}};
  EXPECT_THROW(run_experiment(c, cal), ConfigError);
}

TEST(TraceFile, TextRoundTripIsExact) {
  const std::string text = trace_to_text(small_trace());
  const Trace back = parse_trace(text);
  EXPECT_EQ(trace_to_text(back), text);
  EXPECT_EQ(back.config, small_trace().config);
  EXPECT_EQ(back.dwells, small_trace().dwells);
  ASSERT_EQ(back.records.size(), small_trace().records.size());
  for (std::size_t k = 0; k < back.records.size(); ++k) {
    const auto& x = back.records[k];
    const auto& y = small_trace().records[k];
    EXPECT_EQ(x.outcome, y.outcome);
    EXPECT_EQ(x.sent, y.sent);
    EXPECT_EQ(x.received, y.received);
    EXPECT_EQ(x.step, y.step);
    EXPECT_EQ(x.transitional, y.transitional);
    EXPECT_NEAR(x.rx_temp, y.rx_temp, 5e-5);
  }
}

TEST(TraceFile, DetectsTruncationAndDamage) {
  const std::string text = trace_to_text(small_trace());
  EXPECT_NE(io_error(text.substr(0, text.size() - 1)).find("t.trace"), std::string::npos);
  const auto end_line = text.rfind("#end");
  EXPECT_NE(io_error(text.substr(0, end_line)).find("#end"), std::string::npos);
  const auto mid = text.rfind('\n', end_line - 2);
  EXPECT_FALSE(io_error(text.substr(0, mid + 10)).empty());
  EXPECT_FALSE(io_error(text.substr(0, end_line) + "#end 5\n").empty());
  EXPECT_FALSE(io_error("").empty());
  EXPECT_FALSE(io_error("hello\n").empty());

  std::string damaged = text;
  std::size_t at = damaged.find("\n0,AB,") + 1;
  for (int k = 0; k < 8; ++k) at = damaged.find(',', at) + 1;  // start of sent_hex
  ASSERT_EQ(damaged.substr(at, 2), "1F");
  damaged[at] = 'z';
  const std::string msg = io_error(damaged);
  EXPECT_NE(msg.find("t.trace:"), std::string::npos) << msg;
}
