#include <gtest/gtest.h>

#include <cstdlib>
#include <string>

#include "common.hpp"
#include "hotbox/calibrate.hpp"
#include "hotbox/calibration.hpp"

using namespace hotbox;

namespace {

const std::filesystem::path kShipped = std::filesystem::path(HOTBOX_SOURCE_DIR) / "calibration";

std::string cal_error(const std::string& text) {
  try {
    parse_calibration(text, "x.cal");
  } catch (const CalibrationError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

}  // namespace

TEST(CalibrationFile, ShippedFileEqualsCompiledDefaults) {
  const Calibration shipped = load_calibration(kShipped / "default.cal");
  EXPECT_EQ(shipped, Calibration{});
  EXPECT_EQ(io::read_file(kShipped / "default.cal"), to_text(Calibration{}));
}

TEST(CalibrationFile, TextRoundTrip) {
  Calibration c;
  c.id = "bench-2";
  c.path_loss_db = 98.123456789;
  c.sync_min_preamble_symbols = 6;
  EXPECT_EQ(parse_calibration(to_text(c)), c);
}

TEST(CalibrationFile, StrictParsing) {
  const std::string good = to_text(Calibration{});
  EXPECT_EQ(cal_error(good), "");
  EXPECT_NE(cal_error(replace(good, "env_temp = 22\n", "")).find("missing key 'env_temp'"), std::string::npos);
  EXPECT_NE(cal_error(good + "extra = 1\n").find("x.cal:24: unknown key 'extra'"), std::string::npos);
  EXPECT_NE(cal_error(good + "env_temp = 1\n").find("duplicate key"), std::string::npos);
  EXPECT_NE(cal_error(replace(good, "env_temp = 22", "env_temp = warm")).find("x.cal:4"), std::string::npos);
  EXPECT_NE(cal_error(replace(good, "format = 1", "format = 2")).find("unsupported"), std::string::npos);
  EXPECT_NE(cal_error(replace(good, "lqi_score_high = 32", "lqi_score_high = 1")).find("lqi_score_high"),
            std::string::npos);
  EXPECT_NE(cal_error(replace(good, "tx_temp_coeff = -0.013", "tx_temp_coeff = 0.5")).find("tx_temp_coeff"),
            std::string::npos);
  EXPECT_NE(cal_error("format = 1\nid = x\nnonsense\n").find("x.cal:3"), std::string::npos);
}

TEST(CalibrationFile, Resolution) {
  test::TempDir dir;
  Calibration alt;
  alt.id = "alt";
  alt.path_loss_db = 90.0;
  save_calibration(alt, dir / "alt.cal");

  ::unsetenv(kCalibrationEnv);
  EXPECT_EQ(resolve_calibration(), Calibration{});
  EXPECT_EQ(resolve_calibration(dir / "alt.cal"), alt);
  ::setenv(kCalibrationEnv, (dir / "alt.cal").c_str(), 1);
  EXPECT_EQ(resolve_calibration(), alt);
  EXPECT_EQ(resolve_calibration(kShipped / "default.cal"), Calibration{});
  ::setenv(kCalibrationEnv, (dir / "missing.cal").c_str(), 1);
  EXPECT_THROW(resolve_calibration(), CalibrationError);
  ::unsetenv(kCalibrationEnv);
}

TEST(Targets, ShippedTargetsMatchDefaults) {
  const CalibrationTargets t = parse_targets(io::read_file(kShipped / "targets.cfg"));
  const CalibrationTargets d;
  EXPECT_EQ(t.id, d.id);
  EXPECT_EQ(t.slicer_offsets, d.slicer_offsets);
  EXPECT_EQ(t.similarity_drop_max_db, d.similarity_drop_max_db);
  EXPECT_EQ(t.packets_per_point, d.packets_per_point);
  EXPECT_EQ(t.seed, d.seed);
  EXPECT_EQ(t.rx80_per_min, d.rx80_per_min);
  EXPECT_THROW(parse_targets("bogus = 1\n"), CalibrationError);
  EXPECT_THROW(parse_targets("snr_step_db = 0\n"), CalibrationError);
}

TEST(Curve, MonotoneInterpolation) {
  const Curve c({-4, -3, -2, -1}, {0.99, 0.9, 0.92, 0.1}, Curve::Domain::Linear, 0.0);
  EXPECT_DOUBLE_EQ(c.at(-5), 0.99);
  EXPECT_DOUBLE_EQ(c.at(-3), 0.92);  // the bump is flattened
  EXPECT_NEAR(c.at(-1.5), 0.51, 1e-12);
  EXPECT_NEAR(c.snr_for(0.51), -1.5, 1e-12);
  EXPECT_DOUBLE_EQ(c.snr_for(0.995), -4);
  const Curve logit({-2, 0}, {0.9, 0.1}, Curve::Domain::Logit, 1e-6);
  EXPECT_NEAR(logit.at(-1), 0.5, 1e-12);
}

TEST(Calibrate, InfeasibleTargetsReportNearestMiss) {
  CalibrationTargets t;
  t.baseline_per_min = 0.0;
  t.baseline_per_max = 1e-4;  // needs a clean baseline yet total loss by 70 °C
  t.rx70_per_min = 0.999;
  t.slope_max = 0.01;
  t.noise_slope_max = 0.01;
  t.packets_per_point = 60;
  t.slicer_packets = 200;
  t.snr_step_db = 1.0;
  try {
    calibrate_defaults(Calibration{}, t);
    FAIL() << "expected CalibrationInfeasible";
  } catch (const CalibrationInfeasible& e) {
    EXPECT_NE(std::string(e.what()).find("nearest miss"), std::string::npos);
  }
}

TEST(Calibrate, ReproducesShippedDefaults) {
  const CalibrationTargets t = parse_targets(io::read_file(kShipped / "targets.cfg"));
  const auto report = calibrate_defaults(Calibration{}, t);
  EXPECT_EQ(report.calibration, Calibration{});
  EXPECT_GT(report.min_margin, 0.0);
}
