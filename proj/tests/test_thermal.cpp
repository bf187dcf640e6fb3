#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hotbox/thermal.hpp"

using namespace hotbox;
using namespace hotbox::thermal;

namespace {

double minutes_until(ThermalState s, double duty, const PlantParams& p, double dt,
                     bool rising, double threshold) {
  const auto path = run_open_loop(s, duty, p, dt, 6 * 3600.0, [&](const ThermalState& x) {
    return rising ? x.air_temp >= threshold : x.air_temp <= threshold;
  });
  return path.back().sim_time / 60.0;
}

}  // namespace

TEST(Plant, FullPowerHeatingMatchesClosedForm) {
  // T(t) = Teq - (Teq - T0) exp(-t / tau), Teq = env + H tau.
  const PlantParams p;
  EXPECT_NEAR(minutes_until(ThermalState::at_rest(30.0), 1.0, p, 0.5, true, 85.0), 19.996, 0.05);
}

TEST(Plant, PassiveCoolingMatchesClosedForm) {
  const PlantParams p;
  EXPECT_NEAR(minutes_until(ThermalState::at_rest(90.0), 0.0, p, 0.5, false, 30.0), 119.986, 0.05);
}

TEST(Plant, MoteLagsAir) {
  PlantParams p;
  ThermalState s = ThermalState::at_rest(30.0);
  s.air_temp = 40.0;
  s.heater_duty = 0.0;
  const ThermalState n = plant_step(s, p, 0.5);
  EXPECT_NEAR(n.mote_temp, 40.0 - 10.0 * std::exp(-0.5 / 120.0), 1e-12);
  EXPECT_DOUBLE_EQ(n.sim_time, 0.5);
}

TEST(Controller, LimitsAndShutoff) {
  const PlantParams p;
  ThermalState s = ThermalState::at_rest(30.0);
  EXPECT_THROW(controller_duty(s, 91.0, p), TargetAboveLimit);
  EXPECT_DOUBLE_EQ(controller_duty(s, 30.0, p), 0.0);
  EXPECT_DOUBLE_EQ(controller_duty(s, 90.0, p), 1.0);
  s.air_temp = 95.0;
  EXPECT_DOUBLE_EQ(controller_duty(s, 90.0, p), 0.0);
}

TEST(Schedule, NoOvershootAndSettles) {
  const PlantParams p;
  const auto run = run_schedule(ThermalState::at_rest(30.0), staircase(30.0, 90.0, 5.0, 600.0), p);
  double peak = 0.0;
  for (const auto& s : run.samples) peak = std::max(peak, s.state.air_temp);
  EXPECT_LE(peak, 90.0 + 1e-9);
  std::size_t starts = 0;
  for (const auto& e : run.events) starts += e.kind == EventKind::DwellStart;
  EXPECT_EQ(starts, 13u);
  for (std::size_t k = 0; k + 1 < run.events.size(); ++k) {
    EXPECT_LE(run.events[k].sim_time, run.events[k + 1].sim_time);
  }
}

TEST(Schedule, RejectsBadSchedules) {
  const PlantParams p;
  EXPECT_THROW(ScheduleRunner(ThermalState::at_rest(30.0), {}, p), ThermalError);
  EXPECT_THROW(ScheduleRunner(ThermalState::at_rest(30.0), {{95.0, 0.0}}, p), TargetAboveLimit);
  EXPECT_THROW(ScheduleRunner(ThermalState::at_rest(30.0), {{50.0, -1.0}}, p), ThermalError);
  EXPECT_THROW(ScheduleRunner(ThermalState::at_rest(30.0), {{50.0, 1.0}}, p, 2.0), ThermalError);
}

TEST(Schedule, SettleTimeout) {
  PlantParams p;
  p.heat_rate_full = 0.001;  // equilibrium well below the target
  ScheduleRunner r(ThermalState::at_rest(30.0), {{80.0, 0.0}}, p, 0.5, 3600.0);
  std::vector<ScheduleEvent> ev;
  EXPECT_THROW(
      {
        for (int k = 0; k < 20000; ++k) r.step(ev);
      },
      SettleTimeout);
}

TEST(Schedule, Staircase) {
  const auto s = staircase(30.0, 80.0, 10.0, 60.0);
  ASSERT_EQ(s.size(), 6u);
  EXPECT_DOUBLE_EQ(s.back().target_temp, 80.0);
  EXPECT_EQ(staircase(30.0, 90.0, 5.0, 0.0).size(), 13u);
}

TEST(Schedule, CsvHeader) {
  const auto run = run_schedule(ThermalState::at_rest(30.0), {{30.0, 1.0}}, PlantParams{});
  std::ostringstream os;
  write_csv(os, run.samples);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "sim_time_s,air_temp_c,mote_temp_c,target_c,duty");
}

TEST(Plant, EquilibriumAndEnergyDirection) {
  const PlantParams p;
  ThermalState s = ThermalState::at_rest(22.0);
  EXPECT_EQ(plant_step(s, p, 0.5).air_temp, 22.0);
  s = ThermalState::at_rest(60.0);
  double gap = 38.0;
  for (int k = 0; k < 5000; ++k) {
    s = plant_step(s, p, 0.5);
    EXPECT_LE(std::abs(s.air_temp - s.env_temp), gap);
    gap = std::abs(s.air_temp - s.env_temp);
  }
}

TEST(Schedule, SingleSettledStepCompletesImmediately) {
  const auto run = run_schedule(ThermalState::at_rest(30.0), {{30.0, 0.0}}, PlantParams{});
  ASSERT_EQ(run.events.size(), 2u);
  EXPECT_EQ(run.events[0].kind, EventKind::DwellStart);
  EXPECT_EQ(run.events[1].kind, EventKind::DwellEnd);
  EXPECT_EQ(run.samples.size(), 1u);
}

TEST(Schedule, SettleTimePerFiveDegreeStep) {
  const auto run = run_schedule(ThermalState::at_rest(30.0), {{30.0, 0.0}, {35.0, 0.0}}, PlantParams{});
  const double minutes = run.events.back().sim_time / 60.0;
  EXPECT_GE(minutes, 10.0);
  EXPECT_LE(minutes, 15.0);
}

TEST(Schedule, MoteFollowsAirAndStaysBetween) {
  const auto run = run_schedule(ThermalState::at_rest(30.0), {{60.0, 600.0}, {40.0, 0.0}}, PlantParams{});
  int air_dir = 0, mote_dir = 0;
  for (std::size_t k = 1; k < run.samples.size(); ++k) {
    const auto& a = run.samples[k - 1].state;
    const auto& b = run.samples[k].state;
    EXPECT_GE(b.heater_duty, 0.0);
    EXPECT_LE(b.heater_duty, 1.0);
    EXPECT_GE(b.mote_temp, std::min(a.mote_temp, a.air_temp) - 1e-12);
    EXPECT_LE(b.mote_temp, std::max(a.mote_temp, a.air_temp) + 1e-12);
    const double da = b.air_temp - a.air_temp, dm = b.mote_temp - a.mote_temp;
    if (std::abs(da) > 1e-9) air_dir = da > 0 ? 1 : -1;
    if (std::abs(dm) > 1e-9) {
      const int d = dm > 0 ? 1 : -1;
      // A turn of the mote must follow a turn of the air.
      if (mote_dir != 0 && d != mote_dir) {
        EXPECT_EQ(d, air_dir);
      }
      mote_dir = d;
    }
  }
}

TEST(Schedule, Deterministic) {
  const auto steps = staircase(30.0, 50.0, 10.0, 100.0);
  const auto a = run_schedule(ThermalState::at_rest(30.0), steps, PlantParams{});
  const auto b = run_schedule(ThermalState::at_rest(30.0), steps, PlantParams{});
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) EXPECT_EQ(a.samples[k].state, b.samples[k].state);
}

TEST(Schedule, LowerTargetWaitsForNaturalDecay) {
  const auto run = run_schedule(ThermalState::at_rest(50.0), {{40.0, 0.0}}, PlantParams{});
  for (const auto& s : run.samples) {
    if (s.state.air_temp >= 40.0) {
      EXPECT_EQ(s.state.heater_duty, 0.0);
    }
  }
  EXPECT_NEAR(run.samples.back().state.mote_temp, 40.5, 0.01);
}
