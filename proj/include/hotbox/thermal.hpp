#pragma once

// Heated chamber: a first-order air plant driven by a ceramic heater and
// losing heat to the room, a mote that lags the air, and a controller that
// backs off the heater as the air approaches the target.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hotbox/error.hpp"

namespace hotbox::thermal {

inline constexpr double kDefaultDt = 0.5;
inline constexpr double kSettleTolerance = 0.5;

struct ThermalState {
  double air_temp = 30.0;
  double mote_temp = 30.0;
  double env_temp = 22.0;
  double heater_duty = 0.0;
  double sim_time = 0.0;

  static ThermalState at_rest(double temp, double env = 22.0) {
    return ThermalState{temp, temp, env, 0.0, 0.0};
  }
  friend bool operator==(const ThermalState&, const ThermalState&) = default;
};

// Defaults fit two anchors: 30 -> 85 °C in 20 min at full power and a passive
// 90 -> 30 °C decay in 2 h, both against a 22 °C room.
struct PlantParams {
  double heat_rate_full = 0.05688;          // °C/s at duty 1
  double cooling_time_constant = 3364.0;    // s
  double mote_lag_constant = 120.0;         // s
  double max_temp = 90.0;                   // °C
  double controller_time_constant = 300.0;  // s, closed-loop approach rate near target

  void validate() const {
    if (!(heat_rate_full > 0 && cooling_time_constant > 0 && mote_lag_constant > 0 &&
          controller_time_constant > 0 && max_temp > 0)) {
      throw ConfigError("plant parameters must be positive");
    }
    if (max_temp > 90.0) throw ConfigError("max_temp must not exceed 90 °C");
  }
  friend bool operator==(const PlantParams&, const PlantParams&) = default;
};

struct ScheduleStep {
  double target_temp = 30.0;
  double dwell_seconds = 0.0;
  friend bool operator==(const ScheduleStep&, const ScheduleStep&) = default;
};

inline void check_dt(double dt) {
  if (!(dt > 0.0 && dt <= 1.0)) throw ThermalError("time step must lie in (0, 1] s");
}

// Euler step for the air, exact exponential relaxation for the mote (toward
// the air temperature at the start of the step).
inline ThermalState plant_step(const ThermalState& s, const PlantParams& p, double dt) {
  ThermalState n = s;
  n.air_temp = s.air_temp + dt * (s.heater_duty * p.heat_rate_full -
                                  (s.air_temp - s.env_temp) / p.cooling_time_constant);
  n.mote_temp = s.air_temp + (s.mote_temp - s.air_temp) * std::exp(-dt / p.mote_lag_constant);
  n.sim_time = s.sim_time + dt;
  return n;
}

// Feed-forward hold power plus a proportional term sized so the error decays
// with controller_time_constant, capped so the next Euler step lands at or
// below the target.
inline double controller_duty(const ThermalState& s, double target, const PlantParams& p,
                              double dt = kDefaultDt) {
  if (target > p.max_temp) {
    throw TargetAboveLimit(fmt::format("target {} °C exceeds limit {} °C", target, p.max_temp));
  }
  if (s.air_temp >= target || s.air_temp >= p.max_temp) return 0.0;
  const double loss = (s.air_temp - s.env_temp) / p.cooling_time_constant;
  const double error = target - s.air_temp;
  const double hold = loss / p.heat_rate_full;
  const double proportional = hold + error / (p.heat_rate_full * p.controller_time_constant);
  const double cap = (error / dt + loss) / p.heat_rate_full;
  return std::clamp(std::min(proportional, cap), 0.0, 1.0);
}

enum class EventKind { DwellStart, DwellEnd };

struct ScheduleEvent {
  EventKind kind;
  std::size_t step;
  double target;
  double sim_time;
};

struct ThermalSample {
  ThermalState state;
  double target;
};

// Closed-loop stepper over a list of steps. Each step regulates until the
// mote is within tolerance of the target, then holds for the dwell time.
// Once the list is exhausted it keeps regulating at the final target.
class ScheduleRunner {
 public:
  ScheduleRunner(ThermalState initial, std::vector<ScheduleStep> steps, PlantParams params,
                 double dt = kDefaultDt, double settle_timeout = 48 * 3600.0)
      : state_(initial),
        steps_(std::move(steps)),
        params_(params),
        dt_(dt),
        settle_timeout_(settle_timeout) {
    check_dt(dt_);
    params_.validate();
    if (steps_.empty()) throw ThermalError("schedule has no steps");
    for (const auto& st : steps_) {
      if (st.target_temp > params_.max_temp) {
        throw TargetAboveLimit(
            fmt::format("target {} °C exceeds limit {} °C", st.target_temp, params_.max_temp));
      }
      if (!(st.dwell_seconds >= 0.0)) throw ThermalError("dwell_seconds must be >= 0");
    }
    phase_start_ = state_.sim_time;
  }

  const ThermalState& state() const { return state_; }
  const PlantParams& params() const { return params_; }
  double dt() const { return dt_; }
  bool done() const { return index_ >= steps_.size(); }
  bool in_dwell() const { return dwelling_ || done(); }
  std::size_t step_index() const { return std::min(index_, steps_.size() - 1); }
  double target() const { return steps_[step_index()].target_temp; }

  // Resolves zero-duration transitions at the current instant: a step whose
  // mote is already settled starts its dwell, and an elapsed dwell ends.
  void resolve(std::vector<ScheduleEvent>& events) {
    while (!done()) {
      const ScheduleStep& st = steps_[index_];
      if (!dwelling_) {
        if (std::abs(state_.mote_temp - st.target_temp) > kSettleTolerance) {
          if (state_.sim_time - phase_start_ > settle_timeout_) {
            throw SettleTimeout(fmt::format("mote did not settle at {} °C within {} s",
                                            st.target_temp, settle_timeout_));
          }
          return;
        }
        dwelling_ = true;
        dwell_end_ = state_.sim_time + st.dwell_seconds;
        events.push_back({EventKind::DwellStart, index_, st.target_temp, state_.sim_time});
      }
      if (state_.sim_time < dwell_end_) return;
      events.push_back({EventKind::DwellEnd, index_, st.target_temp, state_.sim_time});
      dwelling_ = false;
      ++index_;
      phase_start_ = state_.sim_time;
    }
  }

  void step(std::vector<ScheduleEvent>& events) {
    resolve(events);
    state_.heater_duty = controller_duty(state_, target(), params_, dt_);
    state_ = plant_step(state_, params_, dt_);
    resolve(events);
  }

 private:
  ThermalState state_;
  std::vector<ScheduleStep> steps_;
  PlantParams params_;
  double dt_;
  double settle_timeout_;
  std::size_t index_ = 0;
  bool dwelling_ = false;
  double dwell_end_ = 0.0;
  double phase_start_ = 0.0;
};

struct ScheduleRun {
  std::vector<ThermalSample> samples;
  std::vector<ScheduleEvent> events;
};

inline ScheduleRun run_schedule(const ThermalState& initial, const std::vector<ScheduleStep>& steps,
                                const PlantParams& params, double dt = kDefaultDt) {
  ScheduleRunner runner(initial, steps, params, dt);
  ScheduleRun run;
  runner.resolve(run.events);
  run.samples.push_back({runner.state(), runner.target()});
  while (!runner.done()) {
    runner.step(run.events);
    run.samples.push_back({runner.state(), runner.target()});
  }
  return run;
}

// Open-loop trajectory with a fixed heater duty, until `stop` returns true or
// `max_seconds` elapse.
template <class Stop>
std::vector<ThermalState> run_open_loop(ThermalState s, double duty, const PlantParams& params,
                                        double dt, double max_seconds, Stop stop) {
  check_dt(dt);
  std::vector<ThermalState> out{s};
  const double end = s.sim_time + max_seconds;
  while (!stop(s) && s.sim_time < end) {
    s.heater_duty = duty;
    s = plant_step(s, params, dt);
    out.push_back(s);
  }
  return out;
}

// Consecutive 5 or 10 °C style staircase from `from` to `to` inclusive.
inline std::vector<ScheduleStep> staircase(double from, double to, double increment,
                                           double dwell_seconds) {
  if (!(increment > 0)) throw ThermalError("staircase increment must be positive");
  std::vector<ScheduleStep> steps;
  const int n = static_cast<int>(std::floor((to - from) / increment + 1e-9));
  for (int k = 0; k <= n; ++k) steps.push_back({from + k * increment, dwell_seconds});
  return steps;
}

inline void write_csv(std::ostream& os, const std::vector<ThermalSample>& samples) {
  os << "sim_time_s,air_temp_c,mote_temp_c,target_c,duty\n";
  for (const auto& s : samples) {
    os << fmt::format("{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", s.state.sim_time, s.state.air_temp,
                      s.state.mote_temp, s.target, s.state.heater_duty);
  }
}

}  // namespace hotbox::thermal
