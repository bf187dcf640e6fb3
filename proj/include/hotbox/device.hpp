#pragma once

#include <cmath>
#include <string>

#include "hotbox/error.hpp"

namespace hotbox {

// Per-mote radio characteristics. Production tolerance lives here: two motes
// of the same model differ in their temperature slopes, in how strongly their
// receiver behaves like an MSK decoder, and in the offset of its slicer.
struct DeviceProfile {
  std::string label = "mote";
  double tx_temp_coeff = 0.0;        // dB/°C, <= 0
  double rx_gain_temp_coeff = 0.0;   // dB/°C, <= 0
  double rx_noise_temp_coeff = 0.0;  // dB/°C, >= 0
  double reference_temp = 30.0;      // °C
  double susceptibility = 1.0;       // blend between coherent (0) and MSK (1) decoding
  double msk_slicer_offset = 0.0;    // threshold offset of the differential detector, in [0, 1)

  void validate() const {
    auto fail = [this](const std::string& what) {
      throw ConfigError("device profile '" + label + "': " + what);
    };
    if (!std::isfinite(tx_temp_coeff) || tx_temp_coeff > 0.0) fail("tx_temp_coeff must be <= 0");
    if (!std::isfinite(rx_gain_temp_coeff) || rx_gain_temp_coeff > 0.0)
      fail("rx_gain_temp_coeff must be <= 0");
    if (!std::isfinite(rx_noise_temp_coeff) || rx_noise_temp_coeff < 0.0)
      fail("rx_noise_temp_coeff must be >= 0");
    if (!std::isfinite(reference_temp)) fail("reference_temp must be finite");
    if (!(susceptibility >= 0.0 && susceptibility <= 1.0)) fail("susceptibility must lie in [0, 1]");
    if (!(msk_slicer_offset >= 0.0 && msk_slicer_offset < 1.0))
      fail("msk_slicer_offset must lie in [0, 1)");
  }

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

}  // namespace hotbox
