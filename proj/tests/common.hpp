#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "hotbox/calibration.hpp"
#include "hotbox/config.hpp"

namespace hotbox::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("hotbox_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// A short receiver-heated run: 30 then 40 °C, quick to simulate.
inline ExperimentConfig small_config(const Calibration& cal, std::size_t packets = 400) {
  ExperimentConfig c = ExperimentConfig::defaults(cal);
  c.packets_per_run = packets;
  c.payload_len = 20;
  c.inter_packet_interval = 10.0;
  c.schedule = {{30.0, 600.0}, {40.0, 600.0}};
  return c;
}

}  // namespace hotbox::test
