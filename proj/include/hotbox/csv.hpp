#pragma once

// CSV renderings of analysis results and their readers. Reals are written
// with six decimals, absent values as `nan`.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hotbox/analysis.hpp"
#include "hotbox/error.hpp"
#include "hotbox/io.hpp"

namespace hotbox::csv {

inline std::string real(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6f}", v);
}

inline constexpr const char* kHistogramHeader = "bit_index,region,count,normalized";
inline constexpr const char* kNibbleHeader = "nibble,msb,transmitted,erroneous,error_rate";
inline constexpr const char* kMsbHeader = "packets,msb0_rate,msb1_rate,susceptibility_ratio";
inline constexpr const char* kLinkHeader =
    "bin,target_c,start_s,end_s,packets,ok,corrupt,lost,bit_errors,bits_received,"
    "mean_tx_temp_c,mean_rx_temp_c,mean_rssi_dbm,mean_lqi,ber,prr_ok,prr_corrupt,prr_lost";

inline std::string to_csv(const analysis::BitErrorHistogram& h) {
  std::string out = std::string(kHistogramHeader) + "\n";
  const auto norm = h.normalized();
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out += fmt::format("{},{},{},{}\n", k, k < h.header_bits ? "header" : "payload", h.counts[k],
                       real(norm[k]));
  }
  return out;
}

inline std::string to_csv(const analysis::NibbleStats& s) {
  std::string out = std::string(kNibbleHeader) + "\n";
  for (std::size_t v = 0; v < 16; ++v) {
    out += fmt::format("{:X},{},{},{},{}\n", v, v >> 3, s.transmitted[v], s.erroneous[v],
                       real(s.error_rate[v]));
  }
  return out;
}

inline std::string msb_summary_csv(const analysis::NibbleStats& s) {
  return fmt::format("{}\n{},{},{},{}\n", kMsbHeader, s.packets, real(s.msb0_rate), real(s.msb1_rate),
                     real(s.susceptibility_ratio));
}

inline std::string to_csv(const std::vector<analysis::LinkBin>& bins) {
  std::string out = std::string(kLinkHeader) + "\n";
  for (const auto& b : bins) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", b.bin, real(b.target),
                       real(b.start), real(b.end), b.packets, b.ok, b.corrupt, b.lost, b.bit_errors,
                       b.bits_received, real(b.mean_tx_temp), real(b.mean_rx_temp),
                       real(b.mean_rssi_dbm), real(b.mean_lqi), real(b.ber), real(b.prr_ok),
                       real(b.prr_corrupt), real(b.prr_lost));
  }
  return out;
}

template <class T>
void export_csv(const T& value, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_csv(value));
}

namespace detail {

inline std::vector<std::vector<std::string>> rows(const std::string& text, const char* header,
                                                  std::size_t columns) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) throw IoError("unexpected CSV header");
  std::vector<std::vector<std::string>> out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t k = 0; k <= line.size(); ++k) {
      if (k == line.size() || line[k] == ',') {
        f.push_back(line.substr(start, k - start));
        start = k + 1;
      }
    }
    if (f.size() != columns) throw IoError("CSV row has wrong number of fields");
    out.push_back(std::move(f));
  }
  return out;
}

template <class T>
T num(const std::string& s, int base = 10) {
  if constexpr (std::is_floating_point_v<T>) {
    if (s == "nan") return std::numeric_limits<T>::quiet_NaN();
  }
  T v{};
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) r = std::from_chars(s.data(), s.data() + s.size(), v);
  else r = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty()) {
    throw IoError("bad CSV number '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline analysis::BitErrorHistogram histogram_from_csv(const std::string& text) {
  analysis::BitErrorHistogram h;
  for (const auto& f : detail::rows(text, kHistogramHeader, 4)) {
    if (detail::num<std::size_t>(f[0]) != h.counts.size()) throw IoError("bit indices out of order");
    if (f[1] == "header") h.header_bits = h.counts.size() + 1;
    h.counts.push_back(detail::num<std::uint64_t>(f[2]));
  }
  return h;
}

inline analysis::NibbleStats nibble_stats_from_csv(const std::string& text) {
  analysis::NibbleStats s;
  const auto r = detail::rows(text, kNibbleHeader, 5);
  if (r.size() != 16) throw IoError("nibble table needs 16 rows");
  for (std::size_t v = 0; v < 16; ++v) {
    if (detail::num<std::size_t>(r[v][0], 16) != v) throw IoError("nibble rows out of order");
    s.transmitted[v] = detail::num<std::uint64_t>(r[v][2]);
    s.erroneous[v] = detail::num<std::uint64_t>(r[v][3]);
  }
  analysis::finish_rates(s);
  return s;
}

inline std::vector<analysis::LinkBin> link_summary_from_csv(const std::string& text) {
  std::vector<analysis::LinkBin> out;
  for (const auto& f : detail::rows(text, kLinkHeader, 18)) {
    analysis::LinkBin b;
    b.bin = detail::num<std::size_t>(f[0]);
    b.target = detail::num<double>(f[1]);
    b.start = detail::num<double>(f[2]);
    b.end = detail::num<double>(f[3]);
    b.packets = detail::num<std::uint64_t>(f[4]);
    b.ok = detail::num<std::uint64_t>(f[5]);
    b.corrupt = detail::num<std::uint64_t>(f[6]);
    b.lost = detail::num<std::uint64_t>(f[7]);
    b.bit_errors = detail::num<std::uint64_t>(f[8]);
    b.bits_received = detail::num<std::uint64_t>(f[9]);
    b.mean_tx_temp = detail::num<double>(f[10]);
    b.mean_rx_temp = detail::num<double>(f[11]);
    b.mean_rssi_dbm = detail::num<double>(f[12]);
    b.mean_lqi = detail::num<double>(f[13]);
    b.ber = detail::num<double>(f[14]);
    b.prr_ok = detail::num<double>(f[15]);
    b.prr_corrupt = detail::num<double>(f[16]);
    b.prr_lost = detail::num<double>(f[17]);
    out.push_back(b);
  }
  return out;
}

}  // namespace hotbox::csv
