#pragma once

// Line-oriented trace files. Metadata sits in '#' lines ahead of a CSV body;
// a closing '#end <count>' line marks a complete file.

#include <charconv>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "hotbox/config.hpp"
#include "hotbox/error.hpp"
#include "hotbox/io.hpp"
#include "hotbox/orchestrator.hpp"

namespace hotbox {

inline constexpr std::string_view kTraceMagic = "#hotboxsim-trace v1";
inline constexpr std::string_view kTraceColumns =
    "seq,direction,sim_time_s,tx_temp_c,rx_temp_c,outcome,rssi_dbm,lqi,sent_hex,received_hex";

namespace detail {

inline void append_hex(fmt::memory_buffer& buf, const phy::Bytes& bytes) {
  static constexpr char digits[] = "0123456789ABCDEF";
  for (auto b : bytes) {
    buf.push_back(digits[b >> 4]);
    buf.push_back(digits[b & 0x0F]);
  }
}

inline int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace detail

inline std::string trace_to_text(const Trace& trace) {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "{}\n", kTraceMagic);
  fmt::format_to(out, "#calibration {}\n", trace.calibration_id);
  fmt::format_to(out, "#header_len {}\n", trace.header_len);
  fmt::format_to(out, "#thermal_dt {}\n", trace.thermal_dt);
  std::string yaml = to_yaml(trace.config);
  std::size_t pos = 0;
  while (pos < yaml.size()) {
    const auto nl = yaml.find('\n', pos);
    fmt::format_to(out, "#config {}\n", std::string_view(yaml).substr(pos, nl - pos));
    pos = nl + 1;
  }
  for (const auto& d : trace.dwells) {
    if (d.end) fmt::format_to(out, "#dwell {} {} {} {}\n", d.step, d.target, d.start, *d.end);
    else fmt::format_to(out, "#dwell {} {} {} -\n", d.step, d.target, d.start);
  }
  fmt::format_to(out, "{}\n", kTraceColumns);
  for (const auto& r : trace.records) {
    fmt::format_to(out, "{},{},{},{:.4f},{:.4f},{},", r.seq, to_string(r.direction), r.sim_time,
                   r.tx_temp, r.rx_temp, to_string(r.outcome));
    if (r.rssi_dbm) fmt::format_to(out, "{},{},", *r.rssi_dbm, *r.lqi);
    else fmt::format_to(out, "-,-,");
    detail::append_hex(buf, r.sent);
    buf.push_back(',');
    if (r.outcome == Outcome::Corrupt) detail::append_hex(buf, r.received);
    else buf.push_back('-');
    buf.push_back('\n');
  }
  fmt::format_to(out, "#end {}\n", trace.records.size());
  return fmt::to_string(buf);
}

inline void write_trace(const Trace& trace, const std::filesystem::path& path) {
  io::write_file_atomic(path, trace_to_text(trace));
}

namespace detail {

class TraceParser {
 public:
  TraceParser(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  Trace parse() {
    Trace trace;
    std::string yaml;
    bool have_magic = false, have_columns = false, have_end = false, have_cal = false;
    std::size_t declared = 0;
    std::string_view line;
    while (next(line)) {
      if (have_end) fail("content after #end");
      if (!have_magic) {
        if (line != kTraceMagic) fail("not a hotboxsim trace");
        have_magic = true;
        continue;
      }
      if (!line.empty() && line[0] == '#') {
        auto [key, rest] = split_first(line.substr(1));
        if (key == "end") {
          declared = number<std::size_t>(rest);
          have_end = true;
        } else if (have_columns) {
          fail("metadata after the column header");
        } else if (key == "calibration") {
          trace.calibration_id = std::string(rest);
          have_cal = true;
        } else if (key == "header_len") {
          trace.header_len = number<std::size_t>(rest);
        } else if (key == "thermal_dt") {
          trace.thermal_dt = number<double>(rest);
        } else if (key == "config") {
          yaml.append(rest);
          yaml.push_back('\n');
        } else if (key == "dwell") {
          trace.dwells.push_back(dwell(rest));
        } else {
          fail("unknown metadata '" + std::string(key) + "'");
        }
        continue;
      }
      if (!have_columns) {
        if (line != kTraceColumns) fail("unexpected column header");
        have_columns = true;
        continue;
      }
      trace.records.push_back(record(line));
    }
    if (!have_magic) fail("empty file");
    if (!have_columns || !have_cal || yaml.empty()) fail("incomplete header");
    if (!have_end) fail("truncated: missing #end");
    if (declared != trace.records.size()) {
      fail(fmt::format("truncated: #end declares {} records, found {}", declared, trace.records.size()));
    }
    try {
      trace.config = parse_config(yaml, Calibration{}, source_ + " (config snapshot)");
    } catch (const ConfigError& e) {
      throw IoError(e.what());
    }
    tag_records(trace);
    return trace;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(fmt::format("{}:{}: {}", source_, lineno_, msg));
  }

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const auto nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos) {
      ++lineno_;
      fail("truncated: last line has no newline");
    }
    line = text_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    ++lineno_;
    return true;
  }

  static std::pair<std::string_view, std::string_view> split_first(std::string_view s) {
    const auto sp = s.find(' ');
    if (sp == std::string_view::npos) return {s, {}};
    return {s.substr(0, sp), s.substr(sp + 1)};
  }

  template <class T>
  T number(std::string_view s) const {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      fail("bad number '" + std::string(s) + "'");
    }
    return v;
  }

  Dwell dwell(std::string_view rest) const {
    std::vector<std::string_view> f;
    while (true) {
      auto [a, b] = split_first(rest);
      f.push_back(a);
      if (b.empty()) break;
      rest = b;
    }
    if (f.size() != 4) fail("dwell needs step target start end");
    Dwell d{number<std::size_t>(f[0]), number<double>(f[1]), number<double>(f[2]), std::nullopt};
    if (f[3] != "-") d.end = number<double>(f[3]);
    return d;
  }

  phy::Bytes hex(std::string_view s) const {
    if (s.size() % 2 != 0) fail("odd hex length");
    phy::Bytes out(s.size() / 2);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const int hi = hex_digit(s[2 * k]), lo = hex_digit(s[2 * k + 1]);
      if (hi < 0 || lo < 0) fail("bad hex digit");
      out[k] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return out;
  }

  PacketRecord record(std::string_view line) const {
    std::string_view f[10];
    std::size_t n = 0, start = 0;
    for (std::size_t k = 0; k <= line.size(); ++k) {
      if (k == line.size() || line[k] == ',') {
        if (n == 10) fail("too many fields");
        f[n++] = line.substr(start, k - start);
        start = k + 1;
      }
    }
    if (n != 10) fail("expected 10 fields");
    PacketRecord r;
    r.seq = number<std::uint64_t>(f[0]);
    if (f[1] == "AB") r.direction = Direction::AB;
    else if (f[1] == "BA") r.direction = Direction::BA;
    else fail("bad direction");
    r.sim_time = number<double>(f[2]);
    r.tx_temp = number<double>(f[3]);
    r.rx_temp = number<double>(f[4]);
    if (f[5] == "ok") r.outcome = Outcome::Ok;
    else if (f[5] == "corrupt") r.outcome = Outcome::Corrupt;
    else if (f[5] == "lost") r.outcome = Outcome::Lost;
    else fail("bad outcome");
    const bool lost = r.outcome == Outcome::Lost;
    if (lost != (f[6] == "-") || lost != (f[7] == "-")) fail("rssi/lqi must be present iff received");
    if (!lost) {
      r.rssi_dbm = number<int>(f[6]);
      r.lqi = number<int>(f[7]);
    }
    r.sent = hex(f[8]);
    if (r.outcome == Outcome::Corrupt) {
      r.received = hex(f[9]);
      if (r.received.size() != r.sent.size()) fail("received length differs from sent");
    } else if (f[9] != "-") {
      fail("received bytes only stored for corrupt packets");
    }
    return r;
  }

  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t lineno_ = 0;
};

}  // namespace detail

inline Trace parse_trace(std::string_view text, const std::string& source = "trace") {
  return detail::TraceParser(text, source).parse();
}

inline Trace read_trace(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  return parse_trace(text, path.string());
}

}  // namespace hotbox
