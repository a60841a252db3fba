#include "bintopk/roofline.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bintopk/error.hpp"

namespace bintopk {

namespace {

struct KeyValue {
  std::string value;
  std::int64_t offset = 0;  // byte offset of the line, for error reports
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::map<std::string, KeyValue, std::less<>> parse_key_values(
    const std::string& text, const std::string& origin,
    const std::vector<std::string_view>& allowed) {
  std::map<std::string, KeyValue, std::less<>> out;
  std::int64_t offset = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line(text.data() + pos, eol - pos);
    const std::int64_t line_offset = offset;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (!line.empty()) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw FormatError("expected key=value, got \"" + std::string(line) + "\"", origin,
                          line_offset);
      }
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw FormatError("unknown key \"" + key + "\"", origin, line_offset);
      }
      if (out.contains(key)) {
        throw FormatError("duplicate key \"" + key + "\"", origin, line_offset);
      }
      if (value.empty()) {
        throw FormatError("empty value for key \"" + key + "\"", origin, line_offset);
      }
      out.emplace(key, KeyValue{value, line_offset});
    }
    if (eol == text.size()) break;
    pos = eol + 1;
    offset = static_cast<std::int64_t>(pos);
  }
  return out;
}

const KeyValue& require(const std::map<std::string, KeyValue, std::less<>>& kv,
                        std::string_view key, const std::string& origin) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("missing key \"" + std::string(key) + "\"", origin);
  return it->second;
}

double parse_double(const KeyValue& kv, std::string_view key, const std::string& origin) {
  double value = 0.0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw FormatError("key \"" + std::string(key) + "\" has unparsable number \"" + kv.value +
                          "\"",
                      origin, kv.offset);
  }
  return value;
}

std::int64_t parse_int(const KeyValue& kv, std::string_view key, const std::string& origin) {
  std::int64_t value = 0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw FormatError("key \"" + std::string(key) + "\" has unparsable integer \"" + kv.value +
                          "\"",
                      origin, kv.offset);
  }
  return value;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file", path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double KernelProfile::flops() const {
  return lambda * 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(d);
}

double KernelProfile::bytes() const {
  const double md = static_cast<double>(m) * static_cast<double>(d);
  const double mnd = md * static_cast<double>(n);
  const double ml = static_cast<double>(m) * static_cast<double>(l);
  return 4.0 * (md + mnd / static_cast<double>(ib) + 2.0 * ml);
}

double KernelProfile::cops() const {
  return static_cast<double>(c) * static_cast<double>(m) * static_cast<double>(n);
}

const char* bound_name(Bound b) noexcept {
  switch (b) {
    case Bound::kFlopPeak: return "FlopPeak";
    case Bound::kMemoryBandwidth: return "MemoryBandwidth";
    case Bound::kCopBandwidth: return "CopBandwidth";
  }
  return "unknown";
}

RooflineReport attainable_performance(const HardwareSpec& hw, double i_mem, double i_cop) {
  if (!(hw.pi > 0.0) || !(hw.beta > 0.0) || !(hw.gamma > 0.0)) {
    throw std::invalid_argument("attainable_performance: hardware ceilings must be positive");
  }
  if (!(i_mem > 0.0) || !(i_cop > 0.0)) {
    throw std::invalid_argument("attainable_performance: intensities must be positive");
  }
  const double mem = hw.beta * i_mem;
  const double cop = hw.gamma * i_cop;
  RooflineReport report;
  report.i_mem = i_mem;
  report.i_cop = i_cop;
  if (hw.pi <= mem && hw.pi <= cop) {
    report.attainable = hw.pi;
    report.bound = Bound::kFlopPeak;
  } else if (mem <= cop) {
    report.attainable = mem;
    report.bound = Bound::kMemoryBandwidth;
  } else {
    report.attainable = cop;
    report.bound = Bound::kCopBandwidth;
  }
  return report;
}

double blas3_intensity(std::int64_t m, std::int64_t n, std::int64_t d) {
  if (m < 1 || n < 1 || d < 1) throw std::invalid_argument("blas3_intensity: sizes must be positive");
  const double md = static_cast<double>(m), nd_ = static_cast<double>(n), dd = static_cast<double>(d);
  return 2.0 * md * nd_ * dd / (4.0 * (md * nd_ + md * dd + nd_ * dd));
}

double partial_reduce_mem_intensity(std::int64_t m, std::int64_t n, std::int64_t d,
                                    std::int64_t l, std::int64_t ib) {
  if (m < 1 || n < 1 || d < 1) {
    throw std::invalid_argument("partial_reduce_mem_intensity: sizes must be positive");
  }
  if (l < 1 || ib < 1) {
    throw std::invalid_argument("partial_reduce_mem_intensity: l and ib must be positive");
  }
  KernelProfile p;
  p.m = m;
  p.n = n;
  p.d = d;
  p.l = l;
  p.ib = ib;
  p.lambda = 1.0;
  return p.flops() / p.bytes();
}

double cop_intensity(std::int64_t d, std::int64_t c) {
  if (d < 1 || c < 1) throw std::invalid_argument("cop_intensity: d and c must be positive");
  return 2.0 * static_cast<double>(d) / static_cast<double>(c);
}

std::int64_t cop_budget(std::int64_t d, const HardwareSpec& hw) {
  if (d < 1) throw std::invalid_argument("cop_budget: d must be positive");
  if (!(hw.pi > 0.0) || !(hw.gamma > 0.0)) {
    throw std::invalid_argument("cop_budget: hardware ceilings must be positive");
  }
  // The 1e-9 slack absorbs one-ulp noise in the division so exact ratios (like
  // 2*128*19.5/312 = 16) do not round down.
  return static_cast<std::int64_t>(
      std::floor(2.0 * static_cast<double>(d) * hw.gamma / hw.pi + 1e-9));
}

std::int64_t count_cops(Metric metric, std::int64_t d, std::int64_t n) {
  if (d < 1 || n < 1) throw std::invalid_argument("count_cops: d and n must be positive");
  std::int64_t c = 3;  // strict compare + value select + index select
  if (d % 128 != 0) c += 1;
  if (!std::has_single_bit(static_cast<std::uint64_t>(n))) c += 1;
  if (metric == Metric::kEuclidean) c += 2;
  return c;
}

RooflineReport diagnose(const HardwareSpec& hw, const KernelProfile& profile) {
  const double i_mem =
      partial_reduce_mem_intensity(profile.m, profile.n, profile.d, profile.l, profile.ib);
  const double i_cop = cop_intensity(profile.d, profile.c);
  RooflineReport report = attainable_performance(hw, i_mem, i_cop);
  report.runtime_lower_bound = profile.flops() / report.attainable;
  return report;
}

HardwareSpec parse_hardware_spec(const std::string& text, const std::string& origin) {
  const auto kv =
      parse_key_values(text, origin, {"name", "pi_tflops", "beta_gbps", "gamma_tcops"});
  HardwareSpec hw;
  hw.name = require(kv, "name", origin).value;
  hw.pi = parse_double(require(kv, "pi_tflops", origin), "pi_tflops", origin) * 1e12;
  hw.beta = parse_double(require(kv, "beta_gbps", origin), "beta_gbps", origin) * 1e9;
  hw.gamma = parse_double(require(kv, "gamma_tcops", origin), "gamma_tcops", origin) * 1e12;
  if (!(hw.pi > 0.0) || !(hw.beta > 0.0) || !(hw.gamma > 0.0)) {
    throw FormatError("hardware ceilings must be positive", origin);
  }
  return hw;
}

KernelProfile parse_kernel_profile(const std::string& text, const std::string& origin) {
  const auto kv = parse_key_values(text, origin, {"m", "n", "d", "l", "ib", "c", "lambda"});
  KernelProfile p;
  p.m = parse_int(require(kv, "m", origin), "m", origin);
  p.n = parse_int(require(kv, "n", origin), "n", origin);
  p.d = parse_int(require(kv, "d", origin), "d", origin);
  p.l = parse_int(require(kv, "l", origin), "l", origin);
  p.ib = parse_int(require(kv, "ib", origin), "ib", origin);
  p.c = parse_int(require(kv, "c", origin), "c", origin);
  p.lambda = parse_double(require(kv, "lambda", origin), "lambda", origin);
  if (p.m < 1 || p.n < 1 || p.d < 1 || p.l < 1 || p.ib < 1 || p.c < 1) {
    throw FormatError("profile sizes must be positive", origin);
  }
  if (!(p.lambda > 0.0) || !(p.lambda <= 1.0)) {
    throw FormatError("lambda must lie in (0,1]", origin);
  }
  return p;
}

HardwareSpec load_hardware_spec(const std::filesystem::path& path) {
  return parse_hardware_spec(read_text_file(path), path.string());
}

KernelProfile load_kernel_profile(const std::filesystem::path& path) {
  return parse_kernel_profile(read_text_file(path), path.string());
}

std::string format_hardware_spec(const HardwareSpec& hw) {
  std::string out;
  out += "name = " + hw.name + "\n";
  out += "pi_tflops = " + format_double(hw.pi / 1e12) + "\n";
  out += "beta_gbps = " + format_double(hw.beta / 1e9) + "\n";
  out += "gamma_tcops = " + format_double(hw.gamma / 1e12) + "\n";
  return out;
}

}  // namespace bintopk
