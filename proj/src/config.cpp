#include "caplab/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string_view>
#include <vector>

#include "caplab/synthetic.hpp"

namespace caplab {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> numbers(std::string_view value, std::size_t expected, long line) {
  std::vector<double> out;
  while (true) {
    const auto comma = value.find(',');
    const std::string_view item = trim(value.substr(0, comma));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError("bad number '" + std::string(item) + "'", line);
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (out.size() != expected)
    throw ConfigError("expected " + std::to_string(expected) + " value(s)", line);
  return out;
}

int integer(double v, long line) {
  if (v != static_cast<double>(static_cast<long>(v))) throw ConfigError("expected an integer", line);
  return static_cast<int>(v);
}

using Setter = std::function<void(Settings&, std::string_view, long)>;

Setter scalar(double machine::MachineConfig::*field) {
  return [field](Settings& s, std::string_view v, long line) { s.machine.*field = numbers(v, 1, line)[0]; };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  using M = machine::MachineConfig;
  static const std::map<std::string, Setter, std::less<>> table = {
      {"motor_rpm", scalar(&M::motor_rpm)},
      {"leadscrew_pitch", scalar(&M::leadscrew_pitch)},
      {"rail_length", scalar(&M::rail_length)},
      {"position_load", scalar(&M::position_load)},
      {"position_feeder", scalar(&M::position_feeder)},
      {"position_end", scalar(&M::position_end)},
      {"cam_engage_offset", scalar(&M::cam_engage_offset)},
      {"tick", scalar(&M::tick)},
      {"orientation_tolerance", scalar(&M::orientation_tolerance)},
      {"motor_torque_ncm", scalar(&M::motor_torque_ncm)},
      {"belt_ratio", scalar(&M::belt_ratio)},
      {"feeder_capacity",
       [](Settings& s, std::string_view v, long line) {
         s.machine.feeder_capacity = integer(numbers(v, 1, line)[0], line);
       }},
      {"roi",
       [](Settings& s, std::string_view v, long line) {
         const auto n = numbers(v, 4, line);
         s.roi = {integer(n[0], line), integer(n[1], line), integer(n[2], line), integer(n[3], line)};
       }},
      {"hsv_low",
       [](Settings& s, std::string_view v, long line) {
         const auto n = numbers(v, 3, line);
         s.detector.hsv_low = {n[0], n[1], n[2]};
       }},
      {"hsv_high",
       [](Settings& s, std::string_view v, long line) {
         const auto n = numbers(v, 3, line);
         s.detector.hsv_high = {n[0], n[1], n[2]};
       }},
      {"gray_threshold",
       [](Settings& s, std::string_view v, long line) {
         s.detector.gray_threshold = integer(numbers(v, 1, line)[0], line);
       }},
      {"area_threshold",
       [](Settings& s, std::string_view v, long line) {
         s.detector.area_threshold = integer(numbers(v, 1, line)[0], line);
       }},
      {"min_blob",
       [](Settings& s, std::string_view v, long line) {
         s.detector.min_blob = integer(numbers(v, 1, line)[0], line);
       }},
  };
  return table;
}

}  // namespace

Settings default_settings() {
  Settings s;
  s.roi = synthetic::default_roi();
  return s;
}

Settings parse_settings(std::istream& in) {
  Settings s = default_settings();
  std::string raw;
  long line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line);
    const std::string_view key = trim(text.substr(0, eq));
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown key '" + std::string(key) + "'", line);
    it->second(s, trim(text.substr(eq + 1)), line);
  }
  try {
    s.machine.validate();
    s.detector.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), 0);
  }
  if (s.roi.w < 1 || s.roi.h < 1 || s.roi.x < 0 || s.roi.y < 0)
    throw ConfigError("roi must have a non-negative origin and positive size", 0);
  return s;
}

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path, 0);
  return parse_settings(in);
}

void write_settings(std::ostream& out, const Settings& s) {
  const auto& m = s.machine;
  const auto& d = s.detector;
  out << "motor_rpm = " << m.motor_rpm << '\n'
      << "leadscrew_pitch = " << m.leadscrew_pitch << '\n'
      << "rail_length = " << m.rail_length << '\n'
      << "position_load = " << m.position_load << '\n'
      << "position_feeder = " << m.position_feeder << '\n'
      << "position_end = " << m.position_end << '\n'
      << "cam_engage_offset = " << m.cam_engage_offset << '\n'
      << "tick = " << m.tick << '\n'
      << "feeder_capacity = " << m.feeder_capacity << '\n'
      << "orientation_tolerance = " << m.orientation_tolerance << '\n'
      << "motor_torque_ncm = " << m.motor_torque_ncm << '\n'
      << "belt_ratio = " << m.belt_ratio << '\n'
      << "roi = " << s.roi.x << ',' << s.roi.y << ',' << s.roi.w << ',' << s.roi.h << '\n'
      << "hsv_low = " << d.hsv_low.h << ',' << d.hsv_low.s << ',' << d.hsv_low.v << '\n'
      << "hsv_high = " << d.hsv_high.h << ',' << d.hsv_high.s << ',' << d.hsv_high.v << '\n'
      << "gray_threshold = " << d.gray_threshold << '\n'
      << "area_threshold = " << d.area_threshold << '\n'
      << "min_blob = " << d.min_blob << '\n';
}

}  // namespace caplab
