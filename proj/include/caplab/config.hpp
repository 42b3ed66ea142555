#pragma once

// Station settings file: one `key = value` per line, '#' starts a comment.
//
//   motor_rpm = 84
//   roi = 262,168,116,92
//   hsv_low = 200,0.35,0.25

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "caplab/machine.hpp"
#include "caplab/vision.hpp"

namespace caplab {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, long line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

struct Settings {
  machine::MachineConfig machine;
  vision::DetectorConfig detector;
  vision::Roi roi;
};

Settings default_settings();

// Unknown keys, malformed values and failed validation throw ConfigError.
Settings parse_settings(std::istream& in);
Settings load_settings(const std::string& path);

void write_settings(std::ostream& out, const Settings& settings);

}  // namespace caplab
