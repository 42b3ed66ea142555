#pragma once

#include <deque>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "caplab/controller.hpp"
#include "caplab/protocol.hpp"

namespace caplab {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Serialized byte channel to a controller. Callers must not pipeline:
// write one command line, then read its response line.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write(std::string_view bytes) = 0;
  // Returns one line including its LF terminator. Lines longer than the
  // protocol limit are returned truncated so the parser rejects them.
  virtual std::string read_line() = 0;
};

// Loops bytes straight into a SimulatedController.
class SimulatedTransport : public Transport {
 public:
  explicit SimulatedTransport(SimulatedController& controller) : controller_(controller) {}

  void write(std::string_view bytes) override;
  std::string read_line() override;

 private:
  SimulatedController& controller_;
  std::string pending_;
  std::deque<std::string> responses_;
};

// Byte streams to real hardware, e.g. a serial device opened as a file.
class StreamTransport : public Transport {
 public:
  StreamTransport(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  void write(std::string_view bytes) override;
  std::string read_line() override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

// Anything that executes protocol commands: the capper as seen by the
// workflow.
class CapperPort {
 public:
  virtual ~CapperPort() = default;
  virtual protocol::Response execute(protocol::Command cmd) = 0;
};

class CapperClient : public CapperPort {
 public:
  explicit CapperClient(Transport& transport) : transport_(transport) {}

  // Throws protocol::ProtocolError on a malformed reply and TransportError
  // when the channel closes.
  protocol::Response execute(protocol::Command cmd) override;

 private:
  Transport& transport_;
};

}  // namespace caplab
