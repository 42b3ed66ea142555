#include "caplab/transport.hpp"

#include <istream>
#include <ostream>

namespace caplab {

void SimulatedTransport::write(std::string_view bytes) {
  for (char c : bytes) {
    pending_.push_back(c);
    if (c == '\n') {
      responses_.push_back(controller_.handle_line(pending_));
      pending_.clear();
    } else if (pending_.size() > protocol::kMaxLine) {
      // Drop the overlong line; the controller answers once its LF arrives.
      pending_.resize(protocol::kMaxLine + 1);
    }
  }
}

std::string SimulatedTransport::read_line() {
  if (responses_.empty()) throw TransportError("no response pending");
  std::string line = std::move(responses_.front());
  responses_.pop_front();
  return line;
}

void StreamTransport::write(std::string_view bytes) {
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out_.flush();
  if (!out_) throw TransportError("write to controller failed");
}

std::string StreamTransport::read_line() {
  std::string line;
  char c = 0;
  while (in_.get(c)) {
    if (line.size() <= protocol::kMaxLine) line.push_back(c);
    if (c == '\n') return line;
  }
  if (line.empty()) throw TransportError("controller closed the channel");
  return line;
}

protocol::Response CapperClient::execute(protocol::Command cmd) {
  transport_.write(protocol::encode(cmd));
  return protocol::parse_response(transport_.read_line());
}

}  // namespace caplab
