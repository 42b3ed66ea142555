#pragma once

namespace caplab {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;  // seconds
  virtual void wait(double seconds) = 0;
};

// Simulated time: advances only when told to.
class VirtualClock : public Clock {
 public:
  double now() const override { return now_; }
  void wait(double seconds) override {
    if (seconds > 0.0) now_ += seconds;
  }
  void advance(double seconds) { wait(seconds); }

 private:
  double now_ = 0.0;
};

}  // namespace caplab
