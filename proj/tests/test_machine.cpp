#include "caplab/machine.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace caplab::machine;

namespace {

MachineState with_vial(const MachineConfig& c, VialSpec v, Lane lane = Lane::Capping) {
  return load_vial(initial_state(c), c, std::move(v), lane);
}

}  // namespace

TEST_CASE("relay truth table matches the rule table for all 128 inputs") {
  for (unsigned b = 0; b < 128; ++b) {
    CAPTURE(b);
    CHECK(oracle::relay_under_test(b) == oracle::relay_drive(b));
  }
}

TEST_CASE("relay interlock, e-stop dominance and limit cutoff") {
  for (unsigned b = 0; b < 128; ++b) {
    CAPTURE(b);
    const Motor m = oracle::relay_under_test(b);
    if (b & 4) CHECK(m == Motor::Stopped);
    if (m == Motor::Forward) CHECK((b & 64) == 0);
    if (m == Motor::Reverse) CHECK((b & 32) == 0);
    // Panel requests override the controller lines.
    if (b & 3) CHECK(m == oracle::relay_under_test(b & ~24u));
  }
  CHECK(relay_logic(false, false, false, false, false, false, false) == Motor::Stopped);
  CHECK(relay_logic(false, false, false, true, false, false, false) == Motor::Forward);
  CHECK(relay_logic(false, false, false, true, false, false, true) == Motor::Stopped);
  CHECK(relay_logic(false, false, true, false, true, false, false) == Motor::Stopped);
}

TEST_CASE("relay outputs never both conduct after a step") {
  const MachineConfig c;
  for (unsigned b = 0; b < 128; ++b) {
    MachineState s = initial_state(c);
    s.holder_position = (b & 32) ? 0.0 : (b & 64) ? c.position_end : c.position_feeder / 2;
    s = refresh_sensors(s, c);
    s.panel_home = b & 1;
    s.panel_feed = b & 2;
    s.estop = b & 4;
    s.ctrl_fwd = b & 8;
    s.ctrl_rev = b & 16;
    for (int i = 0; i < 3; ++i) {
      s = step(s, c, c.tick);
      CHECK_FALSE((s.relay_forward && s.relay_reverse));
      CHECK_NOTHROW(validate_state(s, c));
    }
  }
}

TEST_CASE("config validation") {
  MachineConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.speed() == doctest::Approx(2.8));
  c.position_feeder = c.position_end;
  CHECK_THROWS_AS(c.validate(), MachineError);
  c = {};
  c.motor_rpm = 0;
  CHECK_THROWS_AS(c.validate(), MachineError);
  c = {};
  c.position_end = c.rail_length + 1;
  CHECK_THROWS_AS(c.validate(), MachineError);
}

TEST_CASE("step kinematics") {
  const MachineConfig c;
  MachineState s = initial_state(c);
  CHECK(step(s, c, 1.0).holder_position == 0.0);

  s.ctrl_fwd = true;
  s = step(s, c, c.tick);  // relays pick up the request
  const double start = s.holder_position;
  s = step(s, c, 10.0);
  CHECK(s.holder_position - start == doctest::Approx(28.0));

  SUBCASE("limit cutoff one tick before position 2") {
    MachineState t = initial_state(c);
    t.holder_position = c.position_end - c.speed() * c.tick * 1.5;
    t = refresh_sensors(t, c);
    t.ctrl_fwd = true;
    t = step(t, c, c.tick);
    REQUIRE(t.motor == Motor::Forward);
    t = step(t, c, c.tick);
    CHECK(t.limit_far);
    CHECK(t.motor == Motor::Stopped);
    CHECK(t.holder_position == c.position_end);
  }
}

TEST_CASE("cam lock follows the engagement point") {
  MachineConfig c;
  MachineState s = initial_state(c);
  for (double p : {0.0, 9.99, 10.0, 10.01, 150.0}) {
    s.holder_position = p;
    CHECK(refresh_sensors(s, c).lock_engaged == (p >= c.position_load + c.cam_engage_offset));
  }
}

TEST_CASE("traversal time matches distance over lead-screw speed within one tick") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> rpm(10, 300), pitch(0.5, 8), dist(20, 600), tick(0.005, 0.1);
  for (int trial = 0; trial < 500; ++trial) {
    MachineConfig c;
    c.motor_rpm = rpm(rng);
    c.leadscrew_pitch = pitch(rng);
    c.tick = tick(rng);
    c.position_end = dist(rng);
    c.rail_length = c.position_end;
    c.position_feeder = c.position_end / 2;
    const double expected = c.position_end / ((c.motor_rpm / 60.0) * c.leadscrew_pitch);
    if (expected < 4 * c.tick) continue;

    MachineState s = begin_feed(initial_state(c), c);
    long ticks = 0;
    while (s.job != Job::None) {
      s = advance(s, c, c.tick);
      ++ticks;
      REQUIRE(ticks < 1000000);
    }
    CAPTURE(c.motor_rpm);
    CAPTURE(c.leadscrew_pitch);
    CAPTURE(c.position_end);
    CHECK(std::abs(ticks * c.tick - expected) <= c.tick + 1e-9);
    CHECK(s.holder_position == c.position_end);
  }
}

TEST_CASE("position stays within the rail across random command sequences") {
  const MachineConfig c;
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> op(0, 11);
  std::uniform_real_distribution<double> dt(0.001, 3.0);
  for (int seq = 0; seq < 10000; ++seq) {
    MachineState s = initial_state(c);
    for (int i = 0; i < 24; ++i) {
      try {
        switch (op(rng)) {
          case 0: s = begin_cap(s, c); break;
          case 1: s = begin_uncap(s, c); break;
          case 2: s = begin_home(s, c); break;
          case 3: s = begin_feed(s, c); break;
          case 4: s = press_estop(s); break;
          case 5: s = release_estop(s); break;
          case 6: s.panel_home = !s.panel_home; break;
          case 7: s.panel_feed = !s.panel_feed; break;
          case 8: s = load_vial(s, c, make_vial("v", 2 + static_cast<int>(rng() % 2), rng() % 360)); break;
          case 9: s = move_to_lane(s, c, rng() % 2 ? Lane::Capping : Lane::Uncapping); break;
          case 10: s = unload_vial(s, c); break;
          default: break;
        }
      } catch (const MachineError&) {
      }
      const int steps = 1 + static_cast<int>(rng() % 40);
      for (int k = 0; k < steps; ++k) {
        s = advance(s, c, dt(rng));
        if (s.holder_position < 0.0 || s.holder_position > c.position_end) {
          FAIL("holder left the rail at " << s.holder_position);
        }
      }
      validate_state(s, c);
    }
  }
}

TEST_CASE("capping outcomes") {
  MachineConfig c;
  SUBCASE("good vial caps and takes one cap") {
    MachineState s = with_vial(c, make_vial("a"));
    s.feeder_count = 10;
    auto [after, attempt] = command_cap(s, c);
    CHECK(attempt.success);
    CHECK(attempt.reason == CapReason::Ok);
    CHECK(after.vial_capped);
    CHECK_FALSE(after.loose_cap);
    CHECK(after.feeder_count == 9);
    CHECK(after.holder_position == 0.0);
    CHECK(after.job == Job::None);
  }
  SUBCASE("missing thread") {
    auto [after, attempt] = command_cap(with_vial(c, make_vial("b", 2)), c);
    CHECK_FALSE(attempt.success);
    CHECK(attempt.reason == CapReason::MissingThreads);
    CHECK_FALSE(after.vial_capped);
    CHECK(after.loose_cap);
    CHECK(after.feeder_count == c.feeder_capacity);
  }
  SUBCASE("defective flag alone") {
    VialSpec v = make_vial("d");
    v.defective = true;
    CHECK(command_cap(with_vial(c, v), c).second.reason == CapReason::MissingThreads);
  }
  SUBCASE("orientation tolerance") {
    CHECK(command_cap(with_vial(c, make_vial("e", 3, 60)), c).second.success);
    CHECK(command_cap(with_vial(c, make_vial("f", 3, 300)), c).second.success);
    CHECK(command_cap(with_vial(c, make_vial("g", 3, 61)), c).second.reason == CapReason::Misoriented);
    CHECK(command_cap(with_vial(c, make_vial("h", 3, 180)), c).second.reason == CapReason::Misoriented);
  }
  SUBCASE("empty holder and empty feeder") {
    auto empty = initial_state(c);
    CHECK_THROWS_AS(command_cap(empty, c), MachineError);
    MachineState s = with_vial(c, make_vial("i"));
    s.feeder_count = 0;
    try {
      command_cap(s, c);
      FAIL("expected FeederEmpty");
    } catch (const MachineError& e) {
      CHECK(e.code() == MachineErrc::FeederEmpty);
    }
    CHECK(evaluate_cap(s, c).reason == CapReason::FeederEmpty);
  }
  SUBCASE("e-stop latch") {
    MachineState s = press_estop(with_vial(c, make_vial("j")));
    try {
      command_cap(s, c);
      FAIL("expected EStop");
    } catch (const MachineError& e) {
      CHECK(e.code() == MachineErrc::EStop);
    }
  }
}

TEST_CASE("angular distance") {
  CHECK(angular_distance(0) == 0);
  CHECK(angular_distance(350) == doctest::Approx(10));
  CHECK(angular_distance(-30) == doctest::Approx(30));
  CHECK(angular_distance(540) == doctest::Approx(180));
}

TEST_CASE("cap reason is total and agrees with success") {
  const MachineConfig c;
  std::mt19937 rng(11);
  for (int i = 0; i < 2000; ++i) {
    MachineState s = initial_state(c);
    if (rng() % 5) {
      VialSpec v = make_vial("v", static_cast<int>(rng() % 5), static_cast<double>(rng() % 720) - 360.0);
      if (rng() % 7 == 0) v.defective = true;
      s = load_vial(s, c, v);
    }
    s.feeder_count = static_cast<int>(rng() % 3);
    const CapAttempt a = evaluate_cap(s, c);
    CHECK(a.success == (a.reason == CapReason::Ok));
    if (!s.vial) {
      CHECK(a.reason == CapReason::NoVial);
      continue;
    }
    if (s.feeder_count == 0) continue;
    auto [after, done] = command_cap(s, c);
    CHECK(done == a);
    CHECK(after.feeder_count == s.feeder_count - (done.success ? 1 : 0));
  }
}

TEST_CASE("uncapping") {
  const MachineConfig c;
  MachineState s = command_cap(with_vial(c, make_vial("a")), c).first;
  s = move_to_lane(s, c, Lane::Uncapping);
  auto [after, attempt] = command_uncap(s, c);
  CHECK(attempt.success);
  CHECK_FALSE(after.vial_capped);
  CHECK(after.loose_cap);
  CHECK(after.feeder_count == c.feeder_capacity - 1);

  try {
    command_uncap(after, c);
    FAIL("expected NotCapped");
  } catch (const MachineError& e) {
    CHECK(e.code() == MachineErrc::NotCapped);
  }
  MachineState empty = initial_state(c);
  empty.lane = Lane::Uncapping;
  try {
    command_uncap(empty, c);
    FAIL("expected NoVial");
  } catch (const MachineError& e) {
    CHECK(e.code() == MachineErrc::NoVial);
  }
}

TEST_CASE("feeder conservation over repeated passes") {
  const MachineConfig c;
  MachineState s = initial_state(c);
  std::mt19937 rng(5);
  int successes = 0;
  for (int i = 0; i < 40 && s.feeder_count > 0; ++i) {
    s = load_vial(s, c, make_vial("v", rng() % 4 ? 3 : 2));
    const int before = s.feeder_count;
    auto [after, attempt] = command_cap(s, c);
    successes += attempt.success;
    CHECK(after.feeder_count == before - (attempt.success ? 1 : 0));
    CHECK(after.feeder_count >= 0);
    s = unload_vial(after, c);
  }
  CHECK(s.feeder_count == c.feeder_capacity - successes);
}

TEST_CASE("mid-pass e-stop leaves the holder in place until homed") {
  const MachineConfig c;
  MachineState s = begin_cap(with_vial(c, make_vial("a")), c);
  for (int i = 0; i < 400; ++i) s = advance(s, c, c.tick);
  const double pos = s.holder_position;
  s = press_estop(s);
  for (int i = 0; i < 100; ++i) s = advance(s, c, c.tick);
  CHECK(s.holder_position == pos);
  CHECK(s.job == Job::None);
  CHECK(s.motor == Motor::Stopped);
  CHECK_THROWS_AS(begin_home(s, c), MachineError);
  s = run_job(begin_home(release_estop(s), c), c);
  CHECK(s.holder_position == 0.0);
}

TEST_CASE("determinism") {
  const MachineConfig c;
  auto run = [&] {
    MachineState s = begin_cap(with_vial(c, make_vial("a", 3, 20)), c);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dt(0.01, 0.2);
    while (s.job != Job::None) s = advance(s, c, dt(rng));
    return s;
  };
  CHECK(run() == run());
}

TEST_CASE("state validation rejects broken invariants") {
  const MachineConfig c;
  MachineState s = initial_state(c);
  s.relay_forward = s.relay_reverse = true;
  CHECK_THROWS_AS(validate_state(s, c), MachineError);
  s = initial_state(c);
  s.holder_position = 100;
  CHECK_THROWS_AS(validate_state(s, c), MachineError);
  s = initial_state(c);
  s.estop = true;
  s.motor = Motor::Forward;
  s.relay_forward = true;
  CHECK_THROWS_AS(validate_state(s, c), MachineError);
  CHECK_THROWS_AS(step(initial_state(c), c, 0.0), MachineError);
}
