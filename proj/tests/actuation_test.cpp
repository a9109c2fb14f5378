#include "roadframe/actuation.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace roadframe {
namespace {

TEST(CrcTest, StandardCheckValue) {
  const std::string msg = "123456789";
  const std::vector<std::uint8_t> bytes(msg.begin(), msg.end());
  EXPECT_EQ(crc16_ccitt_false(bytes), 0x29B1);
}

TEST(CrcTest, MatchesTableOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 40);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint8_t> data(len(rng));
    for (auto& b : data) b = static_cast<std::uint8_t>(byte(rng));
    EXPECT_EQ(crc16_ccitt_false(data), oracle::table_crc16(data.data(), data.size()));
  }
}

TEST(CodecTest, ZeroCommand) {
  const CommandFrame f = encode_command(0.0, 0.0, 0, 0);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(f.bytes[i], 0);
  const std::uint16_t crc = oracle::table_crc16(f.bytes.data(), 6);
  EXPECT_EQ(f.bytes[6], crc >> 8);
  EXPECT_EQ(f.bytes[7], crc & 0xFF);
  ASSERT_TRUE(decode_command(f).has_value());
}

TEST(CodecTest, FieldScaling) {
  const CommandFrame f = encode_command(0.1, 3.0, 7, 0);
  EXPECT_EQ((f.bytes[0] << 8) | f.bytes[1], 1000);
  EXPECT_EQ((f.bytes[2] << 8) | f.bytes[3], 3000);
  EXPECT_EQ(f.bytes[4], 7);
  const auto c = decode_command(f);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->delta_r, 1000 * 1e-4);
  EXPECT_EQ(c->v_r, 3000 * 1e-3);
}

TEST(CodecTest, NegativeSteeringIsTwosComplement) {
  const CommandFrame f = encode_command(-0.52, 0.0, 0, 0);
  EXPECT_EQ(f.bytes[0], 0xEB);  // -5200 = 0xEBB0
  EXPECT_EQ(f.bytes[1], 0xB0);
  EXPECT_NEAR(decode_command(f)->delta_r, -0.52, 1e-12);
}

TEST(CodecTest, OutOfRangeRejected) {
  EXPECT_THROW(encode_command(0.6, 1.0, 0, 0), EncodingError);
  EXPECT_THROW(encode_command(-0.53, 1.0, 0, 0), EncodingError);
  EXPECT_THROW(encode_command(0.0, -0.1, 0, 0), EncodingError);
  EXPECT_THROW(encode_command(0.0, 65.6, 0, 0), EncodingError);
  EXPECT_THROW(encode_command(std::nan(""), 1.0, 0, 0), EncodingError);
  EXPECT_NO_THROW(encode_command(0.52, 65.535, 255, 1));
}

TEST(CodecTest, QuantisationWithinHalfLsb) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-0.52, 0.52), v(0.0, 65.535);
  for (int i = 0; i < 1000; ++i) {
    const double dr = d(rng), vr = v(rng);
    const auto c = decode_command(encode_command(dr, vr, 0, 0));
    ASSERT_TRUE(c);
    EXPECT_LE(std::abs(c->delta_r - dr), 0.5e-4 + 1e-15);
    EXPECT_LE(std::abs(c->v_r - vr), 0.5e-3 + 1e-15);
  }
}

FrameCommand random_representable(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dq(-5200, 5200), vq(0, 65535), byte(0, 255);
  return {dq(rng) * 1e-4, vq(rng) * 1e-3, static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng))};
}

TEST(CodecTest, RandomRoundTripIsIdentity) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const FrameCommand c = random_representable(rng);
    const CommandFrame f = encode_command(c);
    const auto back = decode_command(f);
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, c);
    EXPECT_EQ(encode_command(*back), f);
  }
}

TEST(CodecTest, EverySingleBitFlipDetected) {
  std::mt19937_64 rng(4);
  int flips = 0;
  for (int i = 0; i < 200; ++i) {
    const CommandFrame f = encode_command(random_representable(rng));
    for (int bit = 0; bit < 64; ++bit) {
      CommandFrame g = f;
      g.bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      EXPECT_FALSE(decode_command(g).has_value()) << "frame " << i << " bit " << bit;
      ++flips;
    }
  }
  EXPECT_EQ(flips, 64 * 200);
}

TEST(CodecTest, HexRoundTrip) {
  const CommandFrame f = encode_command(-0.1234, 2.5, 200, 1);
  EXPECT_EQ(f.hex().size(), 16u);
  EXPECT_EQ(CommandFrame::from_hex(f.hex()), f);
  EXPECT_THROW(CommandFrame::from_hex("12"), std::invalid_argument);
  EXPECT_THROW(CommandFrame::from_hex("zz00000000000000"), std::invalid_argument);
}

TEST(CodecTest, SequenceWrap) {
  EXPECT_TRUE(consecutive(255, 0));
  EXPECT_TRUE(consecutive(4, 5));
  EXPECT_FALSE(consecutive(4, 6));
  EXPECT_FALSE(consecutive(0, 255));
}

TEST(ControllerTest, CorruptFrameHoldsLastCommand) {
  ActuationController ctl;
  ASSERT_TRUE(ctl.receive(encode_command(0.2, 3.0, 0, 0), 0.0));
  CommandFrame bad = encode_command(-0.3, 1.0, 1, 0);
  bad.bytes[2] ^= 0x10;
  EXPECT_FALSE(ctl.receive(bad, 0.1));
  EXPECT_EQ(ctl.delta_ref(), 0.2);
  EXPECT_EQ(ctl.v_ref(), 3.0);
  EXPECT_EQ(ctl.rejected_frames(), 1);
}

TEST(ControllerTest, SequenceGapCounted) {
  ActuationController ctl;
  ctl.receive(encode_command(0, 1, 254, 0), 0.0);
  ctl.receive(encode_command(0, 1, 255, 0), 0.1);
  ctl.receive(encode_command(0, 1, 0, 0), 0.2);
  EXPECT_EQ(ctl.sequence_gaps(), 0);
  ctl.receive(encode_command(0, 1, 2, 0), 0.3);
  EXPECT_EQ(ctl.sequence_gaps(), 1);
}

TEST(ControllerTest, WatchdogRampsSpeedToZero) {
  ActuationController ctl;
  ctl.receive(encode_command(0.0, 3.0, 0, 0), 0.0);
  const double dt = 0.01;
  double t = 0.0;
  for (int i = 1; i <= 50; ++i) {
    t = i * dt;
    ctl.tick(t, dt, 0.0, 3.0);
  }
  EXPECT_FALSE(ctl.watchdog_tripped());
  EXPECT_EQ(ctl.v_ref(), 3.0);
  int ticks_after = 0;
  for (int i = 51; i <= 200; ++i) {
    t = i * dt;
    const double before = ctl.v_ref();
    ctl.tick(t, dt, 0.0, 3.0);
    ++ticks_after;
    EXPECT_TRUE(ctl.watchdog_tripped());
    EXPECT_NEAR(ctl.v_ref(), std::max(0.0, before - 3.0 * dt), 1e-12);
  }
  EXPECT_EQ(ctl.v_ref(), 0.0);
  ASSERT_FALSE(ctl.events().empty());
  EXPECT_NE(ctl.events().back().find("watchdog tripped"), std::string::npos);

  ctl.receive(encode_command(0.0, 2.0, 1, 0), t + dt);
  EXPECT_FALSE(ctl.watchdog_tripped());
  EXPECT_EQ(ctl.v_ref(), 2.0);
}

TEST(PidTest, NoErrorNoOutput) {
  PidState st;
  EXPECT_EQ(steering_loop_step(st, 0.1, 0.1, default_steering_gains(), 0.01), 0.0);
}

TEST(PidTest, HugeErrorSaturatesAndFreezesIntegral) {
  PidState st;
  const PidGains g = default_steering_gains();
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(steering_loop_step(st, 10.0, 0.0, g, 0.01), 1.0);
    EXPECT_EQ(st.integral, 0.0);
  }
  PidState neg;
  EXPECT_EQ(steering_loop_step(neg, -10.0, 0.0, g, 0.01), -1.0);
  EXPECT_EQ(neg.integral, 0.0);
}

TEST(PidTest, IntegralClamped) {
  PidGains g{0.0, 2.0, 0.0, 0.3, -1.0, 1.0};
  PidState st;
  for (int i = 0; i < 1000; ++i) pid_step(st, 1.0, 0.9, g, 0.01);
  EXPECT_NEAR(g.ki * st.integral, 0.3, 1e-12);
}

TEST(PidTest, NoDerivativeKickOnReferenceStep) {
  PidGains g{0.0, 0.0, 1.0, 0.0, -100.0, 100.0};
  PidState st;
  pid_step(st, 0.0, 0.5, g, 0.01);
  EXPECT_EQ(pid_step(st, 5.0, 0.5, g, 0.01), 0.0);
  EXPECT_NEAR(pid_step(st, 5.0, 0.6, g, 0.01), -10.0, 1e-9);
}

TEST(PidTest, RejectsBadGains) {
  PidGains g = default_speed_gains();
  g.ki = -1.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = default_speed_gains();
  g.out_min = 2.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

// Difference-equation rollout of the steering loop on a rate-driven motor,
// written from the control law rather than through pid_step.
std::vector<double> steering_rollout(double ref, double gain, double dt, int steps) {
  const double kp = 4.0, ki = 1.0, kd = 0.05, ilim = 0.5;
  std::vector<double> out;
  double delta = 0.0, prev = 0.0, acc = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double e = ref - delta;
    const double rate = k == 0 ? 0.0 : (delta - prev) / dt;
    const double v = kp * e + ki * acc - kd * rate;
    const bool hold = (v >= 1.0 && e > 0.0) || (v <= -1.0 && e < 0.0);
    if (!hold) acc = std::clamp(acc + e * dt, -ilim / ki, ilim / ki);
    const double u = std::clamp(kp * e + ki * acc - kd * rate, -1.0, 1.0);
    prev = delta;
    delta = std::clamp(delta + dt * gain * u, -0.52, 0.52);
    out.push_back(delta);
  }
  return out;
}

TEST(LoopTest, SteeringStepMatchesDifferenceEquation) {
  const double dt = 0.01;
  for (double ref : {0.05, 0.2, -0.4}) {
    const auto expected = steering_rollout(ref, 0.8, dt, 300);
    PidState st;
    ActuatorModelState x;
    for (int k = 0; k < 300; ++k) {
      ActuatorOutput u;
      u.steering_torque = steering_loop_step(st, ref, x.delta, default_steering_gains(), dt);
      x = actuator_model_step(x, u, {}, dt);
      ASSERT_NEAR(x.delta, expected[k], 1e-12) << "ref " << ref << " step " << k;
    }
  }
}

TEST(LoopTest, SteeringStepSettlesWithinOneSecond) {
  const double dt = 0.01;
  for (double ref : {0.02, 0.1, 0.3, -0.2}) {
    PidState st;
    ActuatorModelState x;
    for (int k = 0; k < 100; ++k) {
      ActuatorOutput u;
      u.steering_torque = steering_loop_step(st, ref, x.delta, default_steering_gains(), dt);
      x = actuator_model_step(x, u, {}, dt);
    }
    EXPECT_LT(std::abs(x.delta - ref), 0.02 * std::abs(ref)) << "ref " << ref;
  }
}

TEST(LoopTest, SpeedStepSettlesWithoutOvershoot) {
  const double dt = 0.01;
  PidState st;
  ActuatorModelState x;
  double peak = 0.0, settled_at = -1.0;
  std::vector<double> v;
  for (int k = 0; k < 1000; ++k) {
    const SpeedLoopOutput s = speed_loop_step(st, 3.0, x.v, default_speed_gains(), dt);
    ASSERT_EQ(s.traction * s.brake, 0.0);
    x = actuator_model_step(x, {0.0, s.traction, s.brake}, {}, dt);
    v.push_back(x.v);
    peak = std::max(peak, x.v);
  }
  for (std::size_t k = 0; k < v.size(); ++k) {
    bool inside = true;
    for (std::size_t j = k; j < v.size(); ++j) inside = inside && std::abs(v[j] - 3.0) <= 0.1;
    if (inside) {
      settled_at = (k + 1) * dt;
      break;
    }
  }
  EXPECT_GE(settled_at, 0.0);
  EXPECT_LE(settled_at, 4.0);
  EXPECT_LE(peak, 3.3);
}

TEST(SpeedLoopTest, Split) {
  const PidGains g = default_speed_gains();
  PidState a;
  SpeedLoopOutput s = speed_loop_step(a, 3.0, 3.0, g, 0.01);
  EXPECT_EQ(s.traction, 0.0);
  EXPECT_EQ(s.brake, 0.0);
  PidState b;
  s = speed_loop_step(b, 20.0, 0.0, g, 0.01);
  EXPECT_EQ(s.traction, 1.0);
  EXPECT_EQ(s.brake, 0.0);
  PidState c;
  s = speed_loop_step(c, 0.0, 3.0, g, 0.01);
  EXPECT_GT(s.brake, 0.0);
  EXPECT_EQ(s.traction, 0.0);
}

TEST(SpeedLoopTest, DeadbandCoasts) {
  PidGains g{1.0, 0.0, 0.0, 0.0, -1.0, 1.0};
  PidState st;
  const SpeedLoopOutput s = speed_loop_step(st, 3.015, 3.0, g, 0.01);
  EXPECT_EQ(s.traction, 0.0);
  EXPECT_EQ(s.brake, 0.0);
}

TEST(SpeedLoopTest, NeverBothActive) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> v(0.0, 6.0);
  PidState st;
  for (int i = 0; i < 5000; ++i) {
    const SpeedLoopOutput s = speed_loop_step(st, v(rng), v(rng), default_speed_gains(), 0.01);
    EXPECT_EQ(s.traction * s.brake, 0.0);
    EXPECT_GE(s.traction, 0.0);
    EXPECT_LE(s.traction, 1.0);
    EXPECT_GE(s.brake, 0.0);
    EXPECT_LE(s.brake, 1.0);
  }
}

TEST(EncoderTest, Speeds) {
  EXPECT_EQ(encoder_speed(0, 0, 1000, 0.26, 0.1), 0.0);
  EXPECT_NEAR(encoder_speed(100, 100, 1000, 0.26, 0.1), 1.634, 1e-3);
  EXPECT_NEAR(encoder_speed(100, 100, 1000, 0.26, 0.1), 0.1 * 2.0 * M_PI * 0.26 / 0.1, 1e-12);
  EXPECT_NEAR(encoder_speed(90, 110, 1000, 0.26, 0.1), encoder_speed(100, 100, 1000, 0.26, 0.1), 1e-12);
  EXPECT_THROW(encoder_speed(1, 1, 1000, 0.26, 0.0), std::invalid_argument);
}

TEST(MailboxTest, NewestWins) {
  CommandMailbox box;
  EXPECT_FALSE(box.take());
  box.post(encode_command(0.1, 1.0, 1, 0));
  box.post(encode_command(0.2, 2.0, 2, 0));
  const auto f = box.take();
  ASSERT_TRUE(f);
  EXPECT_EQ(decode_command(*f)->seq, 2);
  EXPECT_FALSE(box.take());
}

TEST(MailboxTest, ConcurrentFramesStayIntact) {
  CommandMailbox box;
  std::atomic<bool> done{false};
  std::thread producer([&] {
    for (int i = 0; i < 20000; ++i) box.post(encode_command(0.0001 * (i % 5000), 0.001 * i, i & 0xFF, 0));
    done = true;
  });
  int taken = 0, bad = 0;
  while (!done || taken == 0) {
    if (auto f = box.take()) {
      ++taken;
      if (!decode_command(*f)) ++bad;
    }
  }
  producer.join();
  EXPECT_GT(taken, 0);
  EXPECT_EQ(bad, 0);
}

}  // namespace
}  // namespace roadframe
