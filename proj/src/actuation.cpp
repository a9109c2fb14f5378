#include "roadframe/actuation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace roadframe {

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t byte : data) {
    crc ^= static_cast<std::uint16_t>(byte) << 8;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
    }
  }
  return crc;
}

std::string CommandFrame::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(16);
  for (std::uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

CommandFrame CommandFrame::from_hex(const std::string& text) {
  if (text.size() != 16) throw std::invalid_argument("frame hex must be 16 characters: '" + text + "'");
  CommandFrame f;
  for (int i = 0; i < 8; ++i) {
    unsigned value = 0;
    for (int j = 0; j < 2; ++j) {
      const char c = text[2 * i + j];
      unsigned d;
      if (c >= '0' && c <= '9') {
        d = c - '0';
      } else if (c >= 'a' && c <= 'f') {
        d = c - 'a' + 10;
      } else if (c >= 'A' && c <= 'F') {
        d = c - 'A' + 10;
      } else {
        throw std::invalid_argument("bad hex digit in frame: '" + text + "'");
      }
      value = value * 16 + d;
    }
    f.bytes[i] = static_cast<std::uint8_t>(value);
  }
  return f;
}

CommandFrame encode_command(double delta_r, double v_r, std::uint8_t seq, std::uint8_t flags) {
  if (!std::isfinite(delta_r) || std::abs(delta_r) > kFrameSteerMax) {
    throw EncodingError("steering command out of range: " + std::to_string(delta_r));
  }
  if (!std::isfinite(v_r) || v_r < 0.0 || v_r > kFrameSpeedMax) {
    throw EncodingError("speed command out of range: " + std::to_string(v_r));
  }
  const auto d = static_cast<std::int16_t>(std::lround(delta_r / kSteerLsb));
  const long vq = std::lround(v_r / kSpeedLsb);
  const auto v = static_cast<std::uint16_t>(std::min(vq, 65535L));
  const auto du = static_cast<std::uint16_t>(d);

  CommandFrame f;
  f.bytes[0] = static_cast<std::uint8_t>(du >> 8);
  f.bytes[1] = static_cast<std::uint8_t>(du & 0xFF);
  f.bytes[2] = static_cast<std::uint8_t>(v >> 8);
  f.bytes[3] = static_cast<std::uint8_t>(v & 0xFF);
  f.bytes[4] = seq;
  f.bytes[5] = flags;
  const std::uint16_t crc = crc16_ccitt_false(std::span(f.bytes).first(6));
  f.bytes[6] = static_cast<std::uint8_t>(crc >> 8);
  f.bytes[7] = static_cast<std::uint8_t>(crc & 0xFF);
  return f;
}

std::optional<FrameCommand> decode_command(const CommandFrame& frame) {
  const std::uint16_t crc = crc16_ccitt_false(std::span(frame.bytes).first(6));
  if (frame.bytes[6] != (crc >> 8) || frame.bytes[7] != (crc & 0xFF)) return std::nullopt;
  const auto d = static_cast<std::int16_t>(static_cast<std::uint16_t>((frame.bytes[0] << 8) | frame.bytes[1]));
  const auto v = static_cast<std::uint16_t>((frame.bytes[2] << 8) | frame.bytes[3]);
  FrameCommand c;
  c.delta_r = d * kSteerLsb;
  c.v_r = v * kSpeedLsb;
  c.seq = frame.bytes[4];
  c.flags = frame.bytes[5];
  return c;
}

void PidGains::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("PidGains: " + what); };
  if (!std::isfinite(kp) || !std::isfinite(ki) || !std::isfinite(kd)) fail("gains must be finite");
  if (ki < 0.0) fail("ki must be >= 0");
  if (!std::isfinite(integral_limit) || integral_limit < 0.0) fail("integral_limit must be finite and >= 0");
  if (!std::isfinite(out_min) || !std::isfinite(out_max) || out_min >= out_max) fail("output limits must be finite and ordered");
}

double pid_step(PidState& st, double ref, double measured, const PidGains& gains, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pid_step: dt must be > 0");
  const double error = ref - measured;
  const double d_meas = st.primed ? (measured - st.last_measurement) / dt : 0.0;
  st.last_measurement = measured;
  st.primed = true;

  const double p = gains.kp * error;
  const double d = -gains.kd * d_meas;
  double i = gains.ki * st.integral;
  const double unsat = p + i + d;
  // Conditional integration: hold the integral when pushing further into saturation.
  const bool push_high = unsat >= gains.out_max && error > 0.0;
  const bool push_low = unsat <= gains.out_min && error < 0.0;
  if (!push_high && !push_low && gains.ki > 0.0) {
    st.integral += error * dt;
    const double lim = gains.integral_limit / gains.ki;
    st.integral = std::clamp(st.integral, -lim, lim);
    i = gains.ki * st.integral;
  }
  return std::clamp(p + i + d, gains.out_min, gains.out_max);
}

double steering_loop_step(PidState& st, double delta_ref, double delta_measured, const PidGains& gains, double dt) {
  return std::clamp(pid_step(st, delta_ref, delta_measured, gains, dt), -1.0, 1.0);
}

SpeedLoopOutput speed_loop_step(PidState& st, double v_ref, double v_measured, const PidGains& gains, double dt,
                                double deadband) {
  const double u = pid_step(st, v_ref, v_measured, gains, dt);
  SpeedLoopOutput out;
  if (u > deadband) {
    out.traction = std::min(u, 1.0);
  } else if (u < -deadband) {
    out.brake = std::min(-u, 1.0);
  }
  return out;
}

ActuatorModelState actuator_model_step(const ActuatorModelState& x, const ActuatorOutput& u,
                                       const ActuatorModelParams& p, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("actuator_model_step: dt must be > 0");
  ActuatorModelState out = x;
  out.delta = std::clamp(x.delta + dt * p.omega_max * std::clamp(u.steering_torque, -1.0, 1.0), -p.delta_max,
                         p.delta_max);
  const double a_cmd = p.a_max * u.traction + p.a_min * u.brake - p.drag * x.v;
  out.accel = x.accel + dt * (a_cmd - x.accel) / p.tau_v;
  out.v = std::max(0.0, x.v + dt * x.accel);
  return out;
}

double encoder_speed(long ticks_left, long ticks_right, int ticks_per_rev, double wheel_radius, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("encoder_speed: dt must be > 0");
  if (ticks_per_rev <= 0) throw std::invalid_argument("encoder_speed: ticks_per_rev must be > 0");
  const double per_tick = 2.0 * std::numbers::pi * wheel_radius / ticks_per_rev;
  return 0.5 * (static_cast<double>(ticks_left) + static_cast<double>(ticks_right)) * per_tick / dt;
}

void CommandMailbox::post(const CommandFrame& frame) {
  std::lock_guard lock(mutex_);
  slot_ = frame;
}

std::optional<CommandFrame> CommandMailbox::take() {
  std::lock_guard lock(mutex_);
  std::optional<CommandFrame> out;
  out.swap(slot_);
  return out;
}

ActuationController::ActuationController(ActuationConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.steering.validate();
  cfg_.speed.validate();
  if (!(cfg_.watchdog_timeout > 0.0)) throw std::invalid_argument("ActuationConfig: watchdog_timeout must be > 0");
  if (!(cfg_.a_min < 0.0)) throw std::invalid_argument("ActuationConfig: a_min must be < 0");
}

namespace {
std::string stamp(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t=%.3f ", t);
  return buf;
}
}  // namespace

bool ActuationController::receive(const CommandFrame& frame, double time) {
  const auto c = decode_command(frame);
  if (!c) {
    ++rejected_;
    events_.push_back(stamp(time) + "frame rejected: bad CRC " + frame.hex());
    return false;
  }
  if (last_seq_ && !consecutive(*last_seq_, c->seq)) {
    ++gaps_;
    std::ostringstream os;
    os << stamp(time) << "sequence gap " << int(*last_seq_) << " -> " << int(c->seq);
    events_.push_back(os.str());
  }
  last_seq_ = c->seq;
  delta_ref_ = c->delta_r;
  v_ref_ = c->v_r;
  emergency_ = (c->flags & kFlagEmergency) != 0;
  last_valid_time_ = time;
  have_command_ = true;
  if (tripped_) events_.push_back(stamp(time) + "watchdog cleared");
  tripped_ = false;
  return true;
}

ActuatorOutput ActuationController::tick(double time, double dt, double delta_measured, double v_measured) {
  const bool stale = !have_command_ || time - last_valid_time_ > cfg_.watchdog_timeout;
  if (stale && !tripped_) {
    tripped_ = true;
    events_.push_back(stamp(time) + "watchdog tripped: no valid frame");
  }
  if (tripped_ || emergency_) v_ref_ = std::max(0.0, v_ref_ + cfg_.a_min * dt);

  ActuatorOutput out;
  out.steering_torque = steering_loop_step(steer_state_, delta_ref_, delta_measured, cfg_.steering, dt);
  const SpeedLoopOutput s = speed_loop_step(speed_state_, v_ref_, v_measured, cfg_.speed, dt, cfg_.deadband);
  out.traction = s.traction;
  out.brake = s.brake;
  return out;
}

}  // namespace roadframe
