#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace roadframe {

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

class EncodingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kFrameSteerMax = 0.52;    // rad
inline constexpr double kFrameSpeedMax = 65.535;  // m/s
inline constexpr double kSteerLsb = 1e-4;
inline constexpr double kSpeedLsb = 1e-3;
inline constexpr std::uint8_t kFlagEmergency = 0x01;

/// Wire layout:
///   0-1  int16  delta_r / 1e-4 rad, big-endian
///   2-3  uint16 V_r / 1e-3 m/s, big-endian
///   4    sequence counter (mod 256)
///   5    flags, bit0 = emergency
///   6-7  CRC-16/CCITT-FALSE over bytes 0-5, big-endian
struct CommandFrame {
  std::array<std::uint8_t, 8> bytes{};

  std::string hex() const;
  static CommandFrame from_hex(const std::string& text);
  bool operator==(const CommandFrame&) const = default;
};

struct FrameCommand {
  double delta_r = 0.0;
  double v_r = 0.0;
  std::uint8_t seq = 0;
  std::uint8_t flags = 0;

  bool operator==(const FrameCommand&) const = default;
};

/// Rounds to the nearest LSB. Throws EncodingError for values outside
/// |delta_r| <= 0.52, 0 <= V_r <= 65.535 or non-finite input.
CommandFrame encode_command(double delta_r, double v_r, std::uint8_t seq, std::uint8_t flags);
inline CommandFrame encode_command(const FrameCommand& c) { return encode_command(c.delta_r, c.v_r, c.seq, c.flags); }

/// Empty when the CRC does not match.
std::optional<FrameCommand> decode_command(const CommandFrame& frame);

/// True when `next` directly follows `prev` modulo 256.
constexpr bool consecutive(std::uint8_t prev, std::uint8_t next) {
  return static_cast<std::uint8_t>(prev + 1) == next;
}

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral_limit = 1.0;  // bound on ki * integral
  double out_min = -1.0;
  double out_max = 1.0;

  void validate() const;
};

inline PidGains default_steering_gains() { return {4.0, 1.0, 0.05, 0.5, -1.0, 1.0}; }
inline PidGains default_speed_gains() { return {0.8, 0.4, 0.0, 0.2, -1.0, 1.0}; }

struct PidState {
  double integral = 0.0;
  double last_measurement = 0.0;
  bool primed = false;
};

/// PID with the derivative taken on the measurement. The integral is clamped
/// to the integral limit and frozen while the output is saturated in the
/// direction of the error.
double pid_step(PidState& st, double ref, double measured, const PidGains& gains, double dt);

/// Normalised steering torque in [-1, 1].
double steering_loop_step(PidState& st, double delta_ref, double delta_measured, const PidGains& gains, double dt);

struct SpeedLoopOutput {
  double traction = 0.0;
  double brake = 0.0;
};

SpeedLoopOutput speed_loop_step(PidState& st, double v_ref, double v_measured, const PidGains& gains, double dt,
                                double deadband = 0.02);

struct ActuatorOutput {
  double steering_torque = 0.0;
  double traction = 0.0;
  double brake = 0.0;
};

/// Low-level actuator response used to exercise the loops. The steering
/// motor turns at omega_max * torque. Traction and brake map to a_max and
/// a_min, minus rolling drag, through a first-order lag.
struct ActuatorModelParams {
  double omega_max = 0.8;  // rad/s at full torque
  double delta_max = 0.52;
  double a_max = 1.5;
  double a_min = -3.0;
  double drag = 0.1;  // 1/s
  double tau_v = 0.4;
};

struct ActuatorModelState {
  double delta = 0.0;
  double v = 0.0;
  double accel = 0.0;
};

ActuatorModelState actuator_model_step(const ActuatorModelState& x, const ActuatorOutput& u,
                                       const ActuatorModelParams& p, double dt);

/// Mean rim speed of two wheel encoders over `dt`.
double encoder_speed(long ticks_left, long ticks_right, int ticks_per_rev, double wheel_radius, double dt);

/// Single-slot channel between the planner and the actuation task. The newest
/// frame overwrites any frame not yet taken.
class CommandMailbox {
 public:
  void post(const CommandFrame& frame);
  std::optional<CommandFrame> take();

 private:
  std::mutex mutex_;
  std::optional<CommandFrame> slot_;
};

struct ActuationConfig {
  PidGains steering = default_steering_gains();
  PidGains speed = default_speed_gains();
  double deadband = 0.02;
  double watchdog_timeout = 0.5;  // s without a valid frame
  double a_min = -3.0;            // ramp-down rate while the watchdog is tripped
};

/// Low-level controller: validates frames, holds the last valid command and
/// runs the steering and speed loops.
class ActuationController {
 public:
  explicit ActuationController(ActuationConfig cfg = {});

  /// Returns false (and keeps the previous command) on a CRC failure.
  bool receive(const CommandFrame& frame, double time);

  /// One control tick. The reference handed to the loops is the last valid
  /// command, ramped to zero speed once the watchdog has tripped.
  ActuatorOutput tick(double time, double dt, double delta_measured, double v_measured);

  double delta_ref() const { return delta_ref_; }
  double v_ref() const { return v_ref_; }
  bool watchdog_tripped() const { return tripped_; }
  bool emergency() const { return emergency_; }
  int rejected_frames() const { return rejected_; }
  int sequence_gaps() const { return gaps_; }
  /// Timestamped messages (watchdog trips, CRC rejections, sequence gaps).
  const std::vector<std::string>& events() const { return events_; }

 private:
  ActuationConfig cfg_;
  PidState steer_state_;
  PidState speed_state_;
  double delta_ref_ = 0.0;
  double v_ref_ = 0.0;
  double last_valid_time_ = 0.0;
  bool have_command_ = false;
  bool tripped_ = false;
  bool emergency_ = false;
  std::optional<std::uint8_t> last_seq_;
  int rejected_ = 0;
  int gaps_ = 0;
  std::vector<std::string> events_;
};

}  // namespace roadframe
