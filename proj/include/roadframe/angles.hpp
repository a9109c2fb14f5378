#pragma once

#include <cmath>
#include <numbers>

namespace roadframe {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  using std::remainder;
  Scalar r = remainder(a, Scalar(2 * kPi));
  if (r <= Scalar(-kPi)) r += Scalar(2 * kPi);
  return r;
}

}  // namespace roadframe
