#pragma once

#include <stdexcept>

namespace roadframe {

enum class GateLevel { p99, p999 };

/// Chi-square inverse CDF for 1..4 degrees of freedom at the gate levels used
/// by the filters.
inline double chi_square_gate(int dof, GateLevel level) {
  static constexpr double k99[] = {6.634897, 9.210340, 11.344867, 13.276704};
  static constexpr double k999[] = {10.827566, 13.815511, 16.266236, 18.466827};
  if (dof < 1 || dof > 4) throw std::out_of_range("chi-square gate only tabulated for 1..4 dof");
  return level == GateLevel::p99 ? k99[dof - 1] : k999[dof - 1];
}

}  // namespace roadframe
