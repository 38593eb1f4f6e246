#pragma once

// Module-level numerical defaults. Everything that forwards a tolerance
// (CLI flags, checkers) reads it from here.

#include <cstddef>

namespace mfcurv::tol {

/// Construction tolerance for measures, tangent vectors and edge fields.
inline constexpr double construction = 1e-12;
/// Tolerance for algebraic identities (integration by parts, detailed balance).
inline constexpr double identity = 1e-10;
/// Finite-difference checks in the model validator.
inline constexpr double finite_difference = 1e-6;
/// Central finite-difference step used by the validator.
inline constexpr double fd_step = 1e-6;

}  // namespace mfcurv::tol

namespace mfcurv::defaults {

inline constexpr std::size_t distance_steps = 32;
inline constexpr std::size_t kappa_starts = 16;
inline constexpr double boundary_clamp = 1e-9;
inline constexpr double integrator_tol = 1e-9;
inline constexpr double sampler_floor = 1e-4;
inline constexpr unsigned long long seed = 7;

}  // namespace mfcurv::defaults
