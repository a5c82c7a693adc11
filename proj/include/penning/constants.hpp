#pragma once

namespace penning {
namespace constants {

inline constexpr double pi = 3.14159265358979323846;

// CODATA values except where a specific printed value is part of the
// parameter convention for this code base.
inline constexpr double atomic_mass_kg   = 1.66053906660e-27;   // u [kg]
inline constexpr double elementary_charge = 1.60217646e-19;     // e [C]
inline constexpr double coulomb_constant = 8.9875517873681764e9; // k_e [N m^2 / C^2]
inline constexpr double hbar             = 1.054571817e-34;     // [J s]

inline constexpr double beryllium9_mass_u = 9.012182;           // 9Be+ [u]

} // namespace constants
} // namespace penning
