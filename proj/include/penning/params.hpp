#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "penning/constants.hpp"
#include "penning/errors.hpp"

namespace penning {

// How the crystal rotation is specified: either the rotating-wall drive
// frequency Omega directly, or the effective in-plane trap frequency
// omega_eff it produces.  Both in rad/s.
enum class RotationKind { rotation_frequency, effective_frequency };

struct RotationSpec {
    RotationKind kind = RotationKind::effective_frequency;
    double value = 0.0; // rad/s
};

// Physical description of the trap and ion species.  Frequencies are
// angular (rad/s).  wall_sign selects which lab axis the rotating wall
// stiffens: +1 makes x stiff and y soft, -1 the reverse.
struct TrapConfig {
    int n_ions = 1;
    double omega_z = 0.0;    // axial center-of-mass frequency [rad/s]
    double omega_c = 0.0;    // bare cyclotron frequency eB_z/m [rad/s]
    double omega_wall = 0.0; // rotating-wall strength, omega_w^2 = 2 e V_W / m [rad^2/s^2 -> stored as omega_w, rad/s]
    int wall_sign = +1;
    RotationSpec rotation;
    double mass = constants::beryllium9_mass_u * constants::atomic_mass_kg; // [kg]
    double charge = constants::elementary_charge;                          // [C]
    double k_e = constants::coulomb_constant;                              // [N m^2/C^2]
};

// Characteristic scales of the dimensionless formulation: lengths in l0,
// energies in m omega_z^2 l0^2, frequencies in omega_z.
struct Units {
    double length = 0.0; // l0 = (2 k_e e^2 / (m omega_z^2))^(1/3) [m]
    double energy = 0.0; // m omega_z^2 l0^2 [J]
};

struct Derived {
    double omega_rot = 0.0;    // Omega [rad/s]
    double omega_eff = 0.0;    // sqrt(omega_eff_sq) when confined, else NaN [rad/s]
    double omega_eff_sq = 0.0; // omega_c*Omega - Omega^2 - omega_z^2/2 [rad^2/s^2]
    double b_eff = 0.0;        // effective axial field in the rotating frame [T]
    double omega_ceff = 0.0;   // e B_eff / m = omega_c - 2 Omega [rad/s]
    Units units;
};

// Trap-stability summary.  beta2 and beta3 are quoted in units of
// m omega_z^2; omega_dc in units of omega_z.
struct StabilityReport {
    double beta1 = 0.0;    // 2 e V0 / beta2, dimensionless
    double beta2 = 0.0;    // radial confinement strength = (omega_eff/omega_z)^2
    double beta3 = 0.0;    // wall-reduced confinement along the soft axis
    double omega_dc = 0.0; // deconfinement rotation frequency [omega_z]
    bool confined = false;
};

// Everything the dimensionless numerics need.  Frequencies are in units
// of omega_z, lengths in l0, energies in m omega_z^2 l0^2.  In these
// units the Coulomb pair energy is 1/(2 r).
struct RotatingFrame {
    int n_ions = 0;
    double omega_eff_sq = 0.0; // (omega_eff/omega_z)^2
    double omega_eff = 0.0;
    double omega_wall = 0.0;   // omega_w/omega_z >= 0
    double wall_sign = +1.0;
    double omega_ceff = 0.0;   // (omega_c - 2 Omega)/omega_z, sets the Lorentz coupling
};

inline void validate(const TrapConfig& cfg) {
    if (cfg.n_ions < 1)
        throw ValidationError("n_ions must be >= 1, got " + std::to_string(cfg.n_ions));
    if (!(cfg.omega_z > 0.0))
        throw ValidationError("omega_z must be positive");
    if (!(cfg.omega_c > 0.0))
        throw ValidationError("omega_c must be positive");
    if (cfg.omega_wall < 0.0)
        throw ValidationError("omega_wall must be non-negative");
    if (cfg.wall_sign != 1 && cfg.wall_sign != -1)
        throw ValidationError("wall_sign must be +1 or -1, got " + std::to_string(cfg.wall_sign));
    if (!(cfg.mass > 0.0) || !(cfg.charge > 0.0) || !(cfg.k_e > 0.0))
        throw ValidationError("mass, charge, and k_e must be positive");
    if (cfg.rotation.value < 0.0)
        throw ValidationError("rotation specification must be non-negative");
}

inline Units make_units(const TrapConfig& cfg) {
    Units u;
    u.length = std::cbrt(2.0 * cfg.k_e * cfg.charge * cfg.charge /
                         (cfg.mass * cfg.omega_z * cfg.omega_z));
    u.energy = cfg.mass * cfg.omega_z * cfg.omega_z * u.length * u.length;
    return u;
}

// Resolve the rotation specification.  Given omega_eff, the rotating-wall
// frequency is the smaller root of Omega^2 - omega_c Omega +
// (omega_eff^2 + omega_z^2/2) = 0, i.e. the branch with Omega < omega_c/2.
inline Derived derive(const TrapConfig& cfg) {
    validate(cfg);
    Derived d;
    d.units = make_units(cfg);
    const double wz2 = cfg.omega_z * cfg.omega_z;
    if (cfg.rotation.kind == RotationKind::rotation_frequency) {
        d.omega_rot = cfg.rotation.value;
        d.omega_eff_sq = cfg.omega_c * d.omega_rot - d.omega_rot * d.omega_rot - 0.5 * wz2;
    } else {
        const double weff = cfg.rotation.value;
        const double weff_max_sq = 0.25 * cfg.omega_c * cfg.omega_c - 0.5 * wz2;
        if (weff_max_sq < 0.0)
            throw ValidationError("no stable rotation exists: omega_c^2/4 < omega_z^2/2");
        if (weff * weff > weff_max_sq) {
            std::ostringstream os;
            os << "omega_eff exceeds the maximum attainable "
               << std::sqrt(weff_max_sq) / cfg.omega_z << " omega_z";
            throw ValidationError(os.str());
        }
        const double disc = cfg.omega_c * cfg.omega_c - 4.0 * (weff * weff + 0.5 * wz2);
        d.omega_rot = 0.5 * (cfg.omega_c - std::sqrt(disc));
        d.omega_eff_sq = weff * weff;
    }
    d.omega_eff = d.omega_eff_sq >= 0.0 ? std::sqrt(d.omega_eff_sq)
                                        : std::numeric_limits<double>::quiet_NaN();
    d.omega_ceff = cfg.omega_c - 2.0 * d.omega_rot;
    d.b_eff = cfg.mass * d.omega_ceff / cfg.charge;
    return d;
}

// Stability of the single-particle rotating-frame potential.  All three
// beta criteria must hold for a crystal to form; omega_dc is the rotation
// frequency at which radial confinement is lost.
inline StabilityReport stability(const TrapConfig& cfg) {
    const Derived d = derive(cfg);
    const double wz2 = cfg.omega_z * cfg.omega_z;
    const double ww = cfg.omega_wall / cfg.omega_z;
    StabilityReport r;
    r.beta2 = d.omega_eff_sq / wz2;
    r.beta1 = 1.0 / r.beta2; // 2 e V0 = m omega_z^2
    r.beta3 = 0.5 * (r.beta2 - ww * ww);
    const double disc = 0.25 * cfg.omega_c * cfg.omega_c / wz2 - 0.5 - ww * ww;
    if (disc < 0.0)
        throw ValidationError(
            "deconfinement frequency undefined: omega_c^2/4 - omega_z^2/2 - omega_w^2 < 0");
    r.omega_dc = 0.5 * cfg.omega_c / cfg.omega_z - std::sqrt(disc);
    r.confined = (r.beta2 > 0.0) && (r.beta3 > 0.0);
    return r;
}

// Dimensionless parameter bundle used by every downstream module.  Only
// meaningful for confined configurations.
inline RotatingFrame make_frame(const TrapConfig& cfg) {
    const Derived d = derive(cfg);
    const StabilityReport s = stability(cfg);
    if (!s.confined) {
        std::ostringstream os;
        os << "configuration is not confined: beta2 = " << s.beta2
           << ", beta3 = " << s.beta3 << " (units of m omega_z^2)";
        throw ValidationError(os.str());
    }
    RotatingFrame f;
    f.n_ions = cfg.n_ions;
    f.omega_eff_sq = d.omega_eff_sq / (cfg.omega_z * cfg.omega_z);
    f.omega_eff = std::sqrt(f.omega_eff_sq);
    f.omega_wall = cfg.omega_wall / cfg.omega_z;
    f.wall_sign = static_cast<double>(cfg.wall_sign);
    f.omega_ceff = d.omega_ceff / cfg.omega_z;
    return f;
}

// Standard 9Be+ configuration used throughout: omega_z = 2 pi x 795 kHz,
// omega_c = 9.645 omega_z.  Rotation given as omega_eff, wall as omega_w,
// both in units of omega_z.
inline TrapConfig beryllium_trap(int n_ions, double omega_eff_over_wz,
                                 double omega_wall_over_wz, int wall_sign = +1) {
    TrapConfig cfg;
    cfg.n_ions = n_ions;
    cfg.omega_z = 2.0 * constants::pi * 795.0e3;
    cfg.omega_c = 9.645 * cfg.omega_z;
    cfg.omega_wall = omega_wall_over_wz * cfg.omega_z;
    cfg.wall_sign = wall_sign;
    cfg.rotation = {RotationKind::effective_frequency, omega_eff_over_wz * cfg.omega_z};
    return cfg;
}

} // namespace penning
