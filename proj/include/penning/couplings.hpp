#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "penning/axial_modes.hpp"
#include "penning/errors.hpp"
#include "penning/planar_modes.hpp"

namespace penning {

// Phase convention for the spatial beat pattern of a planar drive: either
// the laser phase delta_k * x at each equilibrium position, or the ion's
// polar angle.
enum class PlanarPhase { laser, polar };

// Spin-dependent optical-dipole drive.  f_o is a dimensionless amplitude;
// the physical coupling is recovered through the unit_scale recorded on the
// output.  mu is the beat (detuning) frequency in omega_z, delta_k the drive
// wavevector in 1/l0.
struct DriveConfig {
    double f_o = 1.0;
    double mu = 0.0;
    double delta_k = 0.0;
    PlanarPhase phase = PlanarPhase::laser;
};

// Effective Ising matrix.  Values are in units of F_O^2 / (4 m omega_z^2);
// multiply by that combination of the physical drive force and trap to get
// an energy.
struct CouplingMatrix {
    Eigen::MatrixXd j;
    double mu = 0.0;
    int excluded_modes = 0;
    std::string unit_scale = "F_O^2/(4 m omega_z^2)";
};

struct MidgapDetuning {
    double mu = 0.0;
    double gap = 0.0;
    bool degenerate = false;
};

// Drive tuned to the middle of the gap between modes k and k+1 (1-based,
// counted in ascending frequency order).
inline MidgapDetuning midgap_detuning(const Eigen::VectorXd& frequencies, int k) {
    const int n = static_cast<int>(frequencies.size());
    if (k < 1 || k >= n)
        throw ValidationError("midgap index must satisfy 1 <= k < number of modes");
    MidgapDetuning d;
    d.mu = 0.5 * (frequencies(k - 1) + frequencies(k));
    d.gap = frequencies(k) - frequencies(k - 1);
    d.degenerate = d.gap < 1e-12;
    return d;
}

namespace detail {

inline void check_resonance(const Eigen::VectorXd& frequencies, double mu,
                            double guard = 1e-9) {
    for (int i = 0; i < frequencies.size(); ++i) {
        if (std::abs(mu - frequencies(i)) < guard) {
            std::ostringstream os;
            os << "drive frequency " << mu << " omega_z is resonant with mode " << i
               << " at " << frequencies(i) << " omega_z";
            throw ResonanceError(os.str());
        }
    }
}

} // namespace detail

// Time-averaged axial coupling: J ~ sum_nu b_j b_j' / (mu^2 - omega_nu^2).
// Unstable (imaginary) modes enter through their negative stiffness
// eigenvalue, which only deepens the denominator.
inline CouplingMatrix axial_j_static(const AxialModes& modes, const DriveConfig& drive) {
    if (!(drive.mu > 0.0))
        throw ValidationError("drive frequency mu must be positive");
    detail::check_resonance(modes.frequencies, drive.mu);
    const int n = static_cast<int>(modes.frequencies.size());
    Eigen::VectorXd denom(n);
    for (int nu = 0; nu < n; ++nu)
        denom(nu) = drive.f_o * drive.f_o /
                    (drive.mu * drive.mu - modes.eigenvalues(nu));
    CouplingMatrix out;
    out.mu = drive.mu;
    out.j = modes.vectors * denom.asDiagonal() * modes.vectors.transpose();
    return out;
}

// Instantaneous axial coupling J(t).  The oscillatory bracket
// 1 + cos(2 mu t) - (2 mu / omega_nu) sin(omega_nu t) sin(mu t) averages to
// 1 and equals 2 at t = 0.  Demands a stable axial spectrum.
inline CouplingMatrix axial_j_time(const AxialModes& modes, const DriveConfig& drive,
                                   double t) {
    if (!(drive.mu > 0.0))
        throw ValidationError("drive frequency mu must be positive");
    if (!modes.stable)
        throw NumericalError("time-dependent coupling needs a stable axial spectrum");
    detail::check_resonance(modes.frequencies, drive.mu);
    const int n = static_cast<int>(modes.frequencies.size());
    const double mu = drive.mu;
    Eigen::VectorXd denom(n);
    for (int nu = 0; nu < n; ++nu) {
        const double w = modes.frequencies(nu);
        const double bracket =
            1.0 + std::cos(2.0 * mu * t) - (2.0 * mu / w) * std::sin(w * t) * std::sin(mu * t);
        denom(nu) = drive.f_o * drive.f_o * bracket / (mu * mu - w * w);
    }
    CouplingMatrix out;
    out.mu = mu;
    out.j = modes.vectors * denom.asDiagonal() * modes.vectors.transpose();
    return out;
}

// Static planar coupling for an in-plane drive along x.  Each mode
// contributes through its quantized amplitude alpha and the drive's spatial
// phase difference between the two ions.  Zero modes are excluded and
// counted.
inline CouplingMatrix planar_j_static(const PlanarBasis& basis, const PlanarModes& modes,
                                      const Crystal& crystal, const DriveConfig& drive) {
    if (!(drive.mu > 0.0))
        throw ValidationError("drive frequency mu must be positive");
    const int m = static_cast<int>(modes.frequencies.size());
    const int n = m / 2;
    {
        // Guard only against live (non-zero) modes.
        for (int l = 0; l < m; ++l) {
            if (modes.frequencies(l) <= modes.zero_tol) continue;
            if (std::abs(drive.mu - modes.frequencies(l)) < 1e-9) {
                std::ostringstream os;
                os << "drive frequency " << drive.mu
                   << " omega_z is resonant with planar mode " << l << " at "
                   << modes.frequencies(l) << " omega_z";
                throw ResonanceError(os.str());
            }
        }
    }

    Eigen::VectorXd theta(n);
    for (int j = 0; j < n; ++j)
        theta(j) = drive.phase == PlanarPhase::laser ? drive.delta_k * crystal.x(j)
                                                     : crystal.phase(j);

    const Eigen::MatrixXd bx = basis.b.topRows(n);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    int excluded = 0;
    for (int l = 0; l < m; ++l) {
        const double w = modes.frequencies(l);
        if (w <= modes.zero_tol) {
            ++excluded;
            continue;
        }
        const Eigen::VectorXcd v = bx * modes.alphas.col(l);
        const double weight = 2.0 * w / (drive.mu * drive.mu - w * w);
        acc.noalias() += weight * (v.real() * v.real().transpose() +
                                   v.imag() * v.imag().transpose());
    }
    CouplingMatrix out;
    out.mu = drive.mu;
    out.excluded_modes = excluded;
    out.j.resize(n, n);
    for (int j = 0; j < n; ++j)
        for (int jp = 0; jp < n; ++jp)
            out.j(j, jp) = drive.f_o * drive.f_o * acc(j, jp) * std::cos(theta(j) - theta(jp));
    return out;
}

} // namespace penning
