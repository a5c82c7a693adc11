#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "penning/equilibrium.hpp"
#include "penning/errors.hpp"

namespace penning {

// Eigenbasis of the planar stiffness matrix.  omega0 are the oscillation
// frequencies the crystal would have without the Lorentz coupling; the
// quadratic eigenproblem for the true modes is solved in this basis.
struct PlanarBasis {
    Eigen::MatrixXd k_matrix; // 2N x 2N, blocked [xx xy; yx yy], units m omega_z^2
    Eigen::VectorXd lambdas;  // eigenvalues of k_matrix, ascending
    Eigen::VectorXd omega0;   // sqrt(max(lambda, 0)) [omega_z]
    Eigen::MatrixXd b;        // orthonormal eigenvectors, columns aligned with lambdas
};

// Velocity-coupling matrix of the rotating frame expressed in the stiffness
// eigenbasis.  Site form: T^xy = -e B_eff per ion, T^yx = +e B_eff; units
// m omega_z.  Antisymmetry is enforced exactly.
struct GyroMatrix {
    Eigen::MatrixXd t;
    double omega_ceff = 0.0;
};

// Planar normal modes of the quadratic eigenproblem
// (omega^2 + i omega T - omega0^2) alpha = 0.  alphas are normalized so
// sum_nu (omega_lambda^2 + omega0_nu^2) |alpha_nu|^2 = omega_lambda
// (internal units, hbar = m = 1).  Modes with omega below zero_tol carry a
// zero alpha column and are listed in zero_modes.
struct PlanarModes {
    Eigen::VectorXd frequencies; // 2N positive branch, ascending [omega_z]
    Eigen::MatrixXcd alphas;     // 2N x 2N, column per mode
    int branch_split = 0;        // first branch_split modes lie below the axial band
    double branch_gap = 0.0;     // frequency gap at the split
    bool gap_warning = false;    // split gap comparable to branch spread
    std::vector<int> zero_modes;
    double zero_tol = 1e-10;
};

inline PlanarBasis build_planar_basis(const RotatingFrame& f, const Crystal& crystal) {
    PlanarBasis basis;
    basis.k_matrix = hessian(f, crystal.x, crystal.y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(basis.k_matrix);
    if (es.info() != Eigen::Success)
        throw NumericalError("planar stiffness eigensolver failed");
    basis.lambdas = es.eigenvalues();
    basis.b = es.eigenvectors();
    const int m = static_cast<int>(basis.lambdas.size());
    const double scale = std::max(1.0, basis.lambdas.cwiseAbs().maxCoeff());
    if (basis.lambdas(0) < -1e-8 * scale)
        throw NumericalError("planar stiffness has negative curvature: not an equilibrium");
    basis.omega0.resize(m);
    for (int i = 0; i < m; ++i)
        basis.omega0(i) = std::sqrt(std::max(basis.lambdas(i), 0.0));
    return basis;
}

inline GyroMatrix build_gyro(const RotatingFrame& f, const PlanarBasis& basis) {
    const int n2 = static_cast<int>(basis.b.rows());
    const int n = n2 / 2;
    const double w = f.omega_ceff;
    // T_site * b without forming T_site: x rows pick -w * (y rows of b).
    Eigen::MatrixXd tb(n2, n2);
    tb.topRows(n) = -w * basis.b.bottomRows(n);
    tb.bottomRows(n) = w * basis.b.topRows(n);
    Eigen::MatrixXd t = basis.b.transpose() * tb;
    GyroMatrix g;
    g.t = 0.5 * (t - t.transpose());
    g.omega_ceff = w;
    return g;
}

// Hermitian linearization of the quadratic eigenproblem: eigenvalues of
//   [ -i T   W0 ]
//   [  W0     0 ]
// come in +/- pairs whose positive half are the mode frequencies; the upper
// block of each eigenvector is omega * alpha.
inline PlanarModes solve_qep(const PlanarBasis& basis, const GyroMatrix& gyro) {
    // The slow drift modes sit orders of magnitude below the matrix norm, so
    // double precision leaves them with poor relative accuracy and the
    // inverse-frequency-weighted completeness sums inherit the damage.  The
    // linearized solve therefore runs in extended precision and only the
    // final mode data is rounded back to double.
    using Real = long double;
    using Cmplx = std::complex<Real>;
    using MatC = Eigen::Matrix<Cmplx, Eigen::Dynamic, Eigen::Dynamic>;
    using VecC = Eigen::Matrix<Cmplx, Eigen::Dynamic, 1>;

    const int m = static_cast<int>(basis.omega0.size()); // 2N
    const MatC tc = gyro.t.cast<Cmplx>();
    MatC big = MatC::Zero(2 * m, 2 * m);
    big.topLeftCorner(m, m) = Cmplx(0.0, -1.0) * tc;
    for (int i = 0; i < m; ++i) {
        big(i, m + i) = static_cast<Real>(basis.omega0(i));
        big(m + i, i) = static_cast<Real>(basis.omega0(i));
    }
    Eigen::SelfAdjointEigenSolver<MatC> es(big);
    if (es.info() != Eigen::Success)
        throw NumericalError("planar mode eigensolver failed");

    PlanarModes modes;
    modes.frequencies.resize(m);
    modes.alphas.resize(m, m);
    for (int i = 0; i < m; ++i) {
        Real w = es.eigenvalues()(m + i); // positive half, ascending
        modes.frequencies(i) = static_cast<double>(w);
        if (!(w > static_cast<Real>(modes.zero_tol))) {
            modes.alphas.col(i).setZero();
            modes.zero_modes.push_back(i);
            continue;
        }
        // The eigenvector stacks (omega alpha; W0 alpha) up to one scale, so
        // alpha can be read from either block.  Combining both in least
        // squares keeps the slow drift modes accurate: their signal lives in
        // the lower block, and dividing the noise-level upper block by a
        // tiny omega would otherwise dominate the result.
        const VecC upper = es.eigenvectors().col(m + i).head(m);
        const VecC lower = es.eigenvectors().col(m + i).tail(m);
        VecC alpha(m);
        for (int nu = 0; nu < m; ++nu) {
            const Real w0 = static_cast<Real>(basis.omega0(nu));
            alpha(nu) = (w * upper(nu) + w0 * lower(nu)) / (w * w + w0 * w0);
        }
        // Refine the frequency through the Rayleigh functional of the
        // quadratic problem; it is quadratically insensitive to the
        // remaining vector error.
        {
            const Real s2 = alpha.squaredNorm();
            const Real gy = std::imag((alpha.adjoint() * (tc * alpha))(0));
            Real k = 0.0;
            for (int nu = 0; nu < m; ++nu) {
                const Real w0 = static_cast<Real>(basis.omega0(nu));
                k += w0 * w0 * std::norm(alpha(nu));
            }
            const Real disc = std::sqrt(gy * gy + 4.0 * s2 * k);
            const Real refined = (gy + disc) / (2.0 * s2);
            if (refined > 0.0 && std::abs(refined - w) < 1e-6 * std::max<Real>(1.0, w))
                w = refined;
        }
        modes.frequencies(i) = static_cast<double>(w);
        Real s = 0.0;
        for (int nu = 0; nu < m; ++nu) {
            const Real w0 = static_cast<Real>(basis.omega0(nu));
            s += (w * w + w0 * w0) * std::norm(alpha(nu));
        }
        if (!(s > 0.0))
            throw NumericalError("planar mode normalization degenerate");
        alpha *= std::sqrt(w / s);
        // Deterministic overall phase: largest component real positive.
        int arg = 0;
        alpha.cwiseAbs().maxCoeff(&arg);
        const Real mag = std::abs(alpha(arg));
        if (mag > 0.0) alpha *= std::conj(alpha(arg)) / mag;
        for (int nu = 0; nu < m; ++nu)
            modes.alphas(nu, i) =
                std::complex<double>(static_cast<double>(alpha(nu).real()),
                                     static_cast<double>(alpha(nu).imag()));
    }

    const int n = m / 2;
    modes.branch_split = n;
    if (n >= 1 && m > n) {
        modes.branch_gap = modes.frequencies(n) - modes.frequencies(n - 1);
        const double lower_spread =
            modes.frequencies(n - 1) - modes.frequencies(0);
        modes.gap_warning = modes.branch_gap < 0.1 * std::max(lower_spread, 1e-300);
    }
    return modes;
}

inline PlanarModes planar_modes(const RotatingFrame& f, const Crystal& crystal) {
    const PlanarBasis basis = build_planar_basis(f, crystal);
    const GyroMatrix gyro = build_gyro(f, basis);
    return solve_qep(basis, gyro);
}

// Residuals of the exact relations the planar modes must satisfy:
// completeness and orthogonality sums, the commutator normalization, the
// defining quadratic eigenproblem, and the +/- symmetry of the linearized
// spectrum.  The full mode sums (completeness_x, symmetry, completeness_p)
// are meaningful only when no zero modes were excluded and come back NaN
// otherwise; completeness_p additionally needs every basis frequency
// nonzero.
struct IdentityReport {
    double orthogonality = 0.0;  // pairwise sum against delta * omega
    double completeness_x = 0.0; // position-space completeness
    double symmetry = 0.0;       // antisymmetric completeness combination
    double completeness_p = 0.0; // momentum-space completeness
    double commutator = 0.0;     // ladder commutation normalization
    double qep_residual = 0.0;   // per-mode defining equation
    double pairing = 0.0;        // +/- spectrum symmetry

    double worst() const {
        double w = 0.0;
        for (double v : {orthogonality, completeness_x, symmetry, completeness_p,
                         commutator, qep_residual, pairing})
            if (std::isfinite(v)) w = std::max(w, v);
        return w;
    }
};

inline IdentityReport verify_identities(const PlanarBasis& basis, const GyroMatrix& gyro,
                                        const PlanarModes& modes) {
    using Cmplx = std::complex<double>;
    const int m = static_cast<int>(modes.frequencies.size());
    const Eigen::MatrixXcd& a = modes.alphas;
    const Eigen::VectorXd& w = modes.frequencies;
    const Eigen::VectorXd w0sq = basis.omega0.cwiseProduct(basis.omega0);

    IdentityReport rep;

    // Orthogonality: omega_l (a^H a) omega_l' + a^H W0^2 a = delta * omega.
    {
        Eigen::MatrixXcd gram = a.adjoint() * a;
        Eigen::MatrixXcd pot = a.adjoint() * (w0sq.asDiagonal() * a);
        Eigen::MatrixXcd lhs = w.asDiagonal() * gram * w.asDiagonal();
        lhs += pot;
        lhs -= w.cast<Cmplx>().asDiagonal();
        rep.orthogonality = lhs.cwiseAbs().maxCoeff();
    }

    // Completeness in position space: 2 Re(a* D a^T) = I.  This and the
    // other full mode sums below are undefined once zero modes were dropped.
    if (modes.zero_modes.empty()) {
        Eigen::MatrixXcd p = a.conjugate() * (w.asDiagonal() * a.transpose());
        Eigen::MatrixXd lhs = 2.0 * p.real();
        lhs -= Eigen::MatrixXd::Identity(m, m);
        rep.completeness_x = lhs.cwiseAbs().maxCoeff();
    } else {
        rep.completeness_x = std::numeric_limits<double>::quiet_NaN();
    }

    // Antisymmetric combination vanishes: Im(a* a^T) = 0.
    if (modes.zero_modes.empty()) {
        Eigen::MatrixXcd p = a.conjugate() * a.transpose();
        rep.symmetry = 2.0 * p.imag().cwiseAbs().maxCoeff();
    } else {
        rep.symmetry = std::numeric_limits<double>::quiet_NaN();
    }

    // Completeness in momentum space: 2 Re(a* D^{-1} a^T) = diag(1/omega0^2).
    if (modes.zero_modes.empty() && basis.omega0.minCoeff() > 1e-9) {
        Eigen::VectorXd winv = w.cwiseInverse();
        Eigen::MatrixXcd p = a.conjugate() * (winv.asDiagonal() * a.transpose());
        Eigen::MatrixXd lhs = 2.0 * p.real();
        lhs -= Eigen::MatrixXd(w0sq.cwiseInverse().asDiagonal());
        rep.completeness_p = lhs.cwiseAbs().maxCoeff();
    } else {
        rep.completeness_p = std::numeric_limits<double>::quiet_NaN();
    }

    // Commutator normalization: (1/omega_l)(a^H W0^2 a) + (a^H a) omega_l' = delta.
    {
        Eigen::MatrixXcd gram = a.adjoint() * a;
        Eigen::MatrixXcd pot = a.adjoint() * (w0sq.asDiagonal() * a);
        Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Zero(m, m);
        for (int l = 0; l < m; ++l) {
            if (w(l) <= modes.zero_tol) continue;
            for (int lp = 0; lp < m; ++lp)
                lhs(l, lp) = pot(l, lp) / w(l) + gram(l, lp) * w(lp);
        }
        for (int l = 0; l < m; ++l)
            if (w(l) > modes.zero_tol) lhs(l, l) -= 1.0;
        rep.commutator = lhs.cwiseAbs().maxCoeff();
    }

    // Defining equation per mode.
    {
        Eigen::MatrixXcd ta = gyro.t.cast<Cmplx>() * a;
        double worst = 0.0;
        for (int l = 0; l < m; ++l) {
            if (w(l) <= modes.zero_tol) continue;
            Eigen::VectorXcd r = (w(l) * w(l)) * a.col(l);
            r += Cmplx(0.0, 1.0) * w(l) * ta.col(l);
            r -= w0sq.asDiagonal() * a.col(l);
            worst = std::max(worst, r.cwiseAbs().maxCoeff());
        }
        rep.qep_residual = worst;
    }

    // +/- symmetry of the full linearized spectrum.
    {
        using namespace std::complex_literals;
        Eigen::MatrixXcd big = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
        big.topLeftCorner(m, m) = -1.0i * gyro.t.cast<Cmplx>();
        for (int i = 0; i < m; ++i) {
            big(i, m + i) = basis.omega0(i);
            big(m + i, i) = basis.omega0(i);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(big, Eigen::EigenvaluesOnly);
        double worst = 0.0;
        for (int i = 0; i < m; ++i)
            worst = std::max(worst,
                             std::abs(es.eigenvalues()(i) + es.eigenvalues()(2 * m - 1 - i)));
        rep.pairing = worst;
    }
    return rep;
}

// Real-space displacement of a coherently excited planar mode at time t
// (internal units, hbar = m = 1):
//   delta R_j^beta = 2 |phi| Re{ (B alpha)_j^beta exp(-i(omega t + phase)) }.
// Per-component complex phases are kept, so circularly polarized modes trace
// ellipses; with the time dependence exp(-i omega t) the upper (cyclotron)
// branch orbits clockwise when B_eff > 0, matching the classical limit.
// phase = 0 reproduces the snapshot pattern 2 |phi| |v| cos(omega t - arg v).
inline Eigen::MatrixX2d coherent_displacement(const PlanarBasis& basis,
                                              const PlanarModes& modes, int mode,
                                              double amplitude, double phase, double t) {
    const int m = static_cast<int>(modes.frequencies.size());
    if (mode < 0 || mode >= m)
        throw ValidationError("planar mode index out of range");
    const int n = m / 2;
    const Eigen::VectorXcd v = basis.b * modes.alphas.col(mode);
    const std::complex<double> rot =
        std::exp(std::complex<double>(0.0, -(modes.frequencies(mode) * t + phase)));
    Eigen::MatrixX2d out(n, 2);
    for (int j = 0; j < n; ++j) {
        out(j, 0) = 2.0 * amplitude * std::real(v(j) * rot);
        out(j, 1) = 2.0 * amplitude * std::real(v(n + j) * rot);
    }
    return out;
}

} // namespace penning
