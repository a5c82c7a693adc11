#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "penning/equilibrium.hpp"
#include "penning/params.hpp"
#include "penning/planar_modes.hpp"
#include "penning/seed_lattice.hpp"

using namespace penning;

namespace {

RotatingFrame frame(int n, double weff = 0.16, double ww = 0.04, int sign = +1) {
    return make_frame(beryllium_trap(n, weff, ww, sign));
}

// Stiffness eigenbasis built by hand (identity basis, prescribed spectrum)
// to exercise bookkeeping paths deterministically.
PlanarBasis diag_basis(const Eigen::VectorXd& lambdas) {
    PlanarBasis b;
    const int m = static_cast<int>(lambdas.size());
    b.k_matrix = Eigen::MatrixXd(lambdas.asDiagonal());
    b.lambdas = lambdas;
    b.omega0 = lambdas.cwiseMax(0.0).cwiseSqrt();
    b.b = Eigen::MatrixXd::Identity(m, m);
    return b;
}

GyroMatrix no_gyro(int m) {
    GyroMatrix g;
    g.t = Eigen::MatrixXd::Zero(m, m);
    g.omega_ceff = 0.0;
    return g;
}

// Signed area of a sampled closed orbit of one ion (shoelace); negative
// means clockwise.
double orbit_area(const PlanarBasis& basis, const PlanarModes& modes, int mode) {
    const double w = modes.frequencies(mode);
    const int steps = 256;
    double area = 0.0;
    Eigen::MatrixX2d prev = coherent_displacement(basis, modes, mode, 0.4, 0.0, 0.0);
    for (int k = 1; k <= steps; ++k) {
        const double t = 2.0 * constants::pi / w * k / steps;
        const Eigen::MatrixX2d cur = coherent_displacement(basis, modes, mode, 0.4, 0.0, t);
        area += 0.5 * (prev(0, 0) * cur(0, 1) - cur(0, 0) * prev(0, 1));
        prev = cur;
    }
    return area;
}

} // namespace

TEST_CASE("single ion doublet matches the closed form") {
    const RotatingFrame f = frame(1, 0.16, 0.0);
    const Crystal c = solve_crystal(f);
    const PlanarModes m = planar_modes(f, c);

    const double half_b = 0.5 * f.omega_ceff;
    const double hi = std::sqrt(f.omega_eff_sq + half_b * half_b) + half_b;
    const double lo = std::sqrt(f.omega_eff_sq + half_b * half_b) - half_b;
    REQUIRE(m.frequencies.size() == 2);
    REQUIRE(m.frequencies(0) == Catch::Approx(lo).epsilon(1e-10));
    REQUIRE(m.frequencies(1) == Catch::Approx(hi).epsilon(1e-10));
    // Product of the doublet is the squared effective frequency.
    REQUIRE(m.frequencies(0) * m.frequencies(1) ==
            Catch::Approx(f.omega_eff_sq).epsilon(1e-10));
}

TEST_CASE("single ion anisotropic spectrum solves the biquadratic") {
    const RotatingFrame f = frame(1, 0.16, 0.04);
    const Crystal c = solve_crystal(f);

    // Stiffness of a single ion is the bare trap curvature.
    const PlanarBasis basis = build_planar_basis(f, c);
    const double a = f.omega_eff_sq + f.omega_wall * f.omega_wall;
    const double b = f.omega_eff_sq - f.omega_wall * f.omega_wall;
    REQUIRE(basis.lambdas(0) == Catch::Approx(b).epsilon(1e-12));
    REQUIRE(basis.lambdas(1) == Catch::Approx(a).epsilon(1e-12));

    // omega^4 - (a + b + wB^2) omega^2 + a b = 0.
    const double wb2 = f.omega_ceff * f.omega_ceff;
    const double s = a + b + wb2;
    const double disc = std::sqrt(s * s - 4.0 * a * b);
    const double lo = std::sqrt(0.5 * (s - disc));
    const double hi = std::sqrt(0.5 * (s + disc));

    const PlanarModes m = planar_modes(f, c);
    REQUIRE(m.frequencies(0) == Catch::Approx(lo).epsilon(1e-10));
    REQUIRE(m.frequencies(1) == Catch::Approx(hi).epsilon(1e-10));
}

TEST_CASE("without a magnetic field the modes are the stiffness modes") {
    TrapConfig cfg = beryllium_trap(2, 0.16, 0.3);
    cfg.rotation = {RotationKind::rotation_frequency, 0.5 * cfg.omega_c};
    const RotatingFrame f = make_frame(cfg);
    REQUIRE(std::abs(f.omega_ceff) < 1e-14);

    const Crystal c = solve_crystal(f);
    const PlanarBasis basis = build_planar_basis(f, c);
    const GyroMatrix gyro = build_gyro(f, basis);
    REQUIRE(gyro.t.cwiseAbs().maxCoeff() < 1e-14);

    const PlanarModes m = solve_qep(basis, gyro);
    for (int i = 0; i < 4; ++i)
        REQUIRE(m.frequencies(i) == Catch::Approx(basis.omega0(i)).margin(1e-10));

    // Isolated modes keep real mode vectors (up to the fixed gauge).
    for (int i = 0; i < 4; ++i) {
        const bool isolated =
            (i == 0 || m.frequencies(i) - m.frequencies(i - 1) > 1e-6) &&
            (i == 3 || m.frequencies(i + 1) - m.frequencies(i) > 1e-6);
        if (isolated) REQUIRE(m.alphas.col(i).imag().cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("mode identities hold to solver precision") {
    for (int n : {1, 2, 7}) {
        const RotatingFrame f = frame(n, 0.16, 0.04);
        const Crystal c = solve_crystal(f);
        const PlanarBasis basis = build_planar_basis(f, c);
        const GyroMatrix gyro = build_gyro(f, basis);
        const PlanarModes m = solve_qep(basis, gyro);
        REQUIRE(m.zero_modes.empty());

        const IdentityReport rep = verify_identities(basis, gyro, m);
        CAPTURE(n, rep.orthogonality, rep.completeness_x, rep.symmetry,
                rep.completeness_p, rep.commutator, rep.qep_residual, rep.pairing);
        REQUIRE(std::isfinite(rep.completeness_p));
        REQUIRE(rep.worst() < 1e-9);
    }
}

TEST_CASE("modes satisfy the site-space equation of motion") {
    const RotatingFrame f = frame(7, 0.16, 0.04);
    const Crystal c = solve_crystal(f);
    const PlanarBasis basis = build_planar_basis(f, c);
    const GyroMatrix gyro = build_gyro(f, basis);
    const PlanarModes m = solve_qep(basis, gyro);

    // Independent construction of the site-space velocity coupling.
    const int n = 7;
    Eigen::MatrixXd t_site = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    t_site.topRightCorner(n, n) = -f.omega_ceff * Eigen::MatrixXd::Identity(n, n);
    t_site.bottomLeftCorner(n, n) = f.omega_ceff * Eigen::MatrixXd::Identity(n, n);

    for (int l = 0; l < 2 * n; ++l) {
        const double w = m.frequencies(l);
        const Eigen::VectorXcd v = basis.b * m.alphas.col(l);
        Eigen::VectorXcd r = w * w * v;
        r += std::complex<double>(0.0, 1.0) * w * (t_site * v);
        r -= basis.k_matrix * v;
        REQUIRE(r.cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("free crystal orientation shows up as a zero-frequency mode") {
    const RotatingFrame f = frame(7, 0.16, 0.0);
    MinimizeOptions opts;
    opts.tol = 1e-12;
    const Crystal c = solve_crystal(f, 0.0, opts);
    const PlanarModes m = planar_modes(f, c);
    REQUIRE(m.frequencies(0) >= 0.0);
    REQUIRE(m.frequencies(0) < 1e-6);

    // A finite wall re-pins the orientation.
    const RotatingFrame fw = frame(7, 0.16, 0.04);
    const PlanarModes mw = planar_modes(fw, solve_crystal(fw, 0.0, opts));
    REQUIRE(mw.frequencies(0) > 1e-4);
}

TEST_CASE("branches split around the magnetic frequency scale") {
    const RotatingFrame f = frame(19, 0.16, 0.04);
    const Crystal c = solve_crystal(f);
    const PlanarModes m = planar_modes(f, c);
    REQUIRE(m.branch_split == 19);

    // Drift branch stays far below the axial band; cyclotron branch sits
    // near the effective cyclotron frequency, far above it.
    REQUIRE(m.frequencies(18) < 0.5);
    REQUIRE(m.frequencies(19) > 0.8 * f.omega_ceff);
    REQUIRE(m.branch_gap ==
            Catch::Approx(m.frequencies(19) - m.frequencies(18)).margin(1e-14));
    REQUIRE_FALSE(m.gap_warning);
}

TEST_CASE("gap warning flags a split comparable to the branch spread") {
    Eigen::VectorXd close(4);
    close << 1.0, 4.0, 4.0804, 81.0; // omega0 = 1, 2, 2.02, 9
    const PlanarModes warn = solve_qep(diag_basis(close), no_gyro(4));
    REQUIRE(warn.branch_split == 2);
    REQUIRE(warn.branch_gap == Catch::Approx(0.02).margin(1e-12));
    REQUIRE(warn.gap_warning);

    Eigen::VectorXd wide(4);
    wide << 1.0, 1.21, 100.0, 121.0; // omega0 = 1, 1.1, 10, 11
    REQUIRE_FALSE(solve_qep(diag_basis(wide), no_gyro(4)).gap_warning);
}

TEST_CASE("exact zero modes are excluded and zeroed") {
    Eigen::VectorXd lam(2);
    lam << 0.0, 1.0;
    const PlanarModes m = solve_qep(diag_basis(lam), no_gyro(2));
    REQUIRE(m.zero_modes == std::vector<int>{0});
    REQUIRE(m.frequencies(0) == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(m.alphas.col(0).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(m.alphas.col(1).cwiseAbs().maxCoeff() > 0.0);

    // Momentum completeness is undefined with an excluded mode.
    const IdentityReport rep =
        verify_identities(diag_basis(lam), no_gyro(2), m);
    REQUIRE(std::isnan(rep.completeness_p));
    REQUIRE(rep.worst() < 1e-12);
}

TEST_CASE("cyclotron orbits run clockwise, drift orbits counterclockwise") {
    const RotatingFrame f = frame(1, 0.16, 0.0);
    REQUIRE(f.omega_ceff > 0.0);
    const Crystal c = solve_crystal(f);
    const PlanarBasis basis = build_planar_basis(f, c);
    const PlanarModes m = solve_qep(basis, build_gyro(f, basis));

    REQUIRE(orbit_area(basis, m, 1) < 0.0); // fast branch
    REQUIRE(orbit_area(basis, m, 0) > 0.0); // slow branch

    // The isotropic single-ion orbit is a circle.
    const double w = m.frequencies(1);
    double rmin = 1e300, rmax = 0.0;
    for (int k = 0; k < 64; ++k) {
        const Eigen::MatrixX2d d =
            coherent_displacement(basis, m, 1, 0.4, 0.0, 2.0 * constants::pi / w * k / 64.0);
        const double r = std::hypot(d(0, 0), d(0, 1));
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
    }
    REQUIRE(rmax > 0.0);
    REQUIRE((rmax - rmin) / rmax < 1e-9);
}

TEST_CASE("displacement snapshot and phase conventions") {
    const RotatingFrame f = frame(2, 0.16, 0.04);
    const Crystal c = solve_crystal(f);
    const PlanarBasis basis = build_planar_basis(f, c);
    const PlanarModes m = solve_qep(basis, build_gyro(f, basis));

    // t = 0, phase = 0 is twice the amplitude times the real part of the
    // site-space mode vector.
    const int mode = 2;
    const Eigen::VectorXcd v = basis.b * m.alphas.col(mode);
    const Eigen::MatrixX2d snap = coherent_displacement(basis, m, mode, 0.7, 0.0, 0.0);
    for (int j = 0; j < 2; ++j) {
        REQUIRE(snap(j, 0) == Catch::Approx(2.0 * 0.7 * v(j).real()).margin(1e-12));
        REQUIRE(snap(j, 1) == Catch::Approx(2.0 * 0.7 * v(2 + j).real()).margin(1e-12));
    }

    // Advancing the phase offset is the same as advancing time.
    const double w = m.frequencies(mode);
    const Eigen::MatrixX2d by_phase = coherent_displacement(basis, m, mode, 0.7, 0.9, 0.0);
    const Eigen::MatrixX2d by_time = coherent_displacement(basis, m, mode, 0.7, 0.0, 0.9 / w);
    REQUIRE((by_phase - by_time).cwiseAbs().maxCoeff() < 1e-12);

    REQUIRE_THROWS_AS(coherent_displacement(basis, m, 4, 1.0, 0.0, 0.0), ValidationError);
    REQUIRE_THROWS_AS(coherent_displacement(basis, m, -1, 1.0, 0.0, 0.0), ValidationError);
}

TEST_CASE("a field-free harmonic displacement rings down through zero") {
    TrapConfig cfg = beryllium_trap(2, 0.16, 0.3);
    cfg.rotation = {RotationKind::rotation_frequency, 0.5 * cfg.omega_c};
    const RotatingFrame f = make_frame(cfg);
    const Crystal c = solve_crystal(f);
    const PlanarBasis basis = build_planar_basis(f, c);
    const PlanarModes m = solve_qep(basis, build_gyro(f, basis));

    // Standing-wave motion: a quarter period after the snapshot the
    // displacement vanishes identically.
    const int mode = 3;
    const double w = m.frequencies(mode);
    const Eigen::MatrixX2d at0 = coherent_displacement(basis, m, mode, 0.5, 0.0, 0.0);
    const Eigen::MatrixX2d quarter =
        coherent_displacement(basis, m, mode, 0.5, 0.0, 0.5 * constants::pi / w);
    REQUIRE(at0.cwiseAbs().maxCoeff() > 1e-3);
    REQUIRE(quarter.cwiseAbs().maxCoeff() < 1e-9 * at0.cwiseAbs().maxCoeff());
}

TEST_CASE("non-equilibrium input is rejected by the stiffness check") {
    const RotatingFrame f = frame(2, 0.16, 0.04);
    Crystal c;
    c.x = Eigen::VectorXd(2);
    c.y = Eigen::VectorXd::Zero(2);
    c.x << -0.25, 0.25; // pair squeezed along the stiff axis
    c.radius = c.x.cwiseAbs();
    c.phase = Eigen::VectorXd::Zero(2);
    REQUIRE_THROWS_AS(build_planar_basis(f, c), NumericalError);
}
