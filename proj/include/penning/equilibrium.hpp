#pragma once

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "penning/errors.hpp"
#include "penning/params.hpp"
#include "penning/seed_lattice.hpp"

namespace penning {

// Relaxed planar crystal in the rotating frame.  Positions in l0,
// energy in m omega_z^2 l0^2.  radius/phase are the polar form of the
// same coordinates.
struct Crystal {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd radius;
    Eigen::VectorXd phase;
    double energy = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

struct MinimizeOptions {
    double tol = 1e-10;  // max-norm gradient threshold [m omega_z^2 l0]
    int max_iter = 10000;
};

// Total rotating-frame potential of a planar configuration.  The trap
// part is 1/2 omega_eff^2 r^2 plus the wall quadrupole; the Coulomb pair
// energy is 1/(2 r) in internal units.  Coincident ions give +infinity.
inline double potential_energy(const RotatingFrame& f, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) {
    const int n = static_cast<int>(x.size());
    const double a = f.omega_eff_sq + f.wall_sign * f.omega_wall * f.omega_wall;
    const double b = f.omega_eff_sq - f.wall_sign * f.omega_wall * f.omega_wall;
    double u = 0.0;
    for (int j = 0; j < n; ++j)
        u += 0.5 * (a * x(j) * x(j) + b * y(j) * y(j));
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            const double dx = x(j) - x(k);
            const double dy = y(j) - y(k);
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r <= 0.0) return std::numeric_limits<double>::infinity();
            u += 0.5 / r;
        }
    }
    return u;
}

// Gradient in the blocked layout (x components first, then y), length 2N.
inline Eigen::VectorXd gradient(const RotatingFrame& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y) {
    const int n = static_cast<int>(x.size());
    const double a = f.omega_eff_sq + f.wall_sign * f.omega_wall * f.omega_wall;
    const double b = f.omega_eff_sq - f.wall_sign * f.omega_wall * f.omega_wall;
    Eigen::VectorXd g(2 * n);
    for (int j = 0; j < n; ++j) {
        g(j) = a * x(j);
        g(n + j) = b * y(j);
    }
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            const double dx = x(j) - x(k);
            const double dy = y(j) - y(k);
            const double r2 = dx * dx + dy * dy;
            const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
            const double fx = 0.5 * dx * inv_r3;
            const double fy = 0.5 * dy * inv_r3;
            g(j) -= fx;
            g(k) += fx;
            g(n + j) -= fy;
            g(n + k) += fy;
        }
    }
    return g;
}

// Second derivatives of the potential, 2N x 2N in the blocked layout
// [xx xy; yx yy].  At an equilibrium this is the planar stiffness matrix
// (units m omega_z^2).
inline Eigen::MatrixXd hessian(const RotatingFrame& f, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) {
    const int n = static_cast<int>(x.size());
    const double a = f.omega_eff_sq + f.wall_sign * f.omega_wall * f.omega_wall;
    const double b = f.omega_eff_sq - f.wall_sign * f.omega_wall * f.omega_wall;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        h(j, j) = a;
        h(n + j, n + j) = b;
    }
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            const double dx = x(j) - x(k);
            const double dy = y(j) - y(k);
            const double r2 = dx * dx + dy * dy;
            const double inv_r5 = 1.0 / (r2 * r2 * std::sqrt(r2));
            // second derivatives of 1/(2 r)
            const double cxx = 0.5 * (3.0 * dx * dx - r2) * inv_r5;
            const double cyy = 0.5 * (3.0 * dy * dy - r2) * inv_r5;
            const double cxy = 0.5 * 3.0 * dx * dy * inv_r5;
            h(j, j) += cxx;
            h(k, k) += cxx;
            h(j, k) -= cxx;
            h(k, j) -= cxx;
            h(n + j, n + j) += cyy;
            h(n + k, n + k) += cyy;
            h(n + j, n + k) -= cyy;
            h(n + k, n + j) -= cyy;
            h(j, n + j) += cxy;
            h(n + j, j) += cxy;
            h(k, n + k) += cxy;
            h(n + k, k) += cxy;
            h(j, n + k) -= cxy;
            h(n + k, j) -= cxy;
            h(k, n + j) -= cxy;
            h(n + j, k) -= cxy;
        }
    }
    return h;
}

namespace detail {

// Newton direction with a positive-definite safeguard: plain Cholesky when
// the Hessian allows it, otherwise shift the spectrum up until it does.
inline Eigen::VectorXd newton_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() == Eigen::Success) return llt.solve(-g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    const double target = std::max(1e-9 * hi, 1e-12);
    const double eta = target - std::min(lo, 0.0);
    Eigen::MatrixXd hs = h;
    hs.diagonal().array() += eta;
    Eigen::LLT<Eigen::MatrixXd> llt2(hs);
    if (llt2.info() != Eigen::Success)
        throw NumericalError("shifted Hessian factorization failed");
    return llt2.solve(-g);
}

inline void rotate_all(Eigen::VectorXd& x, Eigen::VectorXd& y, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    for (int j = 0; j < x.size(); ++j) {
        const double xr = c * x(j) - s * y(j);
        const double yr = s * x(j) + c * y(j);
        x(j) = xr;
        y(j) = yr;
    }
}

} // namespace detail

// Damped Newton minimization of the rotating-frame potential starting from
// a seed lattice.  With no wall the potential is rotation invariant; the
// crystal is then re-aligned after every step so the outermost seed ion
// keeps its polar angle, which pins the orientation without changing the
// physics.
inline Crystal find_equilibrium(const RotatingFrame& f, const SeedLattice& seed,
                                const MinimizeOptions& opts = {}) {
    const int n = f.n_ions;
    if (static_cast<int>(seed.x.size()) != n)
        throw ValidationError("seed size does not match n_ions");
    Eigen::VectorXd x = seed.x, y = seed.y;

    int pin = 0;
    double pin_angle = 0.0;
    const bool pin_orientation = (f.omega_wall == 0.0) && n > 1;
    if (pin_orientation) {
        double rmax = -1.0;
        for (int j = 0; j < n; ++j) {
            const double r = x(j) * x(j) + y(j) * y(j);
            if (r > rmax) { rmax = r; pin = j; }
        }
        pin_angle = std::atan2(y(pin), x(pin));
    }

    double energy = potential_energy(f, x, y);
    if (!std::isfinite(energy))
        throw ValidationError("seed contains coincident ions");

    const double c1 = 1e-4;
    int it = 0;
    bool converged = false;
    for (; it < opts.max_iter; ++it) {
        Eigen::VectorXd g = gradient(f, x, y);
        const double gn = g.cwiseAbs().maxCoeff();
        if (gn < opts.tol) { converged = true; break; }

        Eigen::MatrixXd h = hessian(f, x, y);
        Eigen::VectorXd p = detail::newton_direction(h, g);
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            p = -g;
            slope = g.dot(p);
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double t = 1.0;
            for (int half = 0; half < 60; ++half) {
                Eigen::VectorXd xt = x + t * p.head(n);
                Eigen::VectorXd yt = y + t * p.tail(n);
                const double et = potential_energy(f, xt, yt);
                if (et <= energy + c1 * t * slope) {
                    x.swap(xt);
                    y.swap(yt);
                    energy = et;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted && attempt == 0) {
                // Newton step unusable this far from the minimum; retry
                // along the raw downhill direction.
                p = -g;
                slope = g.dot(p);
            }
        }
        if (!accepted)
            throw NumericalError("equilibrium line search failed at iteration " +
                                 std::to_string(it));

        if (pin_orientation) {
            detail::rotate_all(x, y, pin_angle - std::atan2(y(pin), x(pin)));
            energy = potential_energy(f, x, y);
        }
    }
    if (!converged) {
        std::ostringstream os;
        os << "equilibrium did not converge in " << opts.max_iter
           << " iterations (grad max-norm "
           << gradient(f, x, y).cwiseAbs().maxCoeff() << ")";
        throw NumericalError(os.str());
    }

    // A minimum must have non-negative curvature; the tiny allowance keeps
    // the rotational zero mode of wall-free crystals acceptable.
    {
        Eigen::MatrixXd h = hessian(f, x, y);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        if (lo < -1e-8 * scale) {
            std::ostringstream os;
            os << "converged to a saddle point (lowest curvature " << lo << ")";
            throw NumericalError(os.str());
        }
    }

    Crystal c;
    c.x = x;
    c.y = y;
    c.radius.resize(n);
    c.phase.resize(n);
    for (int j = 0; j < n; ++j) {
        c.radius(j) = std::hypot(x(j), y(j));
        c.phase(j) = std::atan2(y(j), x(j));
    }
    c.energy = energy;
    c.grad_norm = gradient(f, x, y).cwiseAbs().maxCoeff();
    c.iterations = it;
    return c;
}

// Seed-and-relax convenience wrapper.
inline Crystal solve_crystal(const RotatingFrame& f, double seed_spacing = 0.0,
                             const MinimizeOptions& opts = {}) {
    return find_equilibrium(f, generate_seed(f, seed_spacing), opts);
}

} // namespace penning
