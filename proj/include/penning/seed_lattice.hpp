#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "penning/errors.hpp"
#include "penning/params.hpp"

namespace penning {

// Triangular-lattice starting guess for the equilibrium solver.  Positions
// are in units of l0; index 0 is the central ion, closed shells follow in
// increasing shell order, any partial outer ring comes last.
struct SeedLattice {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    int n_closed_shells = 0;
    double spacing = 0.0; // lattice constant [l0]
};

// Ions contained in s closed shells of a centered hexagonal lattice.
inline int centered_hex_count(int s) { return 1 + 3 * s * (s + 1); }

// Largest number of complete shells that n ions can fill, i.e. the
// integer part of (sqrt(9 + 12(n-1)) - 3)/6.
inline int shell_count(int n_ions) {
    if (n_ions < 1)
        throw ValidationError("shell_count requires n_ions >= 1");
    int s = static_cast<int>((std::sqrt(9.0 + 12.0 * (n_ions - 1)) - 3.0) / 6.0);
    while (centered_hex_count(s + 1) <= n_ions) ++s;
    while (s > 0 && centered_hex_count(s) > n_ions) --s;
    return s;
}

namespace detail {

struct LatticeSite {
    double x, y;
    double angle; // polar angle in [0, 2 pi)
};

inline double polar_angle(double x, double y) {
    double a = std::atan2(y, x);
    if (a < 0.0) a += 2.0 * constants::pi;
    return a;
}

// All sites of hexagonal ring k (6k of them for k >= 1, the origin for
// k = 0), ordered by polar angle.
inline std::vector<LatticeSite> hex_ring(int k, double d) {
    std::vector<LatticeSite> sites;
    if (k == 0) {
        sites.push_back({0.0, 0.0, 0.0});
        return sites;
    }
    const double ax1 = d, ay1 = 0.0;
    const double ax2 = 0.5 * d, ay2 = 0.5 * std::sqrt(3.0) * d;
    for (int n = -k; n <= k; ++n) {
        for (int m = -k; m <= k; ++m) {
            const int dist = (std::abs(n) + std::abs(m) + std::abs(n + m)) / 2;
            if (dist != k) continue;
            const double px = n * ax1 + m * ax2;
            const double py = n * ay1 + m * ay2;
            sites.push_back({px, py, polar_angle(px, py)});
        }
    }
    std::sort(sites.begin(), sites.end(),
              [](const LatticeSite& a, const LatticeSite& b) { return a.angle < b.angle; });
    return sites;
}

// Single-site external potential in internal units, used to rank candidate
// sites for a partial outer ring.
inline double site_potential(const RotatingFrame& f, double x, double y) {
    const double r2 = x * x + y * y;
    return 0.5 * f.omega_eff_sq * r2 +
           0.5 * f.wall_sign * f.omega_wall * f.omega_wall * (x * x - y * y);
}

} // namespace detail

// Default lattice constant: the two-ion equilibrium scale of the radial
// potential, (omega_z/omega_eff)^(2/3) in units of l0.
inline double default_seed_spacing(const RotatingFrame& f) {
    return std::pow(f.omega_eff, -2.0 / 3.0);
}

inline SeedLattice generate_seed(const RotatingFrame& f, double spacing = 0.0) {
    if (f.n_ions < 1)
        throw ValidationError("generate_seed requires n_ions >= 1");
    if (spacing != 0.0 && (!(spacing > 0.0) || !std::isfinite(spacing)))
        throw ValidationError("seed spacing must be positive and finite");
    const double d = spacing > 0.0 ? spacing : default_seed_spacing(f);

    const int n = f.n_ions;
    const int s = shell_count(n);
    SeedLattice seed;
    seed.n_closed_shells = s;
    seed.spacing = d;
    seed.x.resize(n);
    seed.y.resize(n);

    int filled = 0;
    for (int k = 0; k <= s; ++k) {
        for (const auto& site : detail::hex_ring(k, d)) {
            seed.x(filled) = site.x;
            seed.y(filled) = site.y;
            ++filled;
        }
    }

    const int leftover = n - centered_hex_count(s);
    if (leftover > 0) {
        // Rank the ring-(s+1) sites by external potential; the wall makes
        // soft-axis sites cheapest, so partial rings grow along that axis.
        auto ring = detail::hex_ring(s + 1, d);
        std::vector<int> order(ring.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::vector<double> u(ring.size());
        for (std::size_t i = 0; i < ring.size(); ++i)
            u[i] = detail::site_potential(f, ring[i].x, ring[i].y);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (u[a] != u[b]) return u[a] < u[b];
            if (ring[a].angle != ring[b].angle) return ring[a].angle < ring[b].angle;
            return a < b;
        });
        for (int i = 0; i < leftover; ++i) {
            seed.x(filled) = ring[order[i]].x;
            seed.y(filled) = ring[order[i]].y;
            ++filled;
        }
    }
    return seed;
}

} // namespace penning
