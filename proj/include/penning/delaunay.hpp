#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "penning/constants.hpp"
#include "penning/errors.hpp"

namespace penning {

// Planar Delaunay triangulation via incremental insertion (Bowyer-Watson).
// Insertion follows point index order and the in-circle test uses a relative
// epsilon, so the result is deterministic for identical inputs.
struct Triangulation {
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::vector<int>> neighbors; // sorted adjacency lists
};

namespace detail {

struct CircumTriangle {
    int a, b, c;
    double cx, cy, r2; // circumcircle; r2 = +inf for collinear vertices
};

inline CircumTriangle make_triangle(int a, int b, int c, const Eigen::VectorXd& px,
                                    const Eigen::VectorXd& py) {
    CircumTriangle t{a, b, c, 0.0, 0.0, std::numeric_limits<double>::infinity()};
    const double ax = px(a), ay = py(a);
    const double bx = px(b), by = py(b);
    const double cx = px(c), cy = py(c);
    const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    const double scale = (std::abs(ax) + std::abs(bx) + std::abs(cx) +
                          std::abs(ay) + std::abs(by) + std::abs(cy));
    if (std::abs(d) <= 1e-14 * scale * scale) return t; // collinear: infinite circle
    const double a2 = ax * ax + ay * ay;
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    t.cx = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    t.cy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    const double dx = ax - t.cx, dy = ay - t.cy;
    t.r2 = dx * dx + dy * dy;
    return t;
}

// Strictly inside the open circumdisk.  Points on the circle count as
// outside, so ties among co-circular points resolve to the smaller cavity
// and the insertion cavity stays star-shaped.
inline bool in_circumcircle(const CircumTriangle& t, double x, double y) {
    if (!std::isfinite(t.r2)) return true;
    const double dx = x - t.cx, dy = y - t.cy;
    return dx * dx + dy * dy < t.r2 * (1.0 - 1e-12);
}

// Point-in-triangle with a relative tolerance that admits boundary points.
inline bool triangle_contains(const CircumTriangle& t, const Eigen::VectorXd& px,
                              const Eigen::VectorXd& py, double x, double y) {
    double sign = 0.0;
    const int v[4] = {t.a, t.b, t.c, t.a};
    for (int e = 0; e < 3; ++e) {
        const double ax = px(v[e]), ay = py(v[e]);
        const double bx = px(v[e + 1]), by = py(v[e + 1]);
        const double cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        const double scale =
            std::abs(bx - ax) * std::abs(y - ay) + std::abs(by - ay) * std::abs(x - ax);
        if (std::abs(cross) <= 1e-12 * scale) continue; // on this edge's line
        if (sign == 0.0) sign = cross;
        else if ((cross > 0.0) != (sign > 0.0)) return false;
    }
    return true;
}

} // namespace detail

inline Triangulation delaunay(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const int n = static_cast<int>(x.size());
    if (n < 3)
        throw ValidationError("triangulation needs at least 3 points");

    // Working copy with three far-away super-triangle vertices appended.
    Eigen::VectorXd px(n + 3), py(n + 3);
    px.head(n) = x;
    py.head(n) = y;
    const double cx = x.mean(), cy = y.mean();
    double radius = 1e-12;
    for (int i = 0; i < n; ++i)
        radius = std::max(radius, std::hypot(x(i) - cx, y(i) - cy));
    const double big = 1e6 * radius;
    for (int k = 0; k < 3; ++k) {
        const double ang = 0.5 * constants::pi + 2.0 * constants::pi * k / 3.0;
        px(n + k) = cx + big * std::cos(ang);
        py(n + k) = cy + big * std::sin(ang);
    }

    std::vector<detail::CircumTriangle> tris;
    tris.push_back(detail::make_triangle(n, n + 1, n + 2, px, py));

    std::vector<char> bad;
    for (int p = 0; p < n; ++p) {
        // Cavity: start from a triangle geometrically containing the point
        // and flood across shared edges while the open circumdisk contains
        // it.  Growing the cavity through adjacency instead of a global
        // circle scan keeps it star-shaped when many points are co-circular,
        // as on a regular lattice.
        int seed = -1;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (detail::triangle_contains(tris[t], px, py, px(p), py(p))) {
                seed = static_cast<int>(t);
                break;
            }
        }
        if (seed < 0)
            throw NumericalError("triangulation insertion failed: point outside hull");

        std::map<std::pair<int, int>, std::vector<int>> by_edge;
        auto edge_key = [](int u, int v) {
            return std::pair<int, int>{std::min(u, v), std::max(u, v)};
        };
        for (std::size_t t = 0; t < tris.size(); ++t) {
            by_edge[edge_key(tris[t].a, tris[t].b)].push_back(static_cast<int>(t));
            by_edge[edge_key(tris[t].b, tris[t].c)].push_back(static_cast<int>(t));
            by_edge[edge_key(tris[t].c, tris[t].a)].push_back(static_cast<int>(t));
        }

        bad.assign(tris.size(), 0);
        bad[seed] = 1;
        std::vector<int> queue{seed};
        while (!queue.empty()) {
            const int t = queue.back();
            queue.pop_back();
            const int v[4] = {tris[t].a, tris[t].b, tris[t].c, tris[t].a};
            for (int e = 0; e < 3; ++e) {
                for (int other : by_edge[edge_key(v[e], v[e + 1])]) {
                    if (bad[other]) continue;
                    if (!detail::in_circumcircle(tris[other], px(p), py(p))) continue;
                    bad[other] = 1;
                    queue.push_back(other);
                }
            }
        }

        // Boundary of the cavity: edges of bad triangles seen exactly once.
        std::map<std::pair<int, int>, int> edge_count;
        auto bump = [&edge_count](int u, int v) {
            edge_count[{std::min(u, v), std::max(u, v)}] += 1;
        };
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!bad[t]) continue;
            bump(tris[t].a, tris[t].b);
            bump(tris[t].b, tris[t].c);
            bump(tris[t].c, tris[t].a);
        }
        std::vector<detail::CircumTriangle> kept;
        kept.reserve(tris.size());
        for (std::size_t t = 0; t < tris.size(); ++t)
            if (!bad[t]) kept.push_back(tris[t]);
        tris.swap(kept);
        for (const auto& [edge, count] : edge_count) {
            if (count != 1) continue;
            tris.push_back(detail::make_triangle(edge.first, edge.second, p, px, py));
        }
    }

    Triangulation result;
    result.neighbors.assign(n, {});
    for (const auto& t : tris) {
        if (t.a >= n || t.b >= n || t.c >= n) continue;
        if (!std::isfinite(t.r2)) continue; // degenerate sliver of collinear points
        result.triangles.push_back({t.a, t.b, t.c});
        for (auto [u, v] : {std::pair{t.a, t.b}, std::pair{t.b, t.c}, std::pair{t.c, t.a}}) {
            result.neighbors[u].push_back(v);
            result.neighbors[v].push_back(u);
        }
    }
    if (result.triangles.empty())
        throw NumericalError("triangulation degenerate: no triangles among input points");
    for (auto& list : result.neighbors) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return result;
}

} // namespace penning
