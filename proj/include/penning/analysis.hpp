#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "penning/axial_modes.hpp"
#include "penning/couplings.hpp"
#include "penning/delaunay.hpp"
#include "penning/equilibrium.hpp"
#include "penning/errors.hpp"
#include "penning/planar_modes.hpp"

namespace penning {

// ---------- local crystal geometry ----------

struct SpacingReport {
    Eigen::VectorXd per_ion;  // mean distance to triangulation neighbors [l0]
    Eigen::VectorXd radius;   // distance from trap center [l0]
    double median = 0.0;
};

inline SpacingReport nn_spacing(const Crystal& crystal) {
    const int n = static_cast<int>(crystal.x.size());
    if (n < 3)
        throw ValidationError("nearest-neighbor statistics need at least 3 ions");
    const Triangulation tri = delaunay(crystal.x, crystal.y);
    SpacingReport rep;
    rep.per_ion.resize(n);
    rep.radius = crystal.radius;
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = tri.neighbors[i];
        if (nbrs.empty())
            throw NumericalError("triangulation left ion " + std::to_string(i) +
                                 " without neighbors");
        double acc = 0.0;
        for (int j : nbrs)
            acc += std::hypot(crystal.x(i) - crystal.x(j), crystal.y(i) - crystal.y(j));
        rep.per_ion(i) = acc / static_cast<double>(nbrs.size());
    }
    std::vector<double> sorted(rep.per_ion.data(), rep.per_ion.data() + n);
    std::sort(sorted.begin(), sorted.end());
    rep.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return rep;
}

// ---------- boundary distortion ----------

namespace detail {

// Convex hull, counterclockwise (Andrew's monotone chain).
inline std::vector<int> convex_hull(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const int n = static_cast<int>(x.size());
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (x(a) != x(b)) return x(a) < x(b);
        return y(a) < y(b);
    });
    auto cross = [&](int o, int a, int b) {
        return (x(a) - x(o)) * (y(b) - y(o)) - (y(a) - y(o)) * (x(b) - x(o));
    };
    std::vector<int> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], idx[i]) <= 0.0) --k;
        hull[k++] = idx[i];
    }
    const int lower = k + 1;
    for (int i = n - 2; i >= 0; --i) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], idx[i]) <= 0.0) --k;
        hull[k++] = idx[i];
    }
    hull.resize(k - 1);
    return hull;
}

} // namespace detail

// Aspect ratio (>= 1) of the least-squares ellipse through the convex hull
// of the crystal.  An undistorted boundary gives 1.
inline double distortion_ratio(const Crystal& crystal) {
    const int n = static_cast<int>(crystal.x.size());
    if (n < 3)
        throw ValidationError("distortion ratio needs at least 3 ions");
    const std::vector<int> hull = detail::convex_hull(crystal.x, crystal.y);
    if (hull.size() < 3)
        throw NumericalError("boundary is degenerate: fewer than 3 hull ions");

    // Centered conic A x^2 + B xy + C y^2 = 1 fitted to the hull ions.
    Eigen::MatrixXd design(hull.size(), 3);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const double hx = crystal.x(hull[i]);
        const double hy = crystal.y(hull[i]);
        design(i, 0) = hx * hx;
        design(i, 1) = hx * hy;
        design(i, 2) = hy * hy;
    }
    const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(hull.size());
    const Eigen::Vector3d coef =
        design.colPivHouseholderQr().solve(rhs);
    Eigen::Matrix2d q;
    q << coef(0), 0.5 * coef(1), 0.5 * coef(1), coef(2);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
    if (!(lo > 0.0))
        throw NumericalError("boundary fit is not an ellipse");
    return std::sqrt(hi / lo);
}

// ---------- coupling statistics ----------

struct PowerLawFit {
    double exponent = 0.0;   // alpha in |J| ~ r^-alpha
    double prefactor = 0.0;
    double r_squared = 0.0;
    double majority_fraction = 0.0; // fraction of pairs sharing the majority sign
    double fraction_of_pairs = 0.0; // fraction of all pairs entering the fit
    int bins_used = 0;
    int majority_sign = +1;
};

// Log-binned power-law fit of |J| against pair distance.  Refuses when the
// couplings do not share a clear majority sign, since a frustrated
// distribution has no meaningful radial decay exponent.
inline PowerLawFit fit_power_law(const Eigen::MatrixXd& j, const Crystal& crystal,
                                 double r_min = 0.0,
                                 double r_max = std::numeric_limits<double>::infinity(),
                                 int n_bins = 24) {
    const int n = static_cast<int>(crystal.x.size());
    if (j.rows() != n || j.cols() != n)
        throw ValidationError("coupling matrix size does not match crystal");
    if (n_bins < 3)
        throw ValidationError("power-law fit needs at least 3 bins");

    std::vector<double> r, v;
    long long n_pos = 0, n_neg = 0;
    const long long n_total = static_cast<long long>(n) * (n - 1) / 2;
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            const double dist = std::hypot(crystal.x(a) - crystal.x(b),
                                           crystal.y(a) - crystal.y(b));
            if (dist < r_min || dist > r_max) continue;
            const double val = j(a, b);
            if (val > 0.0) ++n_pos;
            else if (val < 0.0) ++n_neg;
            r.push_back(dist);
            v.push_back(val);
        }
    }
    if (n_pos + n_neg == 0)
        throw NumericalError("power-law fit has no nonzero couplings in range");

    PowerLawFit fit;
    fit.majority_sign = n_pos >= n_neg ? +1 : -1;
    fit.majority_fraction = static_cast<double>(std::max(n_pos, n_neg)) /
                            static_cast<double>(n_pos + n_neg);
    if (fit.majority_fraction <= 0.9) {
        std::ostringstream os;
        os << "couplings are sign-frustrated (majority fraction "
           << fit.majority_fraction
           << " <= 0.9): no radial power law; inspect the histogram instead";
        throw NumericalError(os.str());
    }

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (v[i] * fit.majority_sign <= 0.0) continue;
        lo = std::min(lo, r[i]);
        hi = std::max(hi, r[i]);
    }
    if (!(hi > lo))
        throw NumericalError("power-law fit needs a spread of pair distances");
    const double log_lo = std::log(lo), log_hi = std::log(hi * (1.0 + 1e-12));
    const double width = (log_hi - log_lo) / n_bins;

    std::vector<double> sum_logr(n_bins, 0.0), sum_logj(n_bins, 0.0);
    std::vector<long long> count(n_bins, 0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (v[i] * fit.majority_sign <= 0.0) continue;
        int bin = static_cast<int>((std::log(r[i]) - log_lo) / width);
        bin = std::clamp(bin, 0, n_bins - 1);
        sum_logr[bin] += std::log(r[i]);
        sum_logj[bin] += std::log(std::abs(v[i]));
        count[bin] += 1;
    }

    // Unweighted least squares over bins holding at least 5 pairs, with the
    // bin abscissa at the geometric mean of its member distances.
    std::vector<double> xs, ys;
    long long used_pairs = 0;
    for (int b = 0; b < n_bins; ++b) {
        if (count[b] < 5) continue;
        xs.push_back(sum_logr[b] / count[b]);
        ys.push_back(sum_logj[b] / count[b]);
        used_pairs += count[b];
    }
    fit.bins_used = static_cast<int>(xs.size());
    if (fit.bins_used < 3)
        throw NumericalError("power-law fit has fewer than 3 populated bins");

    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    fit.exponent = -slope;
    fit.prefactor = std::exp(my - slope * mx);
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.fraction_of_pairs = static_cast<double>(used_pairs) / static_cast<double>(n_total);
    return fit;
}

struct CouplingHistogram {
    Eigen::VectorXd edges;  // n_bins + 1
    Eigen::VectorXd counts; // n_bins
    double fraction_in_range = 1.0;
    double asymmetry = 0.0; // |mean J| / mean |J| over all pairs
    long long n_pairs = 0;
};

inline CouplingHistogram coupling_histogram(const Eigen::MatrixXd& j, int n_bins = 50,
                                            std::optional<std::pair<double, double>>
                                                range = std::nullopt) {
    if (n_bins < 1)
        throw ValidationError("histogram needs at least one bin");
    const int n = static_cast<int>(j.rows());
    if (j.cols() != n || n < 2)
        throw ValidationError("histogram needs a square coupling matrix with n >= 2");

    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) vals.push_back(j(a, b));

    double lo, hi;
    if (range) {
        lo = range->first;
        hi = range->second;
        if (!(hi > lo)) throw ValidationError("histogram range must have positive width");
    } else {
        lo = *std::min_element(vals.begin(), vals.end());
        hi = *std::max_element(vals.begin(), vals.end());
        if (hi == lo) { // all couplings identical: widen symmetrically
            const double pad = std::max(1e-300, std::abs(hi) * 1e-12);
            lo -= pad;
            hi += pad;
        }
    }

    CouplingHistogram h;
    h.n_pairs = static_cast<long long>(vals.size());
    h.edges.resize(n_bins + 1);
    for (int b = 0; b <= n_bins; ++b)
        h.edges(b) = lo + (hi - lo) * b / n_bins;
    h.counts = Eigen::VectorXd::Zero(n_bins);
    long long inside = 0;
    double mean = 0.0, mean_abs = 0.0;
    for (double val : vals) {
        mean += val;
        mean_abs += std::abs(val);
        if (val < lo || val > hi) continue;
        int bin = static_cast<int>((val - lo) / (hi - lo) * n_bins);
        bin = std::clamp(bin, 0, n_bins - 1);
        h.counts(bin) += 1.0;
        ++inside;
    }
    mean /= static_cast<double>(vals.size());
    mean_abs /= static_cast<double>(vals.size());
    h.fraction_in_range = static_cast<double>(inside) / static_cast<double>(vals.size());
    h.asymmetry = mean_abs > 0.0 ? std::abs(mean) / mean_abs : 0.0;
    return h;
}

struct AngularCorrelationRow {
    int subshell = 0;
    int ion = 0;
    double theta = 0.0;  // angle of the pair separation, [-pi, pi)
    double radius = 0.0; // pair distance [l0]
    double j = 0.0;
};

// Couplings of one reference ion organized by subshell of pair distance.
// Subshells are found by clustering the sorted distances with a gap
// threshold of a quarter of the median nearest-neighbor spacing.
inline std::vector<AngularCorrelationRow> angular_correlation(const Eigen::MatrixXd& j,
                                                              const Crystal& crystal,
                                                              int reference) {
    const int n = static_cast<int>(crystal.x.size());
    if (j.rows() != n || j.cols() != n)
        throw ValidationError("coupling matrix size does not match crystal");
    if (reference < 0 || reference >= n)
        throw ValidationError("reference ion index out of range");
    const double gap = 0.25 * nn_spacing(crystal).median;

    std::vector<int> order;
    for (int i = 0; i < n; ++i)
        if (i != reference) order.push_back(i);
    std::vector<double> dist(n, 0.0);
    for (int i : order)
        dist[i] = std::hypot(crystal.x(i) - crystal.x(reference),
                             crystal.y(i) - crystal.y(reference));
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return a < b;
    });

    std::vector<AngularCorrelationRow> rows;
    rows.reserve(order.size());
    int shell = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && dist[order[i]] - dist[order[i - 1]] > gap) ++shell;
        AngularCorrelationRow row;
        row.subshell = shell;
        row.ion = order[i];
        row.theta = std::atan2(crystal.y(order[i]) - crystal.y(reference),
                               crystal.x(order[i]) - crystal.x(reference));
        row.radius = dist[order[i]];
        row.j = j(reference, order[i]);
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const AngularCorrelationRow& a, const AngularCorrelationRow& b) {
                         if (a.subshell != b.subshell) return a.subshell < b.subshell;
                         if (a.theta != b.theta) return a.theta < b.theta;
                         return a.ion < b.ion;
                     });
    return rows;
}

// ---------- parameter scans ----------

namespace detail {

// Run tasks 0..count-1 on `workers` threads; results land by index, so the
// merged output is independent of scheduling.
template <typename Fn>
inline void run_indexed(int count, int workers, Fn&& fn) {
    workers = std::max(1, workers);
    if (workers == 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < count; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline TrapConfig with_rotation(const TrapConfig& base, int n_ions, double weff_over_wz) {
    TrapConfig cfg = base;
    cfg.n_ions = n_ions;
    cfg.rotation = {RotationKind::effective_frequency, weff_over_wz * cfg.omega_z};
    return cfg;
}

} // namespace detail

struct ScanPoint {
    double parameter = 0.0;
    double value = 0.0;
    bool ok = false;
    std::string message;
};

struct OneToTwoResult {
    int n_ions = 0;
    double omega_12 = std::numeric_limits<double>::quiet_NaN(); // [omega_z]
    bool ok = false;
    std::string message;
    std::vector<ScanPoint> probes; // parameter = omega_eff, value = min stiffness eigenvalue
};

// Critical effective frequency at which the planar crystal buckles out of
// plane, located by bisection on the sign of the softest axial stiffness
// eigenvalue.
inline OneToTwoResult scan_one_to_two(const TrapConfig& base, int n_ions,
                                      double resolution = 1e-4,
                                      double seed_spacing = 0.0) {
    if (n_ions < 2)
        throw ValidationError("one-to-two-plane transition needs n_ions >= 2");
    if (!(resolution > 0.0))
        throw ValidationError("scan resolution must be positive");
    OneToTwoResult res;
    res.n_ions = n_ions;

    auto min_lambda = [&](double weff) {
        const TrapConfig cfg = detail::with_rotation(base, n_ions, weff);
        const RotatingFrame frame = make_frame(cfg);
        const Crystal crystal = solve_crystal(frame, seed_spacing);
        const Eigen::MatrixXd k = build_kzz(crystal);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    };
    auto probe = [&](double weff) -> std::optional<double> {
        ScanPoint pt;
        pt.parameter = weff;
        try {
            pt.value = min_lambda(weff);
            pt.ok = true;
            res.probes.push_back(pt);
            return pt.value;
        } catch (const std::exception& e) {
            pt.message = e.what();
            res.probes.push_back(pt);
            return std::nullopt;
        }
    };

    const double wall = base.omega_wall / base.omega_z;
    double lo = std::max(0.08, wall * 1.05 + 1e-6);
    auto v_lo = probe(lo);
    if (!v_lo || *v_lo <= 0.0) {
        res.message = "no stable planar crystal at the lower bracket";
        return res;
    }
    double hi = lo;
    std::optional<double> v_hi;
    for (int step = 0; step < 40; ++step) {
        hi = std::min(hi * 1.3, 1.2);
        v_hi = probe(hi);
        if (!v_hi) {
            res.message = "probe failed while bracketing";
            return res;
        }
        if (*v_hi <= 0.0) break;
        lo = hi;
        if (hi >= 1.2) {
            res.message = "no transition found below omega_eff = 1.2 omega_z";
            return res;
        }
    }
    while (hi - lo > resolution) {
        const double mid = 0.5 * (lo + hi);
        auto v = probe(mid);
        if (!v) {
            res.message = "probe failed during bisection";
            return res;
        }
        if (*v > 0.0) lo = mid;
        else hi = mid;
    }
    res.omega_12 = 0.5 * (lo + hi);
    res.ok = true;
    return res;
}

inline std::vector<OneToTwoResult> scan_one_to_two_many(const TrapConfig& base,
                                                        const std::vector<int>& n_list,
                                                        double resolution = 1e-4,
                                                        int workers = 1,
                                                        double seed_spacing = 0.0) {
    std::vector<OneToTwoResult> out(n_list.size());
    detail::run_indexed(static_cast<int>(n_list.size()), workers, [&](int i) {
        try {
            out[i] = scan_one_to_two(base, n_list[i], resolution, seed_spacing);
        } catch (const std::exception& e) {
            out[i].n_ions = n_list[i];
            out[i].message = e.what();
        }
    });
    return out;
}

struct BandOverlapResult {
    double omega_overlap = std::numeric_limits<double>::quiet_NaN(); // [omega_z]
    bool ok = false;
    std::string message;
    // parameter = omega_eff, value = min axial - max lower-branch planar
    std::vector<ScanPoint> probes;
};

// Effective frequency at which the softest axial mode dips below the top of
// the lower planar branch.
inline BandOverlapResult scan_band_overlap(const TrapConfig& base, int n_ions,
                                           double lo = 0.15, double hi = 0.24,
                                           double resolution = 1e-4,
                                           double seed_spacing = 0.0) {
    if (!(resolution > 0.0) || !(hi > lo))
        throw ValidationError("band-overlap scan needs hi > lo and positive resolution");
    BandOverlapResult res;

    auto gap = [&](double weff) {
        const TrapConfig cfg = detail::with_rotation(base, n_ions, weff);
        const RotatingFrame frame = make_frame(cfg);
        const Crystal crystal = solve_crystal(frame, seed_spacing);
        const AxialModes ax = axial_modes(crystal);
        double min_axial = std::numeric_limits<double>::infinity();
        for (int i = 0; i < ax.frequencies.size(); ++i)
            if (!ax.imaginary[i]) min_axial = std::min(min_axial, ax.frequencies(i));
        const PlanarModes pm = planar_modes(frame, crystal);
        const double max_lower = pm.frequencies(pm.branch_split - 1);
        return min_axial - max_lower;
    };
    auto probe = [&](double weff) -> std::optional<double> {
        ScanPoint pt;
        pt.parameter = weff;
        try {
            pt.value = gap(weff);
            pt.ok = true;
            res.probes.push_back(pt);
            return pt.value;
        } catch (const std::exception& e) {
            pt.message = e.what();
            res.probes.push_back(pt);
            return std::nullopt;
        }
    };

    auto v_lo = probe(lo);
    if (!v_lo || *v_lo <= 0.0) {
        res.message = "bands already overlap at the lower end of the scan window";
        return res;
    }
    auto v_hi = probe(hi);
    if (!v_hi) {
        res.message = "probe failed at the upper end of the scan window";
        return res;
    }
    if (*v_hi > 0.0) {
        res.message = "bands do not overlap within the scan window";
        return res;
    }
    double a = lo, b = hi;
    while (b - a > resolution) {
        const double mid = 0.5 * (a + b);
        auto v = probe(mid);
        if (!v) {
            res.message = "probe failed during bisection";
            return res;
        }
        if (*v > 0.0) a = mid;
        else b = mid;
    }
    res.omega_overlap = 0.5 * (a + b);
    res.ok = true;
    return res;
}

struct DetuningScanRow {
    double delta = 0.0; // mu - omega_z [omega_z]
    double exponent = 0.0;
    double r_squared = 0.0;
    double fraction_of_pairs = 0.0;
    bool ok = false;
    std::string message;
};

// Power-law exponent of the axial couplings as a function of detuning above
// the center-of-mass mode.
inline std::vector<DetuningScanRow> scan_powerlaw_vs_detuning(
    const AxialModes& modes, const Crystal& crystal, const std::vector<double>& deltas,
    int workers = 1) {
    std::vector<DetuningScanRow> rows(deltas.size());
    detail::run_indexed(static_cast<int>(deltas.size()), workers, [&](int i) {
        rows[i].delta = deltas[i];
        try {
            DriveConfig drive;
            drive.mu = 1.0 + deltas[i];
            const CouplingMatrix jm = axial_j_static(modes, drive);
            const PowerLawFit fit = fit_power_law(jm.j, crystal);
            rows[i].exponent = fit.exponent;
            rows[i].r_squared = fit.r_squared;
            rows[i].fraction_of_pairs = fit.fraction_of_pairs;
            rows[i].ok = true;
        } catch (const std::exception& e) {
            rows[i].message = e.what();
        }
    });
    return rows;
}

struct DistortionScanRow {
    double omega_eff = 0.0; // [omega_z]
    double ratio = 0.0;
    bool ok = false;
    std::string message;
};

// Boundary aspect ratio across a range of effective frequencies.
inline std::vector<DistortionScanRow> scan_distortion(const TrapConfig& base, int n_ions,
                                                      const std::vector<double>& omega_effs,
                                                      int workers = 1,
                                                      double seed_spacing = 0.0) {
    std::vector<DistortionScanRow> rows(omega_effs.size());
    detail::run_indexed(static_cast<int>(omega_effs.size()), workers, [&](int i) {
        rows[i].omega_eff = omega_effs[i];
        try {
            const TrapConfig cfg = detail::with_rotation(base, n_ions, omega_effs[i]);
            const RotatingFrame frame = make_frame(cfg);
            const Crystal crystal = solve_crystal(frame, seed_spacing);
            rows[i].ratio = distortion_ratio(crystal);
            rows[i].ok = true;
        } catch (const std::exception& e) {
            rows[i].message = e.what();
        }
    });
    return rows;
}

} // namespace penning
