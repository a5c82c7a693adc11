#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "penning/equilibrium.hpp"
#include "penning/errors.hpp"

namespace penning {

// Out-of-plane normal modes.  Eigenvalues of the axial stiffness matrix are
// in units of m omega_z^2; a negative eigenvalue means the planar crystal is
// unstable against out-of-plane buckling and the stored frequency is the
// magnitude of the imaginary part.
struct AxialModes {
    Eigen::VectorXd eigenvalues;  // ascending
    Eigen::VectorXd frequencies;  // sqrt(|eigenvalue|), aligned [omega_z]
    std::vector<bool> imaginary;  // true where eigenvalue < 0
    Eigen::MatrixXd vectors;      // orthonormal columns, aligned
    bool stable = false;
};

// Axial stiffness: the trap contributes m omega_z^2 on the diagonal, each
// Coulomb pair softens the two diagonal entries and couples them with a
// positive off-diagonal element.  Row sums are exactly m omega_z^2, so the
// center of mass stays an exact eigenvector at omega_z.
inline Eigen::MatrixXd build_kzz(const Crystal& crystal) {
    const int n = static_cast<int>(crystal.x.size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) k(j, j) = 1.0;
    for (int j = 0; j < n; ++j) {
        for (int l = j + 1; l < n; ++l) {
            const double dx = crystal.x(j) - crystal.x(l);
            const double dy = crystal.y(j) - crystal.y(l);
            const double r2 = dx * dx + dy * dy;
            const double c = 0.5 / (r2 * std::sqrt(r2));
            k(j, j) -= c;
            k(l, l) -= c;
            k(j, l) += c;
            k(l, j) += c;
        }
    }
    return k;
}

namespace detail {

// Dominant angular harmonic of an axial eigenvector: the order m maximizing
// |sum_j b_j exp(i m phi_j)|^2.  Used as a deterministic secondary sort key
// inside numerically degenerate frequency clusters.
inline int dominant_harmonic(const Eigen::VectorXd& b, const Eigen::VectorXd& phase,
                             int max_order) {
    int best_m = 0;
    double best_w = -1.0;
    for (int m = 0; m <= max_order; ++m) {
        std::complex<double> acc(0.0, 0.0);
        for (int j = 0; j < b.size(); ++j)
            acc += b(j) * std::exp(std::complex<double>(0.0, m * phase(j)));
        const double w = std::norm(acc);
        if (w > best_w + 1e-12 * (1.0 + best_w)) {
            best_w = w;
            best_m = m;
        }
    }
    return best_m;
}

// Fix the sign of each eigenvector (largest-magnitude entry positive) and
// order degenerate clusters by dominant harmonic so exported mode data does
// not depend on eigensolver internals.
inline void canonicalize_modes(Eigen::VectorXd& freqs, Eigen::VectorXd& evals,
                               Eigen::MatrixXd& vecs, const Eigen::VectorXd& phase,
                               double cluster_tol = 1e-9) {
    const int n = static_cast<int>(freqs.size());
    const int max_order = std::min<int>(6, std::max(0, static_cast<int>(phase.size()) - 1));
    int start = 0;
    while (start < n) {
        int stop = start + 1;
        while (stop < n && std::abs(freqs(stop) - freqs(stop - 1)) < cluster_tol) ++stop;
        if (stop - start > 1) {
            std::vector<int> idx(stop - start);
            std::iota(idx.begin(), idx.end(), start);
            std::vector<int> key(n, 0);
            for (int i = start; i < stop; ++i)
                key[i] = dominant_harmonic(vecs.col(i), phase, max_order);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
                return key[a] < key[b];
            });
            Eigen::MatrixXd vtmp(vecs.rows(), stop - start);
            Eigen::VectorXd ftmp(stop - start), etmp(stop - start);
            for (int i = 0; i < stop - start; ++i) {
                vtmp.col(i) = vecs.col(idx[i]);
                ftmp(i) = freqs(idx[i]);
                etmp(i) = evals(idx[i]);
            }
            vecs.middleCols(start, stop - start) = vtmp;
            freqs.segment(start, stop - start) = ftmp;
            evals.segment(start, stop - start) = etmp;
        }
        start = stop;
    }
    for (int i = 0; i < n; ++i) {
        int arg = 0;
        vecs.col(i).cwiseAbs().maxCoeff(&arg);
        if (vecs(arg, i) < 0.0) vecs.col(i) = -vecs.col(i);
    }
}

} // namespace detail

inline AxialModes axial_modes(const Crystal& crystal) {
    const Eigen::MatrixXd k = build_kzz(crystal);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    if (es.info() != Eigen::Success)
        throw NumericalError("axial eigensolver failed");
    AxialModes m;
    m.eigenvalues = es.eigenvalues();
    m.vectors = es.eigenvectors();
    const int n = static_cast<int>(m.eigenvalues.size());
    m.frequencies.resize(n);
    m.imaginary.assign(n, false);
    for (int i = 0; i < n; ++i) {
        m.frequencies(i) = std::sqrt(std::abs(m.eigenvalues(i)));
        m.imaginary[i] = m.eigenvalues(i) < 0.0;
    }
    m.stable = m.eigenvalues(0) >= 0.0;
    detail::canonicalize_modes(m.frequencies, m.eigenvalues, m.vectors, crystal.phase);
    return m;
}

// Static displacement pattern of one axial mode.
inline Eigen::VectorXd mode_displacement(const AxialModes& modes, int mode, double amplitude) {
    if (mode < 0 || mode >= modes.vectors.cols())
        throw ValidationError("axial mode index out of range");
    return amplitude * modes.vectors.col(mode);
}

} // namespace penning
