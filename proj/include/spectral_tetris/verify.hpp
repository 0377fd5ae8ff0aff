#pragma once

// Independent numerical verification. Nothing in this header calls the
// construction code: operators are accumulated directly from matrix entries,
// projections come from a local Gram-Schmidt, and eigenvalues from a local
// cyclic Jacobi iteration. That keeps audits meaningful as oracles.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"

namespace spectral_tetris {

namespace detail {

inline double frobenius(const Matrix& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

inline double off_diagonal_frobenius(const Matrix& m) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j)
            if (i != j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

inline std::vector<double> dense_column(const SparseFrame& f, int c) {
    std::vector<double> v(static_cast<std::size_t>(f.rows()), 0.0);
    auto [first, last] = f.column(c);
    for (const SparseEntry* e = first; e != last; ++e) v[static_cast<std::size_t>(e->row)] = e->value;
    return v;
}

// Modified Gram-Schmidt with one re-orthogonalization pass. Vectors whose
// residual drops below drop_tol (relative to their own length) are treated
// as dependent and skipped; the returned basis size is the numerical rank.
inline std::vector<std::vector<double>> orthonormal_basis(const std::vector<std::vector<double>>& vectors,
                                                          double drop_tol) {
    std::vector<std::vector<double>> basis;
    for (const auto& v : vectors) {
        std::vector<double> w = v;
        double original = 0.0;
        for (double x : v) original += x * x;
        original = std::sqrt(original);
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                double dot = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) dot += w[i] * b[i];
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= dot * b[i];
            }
        }
        double nrm = 0.0;
        for (double x : w) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm > drop_tol * std::max(1.0, original)) {
            for (double& x : w) x /= nrm;
            basis.push_back(std::move(w));
        }
    }
    return basis;
}

} // namespace detail

/// FF^T accumulated straight from the sparse entries.
inline Matrix frame_operator(const SparseFrame& f) {
    Matrix s(f.rows(), f.rows());
    for (int c = 0; c < f.cols(); ++c) {
        auto [first, last] = f.column(c);
        for (const SparseEntry* p = first; p != last; ++p)
            for (const SparseEntry* q = first; q != last; ++q)
                s(p->row, q->row) += p->value * q->value;
    }
    return s;
}

/// Sum of nu_k^2 P_k with each projection built from an orthonormalized
/// basis of the part's column span. Parts may hold more columns than their
/// span's dimension (tight but not orthogonal); the projection only sees the
/// span.
inline Matrix fusion_operator(const FusionFrame& fusion, const Tolerances& tol = {}) {
    fusion.validate();
    const int m = fusion.frame.rows();
    Matrix s(m, m);
    for (std::size_t k = 0; k < fusion.parts.size(); ++k) {
        std::vector<std::vector<double>> cols;
        cols.reserve(fusion.parts[k].size());
        for (int c : fusion.parts[k]) cols.push_back(detail::dense_column(fusion.frame, c));
        auto basis = detail::orthonormal_basis(cols, tol.verify_eps);
        const double w2 = fusion.weights[k] * fusion.weights[k];
        for (const auto& b : basis)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) s(i, j) += w2 * b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
    }
    return s;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Deterministic sweep order; converges when the off-diagonal
/// Frobenius norm falls below verify_eps times the input Frobenius norm.
inline std::vector<double> symmetric_eigenvalues(Matrix a, const Tolerances& tol = {}) {
    if (a.rows != a.cols) throw std::invalid_argument("symmetric_eigenvalues: matrix not square");
    const int n = a.rows;
    if (n == 0) throw std::invalid_argument("symmetric_eigenvalues: empty matrix");
    const double scale = detail::frobenius(a);
    if (scale == 0.0) return std::vector<double>(static_cast<std::size_t>(n), 0.0);
    double asym = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) asym = std::max(asym, std::abs(a(i, j) - a(j, i)));
    if (asym > tol.verify_eps * std::max(1.0, scale))
        throw std::invalid_argument("symmetric_eigenvalues: matrix not symmetric (max asymmetry " +
                                    std::to_string(asym) + ")");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));

    const double target = tol.verify_eps * scale;
    const int max_sweeps = 64;
    for (int sweep = 0;; ++sweep) {
        if (detail::off_diagonal_frobenius(a) <= target) break;
        if (sweep >= max_sweeps)
            throw std::logic_error("symmetric_eigenvalues: no convergence within sweep cap");
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150)
                    t = 1.0 / (2.0 * theta);
                else
                    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (int k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
            }
        }
    }
    std::vector<double> eig(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

/// Everything an audit measures. Deviations are absolute; when the expected
/// spectrum reaches beyond 1e3 the pass tolerance is stretched by
/// max|lambda| / 1e3 (recorded in `scale`).
struct VerificationReport {
    std::vector<double> eigenvalues;         // of FF^T, ascending
    double bound_lower = 0.0;                // smallest eigenvalue
    double bound_upper = 0.0;                // largest eigenvalue
    bool spectrum_match = false;
    double spectrum_max_dev = 0.0;           // sorted eigenvalues vs sorted expectation
    double operator_diag_dev = 0.0;          // FF^T vs diag(expectation, given order)

    std::vector<double> column_norm_sq_dev;  // per column, when an expectation exists
    double max_column_norm_sq_dev = 0.0;

    std::vector<double> part_orth_max;       // per part: max |<f_i, f_j>|, i != j
    std::vector<double> part_tight_dev;      // per part: max |S_part - nu^2 P|
    std::vector<int> part_rank;
    double fusion_agreement_dev = 0.0;       // max |sum nu^2 P_k - FF^T|

    std::vector<int> nnz_per_column;
    int nnz_total = 0;

    double tolerance = 0.0;
    double scale = 1.0;
    bool pass = false;
    std::string failure;                     // first failed check, empty when passing
};

namespace detail {

inline void fill_operator_fields(VerificationReport& r, const Matrix& op,
                                 const std::vector<double>& expected_spectrum, const Tolerances& tol) {
    r.eigenvalues = symmetric_eigenvalues(op, tol);
    r.bound_lower = r.eigenvalues.front();
    r.bound_upper = r.eigenvalues.back();
    std::vector<double> want = expected_spectrum;
    std::sort(want.begin(), want.end());
    double lmax = 0.0;
    for (double l : want) lmax = std::max(lmax, std::abs(l));
    r.scale = std::max(1.0, lmax / 1e3);
    for (std::size_t i = 0; i < want.size(); ++i)
        r.spectrum_max_dev = std::max(r.spectrum_max_dev, std::abs(r.eigenvalues[i] - want[i]));
    r.spectrum_match = r.spectrum_max_dev <= r.tolerance * r.scale;
    for (int i = 0; i < op.rows; ++i)
        for (int j = 0; j < op.cols; ++j) {
            const double want_ij = i == j ? expected_spectrum[static_cast<std::size_t>(i)] : 0.0;
            r.operator_diag_dev = std::max(r.operator_diag_dev, std::abs(op(i, j) - want_ij));
        }
}

inline void fill_sparsity(VerificationReport& r, const SparseFrame& f) {
    r.nnz_per_column.assign(static_cast<std::size_t>(f.cols()), 0);
    for (int c = 0; c < f.cols(); ++c) {
        auto [first, last] = f.column(c);
        r.nnz_per_column[static_cast<std::size_t>(c)] = static_cast<int>(last - first);
        r.nnz_total += static_cast<int>(last - first);
    }
}

inline void set_verdict(VerificationReport& r, bool ok, const char* what) {
    if (!ok && r.failure.empty()) r.failure = what;
}

} // namespace detail

/// Audit a plain frame against an expected spectrum (order = row order) and,
/// optionally, expected squared column norms.
inline VerificationReport audit(const SparseFrame& frame, const Spectrum& expected_spectrum,
                                const std::optional<NormSequence>& expected_norms = std::nullopt,
                                const Tolerances& tol = {}) {
    if (static_cast<int>(expected_spectrum.size()) != frame.rows())
        throw std::invalid_argument("audit: spectrum length must match row count");
    if (expected_norms && static_cast<int>(expected_norms->size()) != frame.cols())
        throw std::invalid_argument("audit: norm count must match column count");

    VerificationReport r;
    r.tolerance = tol.verify_eps;
    detail::fill_operator_fields(r, frame_operator(frame), expected_spectrum.values(), tol);
    detail::set_verdict(r, r.spectrum_match, "spectrum mismatch");

    if (expected_norms) {
        for (int c = 0; c < frame.cols(); ++c) {
            const double dev = std::abs(frame.column_norm_sq(c) - (*expected_norms)[static_cast<std::size_t>(c)]);
            r.column_norm_sq_dev.push_back(dev);
            r.max_column_norm_sq_dev = std::max(r.max_column_norm_sq_dev, dev);
        }
        detail::set_verdict(r, r.max_column_norm_sq_dev <= r.tolerance * r.scale, "column norm mismatch");
    }
    detail::fill_sparsity(r, frame);
    r.pass = r.failure.empty();
    return r;
}

/// Audit a fusion frame: spectrum of FF^T, canonical part structure
/// (orthogonal columns of squared norm nu_k^2, full rank), agreement of the
/// weighted-projection operator with FF^T.
inline VerificationReport audit(const FusionFrame& fusion, const Spectrum& expected_spectrum,
                                const std::optional<std::vector<double>>& expected_weights = std::nullopt,
                                const Tolerances& tol = {}) {
    fusion.validate();
    if (static_cast<int>(expected_spectrum.size()) != fusion.frame.rows())
        throw std::invalid_argument("audit: spectrum length must match row count");
    const std::vector<double>& weights = expected_weights ? *expected_weights : fusion.weights;
    if (weights.size() != fusion.parts.size())
        throw std::invalid_argument("audit: weight count must match part count");

    VerificationReport r;
    r.tolerance = tol.verify_eps;
    const Matrix op = frame_operator(fusion.frame);
    detail::fill_operator_fields(r, op, expected_spectrum.values(), tol);
    detail::set_verdict(r, r.spectrum_match, "spectrum mismatch");

    const int m = fusion.frame.rows();
    Matrix weighted_sum(m, m);
    for (std::size_t k = 0; k < fusion.parts.size(); ++k) {
        const auto& part = fusion.parts[k];
        const double w2 = weights[k] * weights[k];

        double orth = 0.0;
        for (std::size_t i = 0; i < part.size(); ++i)
            for (std::size_t j = i + 1; j < part.size(); ++j)
                orth = std::max(orth, std::abs(fusion.frame.column_dot(part[i], part[j])));
        r.part_orth_max.push_back(orth);

        for (int c : part) {
            const double dev = std::abs(fusion.frame.column_norm_sq(c) - w2);
            r.column_norm_sq_dev.push_back(dev);
            r.max_column_norm_sq_dev = std::max(r.max_column_norm_sq_dev, dev);
        }

        std::vector<std::vector<double>> cols;
        for (int c : part) cols.push_back(detail::dense_column(fusion.frame, c));
        auto basis = detail::orthonormal_basis(cols, tol.verify_eps);
        r.part_rank.push_back(static_cast<int>(basis.size()));

        Matrix part_op(m, m);
        for (const auto& col : cols)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    part_op(i, j) += col[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(j)];
        Matrix proj(m, m);
        for (const auto& b : basis)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    proj(i, j) += b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
        double tight = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                tight = std::max(tight, std::abs(part_op(i, j) - w2 * proj(i, j)));
                weighted_sum(i, j) += w2 * proj(i, j);
            }
        r.part_tight_dev.push_back(tight);
    }
    r.fusion_agreement_dev = max_abs_diff(weighted_sum, op);

    for (std::size_t k = 0; k < fusion.parts.size(); ++k) {
        detail::set_verdict(r, r.part_rank[k] == static_cast<int>(fusion.parts[k].size()),
                            "part rank below its dimension");
        detail::set_verdict(r, r.part_orth_max[k] <= r.tolerance * r.scale, "part not orthogonal");
        detail::set_verdict(r, r.part_tight_dev[k] <= r.tolerance * r.scale, "part not tight at its weight");
    }
    detail::set_verdict(r, r.max_column_norm_sq_dev <= r.tolerance * r.scale, "column norm mismatch");
    detail::set_verdict(r, r.fusion_agreement_dev <= r.tolerance * r.scale,
                        "weighted projections disagree with the frame operator");
    detail::fill_sparsity(r, fusion.frame);
    r.pass = r.failure.empty();
    return r;
}

} // namespace spectral_tetris
