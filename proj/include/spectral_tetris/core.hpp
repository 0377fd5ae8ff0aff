#pragma once

// Shared value types for the spectral tetris library: squared-norm sequences,
// spectra, sparse frames, partitions, fusion problems. Everything is stored in
// squared form; square roots appear only in emitted matrix entries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spectral_tetris {

/// Comparison tolerances. branch_eps steers algorithmic branch decisions
/// (equality of partial sums, block degeneracies); verify_eps is the looser
/// tolerance used when auditing numerical output. Both absolute.
struct Tolerances {
    double branch_eps = 1e-12;
    double verify_eps = 1e-9;

    Tolerances() = default;
    Tolerances(double branch, double verify) : branch_eps(branch), verify_eps(verify) {
        if (!(branch_eps > 0.0) || !(branch_eps <= verify_eps))
            throw std::invalid_argument("Tolerances: need 0 < branch_eps <= verify_eps");
    }
};

namespace detail {

// Compensated (Neumaier) summation; keeps trace comparisons stable.
inline double neumaier_sum(const std::vector<double>& xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    return s + c;
}

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

} // namespace detail

/// Prescribed squared column norms a_n^2, n = 1..N. All entries positive.
class NormSequence {
public:
    explicit NormSequence(std::vector<double> values_sq) : v_(std::move(values_sq)) {
        if (v_.empty()) throw std::invalid_argument("NormSequence: empty");
        for (double x : v_) {
            detail::require_finite(x, "NormSequence");
            if (!(x > 0.0)) throw std::invalid_argument("NormSequence: squared norms must be positive");
        }
    }

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& values_sq() const { return v_; }
    double total() const { return detail::neumaier_sum(v_); }

private:
    std::vector<double> v_;
};

/// Prescribed frame-operator eigenvalues lambda_m, m = 1..M. All positive.
/// Order is meaningful: row m of a constructed frame carries mass lambda_m.
class Spectrum {
public:
    explicit Spectrum(std::vector<double> values) : v_(std::move(values)) {
        if (v_.empty()) throw std::invalid_argument("Spectrum: empty");
        for (double x : v_) {
            detail::require_finite(x, "Spectrum");
            if (!(x > 0.0)) throw std::invalid_argument("Spectrum: eigenvalues must be positive");
        }
    }

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& values() const { return v_; }
    double total() const { return detail::neumaier_sum(v_); }

private:
    std::vector<double> v_;
};

/// Difference sum(a_n^2) - sum(lambda_m). Zero (within branch_eps) is the
/// entry ticket for every construction in the library.
inline double trace_gap(const NormSequence& norms, const Spectrum& spectrum) {
    return norms.total() - spectrum.total();
}

/// Small dense row-major matrix. Only what verification and dense export need.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline double max_abs_diff(const Matrix& x, const Matrix& y) {
    if (x.rows != y.rows || x.cols != y.cols)
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) d = std::max(d, std::abs(x.a[i] - y.a[i]));
    return d;
}

/// One nonzero of a sparse frame. Indices 0-based internally; external
/// formats are 1-based.
struct SparseEntry {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// Synthesis matrix with the spectral tetris sparsity pattern: every column
/// has one nonzero, or two nonzeros in adjacent rows.
class SparseFrame {
public:
    static SparseFrame from_entries(int rows, int cols, std::vector<SparseEntry> entries) {
        if (rows <= 0 || cols <= 0) throw std::invalid_argument("SparseFrame: empty shape");
        std::sort(entries.begin(), entries.end(), [](const SparseEntry& p, const SparseEntry& q) {
            return p.col != q.col ? p.col < q.col : p.row < q.row;
        });
        int expect_col = 0;
        for (std::size_t i = 0; i < entries.size();) {
            const int c = entries[i].col;
            if (c != expect_col)
                throw std::invalid_argument("SparseFrame: column " + std::to_string(expect_col + 1) + " has no entries");
            std::size_t j = i;
            while (j < entries.size() && entries[j].col == c) ++j;
            const std::size_t support = j - i;
            if (support > 2)
                throw std::invalid_argument("SparseFrame: column " + std::to_string(c + 1) + " has more than two nonzeros");
            for (std::size_t k = i; k < j; ++k) {
                const SparseEntry& e = entries[k];
                detail::require_finite(e.value, "SparseFrame");
                if (e.value == 0.0) throw std::invalid_argument("SparseFrame: explicit zero entry");
                if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
                    throw std::invalid_argument("SparseFrame: entry out of range");
            }
            if (support == 2) {
                if (entries[i].row == entries[i + 1].row)
                    throw std::invalid_argument("SparseFrame: duplicate entry position");
                if (entries[i + 1].row != entries[i].row + 1)
                    throw std::invalid_argument("SparseFrame: two-nonzero column must occupy adjacent rows");
            }
            ++expect_col;
            i = j;
        }
        if (expect_col != cols)
            throw std::invalid_argument("SparseFrame: column " + std::to_string(expect_col + 1) + " has no entries");
        SparseFrame f;
        f.rows_ = rows;
        f.cols_ = cols;
        f.entries_ = std::move(entries);
        f.col_start_.assign(static_cast<std::size_t>(cols) + 1, 0);
        for (const SparseEntry& e : f.entries_) ++f.col_start_[static_cast<std::size_t>(e.col) + 1];
        for (std::size_t c = 1; c < f.col_start_.size(); ++c) f.col_start_[c] += f.col_start_[c - 1];
        return f;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::vector<SparseEntry>& entries() const { return entries_; }

    /// Entries of one column as [first, last) into entries().
    std::pair<const SparseEntry*, const SparseEntry*> column(int c) const {
        return {entries_.data() + col_start_[c], entries_.data() + col_start_[static_cast<std::size_t>(c) + 1]};
    }

    double column_norm_sq(int c) const {
        auto [first, last] = column(c);
        double s = 0.0;
        for (const SparseEntry* e = first; e != last; ++e) s += e->value * e->value;
        return s;
    }

    double column_dot(int c1, int c2) const {
        auto [f1, l1] = column(c1);
        auto [f2, l2] = column(c2);
        double s = 0.0;
        for (const SparseEntry* p = f1; p != l1; ++p)
            for (const SparseEntry* q = f2; q != l2; ++q)
                if (p->row == q->row) s += p->value * q->value;
        return s;
    }

    Matrix dense() const {
        Matrix m(rows_, cols_);
        for (const SparseEntry& e : entries_) m(e.row, e.col) = e.value;
        return m;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<SparseEntry> entries_;          // sorted by (col, row)
    std::vector<std::size_t> col_start_;        // cols+1 offsets into entries_
};

inline double max_abs_diff(const SparseFrame& x, const SparseFrame& y) {
    return max_abs_diff(x.dense(), y.dense());
}

/// Column indices n_1 <= ... <= n_M = N (1-based, matching external reports)
/// marking where each row's cumulative eigenvalue mass lands.
struct ReadyPartition {
    std::vector<int> indices;

    void validate(int n_columns) const {
        if (indices.empty()) throw std::invalid_argument("ReadyPartition: empty");
        int prev = 1;
        for (int v : indices) {
            if (v < prev) throw std::invalid_argument("ReadyPartition: indices must be weakly increasing and >= 1");
            prev = v;
        }
        if (indices.back() != n_columns)
            throw std::invalid_argument("ReadyPartition: final index must equal the column count");
    }
};

/// Weighted fusion-frame prescription: per-subspace weight nu_k (unsquared)
/// and dimension d_k, the target spectrum, and optionally an explicit slot
/// ordering (slot i holds the 1-based subspace label occupying position i).
struct FusionProblem {
    struct Subspace {
        double weight = 0.0;
        int dim = 0;
    };

    std::vector<Subspace> subspaces;
    std::vector<double> spectrum;
    std::optional<std::vector<int>> ordering;

    void validate() const {
        if (subspaces.empty()) throw std::invalid_argument("FusionProblem: no subspaces");
        for (const Subspace& s : subspaces) {
            detail::require_finite(s.weight, "FusionProblem weight");
            if (!(s.weight > 0.0)) throw std::invalid_argument("FusionProblem: weights must be positive");
            if (s.dim < 1) throw std::invalid_argument("FusionProblem: dimensions must be >= 1");
        }
        if (spectrum.empty()) throw std::invalid_argument("FusionProblem: empty spectrum");
        for (double l : spectrum) {
            detail::require_finite(l, "FusionProblem spectrum");
            if (!(l > 0.0)) throw std::invalid_argument("FusionProblem: eigenvalues must be positive");
        }
        if (ordering) {
            std::vector<int> count(subspaces.size(), 0);
            for (int label : *ordering) {
                if (label < 1 || static_cast<std::size_t>(label) > subspaces.size())
                    throw std::invalid_argument("FusionProblem: ordering label out of range");
                ++count[static_cast<std::size_t>(label) - 1];
            }
            for (std::size_t k = 0; k < subspaces.size(); ++k)
                if (count[k] != subspaces[k].dim)
                    throw std::invalid_argument("FusionProblem: ordering must use each label exactly dim_k times");
        }
    }

    int total_slots() const {
        int n = 0;
        for (const Subspace& s : subspaces) n += s.dim;
        return n;
    }
};

/// A frame together with a partition of its columns into subspace parts and
/// the per-part weights nu_k. Structural invariants only; semantic checks
/// (tightness, orthogonality) live with the operations that need them.
struct FusionFrame {
    SparseFrame frame{SparseFrame::from_entries(1, 1, {{0, 0, 1.0}})};
    std::vector<std::vector<int>> parts;   // 0-based column indices
    std::vector<double> weights;           // nu_k, unsquared

    void validate() const {
        if (parts.empty() || parts.size() != weights.size())
            throw std::invalid_argument("FusionFrame: parts/weights mismatch");
        std::vector<char> seen(static_cast<std::size_t>(frame.cols()), 0);
        for (const auto& part : parts) {
            if (part.empty()) throw std::invalid_argument("FusionFrame: empty part");
            for (int c : part) {
                if (c < 0 || c >= frame.cols()) throw std::invalid_argument("FusionFrame: part column out of range");
                if (seen[static_cast<std::size_t>(c)]) throw std::invalid_argument("FusionFrame: parts must be disjoint");
                seen[static_cast<std::size_t>(c)] = 1;
            }
        }
        for (char s : seen)
            if (!s) throw std::invalid_argument("FusionFrame: parts must cover every column");
        for (double w : weights) {
            detail::require_finite(w, "FusionFrame weight");
            if (!(w > 0.0)) throw std::invalid_argument("FusionFrame: weights must be positive");
        }
    }
};

} // namespace spectral_tetris
