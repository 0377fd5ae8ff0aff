#pragma once

// Row-by-row construction of a sparse frame with prescribed squared column
// norms and prescribed frame-operator eigenvalues: singletons while the row
// can absorb a whole column, a 2x2 block to split the last bit of row mass
// across two columns when it cannot. readiness_partition decides a priori
// whether the greedy run succeeds; exists_ready_permutation searches for an
// ordering that makes it succeed.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blocks.hpp"
#include "core.hpp"

namespace spectral_tetris {

enum class RefusalKind {
    none,
    trace,            // squared norms and spectrum disagree in total mass
    partition_bound,  // no valid partition index for some row
    block_spacing,    // a row needs a block but the next boundary is too close
    carry_capacity,   // the second block column cannot absorb the row residual
    construction,     // the greedy run got stuck (cursor details in message)
    weight_pair,      // two largest subspace weights overflow the smallest eigenvalue
    label_spacing,    // repeated subspace labels sit too close for their windows
    dimension_ratio,  // equal-dimension shortcut needs 2d <= M
};

inline const char* refusal_kind_name(RefusalKind k) {
    switch (k) {
    case RefusalKind::none: return "none";
    case RefusalKind::trace: return "trace";
    case RefusalKind::partition_bound: return "partition-bound";
    case RefusalKind::block_spacing: return "block-spacing";
    case RefusalKind::carry_capacity: return "carry-capacity";
    case RefusalKind::construction: return "construction";
    case RefusalKind::weight_pair: return "weight-pair";
    case RefusalKind::label_spacing: return "label-spacing";
    case RefusalKind::dimension_ratio: return "dimension-ratio";
    }
    return "unknown";
}

/// Machine-readable rejection: which condition failed, at which row (1-based,
/// 0 when not row-specific), and by how much.
struct Refusal {
    RefusalKind kind = RefusalKind::none;
    int k = 0;
    double shortfall = 0.0;
    std::string message;
};

struct ReadinessOutcome {
    bool ready = false;
    ReadyPartition partition;
    Refusal refusal;
};

/// Compute the unique partition candidate and check it. Row k's cumulative
/// eigenvalue mass must land inside the column run [n_k, n_k + 1); when it
/// lands strictly inside a column (a block will be needed), the next row's
/// boundary must sit at least two columns ahead and the second block column
/// must be able to absorb the leftover.
inline ReadinessOutcome readiness_partition(const NormSequence& norms, const Spectrum& spectrum,
                                            const Tolerances& tol = {}) {
    ReadinessOutcome out;
    const std::size_t n_count = norms.size();
    const std::size_t m_count = spectrum.size();
    const double eps = tol.branch_eps;

    const double gap = trace_gap(norms, spectrum);
    if (std::abs(gap) > eps) {
        out.refusal = {RefusalKind::trace, 0, gap,
                       "total squared norm " + std::to_string(norms.total()) +
                           " does not match total eigenvalue mass " + std::to_string(spectrum.total())};
        return out;
    }

    std::vector<double> cum_a(n_count + 1, 0.0);
    for (std::size_t n = 0; n < n_count; ++n) cum_a[n + 1] = cum_a[n] + norms[n];
    std::vector<double> cum_l(m_count + 1, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) cum_l[m + 1] = cum_l[m] + spectrum[m];

    std::vector<int> idx(m_count, 0);
    std::size_t n = 0;
    for (std::size_t k = 1; k <= m_count; ++k) {
        while (n < n_count && cum_a[n + 1] <= cum_l[k] + eps) ++n;
        if (n == 0) {
            out.refusal = {RefusalKind::partition_bound, static_cast<int>(k), norms[0] - cum_l[k],
                           "row " + std::to_string(k) + ": the leading squared norm " +
                               std::to_string(norms[0]) + " already exceeds the cumulative eigenvalue mass " +
                               std::to_string(cum_l[k])};
            return out;
        }
        idx[k - 1] = static_cast<int>(n);
    }
    if (idx.back() != static_cast<int>(n_count)) {
        out.refusal = {RefusalKind::partition_bound, static_cast<int>(m_count),
                       cum_a[n_count] - cum_l[m_count],
                       "final partition index " + std::to_string(idx.back()) +
                           " does not reach the last column"};
        return out;
    }

    for (std::size_t k = 1; k < m_count; ++k) {
        const double residue = cum_l[k] - cum_a[static_cast<std::size_t>(idx[k - 1])];
        if (residue > eps) {
            const int spacing = idx[k] - idx[k - 1];
            if (spacing < 2) {
                out.refusal = {RefusalKind::block_spacing, static_cast<int>(k), 2.0 - spacing,
                               "row " + std::to_string(k) + ": a block is required but the next row's boundary is only " +
                                   std::to_string(spacing) + " column(s) ahead (need at least 2)"};
                return out;
            }
            const double carry = norms[static_cast<std::size_t>(idx[k - 1]) + 1];
            if (carry < residue - eps) {
                out.refusal = {RefusalKind::carry_capacity, static_cast<int>(k), residue - carry,
                               "row " + std::to_string(k) + ": the second block column (squared norm " +
                                   std::to_string(carry) + ") cannot absorb the row residual " +
                                   std::to_string(residue)};
                return out;
            }
        }
    }

    out.ready = true;
    out.partition.indices = std::move(idx);
    out.partition.validate(static_cast<int>(n_count));
    return out;
}

namespace detail {

/// One full greedy run. With allow_swaps the engine may exchange the cursor
/// column with its right neighbour whenever the row residual would cover the
/// neighbour whole (the swapped-in column then lands as a singleton); every
/// exchange is logged. Never throws for domain reasons: a stuck run reports
/// its cursor instead.
struct TetrisResult {
    bool ok = false;
    std::vector<SparseEntry> entries;
    std::vector<std::pair<int, int>> swaps;  // 1-based column pairs, in order
    std::vector<double> final_values;        // squared norms after swaps
    int full_blocks = 0;                     // blocks with all four entries nonzero
    int degenerate_blocks = 0;               // boundary blocks that reduce to singletons
    std::string stuck_reason;
    int stuck_row = 0;                       // 1-based cursor when stuck
    int stuck_col = 0;
    double stuck_residual = 0.0;
};

inline TetrisResult tetris_run(std::vector<double> values_sq, std::vector<double> lambdas,
                               bool allow_swaps, const Tolerances& tol) {
    TetrisResult res;
    const std::size_t n_count = values_sq.size();
    const std::size_t m_count = lambdas.size();
    const double eps = tol.branch_eps;

    auto stuck = [&](std::size_t m, std::size_t n, double residual, const std::string& why) {
        res.ok = false;
        res.stuck_row = static_cast<int>(m) + 1;
        res.stuck_col = static_cast<int>(n) + 1;
        res.stuck_residual = residual;
        res.stuck_reason = why;
        res.final_values = std::move(values_sq);
        return res;
    };

    std::size_t m = 0, n = 0;
    double residual = lambdas[0];
    while (true) {
        if (residual <= eps) {
            ++m;
            if (m == m_count) break;
            residual = lambdas[m];
            continue;
        }
        if (n >= n_count)
            return stuck(m, n, residual, "row still carries mass but all columns are used");

        const double a = values_sq[n];
        if (residual >= a - eps) {
            res.entries.push_back({static_cast<int>(m), static_cast<int>(n), std::sqrt(a)});
            residual -= a;
            if (std::abs(residual) <= eps) residual = 0.0;
            ++n;
            continue;
        }

        // A singleton no longer fits: the row must close through a block over
        // columns (n, n+1), spilling into row m+1.
        if (allow_swaps && n + 1 < n_count && residual >= values_sq[n + 1] - eps) {
            std::swap(values_sq[n], values_sq[n + 1]);
            res.swaps.emplace_back(static_cast<int>(n) + 1, static_cast<int>(n) + 2);
            continue;  // the swapped-in column now fits as a singleton
        }
        if (n + 1 >= n_count)
            return stuck(m, n, residual, "a block is required at the last column");
        if (m + 1 >= m_count)
            return stuck(m, n, residual, "a block is required at the last row");

        const double a_l = values_sq[n], a_r = values_sq[n + 1];
        if (!block_admissible(residual, a_l, a_r, tol))
            return stuck(m, n, residual,
                         "no block exists for residual " + std::to_string(residual) +
                             " over squared norms " + std::to_string(a_l) + ", " + std::to_string(a_r));
        const double y = a_l + a_r - residual;
        if (y > lambdas[m + 1] + eps)
            return stuck(m, n, residual,
                         "the next row (mass " + std::to_string(lambdas[m + 1]) +
                             ") cannot absorb the block remainder " + std::to_string(y));

        const Block2x2 b = make_block(residual, a_l, a_r, tol);
        int nonzeros = 0;
        auto push = [&](int dr, int dc, double v) {
            if (v != 0.0) {
                res.entries.push_back({static_cast<int>(m) + dr, static_cast<int>(n) + dc, v});
                ++nonzeros;
            }
        };
        push(0, 0, b.top_left);
        push(1, 0, b.bottom_left);
        push(0, 1, b.top_right);
        push(1, 1, b.bottom_right);
        if (nonzeros == 4)
            ++res.full_blocks;
        else
            ++res.degenerate_blocks;

        lambdas[m + 1] -= y;
        if (std::abs(lambdas[m + 1]) <= eps) lambdas[m + 1] = 0.0;
        residual = 0.0;
        n += 2;
    }
    if (n != n_count)
        return stuck(m_count - 1, n, 0.0, "columns remain after the last row closed");
    res.ok = true;
    res.final_values = std::move(values_sq);
    return res;
}

// Largest sum of two squared norms at distinct positions (0 when fewer than
// two norms). The guarantee for swap-mode runs: this must not exceed the
// smallest eigenvalue.
inline double max_pair_sum(const std::vector<double>& values_sq) {
    if (values_sq.size() < 2) return 0.0;
    double top1 = -1.0, top2 = -1.0;
    for (double v : values_sq) {
        if (v > top1) {
            top2 = top1;
            top1 = v;
        } else if (v > top2) {
            top2 = v;
        }
    }
    return top1 + top2;
}

} // namespace detail

struct StcOutcome {
    bool ok = false;
    std::optional<SparseFrame> frame;
    ReadyPartition partition;
    Refusal refusal;
    int full_blocks = 0;
    int degenerate_blocks = 0;
};

/// Construct the frame for a ready pair; a non-ready pair is refused with the
/// readiness diagnosis. A ready pair that still fails to build indicates a
/// broken invariant and throws std::logic_error.
inline StcOutcome stc_construct(const NormSequence& norms, const Spectrum& spectrum,
                                const Tolerances& tol = {}) {
    StcOutcome out;
    ReadinessOutcome ready = readiness_partition(norms, spectrum, tol);
    if (!ready.ready) {
        out.refusal = std::move(ready.refusal);
        return out;
    }
    detail::TetrisResult run = detail::tetris_run(norms.values_sq(), spectrum.values(), false, tol);
    if (!run.ok)
        throw std::logic_error("stc_construct: ready input got stuck at row " +
                               std::to_string(run.stuck_row) + ", column " + std::to_string(run.stuck_col) +
                               ": " + run.stuck_reason);
    out.ok = true;
    out.frame = SparseFrame::from_entries(static_cast<int>(spectrum.size()), static_cast<int>(norms.size()),
                                          std::move(run.entries));
    out.partition = std::move(ready.partition);
    out.full_blocks = run.full_blocks;
    out.degenerate_blocks = run.degenerate_blocks;
    return out;
}

/// Witness that some reordering of the inputs is constructible: the
/// permutations (position i holds original index perm[i], 1-based), the
/// reordered sequences, and their partition.
struct ReadyCertificate {
    std::vector<int> norm_perm;
    std::vector<int> spectrum_perm;
    std::vector<double> norms_sq;
    std::vector<double> spectrum;
    ReadyPartition partition;

    bool identity() const {
        for (std::size_t i = 0; i < norm_perm.size(); ++i)
            if (norm_perm[i] != static_cast<int>(i) + 1) return false;
        for (std::size_t i = 0; i < spectrum_perm.size(); ++i)
            if (spectrum_perm[i] != static_cast<int>(i) + 1) return false;
        return true;
    }
};

struct SearchOutcome {
    enum class Status { found, proven_impossible, budget_exhausted };
    Status status = Status::budget_exhausted;
    std::optional<ReadyCertificate> certificate;
    long long orderings_checked = 0;
    bool exhaustive = false;  // true when every distinct ordering was examined
    std::string note;
};

namespace detail {

// Map a permuted value sequence back to 1-based original indices; equal
// values are matched to the smallest unused original position.
inline std::vector<int> derive_perm(const std::vector<double>& original, const std::vector<double>& permuted) {
    std::vector<char> used(original.size(), 0);
    std::vector<int> perm(permuted.size(), 0);
    for (std::size_t i = 0; i < permuted.size(); ++i) {
        for (std::size_t j = 0; j < original.size(); ++j) {
            if (!used[j] && original[j] == permuted[i]) {
                used[j] = 1;
                perm[i] = static_cast<int>(j) + 1;
                break;
            }
        }
    }
    return perm;
}

inline long long count_orderings_capped(std::vector<double> v, long long cap) {
    std::sort(v.begin(), v.end());
    long long c = 1;
    while (std::next_permutation(v.begin(), v.end()))
        if (++c > cap) return cap + 1;
    return c;
}

} // namespace detail

/// Search for a reordering of both sequences that is constructible. The input
/// ordering is tried first; when the number of distinct orderings fits the
/// budget the search is exhaustive and a negative answer is a proof,
/// otherwise a swap-guided heuristic runs and a negative answer only means
/// "not found within budget". Deterministic throughout.
inline SearchOutcome exists_ready_permutation(const NormSequence& norms, const Spectrum& spectrum,
                                              long long budget = 100000, const Tolerances& tol = {}) {
    SearchOutcome out;
    if (budget < 1) budget = 1;

    const double gap = trace_gap(norms, spectrum);
    if (std::abs(gap) > tol.branch_eps) {
        out.status = SearchOutcome::Status::proven_impossible;
        out.exhaustive = true;
        out.note = "total squared norm differs from total eigenvalue mass by " + std::to_string(gap) +
                   "; no reordering can change either total";
        return out;
    }

    auto try_pair = [&](const std::vector<double>& nv, const std::vector<double>& sv) -> bool {
        ++out.orderings_checked;
        ReadinessOutcome r = readiness_partition(NormSequence(nv), Spectrum(sv), tol);
        if (!r.ready) return false;
        ReadyCertificate cert;
        cert.norm_perm = detail::derive_perm(norms.values_sq(), nv);
        cert.spectrum_perm = detail::derive_perm(spectrum.values(), sv);
        cert.norms_sq = nv;
        cert.spectrum = sv;
        cert.partition = std::move(r.partition);
        out.certificate = std::move(cert);
        out.status = SearchOutcome::Status::found;
        return true;
    };

    if (try_pair(norms.values_sq(), spectrum.values())) return out;

    const long long norm_orderings = detail::count_orderings_capped(norms.values_sq(), budget);
    const long long spec_orderings = detail::count_orderings_capped(spectrum.values(), budget);
    const bool overflow = norm_orderings > budget / std::max<long long>(1, spec_orderings);
    if (!overflow && norm_orderings * spec_orderings <= budget) {
        std::vector<double> nv = norms.values_sq();
        std::sort(nv.begin(), nv.end());
        do {
            std::vector<double> sv = spectrum.values();
            std::sort(sv.begin(), sv.end());
            do {
                if (try_pair(nv, sv)) return out;
            } while (std::next_permutation(sv.begin(), sv.end()));
        } while (std::next_permutation(nv.begin(), nv.end()));
        out.status = SearchOutcome::Status::proven_impossible;
        out.exhaustive = true;
        out.note = "all " + std::to_string(out.orderings_checked) + " distinct orderings fail readiness";
        return out;
    }

    // Too many orderings to enumerate: run the swap-capable engine over a few
    // canonical starting points and certify any final ordering that is ready.
    std::vector<std::vector<double>> norm_starts;
    std::vector<std::vector<double>> spec_starts;
    {
        std::vector<double> asc = norms.values_sq(), desc = norms.values_sq();
        std::sort(asc.begin(), asc.end());
        std::sort(desc.begin(), desc.end(), std::greater<>());
        norm_starts = {norms.values_sq(), asc, desc};
        std::vector<double> sasc = spectrum.values(), sdesc = spectrum.values();
        std::sort(sasc.begin(), sasc.end());
        std::sort(sdesc.begin(), sdesc.end(), std::greater<>());
        spec_starts = {spectrum.values(), sasc, sdesc};
    }
    std::vector<std::pair<std::vector<double>, std::vector<double>>> tried;
    for (const auto& sv : spec_starts) {
        for (const auto& nv : norm_starts) {
            bool seen = false;
            for (const auto& t : tried)
                if (t.first == nv && t.second == sv) { seen = true; break; }
            if (seen) continue;
            tried.emplace_back(nv, sv);
            if (out.orderings_checked >= budget) break;
            if (try_pair(nv, sv)) return out;
            if (out.orderings_checked >= budget) break;
            ++out.orderings_checked;
            detail::TetrisResult run = detail::tetris_run(nv, sv, true, tol);
            if (!run.ok) continue;
            ReadinessOutcome r = readiness_partition(NormSequence(run.final_values), Spectrum(sv), tol);
            if (!r.ready) continue;
            std::vector<int> base = detail::derive_perm(norms.values_sq(), nv);
            for (const auto& sw : run.swaps) std::swap(base[sw.first - 1], base[sw.second - 1]);
            ReadyCertificate cert;
            cert.norm_perm = std::move(base);
            cert.spectrum_perm = detail::derive_perm(spectrum.values(), sv);
            cert.norms_sq = run.final_values;
            cert.spectrum = sv;
            cert.partition = std::move(r.partition);
            out.certificate = std::move(cert);
            out.status = SearchOutcome::Status::found;
            return out;
        }
    }
    out.status = SearchOutcome::Status::budget_exhausted;
    out.note = "no constructible ordering found within a budget of " + std::to_string(budget) +
               " checks; this is not a proof of impossibility";
    return out;
}

} // namespace spectral_tetris
