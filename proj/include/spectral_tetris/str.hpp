#pragma once

// Swap-capable variant of the greedy run. Whenever the cursor column is too
// heavy for the row residual but its right neighbour is not, the two columns
// trade places (logged) and the run continues; with matching totals and every
// pair of squared norms bounded by the smallest eigenvalue this never gets
// stuck, for anything else a best-effort mode reports where it died.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "stc.hpp"

namespace spectral_tetris {

struct StrVerdict {
    bool trace_ok = false;
    double trace_gap_value = 0.0;
    bool pair_ok = false;
    double max_pair_sum = 0.0;
    double min_eigenvalue = 0.0;
    bool pass() const { return trace_ok && pair_ok; }
};

/// The guarantee check: totals agree, and the two largest squared norms fit
/// together under the smallest eigenvalue (vacuous with a single column).
inline StrVerdict str_preconditions(const NormSequence& norms, const Spectrum& spectrum,
                                    const Tolerances& tol = {}) {
    StrVerdict v;
    v.trace_gap_value = trace_gap(norms, spectrum);
    v.trace_ok = std::abs(v.trace_gap_value) <= tol.branch_eps;
    v.max_pair_sum = detail::max_pair_sum(norms.values_sq());
    v.min_eigenvalue = spectrum.values()[0];
    for (double l : spectrum.values()) v.min_eigenvalue = std::min(v.min_eigenvalue, l);
    v.pair_ok = v.max_pair_sum <= v.min_eigenvalue + tol.branch_eps;
    return v;
}

enum class StrMode {
    guaranteed,   // preconditions are required and failure to build is a defect
    best_effort,  // run regardless; a stuck run is reported, not thrown
};

struct StrOutcome {
    bool ok = false;
    std::optional<SparseFrame> frame;
    std::vector<double> final_norms_sq;      // squared norms in final column order
    std::vector<std::pair<int, int>> swaps;  // 1-based adjacent column swaps, in order
    StrVerdict verdict;
    int full_blocks = 0;
    int degenerate_blocks = 0;
    std::string stuck_reason;
    int stuck_row = 0;
    int stuck_col = 0;
    double stuck_residual = 0.0;
};

inline StrOutcome str_construct(const NormSequence& norms, const Spectrum& spectrum,
                                StrMode mode = StrMode::guaranteed, const Tolerances& tol = {}) {
    StrOutcome out;
    out.verdict = str_preconditions(norms, spectrum, tol);
    if (mode == StrMode::guaranteed && !out.verdict.pass()) {
        if (!out.verdict.trace_ok)
            throw std::invalid_argument("str_construct: total squared norm differs from total eigenvalue mass by " +
                                        std::to_string(out.verdict.trace_gap_value));
        throw std::invalid_argument("str_construct: largest pair of squared norms sums to " +
                                    std::to_string(out.verdict.max_pair_sum) +
                                    " which exceeds the smallest eigenvalue " +
                                    std::to_string(out.verdict.min_eigenvalue));
    }

    detail::TetrisResult run = detail::tetris_run(norms.values_sq(), spectrum.values(), true, tol);
    out.final_norms_sq = std::move(run.final_values);
    out.swaps = std::move(run.swaps);
    out.full_blocks = run.full_blocks;
    out.degenerate_blocks = run.degenerate_blocks;
    if (!run.ok) {
        if (mode == StrMode::guaranteed)
            throw std::logic_error("str_construct: preconditions held yet the run got stuck at row " +
                                   std::to_string(run.stuck_row) + ", column " + std::to_string(run.stuck_col) +
                                   ": " + run.stuck_reason);
        out.stuck_reason = std::move(run.stuck_reason);
        out.stuck_row = run.stuck_row;
        out.stuck_col = run.stuck_col;
        out.stuck_residual = run.stuck_residual;
        return out;
    }
    out.ok = true;
    out.frame = SparseFrame::from_entries(static_cast<int>(spectrum.size()), static_cast<int>(norms.size()),
                                          std::move(run.entries));
    return out;
}

} // namespace spectral_tetris
