#pragma once

// 2x2 building blocks. A block hands a row the residual mass x it still
// needs, spends the two prescribed squared column norms exactly, and pushes
// the leftover y = a_l^2 + a_r^2 - x down into the next row, keeping the two
// rows orthogonal.

#include <cmath>
#include <stdexcept>
#include <string>

#include "core.hpp"

namespace spectral_tetris {

/// Input triple of a block: remaining row mass x and the two squared column
/// norms it must realize. y() is the mass handed to the following row.
struct BlockSpec {
    double x = 0.0;
    double a_sq_left = 0.0;
    double a_sq_right = 0.0;

    double y() const { return a_sq_left + a_sq_right - x; }

    void validate() const {
        detail::require_finite(x, "BlockSpec x");
        detail::require_finite(a_sq_left, "BlockSpec a_sq_left");
        detail::require_finite(a_sq_right, "BlockSpec a_sq_right");
        if (!(x > 0.0)) throw std::invalid_argument("BlockSpec: x must be positive");
        if (!(a_sq_left > 0.0) || !(a_sq_right > 0.0))
            throw std::invalid_argument("BlockSpec: squared norms must be positive");
        if (y() < 0.0) throw std::invalid_argument("BlockSpec: y would be negative");
    }
};

/// The 2x2 block itself. Left column = (top_left, bottom_left), occupying
/// rows (m, m+1); the single negative entry sits at bottom_right. Boundary
/// triples degenerate to exact zeros in one diagonal.
struct Block2x2 {
    double top_left = 0.0;
    double top_right = 0.0;
    double bottom_left = 0.0;
    double bottom_right = 0.0;
};

namespace detail {

enum class BlockFit { ok, equal_mass, mass_deficit, straddle };

// equal_mass: the x == y degeneracy, which has its own construction. Equal
// row masses force equal column norms (B is then sqrt(x) times an orthogonal
// matrix), so it only applies when a_l^2 == a_r^2 == x; otherwise 2x == a_l^2
// + a_r^2 with distinct norms puts them on opposite sides of x, a straddle.
// mass_deficit: combined column mass below x.
inline BlockFit classify_block(double x, double a_sq_l, double a_sq_r, const Tolerances& tol) {
    if (!(x > 0.0) || !(a_sq_l > 0.0) || !(a_sq_r > 0.0)) return BlockFit::mass_deficit;
    const double eps = tol.branch_eps;
    if (std::abs(2.0 * x - (a_sq_l + a_sq_r)) <= eps)
        return std::abs(a_sq_l - a_sq_r) <= 2.0 * eps ? BlockFit::equal_mass : BlockFit::straddle;
    if (a_sq_l + a_sq_r < x - eps) return BlockFit::mass_deficit;
    const bool both_at_or_above = a_sq_l >= x - eps && a_sq_r >= x - eps;
    const bool both_at_or_below = a_sq_l <= x + eps && a_sq_r <= x + eps;
    if (!both_at_or_above && !both_at_or_below) return BlockFit::straddle;
    return BlockFit::ok;
}

inline double sqrt_clamped(double v, const Tolerances& tol) {
    if (v < 0.0) {
        if (v < -tol.branch_eps)
            throw std::logic_error("block construction: negative radicand " + std::to_string(v));
        v = 0.0;
    }
    return std::sqrt(v);
}

} // namespace detail

/// True iff a block exists for the triple: either the equal-mass degeneracy
/// 2x = a_l^2 + a_r^2, or enough combined mass with both squared norms on the
/// same side of x (boundary contact allowed; it degenerates to two permuted
/// singletons with all invariants intact).
inline bool block_admissible(double x, double a_sq_l, double a_sq_r, const Tolerances& tol = {}) {
    const auto fit = detail::classify_block(x, a_sq_l, a_sq_r, tol);
    return fit == detail::BlockFit::ok || fit == detail::BlockFit::equal_mass;
}

/// Build the block for an admissible triple. Throws std::invalid_argument
/// naming the violated feasibility condition otherwise.
inline Block2x2 make_block(double x, double a_sq_l, double a_sq_r, const Tolerances& tol = {}) {
    detail::require_finite(x, "make_block x");
    detail::require_finite(a_sq_l, "make_block left squared norm");
    detail::require_finite(a_sq_r, "make_block right squared norm");
    if (!(x > 0.0)) throw std::invalid_argument("make_block: x must be positive");
    if (!(a_sq_l > 0.0) || !(a_sq_r > 0.0))
        throw std::invalid_argument("make_block: squared norms must be positive");
    switch (detail::classify_block(x, a_sq_l, a_sq_r, tol)) {
    case detail::BlockFit::mass_deficit:
        throw std::invalid_argument("make_block: combined column mass " +
                                    std::to_string(a_sq_l + a_sq_r) + " is below the row mass " +
                                    std::to_string(x));
    case detail::BlockFit::straddle:
        throw std::invalid_argument("make_block: squared norms " + std::to_string(a_sq_l) + ", " +
                                    std::to_string(a_sq_r) + " straddle the row mass " +
                                    std::to_string(x));
    case detail::BlockFit::equal_mass: {
        const double e = std::sqrt(x / 2.0);
        return {e, e, e, -e};
    }
    case detail::BlockFit::ok:
        break;
    }
    const double y = a_sq_l + a_sq_r - x;
    const double d = x - y;   // nonzero: x == y is the equal-mass case
    Block2x2 b;
    b.top_left = detail::sqrt_clamped(x * (a_sq_l - y) / d, tol);
    b.bottom_left = detail::sqrt_clamped(y * (x - a_sq_l) / d, tol);
    b.top_right = detail::sqrt_clamped(x * (x - a_sq_l) / d, tol);
    b.bottom_right = -detail::sqrt_clamped(y * (a_sq_l - y) / d, tol);
    return b;
}

inline Block2x2 make_block(const BlockSpec& spec, const Tolerances& tol = {}) {
    return make_block(spec.x, spec.a_sq_left, spec.a_sq_right, tol);
}

} // namespace spectral_tetris
