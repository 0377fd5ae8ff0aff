#pragma once

// Weighted fusion frames. A fusion problem prescribes per-subspace weights
// and dimensions plus a spectrum; construction expands the subspaces into
// labeled slots, orders them, runs the swap-capable greedy engine, tracks
// labels through the swap log, and accepts only when every repeated label
// ends up on support-disjoint columns. Also here: the window checker behind
// that acceptance, assembly/validation of externally supplied partitions,
// equal-dimension shortcuts, and the rewrite that turns any generating frame
// into one with orthogonal equal-norm parts.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "stc.hpp"
#include "str.hpp"
#include "verify.hpp"

namespace spectral_tetris {

/// One slot of an ordered fusion layout: the squared weight it carries, the
/// 1-based subspace label it belongs to, and which copy of that subspace it
/// is (0 when untracked).
struct LabeledSlot {
    double weight_sq = 0.0;
    int label = 0;
    int copy = 0;
};

/// Ordered slot sequence; the label structure is free-form (a subspace's
/// copies may even carry different squared weights, as happens when labeling
/// the columns of a frame whose parts are tight but not orthogonal).
class LabeledNormSequence {
public:
    explicit LabeledNormSequence(std::vector<LabeledSlot> slots) : slots_(std::move(slots)) {
        if (slots_.empty()) throw std::invalid_argument("LabeledNormSequence: empty");
        std::map<int, std::vector<int>> copies;
        for (const LabeledSlot& s : slots_) {
            detail::require_finite(s.weight_sq, "LabeledNormSequence");
            if (!(s.weight_sq > 0.0))
                throw std::invalid_argument("LabeledNormSequence: squared weights must be positive");
            if (s.label < 1) throw std::invalid_argument("LabeledNormSequence: labels must be >= 1");
            if (s.copy < 0) throw std::invalid_argument("LabeledNormSequence: copy indices must be >= 0");
            if (s.copy > 0) copies[s.label].push_back(s.copy);
        }
        for (auto& [label, c] : copies) {
            std::sort(c.begin(), c.end());
            if (std::adjacent_find(c.begin(), c.end()) != c.end())
                throw std::invalid_argument("LabeledNormSequence: label " + std::to_string(label) +
                                            " repeats a copy index");
        }
    }

    std::size_t size() const { return slots_.size(); }
    const LabeledSlot& operator[](std::size_t i) const { return slots_[i]; }

    NormSequence norms() const {
        std::vector<double> v;
        v.reserve(slots_.size());
        for (const LabeledSlot& s : slots_) v.push_back(s.weight_sq);
        return NormSequence(std::move(v));
    }

    std::vector<int> labels() const {
        std::vector<int> v;
        v.reserve(slots_.size());
        for (const LabeledSlot& s : slots_) v.push_back(s.label);
        return v;
    }

private:
    std::vector<LabeledSlot> slots_;
};

/// Columns sharing one row of the layout. Any two of them have intersecting
/// supports, hence a nonzero inner product; a repeated label inside one
/// window is exactly a same-subspace pair that fails orthogonality.
struct Window {
    int row = 0;                      // 1-based
    int lo = 0, hi = 0;               // 1-based column span (0,0 when the row is empty)
    std::vector<int> slots;           // 1-based columns with a nonzero in this row
    std::vector<int> repeated_labels; // labels occurring twice or more among those slots
    bool pass = true;
};

struct WindowReport {
    bool pass = true;
    std::vector<Window> windows;
    ReadyPartition partition;
};

/// Lay the slots out with the strict greedy run and flag every row whose
/// columns repeat a label. The layout, not partition arithmetic, decides
/// membership: a boundary block whose second column degenerates to a
/// singleton does not tie its neighbours together, and a block's trailing
/// column still counts against the row it leaks into.
inline WindowReport check_window_conditions(const LabeledNormSequence& slots, const Spectrum& spectrum,
                                            const Tolerances& tol = {}) {
    ReadinessOutcome ready = readiness_partition(slots.norms(), spectrum, tol);
    if (!ready.ready)
        throw std::invalid_argument("check_window_conditions: ordering is not constructible: " +
                                    ready.refusal.message);
    detail::TetrisResult run = detail::tetris_run(slots.norms().values_sq(), spectrum.values(), false, tol);
    if (!run.ok)
        throw std::logic_error("check_window_conditions: layout failed on a constructible ordering: " +
                               run.stuck_reason);

    const std::size_t m_count = spectrum.size();
    std::vector<std::vector<int>> row_slots(m_count);
    for (const SparseEntry& e : run.entries)
        row_slots[static_cast<std::size_t>(e.row)].push_back(e.col + 1);

    WindowReport report;
    report.partition = std::move(ready.partition);
    const std::vector<int> labels = slots.labels();
    for (std::size_t r = 0; r < m_count; ++r) {
        Window w;
        w.row = static_cast<int>(r) + 1;
        w.slots = std::move(row_slots[r]);
        std::sort(w.slots.begin(), w.slots.end());
        if (!w.slots.empty()) {
            w.lo = w.slots.front();
            w.hi = w.slots.back();
        }
        std::map<int, int> seen;
        for (int c : w.slots) ++seen[labels[static_cast<std::size_t>(c) - 1]];
        for (const auto& [label, count] : seen)
            if (count > 1) w.repeated_labels.push_back(label);
        w.pass = w.repeated_labels.empty();
        report.pass = report.pass && w.pass;
        report.windows.push_back(std::move(w));
    }
    return report;
}

/// How much slack a feasibility condition has; ok means slack >= 0 up to
/// branch_eps (exact for integer conditions). Vacuous conditions (no premise
/// instance, e.g. a pair bound with one subspace) report ok with zero slack.
struct ConditionMargin {
    std::string name;
    double slack = 0.0;
    bool ok = true;
    bool vacuous = false;
};

enum class OrderingMode {
    automatic,      // explicit if the problem carries one, else spread
    explicit_order, // use the problem's ordering verbatim
    spread,         // greedy hunger heuristic, see below
    periodic,       // round-robin over labels 1..K while copies remain
};

inline const char* ordering_mode_name(OrderingMode m) {
    switch (m) {
    case OrderingMode::automatic: return "automatic";
    case OrderingMode::explicit_order: return "explicit";
    case OrderingMode::spread: return "spread";
    case OrderingMode::periodic: return "periodic";
    }
    return "unknown";
}

struct FusionReport {
    std::string ordering_mode;                  // mode actually used (never "automatic")
    std::vector<int> initial_labels;            // slot labels before the run, 1-based
    std::vector<double> initial_norms_sq;
    std::vector<std::pair<int, int>> swaps;     // 1-based adjacent column swaps
    std::vector<int> final_labels;
    std::vector<double> final_norms_sq;
    std::vector<double> spectrum;               // ascending, as used by the run
    std::vector<ConditionMargin> conditions;
    bool windows_checked = false;
    WindowReport windows;                       // meaningful when windows_checked
};

struct FusionOutcome {
    bool ok = false;
    std::optional<FusionFrame> fusion;
    FusionReport report;
    Refusal refusal;
};

namespace detail {

// Periodic ordering: emit label 1..K repeatedly, skipping exhausted labels.
inline std::vector<int> periodic_order(const std::vector<int>& dims) {
    std::vector<int> remaining = dims;
    std::vector<int> out;
    bool emitted = true;
    while (emitted) {
        emitted = false;
        for (std::size_t k = 0; k < remaining.size(); ++k) {
            if (remaining[k] > 0) {
                --remaining[k];
                out.push_back(static_cast<int>(k) + 1);
                emitted = true;
            }
        }
    }
    return out;
}

// Spread ordering: each step schedules the hungriest label, where hunger is
// the squared mass placed since the label last appeared (infinite when it
// never has). Ties go to the larger weight, then the lower label. Keeps
// copies of a label as far apart in mass as the dimensions allow.
inline std::vector<int> spread_order(const std::vector<double>& weights_sq, const std::vector<int>& dims) {
    const std::size_t k_count = weights_sq.size();
    std::vector<int> remaining = dims;
    std::vector<double> placed_at(k_count, -1.0);  // cumulative mass when last scheduled
    std::vector<int> out;
    double cum = 0.0;
    int total = 0;
    for (int d : dims) total += d;
    out.reserve(static_cast<std::size_t>(total));
    for (int step = 0; step < total; ++step) {
        std::size_t best = k_count;
        double best_hunger = -1.0;
        bool best_fresh = false;
        for (std::size_t k = 0; k < k_count; ++k) {
            if (remaining[k] == 0) continue;
            const bool fresh = placed_at[k] < 0.0;
            const double hunger = fresh ? std::numeric_limits<double>::infinity() : cum - placed_at[k];
            bool better;
            if (best == k_count)
                better = true;
            else if (fresh != best_fresh)
                better = fresh;
            else if (hunger != best_hunger)
                better = hunger > best_hunger;
            else if (weights_sq[k] != weights_sq[best])
                better = weights_sq[k] > weights_sq[best];
            else
                better = false;  // lower label wins ties, and k only grows
            if (better) {
                best = k;
                best_hunger = hunger;
                best_fresh = fresh;
            }
        }
        out.push_back(static_cast<int>(best) + 1);
        --remaining[best];
        placed_at[best] = cum;
        cum += weights_sq[best];
    }
    return out;
}

} // namespace detail

/// Construct a weighted fusion frame for the problem, or refuse with the
/// first violated feasibility condition. The report always carries every
/// condition margin; windows appear once a frame was actually laid out.
inline FusionOutcome construct_weighted_fusion(const FusionProblem& problem,
                                               OrderingMode mode = OrderingMode::automatic,
                                               const Tolerances& tol = {}) {
    problem.validate();
    FusionOutcome out;

    const std::size_t k_count = problem.subspaces.size();
    std::vector<double> weights_sq(k_count);
    std::vector<int> dims(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        weights_sq[k] = problem.subspaces[k].weight * problem.subspaces[k].weight;
        dims[k] = problem.subspaces[k].dim;
    }

    OrderingMode effective = mode;
    if (effective == OrderingMode::automatic)
        effective = problem.ordering ? OrderingMode::explicit_order : OrderingMode::spread;
    std::vector<int> labels;
    switch (effective) {
    case OrderingMode::explicit_order:
        if (!problem.ordering)
            throw std::invalid_argument("construct_weighted_fusion: explicit ordering requested but the problem has none");
        labels = *problem.ordering;
        break;
    case OrderingMode::periodic:
        labels = detail::periodic_order(dims);
        break;
    case OrderingMode::spread:
        labels = detail::spread_order(weights_sq, dims);
        break;
    case OrderingMode::automatic:
        throw std::logic_error("construct_weighted_fusion: unresolved ordering mode");
    }

    FusionReport& rep = out.report;
    rep.ordering_mode = ordering_mode_name(effective);
    rep.initial_labels = labels;
    rep.spectrum = problem.spectrum;
    std::sort(rep.spectrum.begin(), rep.spectrum.end());
    const double lambda_min = rep.spectrum.front();
    const double lambda_max = rep.spectrum.back();

    std::vector<double> slot_norms_sq;
    slot_norms_sq.reserve(labels.size());
    for (int label : labels) slot_norms_sq.push_back(weights_sq[static_cast<std::size_t>(label) - 1]);
    rep.initial_norms_sq = slot_norms_sq;

    // Feasibility conditions, all evaluated for the report even after one fails.
    {
        ConditionMargin trace;
        trace.name = "trace";
        trace.slack = -std::abs(detail::neumaier_sum(slot_norms_sq) - detail::neumaier_sum(rep.spectrum));
        trace.ok = trace.slack >= -tol.branch_eps;
        rep.conditions.push_back(trace);
    }
    {
        ConditionMargin pair;
        pair.name = "weight-pair";
        if (k_count < 2) {
            pair.vacuous = true;
        } else {
            double top1 = -1.0, top2 = -1.0;
            for (double w : weights_sq) {
                if (w > top1) {
                    top2 = top1;
                    top1 = w;
                } else if (w > top2) {
                    top2 = w;
                }
            }
            pair.slack = lambda_min - (top1 + top2);
            pair.ok = pair.slack >= -tol.branch_eps;
        }
        rep.conditions.push_back(pair);
    }
    {
        // Between consecutive copies of one label, the squared mass from the
        // earlier copy (inclusive) to the later one (exclusive) must reach
        // twice the largest eigenvalue. Consecutive copies suffice: wider
        // gaps only add mass.
        ConditionMargin spacing;
        spacing.name = "label-spacing";
        std::vector<int> last(k_count, -1);
        double worst = std::numeric_limits<double>::infinity();
        std::vector<double> prefix(labels.size() + 1, 0.0);
        for (std::size_t i = 0; i < labels.size(); ++i) prefix[i + 1] = prefix[i] + slot_norms_sq[i];
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const std::size_t k = static_cast<std::size_t>(labels[i]) - 1;
            if (last[k] >= 0) {
                const double between = prefix[i] - prefix[static_cast<std::size_t>(last[k])];
                worst = std::min(worst, between - 2.0 * lambda_max);
            }
            last[k] = static_cast<int>(i);
        }
        if (std::isinf(worst)) {
            spacing.vacuous = true;
        } else {
            spacing.slack = worst;
            spacing.ok = spacing.slack >= -tol.branch_eps;
        }
        rep.conditions.push_back(spacing);
    }
    for (const ConditionMargin& c : rep.conditions) {
        if (c.ok) continue;
        RefusalKind kind = RefusalKind::trace;
        if (c.name == "weight-pair") kind = RefusalKind::weight_pair;
        if (c.name == "label-spacing") kind = RefusalKind::label_spacing;
        out.refusal = {kind, 0, c.slack,
                       "condition '" + c.name + "' fails with slack " + std::to_string(c.slack)};
        return out;
    }

    StrOutcome run =
        str_construct(NormSequence(slot_norms_sq), Spectrum(rep.spectrum), StrMode::best_effort, tol);
    rep.swaps = run.swaps;
    rep.final_norms_sq = run.final_norms_sq;
    rep.final_labels = labels;
    for (const auto& sw : run.swaps)
        std::swap(rep.final_labels[static_cast<std::size_t>(sw.first) - 1],
                  rep.final_labels[static_cast<std::size_t>(sw.second) - 1]);
    if (!run.ok) {
        out.refusal = {RefusalKind::construction, run.stuck_row, run.stuck_residual,
                       "the greedy run got stuck at row " + std::to_string(run.stuck_row) + ", column " +
                           std::to_string(run.stuck_col) + ": " + run.stuck_reason};
        return out;
    }

    std::vector<LabeledSlot> final_slots;
    final_slots.reserve(labels.size());
    std::vector<int> copies_seen(k_count, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int copy = ++copies_seen[static_cast<std::size_t>(rep.final_labels[i]) - 1];
        final_slots.push_back({rep.final_norms_sq[i], rep.final_labels[i], copy});
    }
    const LabeledNormSequence final_sequence{std::move(final_slots)};
    if (!readiness_partition(final_sequence.norms(), Spectrum(rep.spectrum), tol).ready)
        throw std::logic_error("construct_weighted_fusion: the run succeeded on an ordering that fails readiness");
    rep.windows = check_window_conditions(final_sequence, Spectrum(rep.spectrum), tol);
    rep.windows_checked = true;
    if (!rep.windows.pass) {
        std::string rows;
        for (const Window& w : rep.windows.windows)
            if (!w.pass) rows += (rows.empty() ? "" : ", ") + std::to_string(w.row);
        throw std::logic_error("construct_weighted_fusion: feasibility conditions passed but rows " + rows +
                               " still hold repeated labels; this indicates a defect");
    }

    FusionFrame fusion;
    fusion.frame = *run.frame;
    fusion.parts.assign(k_count, {});
    for (std::size_t i = 0; i < rep.final_labels.size(); ++i)
        fusion.parts[static_cast<std::size_t>(rep.final_labels[i]) - 1].push_back(static_cast<int>(i));
    fusion.weights.assign(k_count, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) fusion.weights[k] = problem.subspaces[k].weight;
    fusion.validate();
    out.fusion = std::move(fusion);
    out.ok = true;
    return out;
}

/// Tight fusion frame with equal subspace dimensions d in R^M. The tight
/// eigenvalue is forced by the trace; feasibility needs the two largest
/// weights to fit under it and 2d <= M. Subspaces are sorted by weight
/// ascending, so part k of the result carries the k-th smallest weight.
inline FusionOutcome tight_equidim_fusion(std::vector<double> weights, int d, int m_dim,
                                          const Tolerances& tol = {}) {
    if (weights.empty()) throw std::invalid_argument("tight_equidim_fusion: no weights");
    for (double w : weights) {
        detail::require_finite(w, "tight_equidim_fusion");
        if (!(w > 0.0)) throw std::invalid_argument("tight_equidim_fusion: weights must be positive");
    }
    if (d < 1) throw std::invalid_argument("tight_equidim_fusion: dimension must be >= 1");
    if (m_dim < 1) throw std::invalid_argument("tight_equidim_fusion: ambient dimension must be >= 1");
    std::sort(weights.begin(), weights.end());

    std::vector<double> weights_sq;
    weights_sq.reserve(weights.size());
    for (double w : weights) weights_sq.push_back(w * w);
    const double lambda = static_cast<double>(d) * detail::neumaier_sum(weights_sq) / m_dim;

    FusionOutcome out;
    ConditionMargin pair;
    pair.name = "weight-pair";
    if (weights.size() < 2) {
        pair.vacuous = true;
    } else {
        pair.slack = lambda - (weights_sq[weights_sq.size() - 1] + weights_sq[weights_sq.size() - 2]);
        pair.ok = pair.slack >= -tol.branch_eps;
    }
    ConditionMargin ratio;
    ratio.name = "dimension-ratio";
    ratio.slack = static_cast<double>(m_dim) - 2.0 * d;
    ratio.ok = m_dim >= 2 * d;

    if (!pair.ok || !ratio.ok) {
        out.report.conditions = {pair, ratio};
        if (!pair.ok)
            out.refusal = {RefusalKind::weight_pair, 0, pair.slack,
                           "two largest squared weights exceed the tight eigenvalue " + std::to_string(lambda)};
        else
            out.refusal = {RefusalKind::dimension_ratio, 0, ratio.slack,
                           "subspace dimension " + std::to_string(d) + " exceeds half the ambient dimension " +
                               std::to_string(m_dim)};
        return out;
    }

    FusionProblem problem;
    for (double w : weights) problem.subspaces.push_back({w, d});
    problem.spectrum.assign(static_cast<std::size_t>(m_dim), lambda);
    out = construct_weighted_fusion(problem, OrderingMode::periodic, tol);
    out.report.conditions.push_back(ratio);
    return out;
}

/// Non-tight sibling: equal dimensions d, arbitrary prescribed spectrum.
/// Feasibility: trace match, two largest weights under the smallest
/// eigenvalue, and one full weight round outweighing twice the largest
/// eigenvalue (the per-period spacing mass of the periodic ordering).
inline FusionOutcome nontight_equidim_fusion(std::vector<double> weights, int d, std::vector<double> spectrum,
                                             const Tolerances& tol = {}) {
    if (weights.empty()) throw std::invalid_argument("nontight_equidim_fusion: no weights");
    for (double w : weights) {
        detail::require_finite(w, "nontight_equidim_fusion");
        if (!(w > 0.0)) throw std::invalid_argument("nontight_equidim_fusion: weights must be positive");
    }
    if (d < 1) throw std::invalid_argument("nontight_equidim_fusion: dimension must be >= 1");
    if (spectrum.empty()) throw std::invalid_argument("nontight_equidim_fusion: empty spectrum");
    for (double l : spectrum) {
        detail::require_finite(l, "nontight_equidim_fusion");
        if (!(l > 0.0)) throw std::invalid_argument("nontight_equidim_fusion: eigenvalues must be positive");
    }
    std::sort(weights.begin(), weights.end());
    std::sort(spectrum.begin(), spectrum.end());

    std::vector<double> weights_sq;
    weights_sq.reserve(weights.size());
    for (double w : weights) weights_sq.push_back(w * w);
    const double round_mass = detail::neumaier_sum(weights_sq);
    const double lambda_sum = detail::neumaier_sum(spectrum);

    FusionOutcome out;
    ConditionMargin trace;
    trace.name = "trace";
    trace.slack = -std::abs(static_cast<double>(d) * round_mass - lambda_sum);
    trace.ok = trace.slack >= -tol.branch_eps;
    ConditionMargin pair;
    pair.name = "weight-pair";
    if (weights.size() < 2) {
        pair.vacuous = true;
    } else {
        pair.slack = spectrum.front() - (weights_sq[weights_sq.size() - 1] + weights_sq[weights_sq.size() - 2]);
        pair.ok = pair.slack >= -tol.branch_eps;
    }
    ConditionMargin spacing;
    spacing.name = "label-spacing";
    spacing.slack = round_mass - 2.0 * spectrum.back();
    spacing.ok = spacing.slack >= -tol.branch_eps;

    if (!trace.ok || !pair.ok || !spacing.ok) {
        out.report.conditions = {trace, pair, spacing};
        if (!trace.ok)
            out.refusal = {RefusalKind::trace, 0, trace.slack,
                           "d * (total squared weight) = " + std::to_string(d * round_mass) +
                               " does not match the spectrum total " + std::to_string(lambda_sum)};
        else if (!pair.ok)
            out.refusal = {RefusalKind::weight_pair, 0, pair.slack,
                           "two largest squared weights exceed the smallest eigenvalue " +
                               std::to_string(spectrum.front())};
        else
            out.refusal = {RefusalKind::label_spacing, 0, spacing.slack,
                           "one round of squared weights (" + std::to_string(round_mass) +
                               ") falls short of twice the largest eigenvalue (" +
                               std::to_string(2.0 * spectrum.back()) +
                               "); equivalently mean(spectrum) / (2 * max(spectrum)) = " +
                               std::to_string(lambda_sum / (spectrum.size() * 2.0 * spectrum.back())) +
                               " is below d / M = " +
                               std::to_string(static_cast<double>(d) / spectrum.size())};
        return out;
    }

    FusionProblem problem;
    for (double w : weights) problem.subspaces.push_back({w, d});
    problem.spectrum = spectrum;
    return construct_weighted_fusion(problem, OrderingMode::periodic, tol);
}

/// Bundle an existing frame with a column partition and weights after
/// checking each part is a tight frame for its span with bound nu_k^2.
/// Orthogonal parts with matching column norms pass directly; anything else
/// must satisfy the tightness identity S_part^2 = nu^2 S_part.
inline FusionFrame assemble_fusion(const SparseFrame& frame, std::vector<std::vector<int>> parts,
                                   std::vector<double> weights, const Tolerances& tol = {}) {
    FusionFrame fusion;
    fusion.frame = frame;
    fusion.parts = std::move(parts);
    fusion.weights = std::move(weights);
    fusion.validate();

    const int m = frame.rows();
    for (std::size_t k = 0; k < fusion.parts.size(); ++k) {
        const auto& part = fusion.parts[k];
        const double nu_sq = fusion.weights[k] * fusion.weights[k];
        const double thr = tol.verify_eps * std::max(1.0, nu_sq);

        bool canonical = true;
        std::string violation;
        for (std::size_t i = 0; i < part.size() && canonical; ++i) {
            const double dev = std::abs(frame.column_norm_sq(part[i]) - nu_sq);
            if (dev > thr) {
                canonical = false;
                violation = "column " + std::to_string(part[i] + 1) + " has squared norm " +
                            std::to_string(frame.column_norm_sq(part[i])) + ", expected " + std::to_string(nu_sq);
            }
        }
        for (std::size_t i = 0; i < part.size() && canonical; ++i)
            for (std::size_t j = i + 1; j < part.size() && canonical; ++j) {
                const double dot = frame.column_dot(part[i], part[j]);
                if (std::abs(dot) > thr) {
                    canonical = false;
                    violation = "columns " + std::to_string(part[i] + 1) + " and " + std::to_string(part[j] + 1) +
                                " are not orthogonal (inner product " + std::to_string(dot) + ")";
                }
            }
        if (canonical) continue;

        // Not canonical; accept anyway when the part operator satisfies the
        // tightness identity, since such parts span the same weighted
        // projection.
        Matrix s(m, m);
        for (int c : part) {
            auto [first, last] = frame.column(c);
            for (const SparseEntry* p = first; p != last; ++p)
                for (const SparseEntry* q = first; q != last; ++q) s(p->row, q->row) += p->value * q->value;
        }
        double s_max = 0.0;
        for (double v : s.a) s_max = std::max(s_max, std::abs(v));
        double dev = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double ss = 0.0;
                for (int l = 0; l < m; ++l) ss += s(i, l) * s(l, j);
                dev = std::max(dev, std::abs(ss - nu_sq * s(i, j)));
            }
        if (dev > tol.verify_eps * std::max({1.0, nu_sq * nu_sq, nu_sq * s_max}))
            throw std::invalid_argument("assemble_fusion: part " + std::to_string(k + 1) +
                                        " is not tight with bound " + std::to_string(nu_sq) + ": " + violation);
    }
    return fusion;
}

/// One rewrite applied during canonicalization, indexed by the 1-based column
/// positions at the moment it fired. A split turns the two columns of a
/// non-orthogonal in-part block into disjoint singletons with squared norms
/// x (upper row) and y (lower row); a merge folds colinear column b into a,
/// whose squared norms x and y combine to x + y.
struct CanonStep {
    enum class Kind { split, merge };
    Kind kind = Kind::split;
    int col_a = 0, col_b = 0;
    double x = 0.0, y = 0.0;
};

struct CanonicalizeOutcome {
    FusionFrame fusion;
    std::vector<CanonStep> steps;
};

/// Rewrite a generating frame so every part becomes an orthogonal equal-norm
/// set spanning the same subspace with the same operator contribution.
/// Requires each part of the input to be a tight frame for its span (any
/// bound); the weights of the result are read off the rewritten columns.
inline CanonicalizeOutcome canonicalize(const SparseFrame& frame, std::vector<std::vector<int>> parts,
                                        const Tolerances& tol = {}) {
    {
        FusionFrame probe;
        probe.frame = frame;
        probe.parts = parts;
        probe.weights.assign(parts.size(), 1.0);
        probe.validate();
    }

    const int m = frame.rows();
    // Tightness of each part for its span: the part operator's eigenvalues
    // must split into 0 and one positive value.
    for (std::size_t k = 0; k < parts.size(); ++k) {
        Matrix s(m, m);
        for (int c : parts[k]) {
            auto [first, last] = frame.column(c);
            for (const SparseEntry* p = first; p != last; ++p)
                for (const SparseEntry* q = first; q != last; ++q) s(p->row, q->row) += p->value * q->value;
        }
        const std::vector<double> eig = symmetric_eigenvalues(s, tol);
        const double bound = eig.back();
        if (!(bound > 0.0))
            throw std::invalid_argument("canonicalize: part " + std::to_string(k + 1) + " has a zero operator");
        for (double e : eig)
            if (std::min(std::abs(e), std::abs(e - bound)) > tol.verify_eps * std::max(1.0, bound))
                throw std::invalid_argument("canonicalize: part " + std::to_string(k + 1) +
                                            " is not a tight frame for its span (eigenvalue " + std::to_string(e) +
                                            " vs bound " + std::to_string(bound) + ")");
    }

    // Mutable column store: per column, sorted (row, value) nonzeros.
    std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(frame.cols()));
    for (const SparseEntry& e : frame.entries())
        cols[static_cast<std::size_t>(e.col)].emplace_back(e.row, e.value);
    std::vector<int> part_of(cols.size(), 0);
    for (std::size_t k = 0; k < parts.size(); ++k)
        for (int c : parts[k]) part_of[static_cast<std::size_t>(c)] = static_cast<int>(k);

    auto norm_sq = [&](std::size_t c) {
        double s = 0.0;
        for (const auto& [r, v] : cols[c]) s += v * v;
        return s;
    };
    auto dot = [&](std::size_t c1, std::size_t c2) {
        double s = 0.0;
        for (const auto& [r1, v1] : cols[c1])
            for (const auto& [r2, v2] : cols[c2])
                if (r1 == r2) s += v1 * v2;
        return s;
    };
    auto orth_thr = [&](std::size_t c1, std::size_t c2) {
        return tol.verify_eps * std::max(1.0, std::sqrt(norm_sq(c1) * norm_sq(c2)));
    };

    CanonicalizeOutcome out;
    const int step_cap = 4 * frame.cols() + 8;
    for (int iter = 0;; ++iter) {
        if (iter > step_cap)
            throw std::logic_error("canonicalize: rewrite did not terminate within its step cap");

        // A non-orthogonal block pair inside one part splits into singletons
        // carrying the block's per-row masses.
        bool acted = false;
        for (std::size_t c = 0; c + 1 < cols.size(); ++c) {
            if (part_of[c] != part_of[c + 1]) continue;
            if (cols[c].size() != 2 || cols[c + 1].size() != 2) continue;
            if (cols[c][0].first != cols[c + 1][0].first || cols[c][1].first != cols[c + 1][1].first) continue;
            if (std::abs(dot(c, c + 1)) <= orth_thr(c, c + 1)) continue;
            const int top = cols[c][0].first, bottom = cols[c][1].first;
            const double x = cols[c][0].second * cols[c][0].second + cols[c + 1][0].second * cols[c + 1][0].second;
            const double y = cols[c][1].second * cols[c][1].second + cols[c + 1][1].second * cols[c + 1][1].second;
            cols[c] = {{top, std::sqrt(x)}};
            cols[c + 1] = {{bottom, std::sqrt(y)}};
            out.steps.push_back({CanonStep::Kind::split, static_cast<int>(c) + 1, static_cast<int>(c) + 2, x, y});
            acted = true;
            break;
        }
        if (acted) continue;

        // First colinear in-part pair merges; lexicographic scan keeps the
        // step log deterministic.
        for (std::size_t i = 0; i < cols.size() && !acted; ++i) {
            for (std::size_t j = i + 1; j < cols.size(); ++j) {
                if (part_of[i] != part_of[j]) continue;
                const double ni = norm_sq(i), nj = norm_sq(j);
                const double d = dot(i, j);
                if (std::abs(ni * nj - d * d) > tol.verify_eps * std::max(1.0, ni * nj)) continue;
                const double factor = std::sqrt((ni + nj) / ni);
                for (auto& [r, v] : cols[i]) v *= factor;
                out.steps.push_back({CanonStep::Kind::merge, static_cast<int>(i) + 1, static_cast<int>(j) + 1, ni, nj});
                cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(j));
                part_of.erase(part_of.begin() + static_cast<std::ptrdiff_t>(j));
                acted = true;
                break;
            }
        }
        if (!acted) break;
    }

    // Everything left must already be orthogonal with equal norms per part.
    std::vector<std::vector<int>> new_parts(parts.size());
    for (std::size_t c = 0; c < cols.size(); ++c)
        new_parts[static_cast<std::size_t>(part_of[c])].push_back(static_cast<int>(c));
    std::vector<double> new_weights(parts.size(), 0.0);
    for (std::size_t k = 0; k < new_parts.size(); ++k) {
        const auto& part = new_parts[k];
        if (part.empty())
            throw std::logic_error("canonicalize: part " + std::to_string(k + 1) + " lost all of its columns");
        const double head = norm_sq(static_cast<std::size_t>(part[0]));
        for (std::size_t i = 0; i < part.size(); ++i) {
            const std::size_t ci = static_cast<std::size_t>(part[i]);
            if (std::abs(norm_sq(ci) - head) > tol.verify_eps * std::max(1.0, head))
                throw std::logic_error("canonicalize: part " + std::to_string(k + 1) +
                                       " ended with unequal column norms");
            for (std::size_t j = i + 1; j < part.size(); ++j) {
                const std::size_t cj = static_cast<std::size_t>(part[j]);
                if (std::abs(dot(ci, cj)) > orth_thr(ci, cj))
                    throw std::logic_error("canonicalize: part " + std::to_string(k + 1) +
                                           " ended with non-orthogonal columns");
            }
        }
        new_weights[k] = std::sqrt(head);
    }

    std::vector<SparseEntry> entries;
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (const auto& [r, v] : cols[c]) entries.push_back({r, static_cast<int>(c), v});
    out.fusion.frame = SparseFrame::from_entries(m, static_cast<int>(cols.size()), std::move(entries));
    out.fusion.parts = std::move(new_parts);
    out.fusion.weights = std::move(new_weights);
    out.fusion.validate();
    return out;
}

} // namespace spectral_tetris
