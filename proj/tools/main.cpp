// spectral-tetris CLI: construct sparse frames and weighted fusion frames
// with prescribed spectra, check feasibility, verify results, canonicalize
// partitions. Exit codes: 0 success, 1 verification failure, 2 infeasible or
// condition violation, 3 search budget exhausted, 64 input error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spectral_tetris/spectral_tetris.hpp"

namespace st = spectral_tetris;
using st::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitBudget = 3;
constexpr int kExitInput = 64;
constexpr int kExitInternal = 70;

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

// Tolerances for verification: --tolerance beats SPECTRAL_TETRIS_TOLERANCE
// beats the default. The branch tolerance never rises above its default.
st::Tolerances make_tolerances(std::optional<double> flag_tol) {
    st::Tolerances base;
    double verify = base.verify_eps;
    if (const char* env = std::getenv("SPECTRAL_TETRIS_TOLERANCE")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end == env || *end != '\0' || !(v > 0.0))
            throw st::io::ParseError("SPECTRAL_TETRIS_TOLERANCE is not a positive number");
        verify = v;
    }
    if (flag_tol) {
        if (!(*flag_tol > 0.0)) throw st::io::ParseError("--tolerance must be positive");
        verify = *flag_tol;
    }
    return st::Tolerances{std::min(base.branch_eps, verify), verify};
}

struct ProblemInputs {
    st::NormSequence norms;
    st::Spectrum spectrum;
};

ProblemInputs load_frame_problem(const std::string& path) {
    const st::io::FrameProblem p = st::io::parse_frame_problem(st::io::read_json_file(path));
    try {
        return {st::NormSequence(p.norms_sq), st::Spectrum(p.spectrum)};
    } catch (const std::invalid_argument& e) {
        throw st::io::ParseError(path + ": " + e.what());
    }
}

int cmd_check_ready(const std::string& path, bool search, long long budget, const st::Tolerances& tol) {
    const ProblemInputs in = load_frame_problem(path);
    const st::ReadinessOutcome ready = st::readiness_partition(in.norms, in.spectrum, tol);
    json out = st::io::readiness_json(ready);
    if (!search) {
        emit(out);
        return ready.ready ? kExitOk : kExitInfeasible;
    }
    const st::SearchOutcome found = st::exists_ready_permutation(in.norms, in.spectrum, budget, tol);
    out["search"] = st::io::search_json(found);
    emit(out);
    switch (found.status) {
    case st::SearchOutcome::Status::found: return kExitOk;
    case st::SearchOutcome::Status::proven_impossible: return kExitInfeasible;
    case st::SearchOutcome::Status::budget_exhausted: return kExitBudget;
    }
    return kExitInternal;
}

int cmd_frame(const std::string& path, bool reorder, const std::string& out_path, const std::string& format,
              const st::Tolerances& tol) {
    const ProblemInputs in = load_frame_problem(path);
    json report;
    std::optional<st::SparseFrame> frame;
    // The audit must check the norms the frame actually realizes: after
    // --reorder swaps those are the final sequence, not the input order.
    st::NormSequence audit_norms = in.norms;

    if (reorder) {
        const st::StrOutcome run = st::str_construct(in.norms, in.spectrum, st::StrMode::best_effort, tol);
        report["preconditions"] = json{{"trace_ok", run.verdict.trace_ok},
                                       {"trace_gap", run.verdict.trace_gap_value},
                                       {"pair_ok", run.verdict.pair_ok},
                                       {"max_pair_sum", run.verdict.max_pair_sum},
                                       {"min_eigenvalue", run.verdict.min_eigenvalue}};
        if (!run.ok) {
            report["infeasible"] = json{{"reason", run.stuck_reason},
                                        {"row", run.stuck_row},
                                        {"column", run.stuck_col},
                                        {"residual", run.stuck_residual}};
            emit(report);
            return kExitInfeasible;
        }
        report["swaps"] = st::io::swaps_json(run.swaps);
        report["final_norms_sq"] = run.final_norms_sq;
        audit_norms = st::NormSequence(run.final_norms_sq);
        frame = run.frame;
    } else {
        const st::StcOutcome run = st::stc_construct(in.norms, in.spectrum, tol);
        if (!run.ok) {
            report["refusal"] = st::io::refusal_json(run.refusal);
            emit(report);
            return kExitInfeasible;
        }
        report["partition"] = st::io::partition_json(run.partition);
        frame = run.frame;
    }

    const st::VerificationReport audit = st::audit(*frame, in.spectrum, audit_norms, tol);
    report["audit"] = st::io::verification_json(audit);

    if (format == "dense-csv") {
        const std::string csv = st::io::dense_csv(frame->dense());
        if (out_path.empty())
            report["matrix_csv"] = csv;
        else
            st::io::detail::write_file(out_path, csv);
    } else {
        json sparse = st::io::sparse_json(*frame);
        sparse["audit"] = report["audit"];
        if (out_path.empty())
            report["matrix"] = sparse;
        else
            st::io::write_json_file(out_path, sparse);
    }
    if (!out_path.empty()) report["out"] = out_path;
    emit(report);
    return audit.pass ? kExitOk : kExitVerifyFail;
}

// Routing: an explicit ordering (file or flag) goes through the general
// constructor; otherwise equal dimensions take the closed-form paths
// (constant spectrum with a matching trace goes tight, anything else
// non-tight) and mixed dimensions use the spread heuristic.
int cmd_fusion(const std::string& path, const std::string& ordering, const std::string& out_path,
               const st::Tolerances& tol) {
    st::FusionProblem problem = st::io::parse_fusion_problem(st::io::read_json_file(path));
    try {
        problem.validate();
    } catch (const std::invalid_argument& e) {
        throw st::io::ParseError(path + ": " + e.what());
    }

    st::FusionOutcome outcome;
    std::string route;
    if (ordering == "explicit") {
        if (!problem.ordering)
            throw st::io::ParseError(path + ": --ordering explicit needs an \"ordering\" in the problem file");
        outcome = st::construct_weighted_fusion(problem, st::OrderingMode::explicit_order, tol);
        route = "general";
    } else if (ordering == "spread") {
        outcome = st::construct_weighted_fusion(problem, st::OrderingMode::spread, tol);
        route = "general";
    } else if (ordering == "periodic") {
        outcome = st::construct_weighted_fusion(problem, st::OrderingMode::periodic, tol);
        route = "general";
    } else if (problem.ordering) {
        outcome = st::construct_weighted_fusion(problem, st::OrderingMode::automatic, tol);
        route = "general";
    } else {
        const int d = problem.subspaces.front().dim;
        const bool equal_dims = std::all_of(problem.subspaces.begin(), problem.subspaces.end(),
                                            [&](const st::FusionProblem::Subspace& s) { return s.dim == d; });
        if (!equal_dims) {
            outcome = st::construct_weighted_fusion(problem, st::OrderingMode::automatic, tol);
            route = "general";
        } else {
            std::vector<double> weights;
            double trace = 0.0;
            for (const auto& s : problem.subspaces) {
                weights.push_back(s.weight);
                trace += static_cast<double>(d) * s.weight * s.weight;
            }
            double spectrum_sum = 0.0;
            bool constant = true;
            for (double l : problem.spectrum) {
                spectrum_sum += l;
                constant = constant && std::abs(l - problem.spectrum.front()) <= tol.branch_eps;
            }
            if (constant && std::abs(trace - spectrum_sum) <= tol.branch_eps) {
                outcome = st::tight_equidim_fusion(weights, d, static_cast<int>(problem.spectrum.size()), tol);
                route = "tight-equidim";
            } else {
                outcome = st::nontight_equidim_fusion(weights, d, problem.spectrum, tol);
                route = "nontight-equidim";
            }
        }
    }

    json report = st::io::fusion_report_json(outcome.report);
    report["route"] = route;
    if (!outcome.ok) {
        report["refusal"] = st::io::refusal_json(outcome.refusal);
        emit(report);
        return kExitInfeasible;
    }

    const st::VerificationReport audit =
        st::audit(*outcome.fusion, st::Spectrum(outcome.report.spectrum), outcome.fusion->weights, tol);
    report["audit"] = st::io::verification_json(audit);
    if (!out_path.empty()) {
        st::io::write_json_file(out_path, st::io::bundle_json(*outcome.fusion, report));
        report["out"] = out_path;
    } else {
        report["bundle"] = st::io::bundle_json(*outcome.fusion);
    }
    emit(report);
    return audit.pass ? kExitOk : kExitVerifyFail;
}

int cmd_verify(const std::string& matrix_path, const std::string& expect_path, const st::Tolerances& tol) {
    const std::string raw = st::io::detail::read_file(matrix_path);
    const std::size_t first = raw.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw st::io::ParseError(matrix_path + " is empty");

    json matrix_doc;
    st::Matrix dense(1, 1);
    if (raw[first] == '{') {
        matrix_doc = json::parse(raw, nullptr, false);
        if (matrix_doc.is_discarded()) throw st::io::ParseError(matrix_path + " is not valid JSON");
    } else {
        dense = st::io::parse_dense_csv(raw);
    }

    const json expect = st::io::read_json_file(expect_path);
    if (!expect.is_object() || !expect.contains("spectrum"))
        throw st::io::ParseError("expectations file needs a \"spectrum\"");
    st::Spectrum spectrum{st::io::detail::number_list(expect["spectrum"], "spectrum")};
    std::optional<st::NormSequence> norms;
    if (expect.contains("norms_sq")) norms.emplace(st::io::detail::number_list(expect["norms_sq"], "norms_sq"));

    // Structural rejection (a column with too many nonzeros, say) is a
    // verification failure, not an input error: the file was readable, the
    // matrix just is not a spectral tetris frame.
    std::optional<st::SparseFrame> frame;
    try {
        if (matrix_doc.is_object()) {
            frame = st::io::parse_sparse_json(matrix_doc);
        } else {
            std::vector<st::SparseEntry> entries;
            for (int i = 0; i < dense.rows; ++i)
                for (int j = 0; j < dense.cols; ++j)
                    if (dense(i, j) != 0.0) entries.push_back({i, j, dense(i, j)});
            frame = st::SparseFrame::from_entries(dense.rows, dense.cols, std::move(entries));
        }
    } catch (const st::io::ParseError& e) {
        emit(json{{"pass", false}, {"failure", std::string("not a sparse frame: ") + e.what()}});
        return kExitVerifyFail;
    } catch (const std::invalid_argument& e) {
        emit(json{{"pass", false}, {"failure", std::string("not a sparse frame: ") + e.what()}});
        return kExitVerifyFail;
    }

    // Parts from the expectations file, else from the matrix bundle itself.
    std::optional<st::io::ParsedBundle> bundle;
    if (expect.contains("parts")) {
        json probe = matrix_doc.is_object() ? matrix_doc : st::io::sparse_json(*frame);
        probe["parts"] = expect["parts"];
        if (expect.contains("weights")) probe["weights"] = expect["weights"];
        bundle = st::io::parse_bundle(probe);
    } else if (matrix_doc.is_object() && matrix_doc.contains("parts")) {
        bundle = st::io::parse_bundle(matrix_doc);
    }

    st::VerificationReport report;
    if (bundle) {
        st::FusionFrame fusion;
        fusion.frame = *frame;
        fusion.parts = bundle->parts;
        if (!bundle->weights.empty()) {
            fusion.weights = bundle->weights;
        } else {
            for (const auto& part : bundle->parts)
                fusion.weights.push_back(std::sqrt(frame->column_norm_sq(part.front())));
        }
        try {
            fusion.validate();
        } catch (const std::invalid_argument& e) {
            throw st::io::ParseError(std::string("bad partition: ") + e.what());
        }
        std::optional<std::vector<double>> expected_weights;
        if (!bundle->weights.empty()) expected_weights = bundle->weights;
        report = st::audit(fusion, spectrum, expected_weights, tol);
    } else {
        report = st::audit(*frame, spectrum, norms, tol);
    }
    emit(st::io::verification_json(report));
    return report.pass ? kExitOk : kExitVerifyFail;
}

int cmd_canonicalize(const std::string& path, const std::string& out_path, const st::Tolerances& tol) {
    const st::io::ParsedBundle bundle = st::io::parse_bundle(st::io::read_json_file(path));
    st::CanonicalizeOutcome outcome;
    try {
        outcome = st::canonicalize(bundle.frame, bundle.parts, tol);
    } catch (const std::invalid_argument& e) {
        emit(json{{"ok", false}, {"reason", e.what()}});
        return kExitInfeasible;
    }
    json report{{"ok", true},
                {"steps", st::io::canon_steps_json(outcome.steps)},
                {"weights", outcome.fusion.weights}};
    if (!out_path.empty()) {
        st::io::write_json_file(out_path, st::io::bundle_json(outcome.fusion, report));
        report["out"] = out_path;
    } else {
        report["bundle"] = st::io::bundle_json(outcome.fusion);
    }
    emit(report);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse frames and weighted fusion frames with prescribed spectra"};
    app.require_subcommand(1);

    std::string problem_path, matrix_path, expect_path, out_path;
    std::string format = "sparse-json", ordering;
    bool search = false, reorder = false;
    long long budget = 100000;
    std::optional<double> tolerance;

    CLI::App* ready = app.add_subcommand("check-ready", "Check whether an ordering admits a direct construction");
    ready->add_option("problem", problem_path, "problem JSON file")->required();
    ready->add_flag("--search", search, "search reorderings for a constructible certificate");
    ready->add_option("--budget", budget, "max orderings to try during --search")->check(CLI::PositiveNumber);

    CLI::App* frame = app.add_subcommand("frame", "Construct a sparse frame with prescribed spectrum and norms");
    frame->add_option("problem", problem_path, "problem JSON file")->required();
    frame->add_flag("--reorder", reorder, "allow adjacent norm swaps when a block cannot exist");
    frame->add_option("--out", out_path, "write the matrix to this file");
    frame->add_option("--format", format, "matrix file format")
        ->check(CLI::IsMember({"dense-csv", "sparse-json"}));

    CLI::App* fusion = app.add_subcommand("fusion", "Construct a weighted fusion frame");
    fusion->add_option("problem", problem_path, "fusion problem JSON file")->required();
    fusion->add_option("--ordering", ordering, "slot ordering strategy")
        ->check(CLI::IsMember({"explicit", "spread", "periodic"}));
    fusion->add_option("--out", out_path, "write the fusion bundle to this file");

    CLI::App* verify = app.add_subcommand("verify", "Independently verify a matrix or bundle against expectations");
    verify->add_option("matrix", matrix_path, "matrix file (dense CSV or sparse JSON, may be a bundle)")->required();
    verify->add_option("expectations", expect_path, "expectations JSON (spectrum, optional norms_sq/parts/weights)")
        ->required();
    verify->add_option("--tolerance", tolerance, "verification tolerance (default 1e-9)");

    CLI::App* canon = app.add_subcommand("canonicalize", "Rewrite a bundle so every part is orthogonal equal-norm");
    canon->add_option("bundle", matrix_path, "fusion bundle JSON file")->required();
    canon->add_option("--out", out_path, "write the canonicalized bundle to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        const st::Tolerances tol = make_tolerances(tolerance);
        if (ready->parsed()) return cmd_check_ready(problem_path, search, budget, tol);
        if (frame->parsed()) return cmd_frame(problem_path, reorder, out_path, format, tol);
        if (fusion->parsed()) return cmd_fusion(problem_path, ordering, out_path, tol);
        if (verify->parsed()) return cmd_verify(matrix_path, expect_path, tol);
        if (canon->parsed()) return cmd_canonicalize(matrix_path, out_path, tol);
    } catch (const st::io::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
