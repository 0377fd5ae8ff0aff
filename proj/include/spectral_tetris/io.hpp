#pragma once

// File formats and report serialization. Two matrix encodings: dense CSV
// (rows of 17-significant-digit values, nothing else in the file) and sparse
// JSON ({"rows","cols","entries":[[row,col,value],...]} with 1-based indices
// sorted column-major). Both round-trip doubles bit-exactly. Problem files,
// fusion bundles, and every report type serialize to JSON here so the CLI
// stays a thin shell.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "fusion.hpp"
#include "stc.hpp"
#include "str.hpp"
#include "verify.hpp"

namespace spectral_tetris::io {

using nlohmann::json;

/// Malformed input (unreadable file, bad JSON, wrong shape). The CLI maps
/// this to its input-error exit code.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("short write to " + path);
}

inline std::vector<double> number_list(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ParseError(what + " must be a non-empty array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const json& v : j) {
        if (!v.is_number()) throw ParseError(what + " must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

// 17 significant digits: the shortest width that reproduces any double
// exactly through a decimal round-trip.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline json read_json_file(const std::string& path) {
    const std::string text = detail::read_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(path + " is not valid JSON");
    return j;
}

// ---- problem files ----

struct FrameProblem {
    std::vector<double> norms_sq;
    std::vector<double> spectrum;
};

inline FrameProblem parse_frame_problem(const json& j) {
    if (!j.is_object() || !j.contains("norms_sq") || !j.contains("spectrum"))
        throw ParseError("frame problem needs \"norms_sq\" and \"spectrum\"");
    FrameProblem p;
    p.norms_sq = detail::number_list(j["norms_sq"], "norms_sq");
    p.spectrum = detail::number_list(j["spectrum"], "spectrum");
    return p;
}

/// Fusion problem file: subspace weights arrive unsquared (the construction
/// squares them itself).
inline FusionProblem parse_fusion_problem(const json& j) {
    if (!j.is_object() || !j.contains("subspaces") || !j.contains("spectrum"))
        throw ParseError("fusion problem needs \"subspaces\" and \"spectrum\"");
    const json& subs = j["subspaces"];
    if (!subs.is_array() || subs.empty()) throw ParseError("subspaces must be a non-empty array");
    FusionProblem p;
    for (const json& s : subs) {
        if (!s.is_object() || !s.contains("weight") || !s.contains("dim") || !s["weight"].is_number() ||
            !s["dim"].is_number_integer())
            throw ParseError("each subspace needs a numeric \"weight\" and an integer \"dim\"");
        p.subspaces.push_back({s["weight"].get<double>(), s["dim"].get<int>()});
    }
    p.spectrum = detail::number_list(j["spectrum"], "spectrum");
    if (j.contains("ordering")) {
        const json& ord = j["ordering"];
        if (!ord.is_array()) throw ParseError("ordering must be an array of subspace labels");
        std::vector<int> labels;
        for (const json& v : ord) {
            if (!v.is_number_integer()) throw ParseError("ordering must contain only integer labels");
            labels.push_back(v.get<int>());
        }
        p.ordering = std::move(labels);
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return p;
}

// ---- dense CSV ----

inline std::string dense_csv(const Matrix& m) {
    std::string out;
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            if (j) out += ',';
            out += detail::format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_dense_csv(const std::string& path, const Matrix& m) { detail::write_file(path, dense_csv(m)); }

inline Matrix parse_dense_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            const std::string cell = line.substr(pos, comma == std::string::npos ? comma : comma - pos);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw ParseError("bad CSV value '" + cell + "' in row " + std::to_string(rows.size() + 1));
            row.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("CSV row " + std::to_string(rows.size() + 1) + " has " + std::to_string(row.size()) +
                             " values, expected " + std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("CSV file has no rows");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return m;
}

inline Matrix read_dense_csv(const std::string& path) { return parse_dense_csv(detail::read_file(path)); }

// ---- sparse JSON ----

inline json sparse_json(const SparseFrame& frame) {
    json entries = json::array();
    for (const SparseEntry& e : frame.entries()) entries.push_back({e.row + 1, e.col + 1, e.value});
    return json{{"rows", frame.rows()}, {"cols", frame.cols()}, {"entries", std::move(entries)}};
}

/// Accepts the writer's output plus any extra keys (an embedded "audit"
/// object is ignored, as is anything else unknown).
inline SparseFrame parse_sparse_json(const json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("entries"))
        throw ParseError("sparse matrix needs \"rows\", \"cols\", and \"entries\"");
    if (!j["rows"].is_number_integer() || !j["cols"].is_number_integer())
        throw ParseError("sparse matrix dimensions must be integers");
    const int rows = j["rows"].get<int>(), cols = j["cols"].get<int>();
    if (!j["entries"].is_array()) throw ParseError("entries must be an array of [row, col, value] triples");
    std::vector<SparseEntry> entries;
    for (const json& t : j["entries"]) {
        if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() || !t[1].is_number_integer() ||
            !t[2].is_number())
            throw ParseError("each entry must be an [integer row, integer col, numeric value] triple");
        const int r = t[0].get<int>(), c = t[1].get<int>();
        if (r < 1 || r > rows || c < 1 || c > cols)
            throw ParseError("entry (" + std::to_string(r) + "," + std::to_string(c) + ") is outside the " +
                             std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
        entries.push_back({r - 1, c - 1, t[2].get<double>()});
    }
    try {
        return SparseFrame::from_entries(rows, cols, std::move(entries));
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("sparse matrix rejected: ") + e.what());
    }
}

/// Dense fallback for matrices that are not in column-sparse frame form.
inline Matrix dense_from_sparse_json(const json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("entries"))
        throw ParseError("sparse matrix needs \"rows\", \"cols\", and \"entries\"");
    Matrix m(j["rows"].get<int>(), j["cols"].get<int>());
    for (const json& t : j["entries"]) m(t[0].get<int>() - 1, t[1].get<int>() - 1) = t[2].get<double>();
    return m;
}

// ---- report serialization ----

inline json refusal_json(const Refusal& r) {
    json j{{"kind", refusal_kind_name(r.kind)}, {"message", r.message}};
    if (r.k > 0) j["row"] = r.k;
    if (r.kind != RefusalKind::none) j["shortfall"] = r.shortfall;
    return j;
}

inline json partition_json(const ReadyPartition& p) { return json(p.indices); }

inline json readiness_json(const ReadinessOutcome& r) {
    json j{{"ready", r.ready}};
    if (r.ready)
        j["partition"] = partition_json(r.partition);
    else
        j["refusal"] = refusal_json(r.refusal);
    return j;
}

inline json certificate_json(const ReadyCertificate& c) {
    return json{{"norm_permutation", c.norm_perm},   {"spectrum_permutation", c.spectrum_perm},
                {"norms_sq", c.norms_sq},            {"spectrum", c.spectrum},
                {"partition", partition_json(c.partition)}, {"identity", c.identity()}};
}

inline const char* search_status_name(SearchOutcome::Status s) {
    switch (s) {
    case SearchOutcome::Status::found: return "found";
    case SearchOutcome::Status::proven_impossible: return "proven-impossible";
    case SearchOutcome::Status::budget_exhausted: return "budget-exhausted";
    }
    return "unknown";
}

inline json search_json(const SearchOutcome& s) {
    json j{{"status", search_status_name(s.status)},
           {"orderings_checked", s.orderings_checked},
           {"exhaustive", s.exhaustive}};
    if (!s.note.empty()) j["note"] = s.note;
    if (s.certificate) j["certificate"] = certificate_json(*s.certificate);
    return j;
}

inline json swaps_json(const std::vector<std::pair<int, int>>& swaps) {
    json j = json::array();
    for (const auto& [a, b] : swaps) j.push_back({a, b});
    return j;
}

inline json verification_json(const VerificationReport& r) {
    json j{{"pass", r.pass},
           {"eigenvalues", r.eigenvalues},
           {"frame_bounds", {r.bound_lower, r.bound_upper}},
           {"spectrum_match", r.spectrum_match},
           {"spectrum_max_deviation", r.spectrum_max_dev},
           {"operator_diagonality_deviation", r.operator_diag_dev},
           {"max_column_norm_sq_deviation", r.max_column_norm_sq_dev},
           {"nonzeros_per_column", r.nnz_per_column},
           {"nonzeros_total", r.nnz_total},
           {"tolerance", r.tolerance}};
    if (!r.column_norm_sq_dev.empty()) j["column_norm_sq_deviations"] = r.column_norm_sq_dev;
    if (!r.part_rank.empty()) {
        j["part_rank"] = r.part_rank;
        j["part_orthogonality_max"] = r.part_orth_max;
        j["part_tightness_deviation"] = r.part_tight_dev;
        j["fusion_agreement_deviation"] = r.fusion_agreement_dev;
    }
    if (!r.pass) j["failure"] = r.failure;
    return j;
}

inline json window_json(const WindowReport& w) {
    json windows = json::array();
    for (const Window& win : w.windows) {
        json jw{{"row", win.row}, {"columns", win.slots}, {"pass", win.pass}};
        if (win.lo > 0) jw["span"] = {win.lo, win.hi};
        if (!win.repeated_labels.empty()) jw["repeated_labels"] = win.repeated_labels;
        windows.push_back(std::move(jw));
    }
    return json{{"pass", w.pass}, {"windows", std::move(windows)}, {"partition", partition_json(w.partition)}};
}

inline json conditions_json(const std::vector<ConditionMargin>& cs) {
    json j = json::array();
    for (const ConditionMargin& c : cs) {
        json jc{{"name", c.name}, {"ok", c.ok}};
        if (c.vacuous)
            jc["vacuous"] = true;
        else
            jc["margin"] = c.slack;
        j.push_back(std::move(jc));
    }
    return j;
}

inline json fusion_report_json(const FusionReport& r) {
    json j{{"ordering_mode", r.ordering_mode},
           {"initial_labels", r.initial_labels},
           {"initial_norms_sq", r.initial_norms_sq},
           {"swaps", swaps_json(r.swaps)},
           {"final_labels", r.final_labels},
           {"final_norms_sq", r.final_norms_sq},
           {"spectrum", r.spectrum},
           {"conditions", conditions_json(r.conditions)}};
    if (r.windows_checked) j["windows"] = window_json(r.windows);
    return j;
}

inline json canon_steps_json(const std::vector<CanonStep>& steps) {
    json j = json::array();
    for (const CanonStep& s : steps)
        j.push_back(json{{"kind", s.kind == CanonStep::Kind::split ? "split" : "merge"},
                         {"columns", {s.col_a, s.col_b}},
                         {"x", s.x},
                         {"y", s.y}});
    return j;
}

// ---- fusion bundles ----

/// Bundle: the matrix in sparse form plus the partition (1-based columns),
/// weights, and optionally whatever report produced it.
inline json bundle_json(const FusionFrame& fusion, std::optional<json> report = std::nullopt) {
    json parts = json::array();
    for (const auto& part : fusion.parts) {
        json p = json::array();
        for (int c : part) p.push_back(c + 1);
        parts.push_back(std::move(p));
    }
    json j = sparse_json(fusion.frame);
    j["parts"] = std::move(parts);
    j["weights"] = fusion.weights;
    if (report) j["report"] = std::move(*report);
    return j;
}

struct ParsedBundle {
    SparseFrame frame;
    std::vector<std::vector<int>> parts; // 0-based
    std::vector<double> weights;         // empty when the file omits them
};

inline ParsedBundle parse_bundle(const json& j) {
    if (!j.is_object() || !j.contains("parts")) throw ParseError("bundle needs \"parts\"");
    ParsedBundle b{parse_sparse_json(j), {}, {}};
    const json& parts = j["parts"];
    if (!parts.is_array() || parts.empty()) throw ParseError("parts must be a non-empty array of column lists");
    for (const json& p : parts) {
        if (!p.is_array()) throw ParseError("each part must be an array of 1-based column indices");
        std::vector<int> cols;
        for (const json& c : p) {
            if (!c.is_number_integer()) throw ParseError("part entries must be integers");
            const int col = c.get<int>();
            if (col < 1 || col > b.frame.cols())
                throw ParseError("part column " + std::to_string(col) + " is outside 1.." +
                                 std::to_string(b.frame.cols()));
            cols.push_back(col - 1);
        }
        b.parts.push_back(std::move(cols));
    }
    std::vector<int> seen(static_cast<std::size_t>(b.frame.cols()), 0);
    for (const auto& part : b.parts)
        for (int c : part) ++seen[static_cast<std::size_t>(c)];
    for (int c = 0; c < b.frame.cols(); ++c) {
        if (seen[static_cast<std::size_t>(c)] == 0)
            throw ParseError("column " + std::to_string(c + 1) + " belongs to no part");
        if (seen[static_cast<std::size_t>(c)] > 1)
            throw ParseError("column " + std::to_string(c + 1) + " appears in more than one part");
    }
    if (j.contains("weights")) {
        b.weights = detail::number_list(j["weights"], "weights");
        if (b.weights.size() != b.parts.size())
            throw ParseError("weights and parts disagree in length");
    }
    return b;
}

inline void write_json_file(const std::string& path, const json& j) {
    detail::write_file(path, j.dump(2) + "\n");
}

} // namespace spectral_tetris::io
