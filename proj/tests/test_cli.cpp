// End-to-end tests for the spectral-tetris binary: every subcommand is run
// as a subprocess and judged on exit code plus emitted JSON. The binary path
// comes in through CLI_BINARY_PATH so the suite works from any build tree.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

using json = nlohmann::json;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

std::string binary() { return std::string(CLI_BINARY_PATH); }

RunResult run_raw(const std::string& cmd) {
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) FAIL("popen failed for: " << cmd);
    std::string out;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = pclose(pipe);
    RunResult r;
    r.out = std::move(out);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// stdout captured, stderr dropped; env_prefix lets a test set variables.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    return run_raw(env_prefix + "'" + binary() + "' " + args + " 2>/dev/null");
}

// stderr captured instead of stdout, for diagnostics-only failures.
RunResult run_cli_stderr(const std::string& args, const std::string& env_prefix = "") {
    return run_raw(env_prefix + "'" + binary() + "' " + args + " 2>&1 1>/dev/null");
}

const std::string& work_dir() {
    static const std::string dir = [] {
        char tmpl[] = "/tmp/spectral_tetris_cli_XXXXXX";
        if (!mkdtemp(tmpl)) std::abort();
        return std::string(tmpl);
    }();
    return dir;
}

std::string write_text(const std::string& name, const std::string& content) {
    const std::string path = work_dir() + "/" + name;
    std::ofstream f(path);
    f << content;
    return path;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json parse_out(const RunResult& r) {
    json j = json::parse(r.out, nullptr, false);
    if (j.is_discarded()) FAIL("stdout is not JSON: " << r.out);
    return j;
}

std::string frame_problem(const std::vector<double>& norms_sq, const std::vector<double>& spectrum) {
    return json{{"norms_sq", norms_sq}, {"spectrum", spectrum}}.dump();
}

json subspace_list(const std::vector<std::pair<double, int>>& subs) {
    json arr = json::array();
    for (const auto& [w, d] : subs) arr.push_back({{"weight", w}, {"dim", d}});
    return arr;
}

std::vector<std::vector<double>> parse_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

TEST_CASE("check-ready reports partitions and refusals") {
    const std::string ready_path = write_text("cr_ready.json", frame_problem({1, 3, 2, 2}, {2, 6}));
    RunResult r = run_cli("check-ready " + ready_path);
    CHECK(r.code == 0);
    json j = parse_out(r);
    CHECK(j["ready"] == true);
    CHECK((j["partition"] == json::array({1, 4})));

    const std::string bound_path = write_text("cr_bound.json", frame_problem({6, 1, 1}, {4, 4}));
    r = run_cli("check-ready " + bound_path);
    CHECK(r.code == 2);
    j = parse_out(r);
    CHECK(j["ready"] == false);
    CHECK(j["refusal"]["kind"] == "partition-bound");
    CHECK(j["refusal"]["row"] == 1);
    CHECK(j["refusal"]["shortfall"].get<double>() == Approx(2.0));

    const std::string trace_path = write_text("cr_trace.json", frame_problem({1, 1}, {1, 2}));
    r = run_cli("check-ready " + trace_path);
    CHECK(r.code == 2);
    j = parse_out(r);
    CHECK(j["refusal"]["kind"] == "trace");
    CHECK(j["refusal"]["shortfall"].get<double>() == Approx(-1.0));
}

TEST_CASE("check-ready search finds certificates and proves impossibility") {
    const std::string findable = write_text("cs_find.json", frame_problem({3, 1}, {1, 3}));
    RunResult r = run_cli("check-ready " + findable + " --search");
    CHECK(r.code == 0);
    json j = parse_out(r);
    CHECK(j["ready"] == false);
    CHECK(j["search"]["status"] == "found");
    CHECK((j["search"]["certificate"]["norm_permutation"] == json::array({2, 1})));
    CHECK(j["search"]["certificate"]["identity"] == false);

    const std::string impossible = write_text("cs_none.json", frame_problem({1, 1, 6}, {4, 4}));
    r = run_cli("check-ready " + impossible + " --search");
    CHECK(r.code == 2);
    j = parse_out(r);
    CHECK(j["search"]["status"] == "proven-impossible");
    CHECK(j["search"]["orderings_checked"] == 4);
    CHECK(j["search"]["exhaustive"] == true);
    CHECK_THAT(j["search"]["note"].get<std::string>(), ContainsSubstring("fail readiness"));

    r = run_cli("check-ready " + impossible + " --search --budget 1");
    CHECK(r.code == 3);
    j = parse_out(r);
    CHECK(j["search"]["status"] == "budget-exhausted");
    CHECK(j["search"]["exhaustive"] == false);
    CHECK(j["search"]["orderings_checked"] == 1);
}

TEST_CASE("frame emits dense and sparse matrices that audit clean") {
    const std::string problem = write_text("fr_prob.json", frame_problem({1, 3, 2, 2}, {2, 6}));

    SECTION("dense CSV written to a file") {
        const std::string out_path = work_dir() + "/fr_dense.csv";
        RunResult r = run_cli("frame " + problem + " --format dense-csv --out " + out_path);
        REQUIRE(r.code == 0);
        json j = parse_out(r);
        CHECK(j["out"] == out_path);
        CHECK((j["partition"] == json::array({1, 4})));
        CHECK(j["audit"]["pass"] == true);
        CHECK(j["audit"]["nonzeros_total"] == 6);

        const auto rows = parse_csv(read_text(out_path));
        REQUIRE(rows.size() == 2);
        REQUIRE(rows[0].size() == 4);
        CHECK(rows[0][0] == Approx(1.0).margin(1e-12));
        CHECK(rows[0][1] == Approx(std::sqrt(1.0 / 3.0)).margin(1e-12));
        CHECK(rows[0][2] == Approx(std::sqrt(2.0 / 3.0)).margin(1e-12));
        CHECK(rows[0][3] == Approx(0.0).margin(1e-12));
        CHECK(rows[1][0] == Approx(0.0).margin(1e-12));
        CHECK(rows[1][1] == Approx(std::sqrt(8.0 / 3.0)).margin(1e-12));
        CHECK(rows[1][2] == Approx(-std::sqrt(4.0 / 3.0)).margin(1e-12));
        CHECK(rows[1][3] == Approx(std::sqrt(2.0)).margin(1e-12));
    }

    SECTION("sparse JSON embeds the audit") {
        const std::string out_path = work_dir() + "/fr_sparse.json";
        RunResult r = run_cli("frame " + problem + " --out " + out_path);
        REQUIRE(r.code == 0);
        const json m = json::parse(read_text(out_path));
        CHECK(m["rows"] == 2);
        CHECK(m["cols"] == 4);
        CHECK(m["entries"].size() == 6);
        CHECK((m["entries"][0] == json::array({1, 1, 1.0})));
        CHECK(m["audit"]["pass"] == true);
    }

    SECTION("without --out the matrix rides in the report") {
        RunResult r = run_cli("frame " + problem);
        REQUIRE(r.code == 0);
        json j = parse_out(r);
        CHECK(!j.contains("out"));
        CHECK(j["matrix"]["entries"].size() == 6);
    }

    SECTION("infeasible problems are refused with exit 2") {
        const std::string bad = write_text("fr_bad.json", frame_problem({6, 1, 1}, {4, 4}));
        RunResult r = run_cli("frame " + bad);
        CHECK(r.code == 2);
        json j = parse_out(r);
        CHECK(j["refusal"]["kind"] == "partition-bound");
        CHECK(!j.contains("audit"));
    }
}

TEST_CASE("frame --reorder swaps adjacent norms and audits the result") {
    const std::string problem = write_text("str_prob.json", frame_problem({2, 2, 1.8, 0.5, 1.7, 2}, {5, 5}));
    RunResult r = run_cli("frame " + problem + " --reorder");
    REQUIRE(r.code == 0);
    json j = parse_out(r);
    CHECK((j["swaps"] == json::array({json::array({3, 4})})));
    const std::vector<double> want_final{2, 2, 0.5, 1.8, 1.7, 2};
    REQUIRE(j["final_norms_sq"].size() == want_final.size());
    for (std::size_t i = 0; i < want_final.size(); ++i)
        CHECK(j["final_norms_sq"][i].get<double>() == Approx(want_final[i]));
    CHECK(j["preconditions"]["trace_ok"] == true);
    CHECK(j["preconditions"]["pair_ok"] == true);
    CHECK(j["preconditions"]["max_pair_sum"].get<double>() == Approx(4.0));
    CHECK(j["preconditions"]["min_eigenvalue"].get<double>() == Approx(5.0));
    CHECK(j["audit"]["pass"] == true);

    const std::string stuck = write_text("str_stuck.json", frame_problem({1, 1, 6}, {4, 4}));
    r = run_cli("frame " + stuck + " --reorder");
    CHECK(r.code == 2);
    j = parse_out(r);
    CHECK(j["preconditions"]["pair_ok"] == false);
    REQUIRE(j.contains("infeasible"));
    CHECK(!j["infeasible"]["reason"].get<std::string>().empty());
}

TEST_CASE("frame output round-trips through verify") {
    const std::string problem = write_text("rt_prob.json", frame_problem({1, 3, 2, 2}, {2, 6}));
    const std::string sparse_path = work_dir() + "/rt_matrix.json";
    const std::string dense_path = work_dir() + "/rt_matrix.csv";
    REQUIRE(run_cli("frame " + problem + " --out " + sparse_path).code == 0);
    REQUIRE(run_cli("frame " + problem + " --format dense-csv --out " + dense_path).code == 0);

    const std::string expect =
        write_text("rt_expect.json", json{{"spectrum", {2, 6}}, {"norms_sq", {1, 3, 2, 2}}}.dump());
    RunResult r = run_cli("verify " + sparse_path + " " + expect);
    CHECK(r.code == 0);
    json j = parse_out(r);
    CHECK(j["pass"] == true);
    CHECK(j["spectrum_match"] == true);

    r = run_cli("verify " + dense_path + " " + expect);
    CHECK(r.code == 0);
    CHECK(parse_out(r)["pass"] == true);

    const std::string wrong = write_text("rt_wrong.json", json{{"spectrum", {2, 5}}}.dump());
    r = run_cli("verify " + sparse_path + " " + wrong);
    CHECK(r.code == 1);
    j = parse_out(r);
    CHECK(j["pass"] == false);
    CHECK(j["failure"] == "spectrum mismatch");
}

TEST_CASE("verify treats structural violations as failures not input errors") {
    const std::string csv = write_text("sv_three.csv", "1,1\n1,0\n1,2\n");
    const std::string expect = write_text("sv_expect.json", json{{"spectrum", {1, 1, 1}}}.dump());
    RunResult r = run_cli("verify " + csv + " " + expect);
    CHECK(r.code == 1);
    json j = parse_out(r);
    CHECK(j["pass"] == false);
    CHECK_THAT(j["failure"].get<std::string>(), ContainsSubstring("not a sparse frame"));

    // Grouping the worked frame's columns into parts makes an oblique part.
    const std::string problem = write_text("sv_prob.json", frame_problem({1, 3, 2, 2}, {2, 6}));
    const std::string matrix = work_dir() + "/sv_matrix.json";
    REQUIRE(run_cli("frame " + problem + " --out " + matrix).code == 0);
    const std::string parts = write_text(
        "sv_parts.json", json{{"spectrum", {2, 6}}, {"parts", {{1, 2}, {3, 4}}}}.dump());
    r = run_cli("verify " + matrix + " " + parts);
    CHECK(r.code == 1);
    j = parse_out(r);
    CHECK(j["pass"] == false);
    CHECK(j["failure"] == "part not orthogonal");
}

TEST_CASE("fusion routes corollaries and general construction") {
    const json six_lines{{"subspaces", subspace_list({{1, 1}, {1, 1}, {1, 1}, {1, 1}, {1, 1}, {1, 1}})},
                         {"spectrum", {2, 2, 2}}};

    SECTION("equal lines with a matching flat spectrum go tight-equidim") {
        const std::string problem = write_text("fu_six.json", six_lines.dump());
        const std::string out_path = work_dir() + "/fu_six_bundle.json";
        RunResult r = run_cli("fusion " + problem + " --out " + out_path);
        REQUIRE(r.code == 0);
        json j = parse_out(r);
        CHECK(j["route"] == "tight-equidim");
        CHECK(j["ordering_mode"] == "periodic");
        CHECK((j["final_labels"] == json::array({1, 2, 3, 4, 5, 6})));
        CHECK(j["audit"]["pass"] == true);

        const json b = json::parse(read_text(out_path));
        CHECK(b["rows"] == 3);
        CHECK(b["cols"] == 6);
        REQUIRE(b["parts"].size() == 6);
        for (std::size_t k = 0; k < 6; ++k) {
            CHECK(b["parts"][k].size() == 1);
            CHECK(b["weights"][k].get<double>() == Approx(1.0));
        }
        CHECK(b["report"]["route"] == "tight-equidim");
        CHECK(b["report"]["audit"]["pass"] == true);
    }

    SECTION("an ordering in the problem file routes through the general path") {
        json with_order = six_lines;
        with_order["ordering"] = {6, 5, 4, 3, 2, 1};
        const std::string problem = write_text("fu_ord.json", with_order.dump());
        RunResult r = run_cli("fusion " + problem);
        REQUIRE(r.code == 0);
        json j = parse_out(r);
        CHECK(j["route"] == "general");
        CHECK(j["ordering_mode"] == "explicit");
        CHECK((j["final_labels"] == json::array({6, 5, 4, 3, 2, 1})));
        CHECK((j["bundle"]["parts"][0] == json::array({6})));
        CHECK((j["bundle"]["parts"][5] == json::array({1})));
    }

    SECTION("--ordering spread forces the heuristic") {
        const std::string problem = write_text("fu_spread.json", six_lines.dump());
        RunResult r = run_cli("fusion " + problem + " --ordering spread");
        REQUIRE(r.code == 0);
        json j = parse_out(r);
        CHECK(j["route"] == "general");
        CHECK(j["ordering_mode"] == "spread");
        CHECK((j["final_labels"] == json::array({1, 2, 3, 4, 5, 6})));
    }

    SECTION("equal lines with a sloped spectrum go nontight-equidim") {
        const json problem_doc{{"subspaces", subspace_list(std::vector<std::pair<double, int>>(8, {1, 1}))},
                               {"spectrum", {2, 2.5, 3.5}}};
        const std::string problem = write_text("fu_nt.json", problem_doc.dump());
        RunResult r = run_cli("fusion " + problem);
        REQUIRE(r.code == 0);
        json j = parse_out(r);
        CHECK(j["route"] == "nontight-equidim");
        CHECK(j["bundle"]["parts"].size() == 8);
        CHECK(j["audit"]["pass"] == true);
        const std::vector<double> want_spectrum{2, 2.5, 3.5};
        for (std::size_t i = 0; i < want_spectrum.size(); ++i)
            CHECK(j["spectrum"][i].get<double>() == Approx(want_spectrum[i]));
    }

    SECTION("a dominant weight pair is refused with margins reported") {
        const json problem_doc{{"subspaces", subspace_list({{std::sqrt(2.0), 2}, {1, 1}})},
                               {"spectrum", {2, 3}}};
        const std::string problem = write_text("fu_pair.json", problem_doc.dump());
        RunResult r = run_cli("fusion " + problem);
        CHECK(r.code == 2);
        json j = parse_out(r);
        CHECK(j["route"] == "general");
        CHECK(j["refusal"]["kind"] == "weight-pair");
        CHECK(j["refusal"]["shortfall"].get<double>() == Approx(-1.0));
        REQUIRE(j["conditions"].size() == 3);
        CHECK(j["conditions"][0]["name"] == "trace");
        CHECK(j["conditions"][0]["ok"] == true);
        CHECK(j["conditions"][1]["name"] == "weight-pair");
        CHECK(j["conditions"][1]["margin"].get<double>() == Approx(-1.0));
        CHECK(j["conditions"][2]["name"] == "label-spacing");
        CHECK(j["conditions"][2]["margin"].get<double>() == Approx(-3.0));
    }

    SECTION("too few rows for the common dimension is a ratio refusal") {
        const json problem_doc{{"subspaces", subspace_list({{1, 2}, {1, 2}, {1, 2}})},
                               {"spectrum", {2, 2, 2}}};
        const std::string problem = write_text("fu_ratio.json", problem_doc.dump());
        RunResult r = run_cli("fusion " + problem);
        CHECK(r.code == 2);
        json j = parse_out(r);
        CHECK(j["route"] == "tight-equidim");
        CHECK(j["refusal"]["kind"] == "dimension-ratio");
        CHECK(j["refusal"]["shortfall"].get<double>() == Approx(-1.0));
    }
}

TEST_CASE("fusion rejects malformed problems with exit 64") {
    const json six_lines{{"subspaces", subspace_list({{1, 1}, {1, 1}})}, {"spectrum", {1, 1}}};
    const std::string no_order = write_text("fe_noord.json", six_lines.dump());
    CHECK(run_cli("fusion " + no_order + " --ordering explicit").code == 64);

    const std::string broken = write_text("fe_broken.json", "{not json");
    CHECK(run_cli("fusion " + broken).code == 64);

    const json zero_dim{{"subspaces", subspace_list({{1, 0}})}, {"spectrum", {1}}};
    const std::string bad_dim = write_text("fe_dim.json", zero_dim.dump());
    CHECK(run_cli("fusion " + bad_dim).code == 64);

    CHECK(run_cli("fusion " + no_order + " --ordering bogus").code == 64);

    RunResult err = run_cli_stderr("fusion " + broken);
    CHECK_THAT(err.out, ContainsSubstring("input error"));
}

TEST_CASE("canonicalize rewrites oblique parts into orthogonal bundles") {
    const double rh = std::sqrt(0.5);
    const json oblique{{"rows", 2},
                       {"cols", 4},
                       {"entries", {{1, 1, 1.0}, {1, 2, rh}, {2, 2, 1.0}, {1, 3, rh}, {2, 3, -1.0}, {2, 4, 1.0}}},
                       {"parts", {{1, 2, 3}, {4}}}};
    const std::string bundle_path = write_text("cn_oblique.json", oblique.dump());
    const std::string out_path = work_dir() + "/cn_out.json";
    RunResult r = run_cli("canonicalize " + bundle_path + " --out " + out_path);
    REQUIRE(r.code == 0);
    json j = parse_out(r);
    CHECK(j["ok"] == true);
    REQUIRE(j["steps"].size() == 2);
    CHECK(j["steps"][0]["kind"] == "split");
    CHECK((j["steps"][0]["columns"] == json::array({2, 3})));
    CHECK(j["steps"][0]["x"].get<double>() == Approx(1.0));
    CHECK(j["steps"][0]["y"].get<double>() == Approx(2.0));
    CHECK(j["steps"][1]["kind"] == "merge");
    CHECK((j["steps"][1]["columns"] == json::array({1, 2})));
    CHECK(j["weights"][0].get<double>() == Approx(std::sqrt(2.0)));
    CHECK(j["weights"][1].get<double>() == Approx(1.0));

    // The rewritten bundle is the orthogonal two-part frame on 3 columns.
    const json b = json::parse(read_text(out_path));
    CHECK(b["rows"] == 2);
    CHECK(b["cols"] == 3);
    CHECK((b["parts"] == json{{1, 2}, {3}}));
    REQUIRE(b["entries"].size() == 3);
    for (const json& e : b["entries"]) {
        const int row = e[0].get<int>(), col = e[1].get<int>();
        const double v = e[2].get<double>();
        if (col == 3)
            CHECK(v == Approx(1.0));
        else
            CHECK(v == Approx(std::sqrt(2.0)));
        if (col == 1) CHECK(row == 1);
        if (col >= 2) CHECK(row == 2);
    }

    RunResult again = run_cli("canonicalize " + out_path);
    REQUIRE(again.code == 0);
    json j2 = parse_out(again);
    CHECK(j2["steps"].empty());
    CHECK(j2["weights"][0].get<double>() == Approx(std::sqrt(2.0)));

    const json not_tight{{"rows", 2},
                         {"cols", 4},
                         {"entries",
                          {{1, 1, 1.0},
                           {1, 2, std::sqrt(1.0 / 3.0)},
                           {2, 2, std::sqrt(8.0 / 3.0)},
                           {1, 3, std::sqrt(2.0 / 3.0)},
                           {2, 3, -std::sqrt(4.0 / 3.0)},
                           {2, 4, std::sqrt(2.0)}}},
                         {"parts", {{1, 2}, {3, 4}}}};
    const std::string bad_path = write_text("cn_nontight.json", not_tight.dump());
    r = run_cli("canonicalize " + bad_path);
    CHECK(r.code == 2);
    json jb = parse_out(r);
    CHECK(jb["ok"] == false);
    CHECK_THAT(jb["reason"].get<std::string>(), ContainsSubstring("not a tight frame"));
}

TEST_CASE("verification tolerance comes from the flag then the environment") {
    const std::string problem = write_text("tol_prob.json", frame_problem({1, 3, 2, 2}, {2, 6}));
    const std::string csv_path = work_dir() + "/tol_matrix.csv";
    REQUIRE(run_cli("frame " + problem + " --format dense-csv --out " + csv_path).code == 0);

    // Nudge the top-left entry by 2e-8: within 1e-5, far outside 1e-9.
    auto rows = parse_csv(read_text(csv_path));
    rows[0][0] += 2e-8;
    std::ostringstream rebuilt;
    rebuilt.precision(17);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) rebuilt << (i ? "," : "") << row[i];
        rebuilt << "\n";
    }
    const std::string pert_path = write_text("tol_pert.csv", rebuilt.str());
    const std::string expect =
        write_text("tol_expect.json", json{{"spectrum", {2, 6}}, {"norms_sq", {1, 3, 2, 2}}}.dump());

    CHECK(run_cli("verify " + pert_path + " " + expect).code == 1);

    RunResult loose = run_cli("verify " + pert_path + " " + expect, "SPECTRAL_TETRIS_TOLERANCE=1e-5 ");
    CHECK(loose.code == 0);
    json j = parse_out(loose);
    CHECK(j["pass"] == true);
    CHECK(j["tolerance"].get<double>() == Approx(1e-5));

    RunResult flag_wins =
        run_cli("verify " + pert_path + " " + expect + " --tolerance 1e-9", "SPECTRAL_TETRIS_TOLERANCE=1e-5 ");
    CHECK(flag_wins.code == 1);

    RunResult bad_env = run_cli_stderr("verify " + pert_path + " " + expect, "SPECTRAL_TETRIS_TOLERANCE=abc ");
    CHECK(bad_env.code == 64);
    CHECK_THAT(bad_env.out, ContainsSubstring("not a positive number"));
}

TEST_CASE("usage errors exit 64") {
    CHECK(run_cli("").code == 64);
    CHECK(run_cli("bogus-subcommand").code == 64);

    const std::string problem = write_text("use_prob.json", frame_problem({1, 1}, {1, 1}));
    CHECK(run_cli("frame " + problem + " --format bogus").code == 64);
    CHECK(run_cli("check-ready " + problem + " --reorder").code == 64);

    RunResult missing = run_cli_stderr("frame " + work_dir() + "/definitely_missing.json");
    CHECK(missing.code == 64);
    CHECK_THAT(missing.out, ContainsSubstring("input error"));

    const std::string damaged = write_text("use_damaged.json", "{not json");
    CHECK(run_cli("check-ready " + damaged).code == 64);
}
