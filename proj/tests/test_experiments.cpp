#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "gcnstab/experiments.hpp"

using namespace gcnstab;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

ExperimentConfig tiny_fig1() {
    ExperimentConfig cfg = default_config(ExperimentId::fig1);
    cfg.seed = 31337;
    cfg.graph.communities = {6, 6};
    cfg.train.epochs = 30;
    cfg.fig1 = {1, 2, 2};
    return cfg;
}

ExperimentConfig tiny_fig2() {
    ExperimentConfig cfg = default_config(ExperimentId::fig2);
    cfg.seed = 424242;
    cfg.graph.communities = {6, 6};
    cfg.train.epochs = 30;
    cfg.fig2.graphs = 1;
    cfg.fig2.trials = 3;
    cfg.fig2.probabilities = {0.05, 0.2};
    return cfg;
}

ExperimentConfig tiny_fig3() {
    ExperimentConfig cfg = default_config(ExperimentId::fig3);
    cfg.seed = 777001;
    cfg.graph.communities = {6, 6};
    cfg.train.epochs = 30;
    cfg.fig3.train_graphs = 4;
    cfg.fig3.test_graphs = 2;
    cfg.fig3.trials = 2;
    cfg.fig3.max_edges = 2;
    return cfg;
}

int column(const ResultTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (t.columns[i] == name) return static_cast<int>(i);
    FAIL("missing column " + name);
    return -1;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(fnv1a64_hex("") == "cbf29ce484222325");
}

TEST_CASE("csv rendering is stable") {
    ResultTable t;
    t.columns = {"a", "b"};
    t.rows = {{1.0, 0.5}, {2.0, 0.125}};
    CHECK(t.to_csv() == "a,b\n1,0.5\n2,0.125\n");
}

TEST_CASE("manifest json round trip") {
    RunManifest m;
    m.config_text = "experiment = \"fig1\"\n";
    m.base_seed = 99;
    m.seed_streams = seed_stream_table();
    m.created = "2000-01-01T00:00:00Z";
    m.file_hashes = {{"results.csv", "00ff"}};
    m.slice_config_text = "experiment = \"fig1\"\n";
    m.slice_hash = "abcd";
    const RunManifest back = manifest_from_json(manifest_to_json(m));
    CHECK(back.config_text == m.config_text);
    CHECK(back.base_seed == m.base_seed);
    CHECK(back.library_version == kLibraryVersion);
    CHECK(back.rng_algorithm == std::string(kRngAlgorithmId));
    CHECK(back.seed_streams == m.seed_streams);
    CHECK(back.file_hashes == m.file_hashes);
    CHECK(back.slice_hash == m.slice_hash);
}

TEST_CASE("missing manifest is a distinct absent error") {
    const auto dir = fresh_dir("gcnstab_no_manifest");
    std::filesystem::create_directories(dir);
    CHECK_THROWS_AS(read_manifest_file(dir.string()), ManifestAbsentError);
    CHECK_THROWS_AS(verify_run(dir.string()), ManifestAbsentError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("deletion sweep: bounds dominate distances and re-runs are identical") {
    const ExperimentConfig cfg = tiny_fig1();
    const RunResult a = run_fig1(cfg);
    const RunResult b = run_fig1(cfg);
    CHECK(a.table.to_csv() == b.table.to_csv());

    REQUIRE(a.table.rows.size() == 2);
    const int kd = column(a.table, "mean_distance");
    const int kb = column(a.table, "mean_bound");
    const int kv = column(a.table, "violations");
    for (const auto& row : a.table.rows) {
        CHECK(row[kd] <= row[kb]);
        CHECK(row[kv] == 0.0);
    }
    CHECK(a.report.at("tightness_vs_baseline_k1").at("total").get<int>() == 2);
}

TEST_CASE("deletion sweep with max_edges zero emits one zero row") {
    ExperimentConfig cfg = tiny_fig1();
    cfg.fig1.max_edges = 0;
    const RunResult r = run_fig1(cfg);
    REQUIRE(r.table.rows.size() == 1);
    for (double v : r.table.rows[0]) CHECK(v == 0.0);
}

TEST_CASE("probability sweep: expected bound grows with p and tops the MC mean") {
    const ExperimentConfig cfg = tiny_fig2();
    const RunResult r = run_fig2(cfg);
    REQUIRE(r.table.rows.size() == 2);
    const int kd = column(r.table, "mean_distance");
    const int ke = column(r.table, "expected_bound");
    const int kr = column(r.table, "realized_deletion_rate");
    CHECK(r.table.rows[0][ke] <= r.table.rows[1][ke]);
    for (const auto& row : r.table.rows) {
        CHECK(row[kd] <= row[ke]);
        CHECK(row[kr] >= 0.0);
        CHECK(row[kr] <= 1.0);
    }
}

TEST_CASE("accuracy sweep emits one row per policy and level plus artifacts") {
    const ExperimentConfig cfg = tiny_fig3();
    const RunResult r = run_fig3(cfg);
    CHECK(r.table.rows.size() == 4 * 3);
    CHECK(r.extra_files.count("dataset.json") == 1);
    CHECK(r.extra_files.count("model.json") == 1);
    CHECK(r.extra_files.count("training_log.csv") == 1);

    const int kk = column(r.table, "k");
    const int kt = column(r.table, "trials");
    const int ka = column(r.table, "accuracy");
    for (const auto& row : r.table.rows) {
        if (row[kk] == 0.0) CHECK(row[kt] == cfg.fig3.test_graphs);
        CHECK(row[ka] >= 0.0);
        CHECK(row[ka] <= 1.0);
    }
    CHECK(r.report.at("unperturbed_accuracy").is_number());

    const RunResult again = run_fig3(cfg);
    CHECK(again.table.to_csv() == r.table.to_csv());
}

TEST_CASE("bridge between two 5-cliques ranks first") {
    std::vector<Edge> edges;
    for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b) {
            edges.push_back({a, b});
            edges.push_back({a + 5, b + 5});
        }
    edges.push_back({4, 5});
    const Graph g(10, edges,
                  std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    const auto path = fresh_dir("gcnstab_bridge");
    std::filesystem::create_directories(path);
    const std::string file = (path / "bridge.json").string();
    save_graph_file(g, file);

    ExperimentConfig cfg = default_config(ExperimentId::edge_criticality);
    cfg.edges.graph_file = file;
    const RunResult r = run_edge_criticality(cfg);
    REQUIRE(r.table.rows.size() == g.edge_count());
    const int ku = column(r.table, "u");
    const int kv = column(r.table, "v");
    const int kr = column(r.table, "rank");
    const int ki = column(r.table, "is_inter");
    const int kc = column(r.table, "criticality");
    CHECK(r.table.rows[0][kr] == 1.0);
    CHECK(r.table.rows[0][ku] == 4.0);
    CHECK(r.table.rows[0][kv] == 5.0);
    CHECK(r.table.rows[0][ki] == 1.0);
    for (std::size_t i = 1; i < r.table.rows.size(); ++i)
        CHECK(r.table.rows[i - 1][kc] >= r.table.rows[i][kc]);
    std::filesystem::remove_all(path);
}

TEST_CASE("complete graph edges all tie") {
    std::vector<Edge> edges;
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b) edges.push_back({a, b});
    const Graph g(6, edges);
    const auto path = fresh_dir("gcnstab_k6");
    std::filesystem::create_directories(path);
    const std::string file = (path / "k6.json").string();
    save_graph_file(g, file);

    ExperimentConfig cfg = default_config(ExperimentId::edge_criticality);
    cfg.edges.graph_file = file;
    const RunResult r = run_edge_criticality(cfg);
    REQUIRE(r.table.rows.size() == 15);
    const int kc = column(r.table, "criticality");
    for (const auto& row : r.table.rows)
        CHECK(row[kc] == Catch::Approx(2.0).margin(1e-9));
    CHECK(r.report.at("graphs")[0].at("all_tied").get<bool>());
    std::filesystem::remove_all(path);
}

TEST_CASE("write then verify, tamper detection") {
    const auto dir = fresh_dir("gcnstab_verify_run");
    const ExperimentConfig cfg = tiny_fig1();
    write_run_outputs(dir.string(), cfg, run_fig1(cfg));

    CHECK(std::filesystem::exists(dir / "results.csv"));
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));

    const VerifyOutcome fresh = verify_run(dir.string());
    CHECK(fresh.ok);
    CHECK(fresh.mismatches.empty());

    std::ofstream((dir / "results.csv").string(), std::ios::app) << "tampered\n";
    const VerifyOutcome tampered = verify_run(dir.string());
    CHECK_FALSE(tampered.ok);
    REQUIRE_FALSE(tampered.mismatches.empty());
    CHECK(tampered.mismatches[0].find("results.csv") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("slice configs are valid and small") {
    for (const ExperimentConfig& cfg :
         {tiny_fig1(), tiny_fig2(), tiny_fig3()}) {
        const ExperimentConfig s = slice_config(cfg);
        CHECK(parse_config_text(write_config(s)) == s);
        CHECK(s.fig1.graphs == 1);
        CHECK(s.fig2.trials == 1);
        CHECK(s.fig3.test_graphs == 1);
        CHECK(s.train.epochs <= 50);
    }
}

TEST_CASE("small tail check agrees with its own definition") {
    ExperimentConfig cfg = tiny_fig2();
    const TailCheck tc = run_tail_check(cfg, 0.1, 200);
    CHECK(tc.B > 0.0);
    CHECK(tc.trials == 200);
    CHECK(tc.at_B.threshold == Catch::Approx(std::exp(-0.25)).margin(1e-12));
    CHECK(tc.at_2B.threshold == Catch::Approx(std::exp(-1.0)).margin(1e-12));
    CHECK(tc.at_B.empirical ==
          Catch::Approx(static_cast<double>(tc.at_B.exceed) / 200));
    const nlohmann::json j = tail_check_to_json(tc);
    CHECK(j.at("B").get<double>() == tc.B);
}
