#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "match/pipeline.hpp"

using namespace match;
namespace fs = std::filesystem;

namespace {

struct TempTree {
    fs::path root;
    explicit TempTree(const std::string& tag) {
        root = fs::temp_directory_path() / ("match-pipe-" + tag);
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    std::string sub(const char* name) const { return (root / name).string(); }
};

// small but complete configuration for fast full-pipeline runs
PipelineConfig mini_config(const TempTree& t) {
    PipelineConfig c = default_pipeline_config();
    c.corpus_dir = t.sub("data");
    c.artifact_dir = t.sub("artifacts");
    c.output_dir = t.sub("out");
    c.gen.n_jobs = 25;
    c.gen.n_candidates = 150;
    c.dlem.seq_len = 32;
    c.dlem.d_w = 6;
    c.dlem.channels = 4;
    c.dlem.d_e = 10;
    c.dlem.d_h = 5;
    c.dlem.kernels = {1, 2, 3};
    c.dlem_train.epochs = 1;
    c.dlem_max_pairs = 120;
    c.graph.d_g = 8;
    c.graph.epochs = 2;
    c.index.nlist = 8;
    c.index.m = 7;  // 10 + 8 + 3 = 21 dims
    c.index.ks = 32;
    c.index.nprobe = 8;
    c.index.opq_outer_iters = 2;
    c.eval.k = 10;
    c.eval.k_retrieve = 40;
    c.eval.nprobe = 8;
    c.eval.sample_jobs = 10;
    c.k_retrieve = 40;
    c.k_final = 10;
    c.seed = 77;
    refresh_config_hash(c);
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("toml subset parsing") {
    auto kv = parse_toml("a = 1\n[sec]\nb = \"text # not comment\"  # trailing\nc = true\n\n");
    CHECK(kv.at("a") == "1");
    CHECK(kv.at("sec.b") == "\"text # not comment\"");
    CHECK(kv.at("sec.c") == "true");

    CHECK_THROWS_AS(parse_toml("[broken\nx=1"), ConfigError);
    CHECK_THROWS_AS(parse_toml("justaword"), ConfigError);
    CHECK_THROWS_AS(parse_toml("x ="), ConfigError);
    CHECK_THROWS_AS(parse_toml("x = 1\nx = 2"), ConfigError);
    CHECK_THROWS_AS(parse_toml("[]\nx = 1"), ConfigError);
}

TEST_CASE("config loading applies values, rejects junk") {
    TempTree t("cfg");
    std::string path = t.sub("cfg.toml");
    {
        std::ofstream os(path);
        os << "seed = 9\n[gen]\nn_jobs = 3\n[index]\nmetric = \"l2\"\nnlist = 5\n";
    }
    PipelineConfig c = load_pipeline_config(path);
    CHECK(c.seed == 9);
    CHECK(c.gen.n_jobs == 3);
    CHECK(c.index.metric == Metric::L2);
    CHECK(c.index.nlist == 5);
    CHECK(c.k_retrieve == 200);  // untouched default

    {
        std::ofstream os(path);
        os << "[gen]\nn_jobs = \"many\"\n";
    }
    CHECK_THROWS_AS(load_pipeline_config(path), ConfigError);
    {
        std::ofstream os(path);
        os << "[gen]\nnot_a_field = 1\n";
    }
    CHECK_THROWS_AS(load_pipeline_config(path), ConfigError);
    {
        std::ofstream os(path);
        os << "[index]\nmetric = \"cosine\"\n";
    }
    CHECK_THROWS_AS(load_pipeline_config(path), ConfigError);
    {
        std::ofstream os(path);
        os << "[rerank]\ngamma = 1.5\n";
    }
    CHECK_THROWS_AS(load_pipeline_config(path), ConfigError);
    CHECK_THROWS_AS(load_pipeline_config(t.sub("missing.toml")), ConfigError);
}

TEST_CASE("config hashes track effective settings") {
    TempTree t("hash");
    PipelineConfig a = mini_config(t);
    PipelineConfig b = a;
    CHECK(a.config_hash == b.config_hash);
    b.seed = a.seed + 1;
    refresh_config_hash(b);
    CHECK(a.config_hash != b.config_hash);
}

TEST_CASE("stages demand their upstream artifacts by producer name") {
    TempTree t("deps");
    PipelineConfig c = mini_config(t);

    auto check_dependency = [&](const std::string& stage, const std::string& producer) {
        try {
            run_stage(stage, c);
            FAIL("expected a dependency error for " << stage);
        } catch (const DependencyError& e) {
            CHECK(std::string(e.what()).find(producer) != std::string::npos);
        }
    };
    check_dependency("train-dlem", "gen-data");
    check_dependency("recommend", "gen-data");

    run_stage("gen-data", c);
    check_dependency("embed", "train-dlem");
    check_dependency("recommend", "build-index");
    check_dependency("export-embeddings", "embed");

    run_stage("train-dlem", c);
    check_dependency("embed", "train-graph");

    CHECK_THROWS_AS(run_stage("no-such-stage", c), ConfigError);
}

TEST_CASE("full mini pipeline: determinism, artifacts, manifests") {
    TempTree t("full");
    PipelineConfig c = mini_config(t);

    for (const char* stage : {"gen-data", "train-dlem", "train-graph", "embed", "build-index",
                              "recommend", "evaluate", "export-embeddings"})
        run_stage(stage, c);

    CHECK(fs::exists(t.sub("out") + "/recommendations.jsonl"));
    CHECK(fs::exists(t.sub("out") + "/eval_report.json"));
    CHECK(fs::exists(t.sub("out") + "/embeddings.tsv"));
    for (const char* m : {"gen-data", "train-dlem", "embed", "build-index", "recommend"})
        CHECK(fs::exists(t.sub("artifacts") + "/manifests/" + m + ".json"));

    // export row count = jobs + candidates
    std::istringstream tsv(slurp(t.sub("out") + "/embeddings.tsv"));
    std::size_t rows = 0;
    std::string line;
    while (std::getline(tsv, line)) ++rows;
    CHECK(rows == 25 + 150);

    // downstream rerun leaves upstream artifacts untouched and output identical
    std::string recs = slurp(t.sub("out") + "/recommendations.jsonl");
    std::string index_bytes = slurp(t.sub("artifacts") + "/index.ivfx");
    run_stage("recommend", c);
    CHECK(slurp(t.sub("out") + "/recommendations.jsonl") == recs);
    CHECK(slurp(t.sub("artifacts") + "/index.ivfx") == index_bytes);

    // a fresh end-to-end run under the same seed is byte-identical
    TempTree t2("full-rerun");
    PipelineConfig c2 = mini_config(t2);
    for (const char* stage : {"gen-data", "train-dlem", "train-graph", "embed", "build-index",
                              "recommend"})
        run_stage(stage, c2);
    CHECK(slurp(t2.sub("out") + "/recommendations.jsonl") == recs);
    CHECK(slurp(t2.sub("artifacts") + "/index.ivfx") == index_bytes);
}

TEST_CASE("recommend honors job filters and validates cutoffs") {
    TempTree t("rec");
    PipelineConfig c = mini_config(t);
    for (const char* stage : {"gen-data", "train-dlem", "train-graph", "embed", "build-index"})
        run_stage(stage, c);

    auto ranked = recommend_jobs({"job-000003"}, 40, 10, c);
    CHECK(!ranked.empty());
    CHECK(ranked.size() <= 10);
    for (const auto& rc : ranked) CHECK(rc.job_id == "job-000003");

    CHECK_THROWS_AS(recommend_jobs({"job-000003"}, 10, 40, c), ParameterError);
    CHECK_THROWS_AS(recommend_jobs({"job-999999"}, 40, 10, c), DataError);

    // gamma = 1 filters everything: explicit no-match record
    PipelineConfig strict = c;
    strict.rerank.gamma = 1.0;
    refresh_config_hash(strict);
    run_stage("recommend", strict, {"job-000001"});
    std::string recs = slurp(t.sub("out") + "/recommendations.jsonl");
    CHECK(recs.find("\"status\":\"no_matches\"") != std::string::npos);
}
