#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "match/annindex.hpp"
#include "match/corpus.hpp"
#include "match/evalharness.hpp"
#include "match/fuse.hpp"
#include "match/graphembed.hpp"
#include "match/rerank.hpp"
#include "match/textembed.hpp"

namespace match {

// Minimal TOML subset: [section] headers and key = value lines, where value
// is a quoted string, integer, float, or true/false. Comments start with #.
std::map<std::string, std::string> parse_toml(const std::string& text);

struct PipelineConfig {
    std::string corpus_dir = "data";
    std::string artifact_dir = "artifacts";
    std::string output_dir = "out";

    SynthConfig gen;

    DlemConfig dlem;
    DlemTrainConfig dlem_train;
    double dlem_neg_ratio = 1.0;
    int dlem_max_pairs = 6000;  // 0 = no cap
    std::size_t vocab_size = 20000;

    GraphTrainConfig graph;

    FusionConfig fusion;
    IndexConfig index;
    RerankWeights rerank;
    EvalConfig eval;

    int k_retrieve = 200;
    int k_final = 25;

    std::uint64_t seed = 42;
    std::uint64_t config_hash = 0;  // of the effective config text + seed

    // per-stage seeds derived from the global one
    std::uint64_t stage_seed(const std::string& stage) const;
};

PipelineConfig default_pipeline_config();
PipelineConfig load_pipeline_config(const std::string& path);

// Recompute config_hash after mutating fields (e.g. a --seed override).
void refresh_config_hash(PipelineConfig& config);

// stage ∈ {gen-data, train-dlem, train-graph, embed, build-index, recommend,
// evaluate, export-embeddings}. Writes artifacts plus a per-stage manifest
// (input/output content hashes, config hash, timings). job_ids filters the
// recommend stage; empty means all jobs.
void run_stage(const std::string& stage, const PipelineConfig& config,
               const std::vector<std::string>& job_ids = {});

// Exposed for testing: stage-one search + rerank for the given jobs,
// truncated to k_final per job.
std::vector<RankedCandidate> recommend_jobs(const std::vector<std::string>& job_ids,
                                            int k_retrieve, int k_final,
                                            const PipelineConfig& config);

}  // namespace match
