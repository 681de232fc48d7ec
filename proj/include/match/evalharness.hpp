#pragma once

#include <string>
#include <vector>

#include "match/annindex.hpp"
#include "match/corpus.hpp"
#include "match/fuse.hpp"
#include "match/rerank.hpp"

namespace match {

// DCG with gain 2^rel - 1 and log2(i+1) discount; 0 when all labels are 0.
double ndcg_at_k(const std::vector<int>& rels_in_ranked_order, int k);

// |top-k approx ∩ top-k exact| / k.
double recall_at_k(const std::vector<std::string>& approx_ids,
                   const std::vector<std::string>& exact_ids, int k);

struct EvalConfig {
    int k = 25;           // cutoff for ndcg / hit rate
    int k_retrieve = 200; // first-stage depth
    int nprobe = 16;
    int sample_jobs = 0;  // 0 = evaluate every job with a planted match
    std::uint64_t seed = 1;
};

struct JobEval {
    std::string job_id;
    double ndcg = 0.0;
    double recall = 0.0;
    bool hit = false;
    double latency_ms = 0.0;
};

struct EvalReport {
    std::size_t n_jobs = 0;
    double mean_ndcg = 0.0;
    double mean_recall = 0.0;
    double hit_rate = 0.0;
    double mean_latency_ms = 0.0;
    double max_latency_ms = 0.0;
    IndexStats index;
    std::vector<JobEval> per_job;

    std::string to_json() const;
    std::string to_table() const;
};

// Per evaluation job: first-stage search, rerank, hit@k against planted
// truth, recall@k against a brute-force scan of the fused candidate
// embeddings, nDCG@k with labels planted=3 / same-SOC=1 / else 0.
EvalReport evaluate_pipeline(const Corpus& corpus, const IvfIndex& index,
                             const std::vector<FusedEmbedding>& job_embs,
                             const std::vector<FusedEmbedding>& cand_embs,
                             const RerankWeights& wts, const EvalConfig& cfg);

}  // namespace match
