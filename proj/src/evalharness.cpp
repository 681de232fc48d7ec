#include "match/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace match {

double ndcg_at_k(const std::vector<int>& rels, int k) {
    if (k < 1) throw ParameterError("ndcg k must be >= 1");
    for (int r : rels)
        if (r < 0) throw ParameterError("negative relevance label");
    auto dcg = [&](const std::vector<int>& v) {
        double s = 0.0;
        int n = std::min<int>(k, static_cast<int>(v.size()));
        for (int i = 0; i < n; ++i)
            s += (std::pow(2.0, v[static_cast<std::size_t>(i)]) - 1.0) / std::log2(i + 2.0);
        return s;
    };
    std::vector<int> ideal = rels;
    std::sort(ideal.begin(), ideal.end(), std::greater<int>());
    double idcg = dcg(ideal);
    if (idcg == 0.0) return 0.0;
    return dcg(rels) / idcg;
}

double recall_at_k(const std::vector<std::string>& approx_ids,
                   const std::vector<std::string>& exact_ids, int k) {
    if (k < 1) throw ParameterError("recall k must be >= 1");
    if (approx_ids.size() < static_cast<std::size_t>(k) ||
        exact_ids.size() < static_cast<std::size_t>(k))
        throw ParameterError("recall@k needs at least k entries in both lists");
    std::unordered_set<std::string> exact(exact_ids.begin(), exact_ids.begin() + k);
    int inter = 0;
    for (int i = 0; i < k; ++i)
        if (exact.count(approx_ids[static_cast<std::size_t>(i)])) ++inter;
    return static_cast<double>(inter) / static_cast<double>(k);
}

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// exact top-k candidate ids for a query under the index metric
std::vector<std::string> brute_force_topk(const std::vector<double>& q,
                                          const std::vector<FusedEmbedding>& cands, int k,
                                          Metric metric) {
    std::vector<std::pair<double, std::size_t>> scored(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& v = cands[i].values;
        double s = 0.0;
        if (metric == Metric::IP) {
            for (std::size_t j = 0; j < v.size(); ++j) s += q[j] * v[j];
        } else {
            for (std::size_t j = 0; j < v.size(); ++j) {
                double d = q[j] - v[j];
                s += d * d;
            }
        }
        scored[i] = {s, i};
    }
    bool ip = metric == Metric::IP;
    auto better = [&](const std::pair<double, std::size_t>& a,
                      const std::pair<double, std::size_t>& b) {
        if (a.first != b.first) return ip ? a.first > b.first : a.first < b.first;
        return cands[a.second].id < cands[b.second].id;
    };
    std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + kk, scored.end(), better);
    std::vector<std::string> out;
    out.reserve(kk);
    for (std::size_t i = 0; i < kk; ++i) out.push_back(cands[scored[i].second].id);
    return out;
}

}  // namespace

EvalReport evaluate_pipeline(const Corpus& corpus, const IvfIndex& index,
                             const std::vector<FusedEmbedding>& job_embs,
                             const std::vector<FusedEmbedding>& cand_embs,
                             const RerankWeights& wts, const EvalConfig& cfg) {
    if (cfg.k < 1 || cfg.k_retrieve < cfg.k) throw ParameterError("bad eval cutoffs");

    std::unordered_map<std::string, const FusedEmbedding*> job_by_id;
    for (const auto& e : job_embs) job_by_id[e.id] = &e;
    std::unordered_map<std::string, double> cand_norm2;
    for (const auto& e : cand_embs) cand_norm2[e.id] = norm2(e.values);
    std::unordered_map<std::string, std::string> planted;  // job -> candidate
    for (const auto& p : corpus.ground_truth) planted[p.job_id] = p.candidate_id;

    std::vector<std::string> eval_jobs;
    for (const auto& j : corpus.jobs)
        if (planted.count(j.id)) eval_jobs.push_back(j.id);
    if (cfg.sample_jobs > 0 && eval_jobs.size() > static_cast<std::size_t>(cfg.sample_jobs)) {
        Rng rng(cfg.seed);
        std::shuffle(eval_jobs.begin(), eval_jobs.end(), rng);
        eval_jobs.resize(static_cast<std::size_t>(cfg.sample_jobs));
        std::sort(eval_jobs.begin(), eval_jobs.end());
    }

    EvalReport rep;
    rep.index = index.stats();
    Metric metric = index.config().metric;
    int k_eff = std::min<int>(cfg.k, static_cast<int>(cand_embs.size()));

    for (const auto& job_id : eval_jobs) {
        auto jit = job_by_id.find(job_id);
        if (jit == job_by_id.end())
            throw DependencyError("job embedding missing for " + job_id + " (run embed)");
        const auto& q = jit->second->values;
        const JobPost& job = corpus.job(job_id);

        auto t0 = std::chrono::steady_clock::now();
        auto hits = index.search(q, cfg.k_retrieve, cfg.nprobe);
        std::vector<double> hn(hits.size());
        for (std::size_t i = 0; i < hits.size(); ++i) {
            auto it = cand_norm2.find(hits[i].id);
            if (it == cand_norm2.end())
                throw DependencyError("candidate embedding missing for " + hits[i].id +
                                      " (run embed)");
            hn[i] = it->second;
        }
        auto ranked = rerank(job, hits, metric, norm2(q), hn, corpus, wts);
        auto t1 = std::chrono::steady_clock::now();
        if (ranked.size() > static_cast<std::size_t>(cfg.k))
            ranked.resize(static_cast<std::size_t>(cfg.k));

        JobEval je;
        je.job_id = job_id;
        je.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

        const std::string& truth = planted.at(job_id);
        std::vector<int> labels;
        labels.reserve(ranked.size());
        for (const auto& rc : ranked) {
            if (rc.candidate_id == truth) {
                je.hit = true;
                labels.push_back(3);
            } else {
                labels.push_back(corpus.candidate(rc.candidate_id).soc_major == job.soc_major ? 1
                                                                                             : 0);
            }
        }
        je.ndcg = labels.empty() ? 0.0 : ndcg_at_k(labels, cfg.k);

        std::vector<std::string> approx;
        approx.reserve(hits.size());
        for (const auto& h : hits) approx.push_back(h.id);
        auto exact = brute_force_topk(q, cand_embs, k_eff, metric);
        je.recall = approx.size() >= static_cast<std::size_t>(k_eff)
                        ? recall_at_k(approx, exact, k_eff)
                        : 0.0;

        rep.per_job.push_back(std::move(je));
    }

    rep.n_jobs = rep.per_job.size();
    for (const auto& je : rep.per_job) {
        rep.mean_ndcg += je.ndcg;
        rep.mean_recall += je.recall;
        rep.hit_rate += je.hit ? 1.0 : 0.0;
        rep.mean_latency_ms += je.latency_ms;
        rep.max_latency_ms = std::max(rep.max_latency_ms, je.latency_ms);
    }
    if (rep.n_jobs > 0) {
        double inv = 1.0 / static_cast<double>(rep.n_jobs);
        rep.mean_ndcg *= inv;
        rep.mean_recall *= inv;
        rep.hit_rate *= inv;
        rep.mean_latency_ms *= inv;
    }
    return rep;
}

std::string EvalReport::to_json() const {
    std::ostringstream os;
    os.precision(10);
    os << "{\"ndcg_variant\":\"gain 2^rel-1, discount log2(i+1)\",\"n_jobs\":" << n_jobs
       << ",\"mean_ndcg\":" << mean_ndcg << ",\"mean_recall\":" << mean_recall
       << ",\"hit_rate\":" << hit_rate << ",\"mean_latency_ms\":" << mean_latency_ms
       << ",\"max_latency_ms\":" << max_latency_ms << ",\"index\":" << index.to_json()
       << ",\"per_job\":[";
    for (std::size_t i = 0; i < per_job.size(); ++i) {
        const auto& je = per_job[i];
        if (i) os << ",";
        os << "{\"job_id\":\"" << je.job_id << "\",\"ndcg\":" << je.ndcg
           << ",\"recall\":" << je.recall << ",\"hit\":" << (je.hit ? "true" : "false")
           << ",\"latency_ms\":" << je.latency_ms << "}";
    }
    os << "]}";
    return os.str();
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "jobs evaluated : " << n_jobs << "\n"
       << "mean nDCG      : " << mean_ndcg << "\n"
       << "mean recall    : " << mean_recall << "\n"
       << "hit rate       : " << hit_rate << "\n"
       << "latency (mean) : " << mean_latency_ms << " ms\n"
       << "latency (max)  : " << max_latency_ms << " ms\n"
       << "indexed vectors: " << index.count << "\n";
    return os.str();
}

}  // namespace match
