#pragma once

#include <string>
#include <vector>

#include "match/annindex.hpp"
#include "match/corpus.hpp"

namespace match {

struct ContextScores {
    double skill = 0.0;
    double location = 0.0;
    double experience = 0.0;
    double education = 0.0;
};

struct RerankWeights {
    double b0 = 1.0;   // relevance
    double b1 = 0.5;   // skill
    double b2 = 0.5;   // location
    double b3 = 0.25;  // experience
    double b4 = 0.25;  // education
    double gamma = 0.0;  // minimum first-stage relevance, [0,1]
    double d0_km = 100.0;  // location decay scale
};

ContextScores context_scores(const JobPost& job, const CandidateProfile& cand,
                             const RerankWeights& wts);

double final_score(double relevance, const ContextScores& ctx, const RerankWeights& wts);

// First-stage score mapped into [0,1]: IP uses (1+cos)/2 over the stored
// vector norms, L2 uses 1/(1+d).
double normalize_relevance(double score, Metric metric, double query_norm2, double hit_norm2);

struct RankedCandidate {
    std::string job_id;
    int rank = 0;  // 1-based
    std::string candidate_id;
    double score = 0.0;       // final aggregated score
    double relevance = 0.0;   // normalized first-stage score
    ContextScores ctx;

    std::string to_json() const;
};

// Hits must carry raw first-stage scores; norms are squared l2 norms of the
// query and each hit's stored vector, aligned with `hits`.
std::vector<RankedCandidate> rerank(const JobPost& job, const std::vector<SearchHit>& hits,
                                    Metric metric, double query_norm2,
                                    const std::vector<double>& hit_norm2, const Corpus& corpus,
                                    const RerankWeights& wts);

}  // namespace match
