#include "match/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "match/geo.hpp"

namespace match {

ContextScores context_scores(const JobPost& job, const CandidateProfile& cand,
                             const RerankWeights& wts) {
    ContextScores ctx;

    // skills are sorted unique int lists, so Jaccard is a linear merge
    std::size_t inter = 0, i = 0, j = 0;
    while (i < job.skills.size() && j < cand.skills.size()) {
        if (job.skills[i] == cand.skills[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (job.skills[i] < cand.skills[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    std::size_t uni = job.skills.size() + cand.skills.size() - inter;
    ctx.skill = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);

    if (job.is_remote) {
        ctx.location = 1.0;
    } else {
        double d = great_circle_distance(geo_vector(job.lat, job.lon),
                                         geo_vector(cand.lat, cand.lon));
        ctx.location = std::exp(-d / wts.d0_km);
    }

    if (job.required_years <= 0.0) {
        ctx.experience = 1.0;
    } else {
        ctx.experience = std::min(cand.years_experience / job.required_years, 1.0);
    }

    int gap = job.required_education - cand.education_level;
    ctx.education = gap <= 0 ? 1.0 : std::max(0.0, 1.0 - 0.25 * gap);

    return ctx;
}

double final_score(double relevance, const ContextScores& ctx, const RerankWeights& wts) {
    return wts.b0 * relevance + wts.b1 * ctx.skill + wts.b2 * ctx.location +
           wts.b3 * ctx.experience + wts.b4 * ctx.education;
}

double normalize_relevance(double score, Metric metric, double query_norm2, double hit_norm2) {
    if (metric == Metric::L2) {
        double d = std::sqrt(std::max(score, 0.0));
        return 1.0 / (1.0 + d);
    }
    double denom = std::sqrt(query_norm2) * std::sqrt(hit_norm2);
    double cosine = denom > 0.0 ? score / denom : 0.0;
    cosine = std::clamp(cosine, -1.0, 1.0);
    return 0.5 * (1.0 + cosine);
}

std::string RankedCandidate::to_json() const {
    std::ostringstream os;
    os.precision(10);
    os << "{\"job_id\":\"" << job_id << "\",\"rank\":" << rank << ",\"candidate_id\":\""
       << candidate_id << "\",\"final_score\":" << score << ",\"relevance\":" << relevance
       << ",\"skill\":" << ctx.skill << ",\"location\":" << ctx.location
       << ",\"experience\":" << ctx.experience << ",\"education\":" << ctx.education << "}";
    return os.str();
}

std::vector<RankedCandidate> rerank(const JobPost& job, const std::vector<SearchHit>& hits,
                                    Metric metric, double query_norm2,
                                    const std::vector<double>& hit_norm2, const Corpus& corpus,
                                    const RerankWeights& wts) {
    if (hits.size() != hit_norm2.size()) throw ParameterError("hit/norm count mismatch");
    double beta_sum = wts.b0 + wts.b1 + wts.b2 + wts.b3 + wts.b4;
    if (wts.b0 < 0 || wts.b1 < 0 || wts.b2 < 0 || wts.b3 < 0 || wts.b4 < 0 || beta_sum <= 0.0)
        throw ParameterError("rerank weights must be non-negative with positive sum");

    std::vector<RankedCandidate> out;
    out.reserve(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        double rel = normalize_relevance(hits[i].score, metric, query_norm2, hit_norm2[i]);
        if (rel < wts.gamma) continue;
        const CandidateProfile& cand = corpus.candidate(hits[i].id);
        RankedCandidate rc;
        rc.job_id = job.id;
        rc.candidate_id = hits[i].id;
        rc.relevance = rel;
        rc.ctx = context_scores(job, cand, wts);
        rc.score = final_score(rel, rc.ctx, wts);
        out.push_back(std::move(rc));
    }
    std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.candidate_id < b.candidate_id;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
    return out;
}

}  // namespace match
