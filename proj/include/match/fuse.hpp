#pragma once

#include <string>
#include <vector>

#include "match/common.hpp"
#include "match/corpus.hpp"
#include "match/geo.hpp"
#include "match/graphembed.hpp"
#include "match/textembed.hpp"

namespace match {

enum class Provenance : std::uint8_t { job = 0, candidate = 1 };

struct FusedEmbedding {
    std::string id;
    Provenance provenance = Provenance::job;
    std::vector<double> values;  // d_e + d_g + 3
};

struct FusionWeights {
    double w1 = 1.0;  // text block
    double w2 = 1.0;  // entity block
    double w3 = 0.5;  // geo block
};

struct FusionConfig {
    FusionWeights weights;
    bool normalize_dlem = true;  // l2-normalize text block before weighting
    bool normalize_ig = true;    // entity block likewise (geo is already unit)
};

// Blockwise scale-then-concatenate: [w1*v_dlem; w2*v_ig; w3*v_geo].
std::vector<double> fuse(const std::vector<double>& v_dlem, const std::vector<double>& v_ig,
                         const GeoVec& v_geo, const FusionWeights& wts);

FusedEmbedding embed_job(const JobPost& job, const DlemParams& dlem, const Vocabulary& vocab,
                         const EntityEmbeddings& emb, const FusionConfig& cfg);
FusedEmbedding embed_candidate(const CandidateProfile& cand, const DlemParams& dlem,
                               const Vocabulary& vocab, const EntityEmbeddings& emb,
                               const FusionConfig& cfg);

// Embedding dump (magic "FUSE"): count, dim, then id-length/id/f32 values.
void save_fused(const std::string& path, const std::vector<FusedEmbedding>& embs);
std::vector<FusedEmbedding> load_fused(const std::string& path, Provenance provenance);

}  // namespace match
