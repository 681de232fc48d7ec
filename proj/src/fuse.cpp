#include "match/fuse.hpp"

#include <cmath>

namespace match {

namespace {

void l2_normalize(std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 > 0.0) {
        double inv = 1.0 / std::sqrt(n2);
        for (double& x : v) x *= inv;
    }
}

}  // namespace

std::vector<double> fuse(const std::vector<double>& v_dlem, const std::vector<double>& v_ig,
                         const GeoVec& v_geo, const FusionWeights& wts) {
    if (wts.w1 < 0.0 || wts.w2 < 0.0 || wts.w3 < 0.0)
        throw ParameterError("fusion weights must be non-negative");
    if (wts.w1 == 0.0 && wts.w2 == 0.0 && wts.w3 == 0.0)
        throw ParameterError("fusion weights must not all be zero");
    std::vector<double> out;
    out.reserve(v_dlem.size() + v_ig.size() + 3);
    for (double x : v_dlem) out.push_back(wts.w1 * x);
    for (double x : v_ig) out.push_back(wts.w2 * x);
    for (double x : v_geo) out.push_back(wts.w3 * x);
    return out;
}

namespace {

FusedEmbedding embed_record(const std::string& id, Provenance prov, const std::string& text,
                            int title_entity, const std::vector<int>& skills, double lat,
                            double lon, const DlemParams& dlem, const Vocabulary& vocab,
                            const EntityEmbeddings& emb, const FusionConfig& cfg) {
    TokenSeq seq = encode_tokens(text, vocab, dlem.cfg.seq_len);
    auto v_dlem = dlem_forward(dlem, seq);
    if (cfg.normalize_dlem) l2_normalize(v_dlem);
    auto v_ig = ig_embed_document(emb, title_entity, skills);
    if (cfg.normalize_ig) l2_normalize(v_ig);
    GeoVec v_geo = geo_vector(lat, lon);
    FusedEmbedding f;
    f.id = id;
    f.provenance = prov;
    f.values = fuse(v_dlem, v_ig, v_geo, cfg.weights);
    return f;
}

}  // namespace

FusedEmbedding embed_job(const JobPost& job, const DlemParams& dlem, const Vocabulary& vocab,
                         const EntityEmbeddings& emb, const FusionConfig& cfg) {
    return embed_record(job.id, Provenance::job,
                        job.description_text + " " + job.requirement_text, job.title_entity,
                        job.skills, job.lat, job.lon, dlem, vocab, emb, cfg);
}

FusedEmbedding embed_candidate(const CandidateProfile& cand, const DlemParams& dlem,
                               const Vocabulary& vocab, const EntityEmbeddings& emb,
                               const FusionConfig& cfg) {
    return embed_record(cand.id, Provenance::candidate, cand.resume_text, cand.title_entity,
                        cand.skills, cand.lat, cand.lon, dlem, vocab, emb, cfg);
}

void save_fused(const std::string& path, const std::vector<FusedEmbedding>& embs) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write embedding dump: " + path);
    os.write("FUSE", 4);
    write_pod<std::uint32_t>(os, 1u);  // version
    write_pod<std::uint64_t>(os, embs.size());
    std::uint32_t dim = embs.empty() ? 0 : static_cast<std::uint32_t>(embs.front().values.size());
    write_pod<std::uint32_t>(os, dim);
    for (const auto& e : embs) {
        if (e.values.size() != dim) throw ParameterError("inconsistent embedding dimensions in dump");
        write_string(os, e.id);
        for (double v : e.values) write_pod<float>(os, static_cast<float>(v));
    }
}

std::vector<FusedEmbedding> load_fused(const std::string& path, Provenance provenance) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DependencyError("missing embedding dump: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "FUSE") throw FormatError("bad magic in " + path);
    auto version = read_pod<std::uint32_t>(is, "version");
    if (version != 1u) throw FormatError("unsupported FUSE version " + std::to_string(version));
    auto count = read_pod<std::uint64_t>(is, "count");
    auto dim = read_pod<std::uint32_t>(is, "dim");
    std::vector<FusedEmbedding> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        FusedEmbedding e;
        e.id = read_string(is, "record id");
        e.provenance = provenance;
        e.values.resize(dim);
        for (auto& v : e.values) v = static_cast<double>(read_pod<float>(is, "record values"));
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace match
