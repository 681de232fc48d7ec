#include "match/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace match {

// ---- TOML subset --------------------------------------------------------

std::map<std::string, std::string> parse_toml(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line, section;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        // strip comments outside quotes
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("malformed section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("empty section name at line " + std::to_string(lineno));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("empty key or value at line " + std::to_string(lineno));
        std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) throw ConfigError("duplicate key: " + full);
        out[full] = val;
    }
    return out;
}

namespace {

struct TomlReader {
    std::map<std::string, std::string> kv;

    std::optional<std::string> take(const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    }
    void get(const std::string& key, std::string& dst) {
        if (auto v = take(key)) {
            if (v->size() < 2 || v->front() != '"' || v->back() != '"')
                throw ConfigError(key + ": expected a quoted string, got " + *v);
            dst = v->substr(1, v->size() - 2);
        }
    }
    void get(const std::string& key, bool& dst) {
        if (auto v = take(key)) {
            if (*v == "true") dst = true;
            else if (*v == "false") dst = false;
            else throw ConfigError(key + ": expected true/false, got " + *v);
        }
    }
    template <typename T>
    void get_num(const std::string& key, T& dst) {
        if (auto v = take(key)) {
            try {
                std::size_t used = 0;
                double d = std::stod(*v, &used);
                if (used != v->size()) throw std::invalid_argument("trailing");
                T t = static_cast<T>(d);
                if (static_cast<double>(t) != d && std::is_integral_v<T>)
                    throw std::invalid_argument("not integral");
                dst = t;
            } catch (const std::exception&) {
                throw ConfigError(key + ": expected a number, got " + *v);
            }
        }
    }
    void get(const std::string& key, int& dst) { get_num(key, dst); }
    void get(const std::string& key, double& dst) { get_num(key, dst); }
    void get(const std::string& key, std::size_t& dst) { get_num(key, dst); }
};

void apply_config(TomlReader& r, PipelineConfig& c) {
    r.get("seed", c.seed);
    r.get("paths.corpus_dir", c.corpus_dir);
    r.get("paths.artifact_dir", c.artifact_dir);
    r.get("paths.output_dir", c.output_dir);

    r.get("gen.n_jobs", c.gen.n_jobs);
    r.get("gen.n_candidates", c.gen.n_candidates);
    r.get("gen.n_titles", c.gen.n_titles);
    r.get("gen.n_skills", c.gen.n_skills);
    r.get("gen.n_soc_groups", c.gen.n_soc_groups);
    r.get("gen.application_rate", c.gen.application_rate);
    r.get("gen.planted", c.gen.planted);
    r.get("gen.text_filler_words", c.gen.text_filler_words);

    r.get("dlem.seq_len", c.dlem.seq_len);
    r.get("dlem.d_w", c.dlem.d_w);
    r.get("dlem.channels", c.dlem.channels);
    r.get("dlem.d_e", c.dlem.d_e);
    r.get("dlem.d_h", c.dlem.d_h);
    r.get("dlem.epochs", c.dlem_train.epochs);
    r.get("dlem.lr", c.dlem_train.lr);
    r.get("dlem.batch_size", c.dlem_train.batch_size);
    r.get("dlem.neg_ratio", c.dlem_neg_ratio);
    r.get("dlem.max_pairs", c.dlem_max_pairs);
    r.get("dlem.vocab_size", c.vocab_size);

    r.get("graph.d_g", c.graph.d_g);
    r.get("graph.epochs", c.graph.epochs);
    r.get("graph.batch", c.graph.batch);
    r.get("graph.lr", c.graph.lr);
    r.get("graph.lambda", c.graph.lambda);

    r.get("fusion.w1", c.fusion.weights.w1);
    r.get("fusion.w2", c.fusion.weights.w2);
    r.get("fusion.w3", c.fusion.weights.w3);
    r.get("fusion.normalize_dlem", c.fusion.normalize_dlem);
    r.get("fusion.normalize_ig", c.fusion.normalize_ig);

    r.get("index.nlist", c.index.nlist);
    r.get("index.m", c.index.m);
    r.get("index.ks", c.index.ks);
    r.get("index.nprobe", c.index.nprobe);
    r.get("index.kmeans_iters", c.index.kmeans_iters);
    r.get("index.opq_outer_iters", c.index.opq_outer_iters);
    r.get("index.flat", c.index.flat);
    std::string metric;
    r.get("index.metric", metric);
    if (!metric.empty()) {
        if (metric == "ip") c.index.metric = Metric::IP;
        else if (metric == "l2") c.index.metric = Metric::L2;
        else throw ConfigError("index.metric: expected \"ip\" or \"l2\", got " + metric);
    }

    r.get("rerank.b0", c.rerank.b0);
    r.get("rerank.b1", c.rerank.b1);
    r.get("rerank.b2", c.rerank.b2);
    r.get("rerank.b3", c.rerank.b3);
    r.get("rerank.b4", c.rerank.b4);
    r.get("rerank.gamma", c.rerank.gamma);
    r.get("rerank.d0_km", c.rerank.d0_km);

    r.get("eval.k", c.eval.k);
    r.get("eval.k_retrieve", c.eval.k_retrieve);
    r.get("eval.nprobe", c.eval.nprobe);
    r.get("eval.sample_jobs", c.eval.sample_jobs);

    r.get("recommend.k_retrieve", c.k_retrieve);
    r.get("recommend.k_final", c.k_final);

    if (!r.kv.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& [k, _] : r.kv) msg += " " + k;
        throw ConfigError(msg);
    }
    if (c.rerank.gamma < 0.0 || c.rerank.gamma > 1.0)
        throw ConfigError("rerank.gamma must be in [0, 1]");
}

std::uint64_t hash_config(const PipelineConfig& c) {
    // hash the effective numeric state so defaults and files agree
    std::ostringstream os;
    os.precision(17);
    os << c.corpus_dir << '|' << c.artifact_dir << '|' << c.output_dir << '|' << c.gen.n_jobs
       << '|' << c.gen.n_candidates << '|' << c.gen.n_titles << '|' << c.gen.n_skills << '|'
       << c.gen.n_soc_groups << '|' << c.gen.application_rate << '|' << c.gen.planted << '|'
       << c.gen.text_filler_words << '|' << c.dlem.seq_len << '|' << c.dlem.d_w << '|'
       << c.dlem.channels << '|' << c.dlem.d_e << '|' << c.dlem.d_h << '|' << c.dlem_train.epochs
       << '|' << c.dlem_train.lr << '|' << c.dlem_train.batch_size << '|' << c.dlem_neg_ratio
       << '|' << c.dlem_max_pairs << '|' << c.vocab_size << '|' << c.graph.d_g << '|'
       << c.graph.epochs << '|' << c.graph.batch << '|' << c.graph.lr << '|' << c.graph.lambda
       << '|' << c.fusion.weights.w1 << '|' << c.fusion.weights.w2 << '|' << c.fusion.weights.w3
       << '|' << c.fusion.normalize_dlem << '|' << c.fusion.normalize_ig << '|' << c.index.nlist
       << '|' << c.index.m << '|' << c.index.ks << '|' << c.index.nprobe << '|'
       << static_cast<int>(c.index.metric) << '|' << c.index.kmeans_iters << '|'
       << c.index.opq_outer_iters << '|' << c.index.flat << '|' << c.rerank.b0 << '|'
       << c.rerank.b1 << '|' << c.rerank.b2 << '|' << c.rerank.b3 << '|' << c.rerank.b4 << '|'
       << c.rerank.gamma << '|' << c.rerank.d0_km << '|' << c.eval.k << '|' << c.eval.k_retrieve
       << '|' << c.eval.nprobe << '|' << c.eval.sample_jobs << '|' << c.k_retrieve << '|'
       << c.k_final << '|' << c.seed;
    std::string s = os.str();
    return fnv1a64(s.data(), s.size());
}

}  // namespace

std::uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
    return fnv1a64(stage.data(), stage.size(), seed ^ 0x9e3779b97f4a7c15ULL);
}

PipelineConfig default_pipeline_config() {
    PipelineConfig c;
    c.dlem.seq_len = 64;       // synthetic texts are short
    c.dlem_train.epochs = 2;
    c.index.opq_outer_iters = 3;
    c.eval.sample_jobs = 200;
    c.config_hash = hash_config(c);
    return c;
}

void refresh_config_hash(PipelineConfig& config) { config.config_hash = hash_config(config); }

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    TomlReader r{parse_toml(buf.str())};
    PipelineConfig c = default_pipeline_config();
    apply_config(r, c);
    c.config_hash = hash_config(c);
    return c;
}

// ---- artifact plumbing --------------------------------------------------

namespace {

struct StageTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string manifest_path(const PipelineConfig& c, const std::string& stage) {
    return c.artifact_dir + "/manifests/" + stage + ".json";
}

// Throws when an upstream artifact is missing, naming its producer stage;
// warns on a config-hash mismatch with the producer's manifest.
void require_artifact(const PipelineConfig& c, const std::string& path,
                      const std::string& producer) {
    if (!fs::exists(path))
        throw DependencyError("missing artifact " + path + " (run " + producer + " first)");
    std::ifstream ms(manifest_path(c, producer));
    if (!ms) return;
    try {
        json m = json::parse(ms);
        auto h = std::stoull(m.value("config_hash", std::string("0")), nullptr, 16);
        if (h != c.config_hash)
            std::cerr << "warning: " << path << " was produced by stage " << producer
                      << " under a different config (stale artifact?)\n";
    } catch (const json::exception&) {
        std::cerr << "warning: unreadable manifest for stage " << producer << "\n";
    }
}

void write_manifest(const PipelineConfig& c, const std::string& stage,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double seconds) {
    fs::create_directories(c.artifact_dir + "/manifests");
    json m;
    m["stage"] = stage;
    m["config_hash"] = hash_hex(c.config_hash);
    m["seed"] = c.seed;
    json in = json::object(), out = json::object();
    for (const auto& p : inputs) in[p] = hash_hex(hash_file(p));
    for (const auto& p : outputs) out[p] = hash_hex(hash_file(p));
    m["inputs"] = in;
    m["outputs"] = out;
    m["wall_seconds"] = seconds;
    std::ofstream os(manifest_path(c, stage));
    if (!os) throw DataError("cannot write manifest for stage " + stage);
    os << m.dump(2) << "\n";
}

std::vector<std::string> corpus_files(const PipelineConfig& c) {
    return {c.corpus_dir + "/jobs.jsonl", c.corpus_dir + "/candidates.jsonl",
            c.corpus_dir + "/applications.jsonl"};
}

Corpus load_corpus_checked(const PipelineConfig& c) {
    require_artifact(c, c.corpus_dir + "/jobs.jsonl", "gen-data");
    return load_corpus(c.corpus_dir);
}

// ---- stages -------------------------------------------------------------

void stage_gen_data(const PipelineConfig& c) {
    StageTimer t;
    Corpus corpus = generate_synthetic(c.gen, c.stage_seed("gen-data"));
    fs::create_directories(c.corpus_dir);
    save_corpus(corpus, c.corpus_dir);
    auto outs = corpus_files(c);
    outs.push_back(c.corpus_dir + "/ground_truth.jsonl");
    write_manifest(c, "gen-data", {}, outs, t.seconds());
}

void stage_train_dlem(const PipelineConfig& c) {
    StageTimer t;
    Corpus corpus = load_corpus_checked(c);
    Vocabulary vocab = build_vocabulary(corpus, c.vocab_size);
    auto pairs = sample_pairs(corpus, vocab, c.dlem.seq_len, c.dlem_neg_ratio,
                              c.stage_seed("dlem-pairs"));
    if (c.dlem_max_pairs > 0 && pairs.size() > static_cast<std::size_t>(c.dlem_max_pairs)) {
        Rng rng(c.stage_seed("dlem-cap"));
        std::shuffle(pairs.begin(), pairs.end(), rng);
        pairs.resize(static_cast<std::size_t>(c.dlem_max_pairs));
    }
    DlemParams params = DlemParams::init(c.dlem, vocab.size(), c.stage_seed("dlem-init"));
    RelevanceHead head = RelevanceHead::init(c.dlem.d_e, c.stage_seed("dlem-head"));
    DlemTrainConfig tc = c.dlem_train;
    tc.seed = c.stage_seed("dlem-train");
    auto res = train_dlem(std::move(params), std::move(head), std::move(pairs), tc);
    fs::create_directories(c.artifact_dir);
    vocab.save(c.artifact_dir + "/vocab.txt");
    save_dlem(c.artifact_dir + "/dlem.bin", res.params, res.head);
    if (!res.epoch_loss.empty())
        std::cerr << "train-dlem: loss " << res.epoch_loss.front() << " -> "
                  << res.epoch_loss.back() << " over " << res.epoch_loss.size() << " epochs\n";
    write_manifest(c, "train-dlem", corpus_files(c),
                   {c.artifact_dir + "/vocab.txt", c.artifact_dir + "/dlem.bin"}, t.seconds());
}

void stage_train_graph(const PipelineConfig& c) {
    StageTimer t;
    Corpus corpus = load_corpus_checked(c);
    InfoGraph graph = build_graphs(corpus);
    GraphTrainConfig gc = c.graph;
    gc.seed = c.stage_seed("train-graph");
    EntityEmbeddings emb = train_graph_embeddings(graph, gc);
    fs::create_directories(c.artifact_dir);
    emb.save(c.artifact_dir + "/igraph.bin");
    write_manifest(c, "train-graph", corpus_files(c), {c.artifact_dir + "/igraph.bin"},
                   t.seconds());
}

void stage_embed(const PipelineConfig& c) {
    StageTimer t;
    Corpus corpus = load_corpus_checked(c);
    require_artifact(c, c.artifact_dir + "/vocab.txt", "train-dlem");
    require_artifact(c, c.artifact_dir + "/dlem.bin", "train-dlem");
    require_artifact(c, c.artifact_dir + "/igraph.bin", "train-graph");
    Vocabulary vocab = Vocabulary::load(c.artifact_dir + "/vocab.txt");
    auto [params, head] = load_dlem(c.artifact_dir + "/dlem.bin");
    EntityEmbeddings emb = EntityEmbeddings::load(c.artifact_dir + "/igraph.bin");

    std::vector<FusedEmbedding> jobs, cands;
    jobs.reserve(corpus.jobs.size());
    for (const auto& j : corpus.jobs) jobs.push_back(embed_job(j, params, vocab, emb, c.fusion));
    cands.reserve(corpus.candidates.size());
    for (const auto& cd : corpus.candidates)
        cands.push_back(embed_candidate(cd, params, vocab, emb, c.fusion));
    save_fused(c.artifact_dir + "/job_embeddings.bin", jobs);
    save_fused(c.artifact_dir + "/candidate_embeddings.bin", cands);
    auto inputs = corpus_files(c);
    inputs.insert(inputs.end(), {c.artifact_dir + "/vocab.txt", c.artifact_dir + "/dlem.bin",
                                 c.artifact_dir + "/igraph.bin"});
    write_manifest(c, "embed", inputs,
                   {c.artifact_dir + "/job_embeddings.bin",
                    c.artifact_dir + "/candidate_embeddings.bin"},
                   t.seconds());
}

void stage_build_index(const PipelineConfig& c) {
    StageTimer t;
    require_artifact(c, c.artifact_dir + "/candidate_embeddings.bin", "embed");
    auto cands = load_fused(c.artifact_dir + "/candidate_embeddings.bin", Provenance::candidate);
    if (cands.empty()) throw DataError("no candidate embeddings to index");
    Matrix vecs(cands.size(), cands.front().values.size());
    std::vector<std::string> ids(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        std::copy(cands[i].values.begin(), cands[i].values.end(), vecs.row(i));
        ids[i] = cands[i].id;
    }
    IndexConfig ic = c.index;
    ic.seed = c.stage_seed("build-index");
    IvfIndex index = IvfIndex::build(vecs, ids, ic);
    index.save(c.artifact_dir + "/index.ivfx");
    {
        std::ofstream stats(c.artifact_dir + "/index_stats.json");
        stats << index.stats().to_json() << "\n";
    }
    write_manifest(c, "build-index", {c.artifact_dir + "/candidate_embeddings.bin"},
                   {c.artifact_dir + "/index.ivfx", c.artifact_dir + "/index_stats.json"},
                   t.seconds());
}

struct ServingState {
    Corpus corpus;
    IvfIndex index;
    std::vector<FusedEmbedding> jobs;
    std::unordered_map<std::string, const FusedEmbedding*> job_by_id;
    std::unordered_map<std::string, double> cand_norm2;
};

ServingState load_serving(const PipelineConfig& c) {
    ServingState s;
    s.corpus = load_corpus_checked(c);
    require_artifact(c, c.artifact_dir + "/index.ivfx", "build-index");
    require_artifact(c, c.artifact_dir + "/job_embeddings.bin", "embed");
    require_artifact(c, c.artifact_dir + "/candidate_embeddings.bin", "embed");
    s.index = IvfIndex::load(c.artifact_dir + "/index.ivfx");
    s.jobs = load_fused(c.artifact_dir + "/job_embeddings.bin", Provenance::job);
    for (const auto& e : s.jobs) s.job_by_id[e.id] = &e;
    auto cands = load_fused(c.artifact_dir + "/candidate_embeddings.bin", Provenance::candidate);
    for (const auto& e : cands) {
        double n2 = 0.0;
        for (double v : e.values) n2 += v * v;
        s.cand_norm2[e.id] = n2;
    }
    return s;
}

std::vector<RankedCandidate> recommend_one(const ServingState& s, const PipelineConfig& c,
                                           const std::string& job_id, int k_retrieve,
                                           int k_final) {
    auto it = s.job_by_id.find(job_id);
    if (it == s.job_by_id.end()) throw DataError("unknown job id: " + job_id);
    const auto& q = it->second->values;
    double qn2 = 0.0;
    for (double v : q) qn2 += v * v;
    auto hits = s.index.search(q, k_retrieve, c.index.nprobe);
    std::vector<double> hn(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) hn[i] = s.cand_norm2.at(hits[i].id);
    auto ranked = rerank(s.corpus.job(job_id), hits, s.index.config().metric, qn2, hn, s.corpus,
                         c.rerank);
    if (ranked.size() > static_cast<std::size_t>(k_final))
        ranked.resize(static_cast<std::size_t>(k_final));
    return ranked;
}

void stage_recommend(const PipelineConfig& c, const std::vector<std::string>& job_ids) {
    StageTimer t;
    if (c.k_final > c.k_retrieve) throw ParameterError("k_final must not exceed k_retrieve");
    ServingState s = load_serving(c);
    std::vector<std::string> ids = job_ids;
    if (ids.empty())
        for (const auto& j : s.corpus.jobs) ids.push_back(j.id);
    fs::create_directories(c.output_dir);
    std::string out_path = c.output_dir + "/recommendations.jsonl";
    std::ofstream os(out_path);
    if (!os) throw DataError("cannot write " + out_path);
    for (const auto& id : ids) {
        auto ranked = recommend_one(s, c, id, c.k_retrieve, c.k_final);
        if (ranked.empty()) {
            os << "{\"job_id\":\"" << id << "\",\"status\":\"no_matches\"}\n";
            continue;
        }
        for (const auto& rc : ranked) os << rc.to_json() << "\n";
    }
    os.close();
    write_manifest(c, "recommend",
                   {c.artifact_dir + "/index.ivfx", c.artifact_dir + "/job_embeddings.bin",
                    c.artifact_dir + "/candidate_embeddings.bin"},
                   {out_path}, t.seconds());
}

void stage_evaluate(const PipelineConfig& c) {
    StageTimer t;
    Corpus corpus = load_corpus_checked(c);
    require_artifact(c, c.artifact_dir + "/index.ivfx", "build-index");
    require_artifact(c, c.artifact_dir + "/job_embeddings.bin", "embed");
    require_artifact(c, c.artifact_dir + "/candidate_embeddings.bin", "embed");
    IvfIndex index = IvfIndex::load(c.artifact_dir + "/index.ivfx");
    auto jobs = load_fused(c.artifact_dir + "/job_embeddings.bin", Provenance::job);
    auto cands = load_fused(c.artifact_dir + "/candidate_embeddings.bin", Provenance::candidate);
    EvalConfig ec = c.eval;
    ec.seed = c.stage_seed("evaluate");
    EvalReport rep = evaluate_pipeline(corpus, index, jobs, cands, c.rerank, ec);
    fs::create_directories(c.output_dir);
    std::string out_path = c.output_dir + "/eval_report.json";
    std::ofstream os(out_path);
    if (!os) throw DataError("cannot write " + out_path);
    os << rep.to_json() << "\n";
    os.close();
    std::cout << rep.to_table();
    write_manifest(c, "evaluate",
                   {c.artifact_dir + "/index.ivfx", c.artifact_dir + "/job_embeddings.bin",
                    c.artifact_dir + "/candidate_embeddings.bin"},
                   {out_path}, t.seconds());
}

void stage_export_embeddings(const PipelineConfig& c) {
    StageTimer t;
    require_artifact(c, c.artifact_dir + "/job_embeddings.bin", "embed");
    require_artifact(c, c.artifact_dir + "/candidate_embeddings.bin", "embed");
    auto jobs = load_fused(c.artifact_dir + "/job_embeddings.bin", Provenance::job);
    auto cands = load_fused(c.artifact_dir + "/candidate_embeddings.bin", Provenance::candidate);
    fs::create_directories(c.output_dir);
    std::string out_path = c.output_dir + "/embeddings.tsv";
    std::ofstream os(out_path);
    if (!os) throw DataError("cannot write " + out_path);
    os.precision(8);
    auto dump = [&](const std::vector<FusedEmbedding>& embs) {
        for (const auto& e : embs) {
            os << e.id;
            for (double v : e.values) os << '\t' << v;
            os << '\n';
        }
    };
    dump(jobs);
    dump(cands);
    os.close();
    write_manifest(c, "export-embeddings",
                   {c.artifact_dir + "/job_embeddings.bin",
                    c.artifact_dir + "/candidate_embeddings.bin"},
                   {out_path}, t.seconds());
}

}  // namespace

std::vector<RankedCandidate> recommend_jobs(const std::vector<std::string>& job_ids,
                                            int k_retrieve, int k_final,
                                            const PipelineConfig& config) {
    if (k_final > k_retrieve) throw ParameterError("k_final must not exceed k_retrieve");
    ServingState s = load_serving(config);
    std::vector<RankedCandidate> out;
    for (const auto& id : job_ids) {
        auto ranked = recommend_one(s, config, id, k_retrieve, k_final);
        out.insert(out.end(), ranked.begin(), ranked.end());
    }
    return out;
}

void run_stage(const std::string& stage, const PipelineConfig& config,
               const std::vector<std::string>& job_ids) {
    if (stage == "gen-data") stage_gen_data(config);
    else if (stage == "train-dlem") stage_train_dlem(config);
    else if (stage == "train-graph") stage_train_graph(config);
    else if (stage == "embed") stage_embed(config);
    else if (stage == "build-index") stage_build_index(config);
    else if (stage == "recommend") stage_recommend(config, job_ids);
    else if (stage == "evaluate") stage_evaluate(config);
    else if (stage == "export-embeddings") stage_export_embeddings(config);
    else throw ConfigError("unknown stage: " + stage);
}

}  // namespace match
