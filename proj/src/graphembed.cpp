#include "match/graphembed.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace match {

void AdjGraph::add_edge(int x, int y, double w) {
    if (x < 0 || x >= n_from || y < 0 || y >= n_to)
        throw ParameterError("graph edge index out of range");
    if (x == y && n_from == n_to) return;  // no self-loops
    auto& row = adj[static_cast<std::size_t>(x)];
    for (auto& [n, wt] : row) {
        if (n == y) {
            wt += w;
            return;
        }
    }
    row.emplace_back(y, w);
}

void AdjGraph::finalize() {
    anchor_cum.assign(adj.size(), 0.0);
    neighbor_cum.assign(adj.size(), {});
    double total = 0.0;
    for (std::size_t i = 0; i < adj.size(); ++i) {
        auto& row = adj[i];
        std::sort(row.begin(), row.end());
        double cum = 0.0;
        auto& ncum = neighbor_cum[i];
        ncum.reserve(row.size());
        for (auto& [n, w] : row) {
            cum += w;
            ncum.push_back(cum);
        }
        total += cum;
        anchor_cum[i] = total;
    }
}

bool AdjGraph::has_edge(int x, int y) const {
    const auto& row = adj[static_cast<std::size_t>(x)];
    auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(y, 0.0),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    return it != row.end() && it->first == y;
}

std::size_t AdjGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& row : adj) n += row.size();
    return n;
}

InfoGraph build_graphs(const Corpus& corpus) {
    int n_titles = 0, n_skills = 0;
    auto see_title = [&](int t) { n_titles = std::max(n_titles, t + 1); };
    auto see_skill = [&](int s) { n_skills = std::max(n_skills, s + 1); };
    for (const auto& j : corpus.jobs) {
        see_title(j.title_entity);
        for (int s : j.skills) see_skill(s);
    }
    for (const auto& c : corpus.candidates) {
        see_title(c.title_entity);
        for (const auto& w : c.work_history) see_title(w.title_entity);
        for (int s : c.skills) see_skill(s);
    }

    InfoGraph g;
    g.n_titles = n_titles;
    g.n_skills = n_skills;
    g.jj.init(n_titles, n_titles);
    g.ss.init(n_skills, n_skills);
    g.js.init(n_titles, n_skills);

    for (const auto& c : corpus.candidates) {
        // Career chronology, oldest first.
        auto hist = c.work_history;
        std::stable_sort(hist.begin(), hist.end(),
                         [](const WorkSpan& a, const WorkSpan& b) { return a.start_year < b.start_year; });
        for (std::size_t i = 0; i + 1 < hist.size(); ++i)
            g.jj.add_edge(hist[i].title_entity, hist[i + 1].title_entity, 1.0);
    }

    auto add_cooccurrence = [&](const std::vector<int>& skills) {
        for (std::size_t i = 0; i < skills.size(); ++i) {
            for (std::size_t k = i + 1; k < skills.size(); ++k) {
                g.ss.add_edge(skills[i], skills[k], 1.0);
                g.ss.add_edge(skills[k], skills[i], 1.0);
            }
        }
    };
    for (const auto& j : corpus.jobs) add_cooccurrence(j.skills);
    for (const auto& c : corpus.candidates) add_cooccurrence(c.skills);

    for (const auto& j : corpus.jobs)
        for (int s : j.skills) g.js.add_edge(j.title_entity, s, 1.0);

    g.jj.finalize();
    g.ss.finalize();
    g.js.finalize();
    return g;
}

Triplet sample_triplet(const InfoGraph& graph, TripletKind kind, Rng& rng) {
    const AdjGraph& g = graph.graph(kind);
    if (g.anchor_cum.empty() || g.anchor_cum.back() <= 0.0)
        throw SamplingError("graph has no edges to sample from");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double r = unit(rng) * g.anchor_cum.back();
    int x = static_cast<int>(std::lower_bound(g.anchor_cum.begin(), g.anchor_cum.end(), r) -
                             g.anchor_cum.begin());
    // lower_bound can land on a zero-degree anchor when r hits a plateau edge;
    // advance to the next anchor that owns probability mass.
    while (g.adj[static_cast<std::size_t>(x)].empty()) ++x;

    const auto& ncum = g.neighbor_cum[static_cast<std::size_t>(x)];
    double rp = unit(rng) * ncum.back();
    auto yi = std::lower_bound(ncum.begin(), ncum.end(), rp) - ncum.begin();
    int y = g.adj[static_cast<std::size_t>(x)][static_cast<std::size_t>(yi)].first;

    std::uniform_int_distribution<int> node(0, g.n_to - 1);
    for (int tries = 0; tries < 100; ++tries) {
        int z = node(rng);
        bool self = (g.n_from == g.n_to && z == x);
        if (!self && !g.has_edge(x, z)) return {kind, x, y, z};
    }
    throw SamplingError("negative sampling exceeded 100 rejections (graph near-complete)");
}

namespace {

double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kLogFloor = 1e-10;

void triplet_rows(const EntityEmbeddings& emb, const Triplet& t, const Matrix*& anchor_m,
                  const Matrix*& other_m) {
    switch (t.kind) {
        case TripletKind::jj:
            anchor_m = &emb.titles;
            other_m = &emb.titles;
            break;
        case TripletKind::ss:
            anchor_m = &emb.skills;
            other_m = &emb.skills;
            break;
        default:
            anchor_m = &emb.titles;
            other_m = &emb.skills;
            break;
    }
}

}  // namespace

double bpr_objective(const EntityEmbeddings& emb, const std::vector<Triplet>& triplets,
                     double lambda) {
    std::size_t d = emb.titles.cols;
    double obj = 0.0;
    for (const auto& t : triplets) {
        const Matrix *am, *om;
        triplet_rows(emb, t, am, om);
        if (t.x < 0 || static_cast<std::size_t>(t.x) >= am->rows || t.y < 0 ||
            static_cast<std::size_t>(t.y) >= om->rows || t.z < 0 ||
            static_cast<std::size_t>(t.z) >= om->rows)
            throw ParameterError("triplet index out of range");
        const double* wx = am->row(static_cast<std::size_t>(t.x));
        double delta = dot(wx, om->row(static_cast<std::size_t>(t.y)), d) -
                       dot(wx, om->row(static_cast<std::size_t>(t.z)), d);
        obj -= std::log(std::max(sigmoid(delta), kLogFloor));
    }
    return obj + lambda * (emb.titles.frobenius2() + emb.skills.frobenius2());
}

double bpr_gradients(const EntityEmbeddings& emb, const std::vector<Triplet>& triplets,
                     double lambda, Matrix& grad_titles, Matrix& grad_skills) {
    std::size_t d = emb.titles.cols;
    grad_titles = Matrix(emb.titles.rows, d);
    grad_skills = Matrix(emb.skills.rows, d);
    double obj = 0.0;
    for (const auto& t : triplets) {
        const Matrix *am, *om;
        triplet_rows(emb, t, am, om);
        Matrix& ag = (am == &emb.titles) ? grad_titles : grad_skills;
        Matrix& og = (om == &emb.titles) ? grad_titles : grad_skills;
        const double* wx = am->row(static_cast<std::size_t>(t.x));
        const double* wy = om->row(static_cast<std::size_t>(t.y));
        const double* wz = om->row(static_cast<std::size_t>(t.z));
        double delta = dot(wx, wy, d) - dot(wx, wz, d);
        double s = sigmoid(delta);
        obj -= std::log(std::max(s, kLogFloor));
        double coef = -(1.0 - s);  // d(-ln sigma)/d(delta)
        double* gx = ag.row(static_cast<std::size_t>(t.x));
        double* gy = og.row(static_cast<std::size_t>(t.y));
        double* gz = og.row(static_cast<std::size_t>(t.z));
        for (std::size_t i = 0; i < d; ++i) {
            gx[i] += coef * (wy[i] - wz[i]);
            gy[i] += coef * wx[i];
            gz[i] -= coef * wx[i];
        }
    }
    for (std::size_t i = 0; i < grad_titles.a.size(); ++i)
        grad_titles.a[i] += 2.0 * lambda * emb.titles.a[i];
    for (std::size_t i = 0; i < grad_skills.a.size(); ++i)
        grad_skills.a[i] += 2.0 * lambda * emb.skills.a[i];
    return obj + lambda * (emb.titles.frobenius2() + emb.skills.frobenius2());
}

EntityEmbeddings train_graph_embeddings(const InfoGraph& graph, const GraphTrainConfig& cfg) {
    if (graph.n_titles == 0 && graph.n_skills == 0)
        throw ParameterError("cannot train embeddings on an empty graph");
    Rng rng(cfg.seed);
    std::size_t d = static_cast<std::size_t>(cfg.d_g);

    EntityEmbeddings emb;
    emb.titles = Matrix(static_cast<std::size_t>(graph.n_titles), d);
    emb.skills = Matrix(static_cast<std::size_t>(graph.n_skills), d);
    std::uniform_real_distribution<double> init(-0.5 / cfg.d_g, 0.5 / cfg.d_g);
    for (auto& v : emb.titles.a) v = init(rng);
    for (auto& v : emb.skills.a) v = init(rng);

    std::vector<TripletKind> kinds;
    for (TripletKind k : {TripletKind::jj, TripletKind::ss, TripletKind::js})
        if (graph.graph(k).edge_count() > 0) kinds.push_back(k);
    if (kinds.empty()) return emb;

    std::size_t max_edges = 0;
    for (auto k : kinds) max_edges = std::max(max_edges, graph.graph(k).edge_count());
    std::size_t batches_per_kind =
        (max_edges + static_cast<std::size_t>(cfg.batch) - 1) / static_cast<std::size_t>(cfg.batch);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t b = 0; b < batches_per_kind; ++b) {
            for (auto kind : kinds) {
                // Accumulate one mini-batch of triplet gradients on touched rows.
                std::map<std::pair<int, int>, std::vector<double>> touched;  // (matrix, row)
                auto acc = [&](int mat, int row) -> std::vector<double>& {
                    auto& v = touched[{mat, row}];
                    if (v.empty()) v.assign(d, 0.0);
                    return v;
                };
                double check = 0.0;
                for (int i = 0; i < cfg.batch; ++i) {
                    Triplet t = sample_triplet(graph, kind, rng);
                    const Matrix *am, *om;
                    triplet_rows(emb, t, am, om);
                    int amat = (am == &emb.titles) ? 0 : 1;
                    int omat = (om == &emb.titles) ? 0 : 1;
                    const double* wx = am->row(static_cast<std::size_t>(t.x));
                    const double* wy = om->row(static_cast<std::size_t>(t.y));
                    const double* wz = om->row(static_cast<std::size_t>(t.z));
                    double delta = dot(wx, wy, d) - dot(wx, wz, d);
                    double s = sigmoid(delta);
                    check += s;
                    double coef = -(1.0 - s);
                    auto& gx = acc(amat, t.x);
                    auto& gy = acc(omat, t.y);
                    auto& gz = acc(omat, t.z);
                    for (std::size_t j = 0; j < d; ++j) {
                        gx[j] += coef * (wy[j] - wz[j]) + 2.0 * cfg.lambda * wx[j];
                        gy[j] += coef * wx[j] + 2.0 * cfg.lambda * wy[j];
                        gz[j] -= coef * wx[j] - 2.0 * cfg.lambda * wz[j];
                    }
                }
                if (!std::isfinite(check)) throw NumericError("graph training produced NaN objective");
                for (auto& [key, g] : touched) {
                    Matrix& m = (key.first == 0) ? emb.titles : emb.skills;
                    double* row = m.row(static_cast<std::size_t>(key.second));
                    for (std::size_t j = 0; j < d; ++j) row[j] -= cfg.lr * g[j];
                }
            }
        }
    }
    return emb;
}

std::vector<double> ig_embed_document(const EntityEmbeddings& emb, int title_entity,
                                      const std::vector<int>& skills, double alpha) {
    std::size_t d = emb.titles.cols;
    if (title_entity < 0 || static_cast<std::size_t>(title_entity) >= emb.titles.rows)
        throw ParameterError("title entity out of range: " + std::to_string(title_entity));
    std::vector<double> v(d, 0.0);
    const double* wt = emb.titles.row(static_cast<std::size_t>(title_entity));
    if (skills.empty()) {
        std::copy(wt, wt + d, v.begin());
    } else {
        for (int s : skills) {
            if (s < 0 || static_cast<std::size_t>(s) >= emb.skills.rows)
                throw ParameterError("skill entity out of range: " + std::to_string(s));
            const double* ws = emb.skills.row(static_cast<std::size_t>(s));
            for (std::size_t i = 0; i < d; ++i) v[i] += ws[i];
        }
        double inv = 1.0 / static_cast<double>(skills.size());
        for (std::size_t i = 0; i < d; ++i) v[i] = alpha * wt[i] + (1.0 - alpha) * v[i] * inv;
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

// ---- persistence --------------------------------------------------------

namespace {
constexpr char kMagic[5] = "IGEM";
constexpr std::uint32_t kVersion = 1;

void write_matrix_f32(std::ostream& os, const Matrix& m) {
    for (double v : m.a) write_pod<float>(os, static_cast<float>(v));
}

Matrix read_matrix_f32(std::istream& is, std::size_t rows, std::size_t cols, const char* what) {
    Matrix m(rows, cols);
    for (auto& v : m.a) v = read_pod<float>(is, what);
    return m;
}
}  // namespace

void EntityEmbeddings::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write embeddings: " + path);
    os.write(kMagic, 4);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(titles.rows));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(skills.rows));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(titles.cols));
    write_matrix_f32(os, titles);
    write_matrix_f32(os, skills);
}

EntityEmbeddings EntityEmbeddings::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DependencyError("missing embeddings file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "IGEM") throw FormatError("bad magic in " + path);
    auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw FormatError("unsupported IGEM version " + std::to_string(version));
    auto nt = read_pod<std::uint32_t>(is, "n_titles");
    auto ns = read_pod<std::uint32_t>(is, "n_skills");
    auto d = read_pod<std::uint32_t>(is, "d_g");
    EntityEmbeddings emb;
    emb.titles = read_matrix_f32(is, nt, d, "title matrix");
    emb.skills = read_matrix_f32(is, ns, d, "skill matrix");
    return emb;
}

void EntityEmbeddings::export_tsv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write TSV: " + path);
    auto dump = [&](const Matrix& m, const char* prefix) {
        for (std::size_t i = 0; i < m.rows; ++i) {
            os << prefix << i;
            for (std::size_t j = 0; j < m.cols; ++j) os << "\t" << m.at(i, j);
            os << "\n";
        }
    };
    dump(titles, "title-");
    dump(skills, "skill-");
}

}  // namespace match
