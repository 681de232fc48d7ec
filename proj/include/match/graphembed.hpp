#pragma once

#include <utility>
#include <vector>

#include "match/common.hpp"
#include "match/corpus.hpp"

namespace match {

// Weighted adjacency with prefix sums for degree-proportional sampling.
struct AdjGraph {
    int n_from = 0;
    int n_to = 0;  // negative-sampling node space
    std::vector<std::vector<std::pair<int, double>>> adj;  // sorted by neighbor

    void init(int from, int to) {
        n_from = from;
        n_to = to;
        adj.assign(static_cast<std::size_t>(from), {});
    }
    void add_edge(int x, int y, double w);
    void finalize();  // sort neighbors, build sampling tables
    bool has_edge(int x, int y) const;
    std::size_t edge_count() const;

    // built by finalize()
    std::vector<double> anchor_cum;                 // cumulative out-weight per anchor
    std::vector<std::vector<double>> neighbor_cum;  // per anchor, cumulative edge weight
};

enum class TripletKind { jj, ss, js };

struct Triplet {
    TripletKind kind;
    int x, y, z;
};

struct InfoGraph {
    int n_titles = 0;
    int n_skills = 0;
    AdjGraph jj;  // directed job transitions
    AdjGraph ss;  // undirected skill co-occurrence (stored both ways)
    AdjGraph js;  // title -> skill

    const AdjGraph& graph(TripletKind k) const {
        switch (k) {
            case TripletKind::jj: return jj;
            case TripletKind::ss: return ss;
            default: return js;
        }
    }
};

struct EntityEmbeddings {
    Matrix titles;  // n_titles x d_g
    Matrix skills;  // n_skills x d_g

    void save(const std::string& path) const;
    static EntityEmbeddings load(const std::string& path);
    void export_tsv(const std::string& path) const;
};

struct GraphTrainConfig {
    int d_g = 64;
    int epochs = 10;
    int batch = 64;
    double lr = 0.05;
    double lambda = 1e-4;
    std::uint64_t seed = 1;
};

InfoGraph build_graphs(const Corpus& corpus);

Triplet sample_triplet(const InfoGraph& graph, TripletKind kind, Rng& rng);

// Joint BPR objective over a mixed triplet list, plus the l2 regularizer.
double bpr_objective(const EntityEmbeddings& emb, const std::vector<Triplet>& triplets,
                     double lambda);

// Objective together with dense gradients, for full-batch descent and checks.
double bpr_gradients(const EntityEmbeddings& emb, const std::vector<Triplet>& triplets,
                     double lambda, Matrix& grad_titles, Matrix& grad_skills);

EntityEmbeddings train_graph_embeddings(const InfoGraph& graph, const GraphTrainConfig& config);

// Document vector from entity embeddings: blend of title row and skill mean,
// l2-normalized unless zero.
std::vector<double> ig_embed_document(const EntityEmbeddings& emb, int title_entity,
                                      const std::vector<int>& skills, double alpha = 0.5);

}  // namespace match
