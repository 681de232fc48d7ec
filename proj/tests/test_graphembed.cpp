#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "match/graphembed.hpp"

using namespace match;

namespace {

// Two 5-title communities, dense inside, no edges across.
InfoGraph two_communities() {
    InfoGraph g;
    g.n_titles = 10;
    g.n_skills = 4;
    g.jj.init(10, 10);
    g.ss.init(4, 4);
    g.js.init(10, 4);
    for (int base : {0, 5}) {
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                if (i != j) g.jj.add_edge(base + i, base + j, 1.0);
    }
    g.ss.add_edge(0, 1, 1.0);
    g.ss.add_edge(1, 0, 1.0);
    g.ss.add_edge(2, 3, 1.0);
    g.ss.add_edge(3, 2, 1.0);
    for (int t = 0; t < 5; ++t) g.js.add_edge(t, 0, 1.0);
    for (int t = 5; t < 10; ++t) g.js.add_edge(t, 2, 1.0);
    g.jj.finalize();
    g.ss.finalize();
    g.js.finalize();
    return g;
}

EntityEmbeddings random_embeddings(int nt, int ns, int d, std::uint64_t seed) {
    EntityEmbeddings emb;
    emb.titles = Matrix(nt, d);
    emb.skills = Matrix(ns, d);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (auto& v : emb.titles.a) v = u(rng);
    for (auto& v : emb.skills.a) v = u(rng);
    return emb;
}

std::vector<Triplet> mixed_triplets(const InfoGraph& g, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Triplet> out;
    TripletKind kinds[] = {TripletKind::jj, TripletKind::ss, TripletKind::js};
    for (int i = 0; i < n; ++i) out.push_back(sample_triplet(g, kinds[i % 3], rng));
    return out;
}

}  // namespace

TEST_CASE("zero embeddings give an objective of N ln 2") {
    InfoGraph g = two_communities();
    EntityEmbeddings emb;
    emb.titles = Matrix(10, 8);
    emb.skills = Matrix(4, 8);
    for (int n : {1, 7, 64}) {
        auto ts = mixed_triplets(g, n, 3);
        double obj = bpr_objective(emb, ts, 0.0);
        CHECK(std::abs(obj - n * std::log(2.0)) < 1e-9);
    }
}

TEST_CASE("regularizer adds lambda times the Frobenius norms") {
    InfoGraph g = two_communities();
    EntityEmbeddings emb = random_embeddings(10, 4, 8, 4);
    auto ts = mixed_triplets(g, 9, 5);
    double base = bpr_objective(emb, ts, 0.0);
    double reg = bpr_objective(emb, ts, 0.5);
    double frob = emb.titles.frobenius2() + emb.skills.frobenius2();
    CHECK(reg == doctest::Approx(base + 0.5 * frob).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    InfoGraph g = two_communities();
    EntityEmbeddings emb = random_embeddings(10, 4, 6, 6);
    auto ts = mixed_triplets(g, 12, 7);
    const double lambda = 1e-3;

    Matrix gt, gs;
    bpr_gradients(emb, ts, lambda, gt, gs);

    const double h = 1e-5;
    auto check_matrix = [&](Matrix& m, const Matrix& grad) {
        for (std::size_t i = 0; i < m.a.size(); ++i) {
            double orig = m.a[i];
            m.a[i] = orig + h;
            double up = bpr_objective(emb, ts, lambda);
            m.a[i] = orig - h;
            double dn = bpr_objective(emb, ts, lambda);
            m.a[i] = orig;
            double fd = (up - dn) / (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(grad.a[i]), 1e-6});
            CHECK(std::abs(fd - grad.a[i]) / denom < 1e-4);
        }
    };
    check_matrix(emb.titles, gt);
    check_matrix(emb.skills, gs);
}

TEST_CASE("sampled triplets are valid") {
    InfoGraph g = two_communities();
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
        for (TripletKind k : {TripletKind::jj, TripletKind::ss, TripletKind::js}) {
            Triplet t = sample_triplet(g, k, rng);
            const AdjGraph& ag = g.graph(k);
            CHECK(ag.has_edge(t.x, t.y));
            CHECK(!ag.has_edge(t.x, t.z));
            if (k == TripletKind::jj) CHECK(t.x != t.z);
        }
    }
}

TEST_CASE("near-complete graphs exhaust negative sampling") {
    InfoGraph g;
    g.n_titles = 2;
    g.n_skills = 1;
    g.jj.init(2, 2);
    g.ss.init(1, 1);
    g.js.init(2, 1);
    g.jj.add_edge(0, 1, 1.0);
    g.jj.add_edge(1, 0, 1.0);
    g.jj.finalize();
    g.ss.finalize();
    g.js.finalize();
    Rng rng(9);
    CHECK_THROWS_AS(sample_triplet(g, TripletKind::jj, rng), SamplingError);
    CHECK_THROWS_AS(sample_triplet(g, TripletKind::ss, rng), SamplingError);  // no edges
}

TEST_CASE("full-batch gradient descent is non-increasing") {
    InfoGraph g = two_communities();
    EntityEmbeddings emb = random_embeddings(10, 4, 8, 10);
    auto ts = mixed_triplets(g, 60, 11);
    const double lambda = 1e-4, lr = 0.05;
    double prev = bpr_objective(emb, ts, lambda);
    for (int step = 0; step < 40; ++step) {
        Matrix gt, gs;
        bpr_gradients(emb, ts, lambda, gt, gs);
        for (std::size_t i = 0; i < emb.titles.a.size(); ++i) emb.titles.a[i] -= lr * gt.a[i];
        for (std::size_t i = 0; i < emb.skills.a.size(); ++i) emb.skills.a[i] -= lr * gs.a[i];
        double cur = bpr_objective(emb, ts, lambda);
        CHECK(cur <= prev + 1e-9);
        prev = cur;
    }
}

TEST_CASE("training separates two title communities") {
    InfoGraph g = two_communities();
    GraphTrainConfig cfg;
    cfg.d_g = 16;
    cfg.epochs = 60;
    cfg.batch = 32;
    cfg.lr = 0.05;
    cfg.seed = 12;
    EntityEmbeddings emb = train_graph_embeddings(g, cfg);

    auto mean_ip = [&](int t, int base) {
        double s = 0.0;
        int n = 0;
        for (int o = base; o < base + 5; ++o) {
            if (o == t) continue;
            double ip = 0.0;
            for (int j = 0; j < cfg.d_g; ++j) ip += emb.titles.at(t, j) * emb.titles.at(o, j);
            s += ip;
            ++n;
        }
        return s / n;
    };
    int separated = 0;
    for (int t = 0; t < 10; ++t) {
        int own = t < 5 ? 0 : 5, other = t < 5 ? 5 : 0;
        if (mean_ip(t, own) > mean_ip(t, other)) ++separated;
    }
    CHECK(separated >= 9);  // >= 90% of anchors
}

TEST_CASE("document embedding blends title and skills and is unit length") {
    EntityEmbeddings emb = random_embeddings(4, 5, 6, 13);
    auto v = ig_embed_document(emb, 2, {0, 3});
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    CHECK(n2 == doctest::Approx(1.0).epsilon(1e-10));

    // no skills: normalized title row
    auto t_only = ig_embed_document(emb, 1, {});
    double tn = std::sqrt([&] {
        double s = 0;
        for (int j = 0; j < 6; ++j) s += emb.titles.at(1, j) * emb.titles.at(1, j);
        return s;
    }());
    for (int j = 0; j < 6; ++j)
        CHECK(t_only[static_cast<std::size_t>(j)] ==
              doctest::Approx(emb.titles.at(1, j) / tn).epsilon(1e-10));

    CHECK_THROWS_AS(ig_embed_document(emb, 99, {}), ParameterError);
    CHECK_THROWS_AS(ig_embed_document(emb, 0, {99}), ParameterError);
}

TEST_CASE("entity embedding persistence round trip") {
    EntityEmbeddings emb = random_embeddings(3, 4, 5, 14);
    std::string path = "/tmp/match-test-igem.bin";
    emb.save(path);
    EntityEmbeddings back = EntityEmbeddings::load(path);
    REQUIRE(back.titles.rows == emb.titles.rows);
    REQUIRE(back.skills.rows == emb.skills.rows);
    for (std::size_t i = 0; i < emb.titles.a.size(); ++i)
        CHECK(back.titles.a[i] == doctest::Approx(emb.titles.a[i]).epsilon(1e-6));
    std::remove(path.c_str());
    CHECK_THROWS_AS(EntityEmbeddings::load(path), DependencyError);
}

TEST_CASE("graphs built from a corpus connect consecutive work-history titles") {
    Corpus c;
    CandidateProfile cand;
    cand.id = "c1";
    cand.title_entity = 2;
    cand.work_history = {{"b", 1, 2015, 2018}, {"a", 0, 2010, 2015}, {"c", 2, 2018, 2022}};
    cand.skills = {0, 1};
    c.candidates.push_back(cand);
    JobPost j;
    j.id = "j1";
    j.title_entity = 3;
    j.skills = {1, 2};
    c.jobs.push_back(j);
    c.rebuild_indices();

    InfoGraph g = build_graphs(c);
    CHECK(g.n_titles == 4);
    CHECK(g.n_skills == 3);
    // chronological: 0 -> 1 -> 2
    CHECK(g.jj.has_edge(0, 1));
    CHECK(g.jj.has_edge(1, 2));
    CHECK(!g.jj.has_edge(0, 2));
    // skill co-occurrence is symmetric
    CHECK(g.ss.has_edge(0, 1));
    CHECK(g.ss.has_edge(1, 0));
    CHECK(g.ss.has_edge(1, 2));
    // job title -> skills
    CHECK(g.js.has_edge(3, 1));
    CHECK(g.js.has_edge(3, 2));
    CHECK(!g.js.has_edge(3, 0));
}
