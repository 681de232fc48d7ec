#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "match/corpus.hpp"
#include "match/textembed.hpp"

using namespace match;

namespace {

DlemConfig tiny_config() {
    DlemConfig cfg;
    cfg.seq_len = 16;
    cfg.d_w = 6;
    cfg.channels = 4;
    cfg.d_e = 8;
    cfg.d_h = 5;
    cfg.kernels = {1, 2, 3};
    return cfg;
}

TokenSeq seq_of(std::vector<int> ids, int seq_len) {
    TokenSeq s;
    s.content_len = static_cast<int>(ids.size());
    ids.resize(static_cast<std::size_t>(seq_len), Vocabulary::kPad);
    s.ids = std::move(ids);
    return s;
}

}  // namespace

TEST_CASE("token encoding pads and truncates") {
    Corpus c;
    JobPost j;
    j.id = "j";
    j.description_text = "alpha beta gamma";
    c.jobs.push_back(j);
    c.rebuild_indices();
    Vocabulary v = build_vocabulary(c, 100);

    TokenSeq s = encode_tokens("beta alpha zzz", v, 6);
    CHECK(s.content_len == 3);
    CHECK(s.ids.size() == 6);
    CHECK(s.ids[0] == v.lookup("beta"));
    CHECK(s.ids[1] == v.lookup("alpha"));
    CHECK(s.ids[2] == Vocabulary::kUnk);
    CHECK(s.ids[3] == Vocabulary::kPad);

    TokenSeq t = encode_tokens("alpha beta gamma", v, 2);
    CHECK(t.content_len == 2);
    CHECK(t.ids.size() == 2);

    CHECK_THROWS_AS(encode_tokens("x", v, 0), ParameterError);
}

TEST_CASE("pad embedding row is pinned to zero") {
    DlemParams p = DlemParams::init(tiny_config(), 10, 1);
    for (int j = 0; j < p.cfg.d_w; ++j)
        CHECK(p.w[p.emb_off + static_cast<std::size_t>(j)] == 0.0);
}

TEST_CASE("eval forward is deterministic and padding-insensitive") {
    DlemConfig cfg = tiny_config();
    DlemParams p = DlemParams::init(cfg, 12, 2);

    TokenSeq short_pad = seq_of({3, 5, 2, 7, 4}, 8);
    TokenSeq long_pad = seq_of({3, 5, 2, 7, 4}, 16);
    auto a = dlem_forward(p, short_pad);
    auto b = dlem_forward(p, long_pad);
    auto c = dlem_forward(p, short_pad);
    REQUIRE(a.size() == static_cast<std::size_t>(cfg.d_e));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);  // extra padding changes nothing
        CHECK(a[i] == c[i]);  // pure function
    }

    // token order matters
    auto d = dlem_forward(p, seq_of({5, 3, 2, 7, 4}, 8));
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != d[i]) differs = true;
    CHECK(differs);

    CHECK_THROWS_AS(dlem_forward(p, seq_of({99}, 8)), ParameterError);
}

TEST_CASE("empty sequences produce a finite embedding") {
    DlemParams p = DlemParams::init(tiny_config(), 10, 3);
    auto v = dlem_forward(p, seq_of({}, 8));
    for (double x : v) CHECK(std::isfinite(x));
}

TEST_CASE("analytic gradients match finite differences on every tensor") {
    DlemConfig cfg = tiny_config();
    const std::size_t vocab = 9;
    DlemParams p = DlemParams::init(cfg, vocab, 4);
    RelevanceHead head = RelevanceHead::init(cfg.d_e, 5);

    std::vector<TrainingPair> pairs(2);
    pairs[0].candidate = seq_of({2, 3, 4, 5}, cfg.seq_len);
    pairs[0].job = seq_of({6, 7, 8}, cfg.seq_len);
    pairs[0].label = 1;
    pairs[1].candidate = seq_of({4, 4, 2, 8, 3, 6}, cfg.seq_len);
    pairs[1].job = seq_of({5, 2}, cfg.seq_len);
    pairs[1].label = 0;

    auto res = pair_batch_loss(p, head, pairs, /*train=*/true, /*want_grads=*/true);
    REQUIRE(res.grad_params.size() == p.w.size());

    const double h = 1e-5;
    auto loss_at = [&]() {
        return pair_batch_loss(p, head, pairs, true, false).loss;
    };
    double worst = 0.0;
    for (const auto& t : p.tensors) {
        for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) {
            if (i >= p.emb_off && i < p.emb_off + static_cast<std::size_t>(cfg.d_w)) continue;  // pinned pad row
            double orig = p.w[i];
            p.w[i] = orig + h;
            double up = loss_at();
            p.w[i] = orig - h;
            double dn = loss_at();
            p.w[i] = orig;
            double fd = (up - dn) / (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(res.grad_params[i]), 1e-6});
            double rel = std::abs(fd - res.grad_params[i]) / denom;
            worst = std::max(worst, rel);
            if (rel >= 1e-4) {
                CAPTURE(t.name);
                CAPTURE(i);
                CHECK(rel < 1e-4);
            }
        }
    }
    CHECK(worst < 1e-4);

    // relevance head gradients too
    for (std::size_t i = 0; i < head.w.size(); ++i) {
        double orig = head.w[i];
        head.w[i] = orig + h;
        double up = loss_at();
        head.w[i] = orig - h;
        double dn = loss_at();
        head.w[i] = orig;
        double fd = (up - dn) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(res.grad_head_w[i]), 1e-6});
        CHECK(std::abs(fd - res.grad_head_w[i]) / denom < 1e-4);
    }
    {
        double orig = head.b;
        head.b = orig + h;
        double up = loss_at();
        head.b = orig - h;
        double dn = loss_at();
        head.b = orig;
        double fd = (up - dn) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(res.grad_head_b), 1e-6});
        CHECK(std::abs(fd - res.grad_head_b) / denom < 1e-4);
    }
}

TEST_CASE("training reduces loss and lr=0 leaves it flat") {
    SynthConfig sc;
    sc.n_jobs = 20;
    sc.n_candidates = 100;
    Corpus corpus = generate_synthetic(sc, 21);
    Vocabulary vocab = build_vocabulary(corpus, 2000);

    DlemConfig cfg = tiny_config();
    cfg.seq_len = 32;
    auto pairs = sample_pairs(corpus, vocab, cfg.seq_len, 1.0, 22);
    REQUIRE(pairs.size() >= 20);
    if (pairs.size() > 120) pairs.resize(120);

    DlemParams p = DlemParams::init(cfg, vocab.size(), 23);
    RelevanceHead head = RelevanceHead::init(cfg.d_e, 24);

    DlemTrainConfig tc;
    tc.epochs = 8;
    tc.lr = 0.05;
    tc.batch_size = 16;
    tc.seed = 25;
    auto res = train_dlem(p, head, pairs, tc);
    REQUIRE(res.epoch_loss.size() == 8);
    CHECK(res.epoch_loss.back() < res.epoch_loss.front());

    DlemTrainConfig frozen = tc;
    frozen.lr = 0.0;
    frozen.epochs = 3;
    auto flat = train_dlem(p, head, pairs, frozen);
    for (double l : flat.epoch_loss)
        CHECK(l == doctest::Approx(flat.epoch_loss.front()).epsilon(1e-12));
}

TEST_CASE("sampled pairs: positives from applications, negatives cross SOC") {
    SynthConfig sc;
    sc.n_jobs = 15;
    sc.n_candidates = 80;
    Corpus corpus = generate_synthetic(sc, 26);
    Vocabulary vocab = build_vocabulary(corpus, 2000);
    auto pairs = sample_pairs(corpus, vocab, 32, 1.0, 27);

    std::size_t pos = 0, neg = 0;
    for (const auto& pr : pairs) (pr.label == 1 ? pos : neg)++;
    CHECK(pos == corpus.applications.size());
    CHECK(neg == pos);  // neg_ratio = 1
    for (const auto& pr : pairs) {
        CHECK(pr.candidate.ids.size() == 32);
        CHECK(pr.job.ids.size() == 32);
        CHECK(pr.candidate.content_len > 0);
    }
}

TEST_CASE("model persistence round trip preserves eval outputs") {
    DlemConfig cfg = tiny_config();
    DlemParams p = DlemParams::init(cfg, 11, 30);
    RelevanceHead head = RelevanceHead::init(cfg.d_e, 31);
    // nudge running stats away from init so they get exercised
    std::vector<TrainingPair> pairs(3);
    pairs[0] = {seq_of({2, 3}, cfg.seq_len), seq_of({4, 5}, cfg.seq_len), 1};
    pairs[1] = {seq_of({6, 7, 8}, cfg.seq_len), seq_of({9, 10}, cfg.seq_len), 0};
    pairs[2] = {seq_of({3, 9}, cfg.seq_len), seq_of({2, 2, 4}, cfg.seq_len), 1};
    pair_batch_loss(p, head, pairs, true, false);

    std::string path = "/tmp/match-test-dlem.bin";
    save_dlem(path, p, head);
    auto [q, head2] = load_dlem(path);
    std::remove(path.c_str());

    CHECK(q.cfg.seq_len == cfg.seq_len);
    CHECK(q.cfg.kernels == cfg.kernels);
    CHECK(head2.b == doctest::Approx(head.b).epsilon(1e-6));

    TokenSeq probe = seq_of({2, 5, 7, 3}, cfg.seq_len);
    auto a = dlem_forward(p, probe);
    auto b = dlem_forward(q, probe);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-5));  // f32 storage
}

TEST_CASE("corrupted model files are rejected") {
    DlemConfig cfg = tiny_config();
    DlemParams p = DlemParams::init(cfg, 8, 33);
    RelevanceHead head = RelevanceHead::init(cfg.d_e, 34);
    std::string path = "/tmp/match-test-dlem-corrupt.bin";
    save_dlem(path, p, head);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_dlem(path), FormatError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_dlem(path), DependencyError);
}
