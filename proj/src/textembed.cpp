#include "match/textembed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace match {

std::size_t TensorSpec::size() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

TokenSeq encode_tokens(const std::string& text, const Vocabulary& vocab, int length) {
    if (length < 1) throw ParameterError("sequence length must be >= 1");
    TokenSeq seq;
    seq.ids.assign(static_cast<std::size_t>(length), Vocabulary::kPad);
    auto toks = tokenize(text);
    int n = std::min<int>(length, static_cast<int>(toks.size()));
    for (int i = 0; i < n; ++i) seq.ids[static_cast<std::size_t>(i)] = vocab.lookup(toks[static_cast<std::size_t>(i)]);
    seq.content_len = n;
    return seq;
}

// ---- parameter layout ---------------------------------------------------

DlemParams DlemParams::init(const DlemConfig& cfg, std::size_t vocab_size, std::uint64_t seed) {
    DlemParams p;
    p.cfg = cfg;
    p.vocab_size = vocab_size;
    const int S = cfg.n_stacks();
    const int C = cfg.channels;
    const int d_c = cfg.concat_dim();

    std::size_t off = 0;
    auto tensor = [&](std::string name, std::vector<std::size_t> shape) {
        TensorSpec t{std::move(name), off, std::move(shape)};
        off += t.size();
        p.tensors.push_back(t);
        return p.tensors.back().offset;
    };

    p.emb_off = tensor("embedding", {vocab_size, static_cast<std::size_t>(cfg.d_w)});
    p.conv_w_off.assign(S, std::vector<std::size_t>(3));
    p.conv_b_off.assign(S, std::vector<std::size_t>(3));
    p.bn_g_off.assign(S, std::vector<std::size_t>(3));
    p.bn_b_off.assign(S, std::vector<std::size_t>(3));
    for (int s = 0; s < S; ++s) {
        for (int b = 0; b < 3; ++b) {
            std::string base = "stack" + std::to_string(s) + ".block" + std::to_string(b);
            std::size_t cin = static_cast<std::size_t>(p.conv_in_channels(b));
            std::size_t k = static_cast<std::size_t>(cfg.kernels[static_cast<std::size_t>(s)]);
            p.conv_w_off[s][b] = tensor(base + ".conv_w", {static_cast<std::size_t>(C), cin, k});
            p.conv_b_off[s][b] = tensor(base + ".conv_b", {static_cast<std::size_t>(C)});
            p.bn_g_off[s][b] = tensor(base + ".bn_gamma", {static_cast<std::size_t>(C)});
            p.bn_b_off[s][b] = tensor(base + ".bn_beta", {static_cast<std::size_t>(C)});
        }
    }
    p.att_k_off = tensor("attention.key", {static_cast<std::size_t>(cfg.d_h), static_cast<std::size_t>(d_c)});
    p.att_u_off = tensor("attention.query", {static_cast<std::size_t>(cfg.d_h)});
    p.fc1_w_off = tensor("fc1.w", {static_cast<std::size_t>(cfg.d_e), static_cast<std::size_t>(d_c)});
    p.fc1_b_off = tensor("fc1.b", {static_cast<std::size_t>(cfg.d_e)});
    p.fc2_w_off = tensor("fc2.w", {static_cast<std::size_t>(cfg.d_e), static_cast<std::size_t>(cfg.d_e)});
    p.fc2_b_off = tensor("fc2.b", {static_cast<std::size_t>(cfg.d_e)});

    p.w.assign(off, 0.0);
    p.bn_mean.assign(static_cast<std::size_t>(S * 3 * C), 0.0);
    p.bn_var.assign(static_cast<std::size_t>(S * 3 * C), 1.0);

    Rng rng(seed);
    auto uniform = [&](std::size_t o, std::size_t n, double r) {
        std::uniform_real_distribution<double> d(-r, r);
        for (std::size_t i = 0; i < n; ++i) p.w[o + i] = d(rng);
    };
    uniform(p.emb_off, vocab_size * static_cast<std::size_t>(cfg.d_w), 0.1);
    std::fill(p.w.begin() + static_cast<std::ptrdiff_t>(p.emb_off),
              p.w.begin() + static_cast<std::ptrdiff_t>(p.emb_off + static_cast<std::size_t>(cfg.d_w)),
              0.0);  // padding row stays zero
    for (int s = 0; s < S; ++s) {
        for (int b = 0; b < 3; ++b) {
            std::size_t cin = static_cast<std::size_t>(p.conv_in_channels(b));
            std::size_t k = static_cast<std::size_t>(cfg.kernels[static_cast<std::size_t>(s)]);
            uniform(p.conv_w_off[s][b], static_cast<std::size_t>(C) * cin * k,
                    std::sqrt(6.0 / static_cast<double>(cin * k)));
            for (int c = 0; c < C; ++c) p.w[p.bn_g_off[s][b] + static_cast<std::size_t>(c)] = 1.0;
        }
    }
    uniform(p.att_k_off, static_cast<std::size_t>(cfg.d_h * d_c), std::sqrt(6.0 / d_c));
    uniform(p.att_u_off, static_cast<std::size_t>(cfg.d_h), std::sqrt(6.0 / cfg.d_h));
    uniform(p.fc1_w_off, static_cast<std::size_t>(cfg.d_e * d_c), std::sqrt(6.0 / d_c));
    uniform(p.fc2_w_off, static_cast<std::size_t>(cfg.d_e * cfg.d_e), std::sqrt(6.0 / cfg.d_e));
    return p;
}

RelevanceHead RelevanceHead::init(int d_e, std::uint64_t seed) {
    RelevanceHead h;
    Rng rng(seed);
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    h.w.assign(static_cast<std::size_t>(2 * d_e), 0.0);
    for (auto& v : h.w) v = d(rng);
    h.b = 0.0;
    return h;
}

// ---- forward ------------------------------------------------------------

namespace {

// Channel-major activation buffer: x[c * len + t], t < len valid positions.
struct SeqLayer {
    int len = 0;
    std::vector<double> x;
};

struct BlockCache {
    std::vector<SeqLayer> conv;  // pre-BN
    std::vector<SeqLayer> bn;    // post-BN
    std::vector<SeqLayer> pooled;
    std::vector<std::vector<int>> argmax;  // per seq: C * len_out source index
    std::vector<double> mean, var;         // train-mode batch stats per channel
};

}  // namespace

struct ForwardCache {
    bool train = false;
    std::size_t n_seqs = 0;
    std::vector<int> content_len;
    std::vector<std::vector<int>> token_ids;
    std::vector<SeqLayer> emb;
    std::vector<std::vector<BlockCache>> stacks;      // [stack][block]
    std::vector<std::vector<double>> concat;          // per seq: d_c * f
    std::vector<int> frames;                          // f per seq
    std::vector<std::vector<double>> att_tanh;        // per seq: d_h * f
    std::vector<std::vector<double>> att_a;           // per seq: f
    std::vector<std::vector<double>> ctx;             // per seq: d_c
    std::vector<std::vector<double>> fc1_pre;         // per seq: d_e
    std::vector<std::vector<double>> out;             // per seq: d_e
};

namespace {

void conv1d(const double* w, const double* bias, const SeqLayer& in, int c_in, int c_out, int k,
            SeqLayer& out) {
    int len = in.len;
    out.len = len;
    out.x.assign(static_cast<std::size_t>(c_out) * static_cast<std::size_t>(len), 0.0);
    int pl = (k - 1) / 2;
    for (int co = 0; co < c_out; ++co) {
        double* o = out.x.data() + static_cast<std::size_t>(co) * static_cast<std::size_t>(len);
        double b = bias[co];
        for (int t = 0; t < len; ++t) o[t] = b;
        for (int ci = 0; ci < c_in; ++ci) {
            const double* xin = in.x.data() + static_cast<std::size_t>(ci) * static_cast<std::size_t>(len);
            const double* wk = w + (static_cast<std::size_t>(co) * static_cast<std::size_t>(c_in) +
                                    static_cast<std::size_t>(ci)) * static_cast<std::size_t>(k);
            for (int d = 0; d < k; ++d) {
                int shift = d - pl;
                int t0 = std::max(0, -shift);
                int t1 = std::min(len, len - shift);
                double wv = wk[d];
                for (int t = t0; t < t1; ++t) o[t] += wv * xin[t + shift];
            }
        }
    }
}

void conv1d_backward(const double* w, const SeqLayer& in, const SeqLayer& d_out, int c_in,
                     int c_out, int k, SeqLayer& d_in, double* d_w, double* d_b) {
    int len = in.len;
    d_in.len = len;
    d_in.x.assign(static_cast<std::size_t>(c_in) * static_cast<std::size_t>(len), 0.0);
    int pl = (k - 1) / 2;
    for (int co = 0; co < c_out; ++co) {
        const double* go = d_out.x.data() + static_cast<std::size_t>(co) * static_cast<std::size_t>(len);
        for (int t = 0; t < len; ++t) d_b[co] += go[t];
        for (int ci = 0; ci < c_in; ++ci) {
            const double* xin = in.x.data() + static_cast<std::size_t>(ci) * static_cast<std::size_t>(len);
            double* gi = d_in.x.data() + static_cast<std::size_t>(ci) * static_cast<std::size_t>(len);
            const double* wk = w + (static_cast<std::size_t>(co) * static_cast<std::size_t>(c_in) +
                                    static_cast<std::size_t>(ci)) * static_cast<std::size_t>(k);
            double* gw = d_w + (static_cast<std::size_t>(co) * static_cast<std::size_t>(c_in) +
                                static_cast<std::size_t>(ci)) * static_cast<std::size_t>(k);
            for (int d = 0; d < k; ++d) {
                int shift = d - pl;
                int t0 = std::max(0, -shift);
                int t1 = std::min(len, len - shift);
                double wv = wk[d];
                double acc = 0.0;
                for (int t = t0; t < t1; ++t) {
                    acc += go[t] * xin[t + shift];
                    gi[t + shift] += wv * go[t];
                }
                gw[d] += acc;
            }
        }
    }
}

int pooled_len(int len) { return (len + 1) / 2; }

void maxpool2(const SeqLayer& in, int channels, SeqLayer& out, std::vector<int>& argmax) {
    int lo = pooled_len(in.len);
    out.len = lo;
    out.x.resize(static_cast<std::size_t>(channels) * static_cast<std::size_t>(lo));
    argmax.resize(out.x.size());
    for (int c = 0; c < channels; ++c) {
        const double* xi = in.x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(in.len);
        double* xo = out.x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(lo);
        int* am = argmax.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(lo);
        for (int t = 0; t < lo; ++t) {
            int i0 = 2 * t, i1 = 2 * t + 1;
            if (i1 < in.len && xi[i1] > xi[i0]) {
                xo[t] = xi[i1];
                am[t] = i1;
            } else {
                xo[t] = xi[i0];
                am[t] = i0;
            }
        }
    }
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

std::vector<std::vector<double>> dlem_forward_batch(DlemParams& params,
                                                    std::span<const TokenSeq> seqs, bool train,
                                                    ForwardCache* cache) {
    const auto& cfg = params.cfg;
    const int S = cfg.n_stacks();
    const int C = cfg.channels;
    const int d_c = cfg.concat_dim();
    const std::size_t B = seqs.size();

    ForwardCache local;
    ForwardCache& fc = cache ? *cache : local;
    fc.train = train;
    fc.n_seqs = B;
    fc.content_len.resize(B);
    fc.token_ids.resize(B);
    fc.emb.assign(B, {});
    fc.stacks.assign(static_cast<std::size_t>(S), std::vector<BlockCache>(3));
    for (auto& st : fc.stacks)
        for (auto& bl : st) {
            bl.conv.assign(B, {});
            bl.bn.assign(B, {});
            bl.pooled.assign(B, {});
            bl.argmax.assign(B, {});
        }
    fc.concat.assign(B, {});
    fc.frames.assign(B, 0);
    fc.att_tanh.assign(B, {});
    fc.att_a.assign(B, {});
    fc.ctx.assign(B, std::vector<double>(static_cast<std::size_t>(d_c), 0.0));
    fc.fc1_pre.assign(B, {});
    fc.out.assign(B, {});

    // token embedding lookup
    for (std::size_t i = 0; i < B; ++i) {
        const auto& seq = seqs[i];
        int n = seq.content_len;
        for (int t = 0; t < n; ++t) {
            int id = seq.ids[static_cast<std::size_t>(t)];
            if (id < 0 || static_cast<std::size_t>(id) >= params.vocab_size)
                throw ParameterError("token index out of range for embedding table");
        }
        fc.content_len[i] = n;
        fc.token_ids[i].assign(seq.ids.begin(), seq.ids.begin() + n);
        auto& e = fc.emb[i];
        e.len = n;
        e.x.assign(static_cast<std::size_t>(cfg.d_w) * static_cast<std::size_t>(n), 0.0);
        for (int t = 0; t < n; ++t) {
            const double* row = params.w.data() + params.emb_off +
                                static_cast<std::size_t>(seqs[i].ids[static_cast<std::size_t>(t)]) *
                                    static_cast<std::size_t>(cfg.d_w);
            for (int c = 0; c < cfg.d_w; ++c)
                e.x[static_cast<std::size_t>(c) * static_cast<std::size_t>(n) + static_cast<std::size_t>(t)] = row[c];
        }
    }

    for (int s = 0; s < S; ++s) {
        int k = cfg.kernels[static_cast<std::size_t>(s)];
        for (int b = 0; b < 3; ++b) {
            auto& bl = fc.stacks[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)];
            int cin = params.conv_in_channels(b);
            const double* w = params.w.data() + params.conv_w_off[s][b];
            const double* bias = params.w.data() + params.conv_b_off[s][b];
            for (std::size_t i = 0; i < B; ++i) {
                const SeqLayer& in =
                    (b == 0) ? fc.emb[i] : fc.stacks[static_cast<std::size_t>(s)][static_cast<std::size_t>(b - 1)].pooled[i];
                if (in.len == 0) {
                    bl.conv[i] = {};
                    bl.bn[i] = {};
                    bl.pooled[i] = {};
                    continue;
                }
                conv1d(w, bias, in, cin, C, k, bl.conv[i]);
            }

            // batch norm per channel over all valid positions in the batch
            const double* gamma = params.w.data() + params.bn_g_off[s][b];
            const double* beta = params.w.data() + params.bn_b_off[s][b];
            std::size_t st_idx = params.bn_state_index(s, b);
            bl.mean.assign(static_cast<std::size_t>(C), 0.0);
            bl.var.assign(static_cast<std::size_t>(C), 0.0);
            if (train) {
                std::size_t count = 0;
                for (std::size_t i = 0; i < B; ++i) count += static_cast<std::size_t>(bl.conv[i].len);
                if (count == 0) continue;
                for (int c = 0; c < C; ++c) {
                    double sum = 0.0, sq = 0.0;
                    for (std::size_t i = 0; i < B; ++i) {
                        const auto& cv = bl.conv[i];
                        const double* x = cv.x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(cv.len);
                        for (int t = 0; t < cv.len; ++t) {
                            sum += x[t];
                            sq += x[t] * x[t];
                        }
                    }
                    double mean = sum / static_cast<double>(count);
                    double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
                    bl.mean[static_cast<std::size_t>(c)] = mean;
                    bl.var[static_cast<std::size_t>(c)] = var;
                    params.bn_mean[st_idx + static_cast<std::size_t>(c)] =
                        cfg.bn_momentum * params.bn_mean[st_idx + static_cast<std::size_t>(c)] +
                        (1.0 - cfg.bn_momentum) * mean;
                    params.bn_var[st_idx + static_cast<std::size_t>(c)] =
                        cfg.bn_momentum * params.bn_var[st_idx + static_cast<std::size_t>(c)] +
                        (1.0 - cfg.bn_momentum) * var;
                }
            } else {
                for (int c = 0; c < C; ++c) {
                    bl.mean[static_cast<std::size_t>(c)] = params.bn_mean[st_idx + static_cast<std::size_t>(c)];
                    bl.var[static_cast<std::size_t>(c)] = params.bn_var[st_idx + static_cast<std::size_t>(c)];
                }
            }
            for (std::size_t i = 0; i < B; ++i) {
                const auto& cv = bl.conv[i];
                auto& bn = bl.bn[i];
                bn.len = cv.len;
                bn.x.resize(cv.x.size());
                for (int c = 0; c < C; ++c) {
                    double inv = 1.0 / std::sqrt(bl.var[static_cast<std::size_t>(c)] + cfg.bn_eps);
                    double m = bl.mean[static_cast<std::size_t>(c)];
                    double g = gamma[c], be = beta[c];
                    const double* x = cv.x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(cv.len);
                    double* y = bn.x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(cv.len);
                    for (int t = 0; t < cv.len; ++t) y[t] = g * (x[t] - m) * inv + be;
                }
                if (bn.len > 0) maxpool2(bn, C, bl.pooled[i], bl.argmax[i]);
            }
        }
    }

    // concatenate stack outputs, frame-wise
    const double* att_k = params.w.data() + params.att_k_off;
    const double* att_u = params.w.data() + params.att_u_off;
    for (std::size_t i = 0; i < B; ++i) {
        int f = (fc.content_len[i] == 0)
                    ? 0
                    : fc.stacks[0][2].pooled[i].len;
        fc.frames[i] = f;
        auto& ctx = fc.ctx[i];
        if (f > 0) {
            auto& cat = fc.concat[i];
            cat.assign(static_cast<std::size_t>(d_c) * static_cast<std::size_t>(f), 0.0);
            for (int s = 0; s < S; ++s) {
                const auto& po = fc.stacks[static_cast<std::size_t>(s)][2].pooled[i];
                for (int c = 0; c < C; ++c) {
                    const double* src = po.x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(f);
                    double* dst = cat.data() + (static_cast<std::size_t>(s * C + c)) * static_cast<std::size_t>(f);
                    std::copy(src, src + f, dst);
                }
            }
            // attention: score_t = u . tanh(K h_t), softmax over frames
            auto& th = fc.att_tanh[i];
            th.assign(static_cast<std::size_t>(cfg.d_h) * static_cast<std::size_t>(f), 0.0);
            std::vector<double> scores(static_cast<std::size_t>(f), 0.0);
            for (int t = 0; t < f; ++t) {
                for (int h = 0; h < cfg.d_h; ++h) {
                    const double* krow = att_k + static_cast<std::size_t>(h) * static_cast<std::size_t>(d_c);
                    double acc = 0.0;
                    for (int c = 0; c < d_c; ++c)
                        acc += krow[c] * cat[static_cast<std::size_t>(c) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)];
                    double y = std::tanh(acc);
                    th[static_cast<std::size_t>(h) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)] = y;
                    scores[static_cast<std::size_t>(t)] += att_u[h] * y;
                }
            }
            double mx = *std::max_element(scores.begin(), scores.end());
            double z = 0.0;
            auto& a = fc.att_a[i];
            a.resize(static_cast<std::size_t>(f));
            for (int t = 0; t < f; ++t) {
                a[static_cast<std::size_t>(t)] = std::exp(scores[static_cast<std::size_t>(t)] - mx);
                z += a[static_cast<std::size_t>(t)];
            }
            for (auto& av : a) av /= z;
            for (int c = 0; c < d_c; ++c) {
                double acc = 0.0;
                for (int t = 0; t < f; ++t)
                    acc += a[static_cast<std::size_t>(t)] *
                           cat[static_cast<std::size_t>(c) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)];
                ctx[static_cast<std::size_t>(c)] = acc;
            }
        }

        // FC head: d_c -> d_e -> relu -> d_e
        const double* w1 = params.w.data() + params.fc1_w_off;
        const double* b1 = params.w.data() + params.fc1_b_off;
        const double* w2 = params.w.data() + params.fc2_w_off;
        const double* b2 = params.w.data() + params.fc2_b_off;
        auto& z1 = fc.fc1_pre[i];
        z1.assign(static_cast<std::size_t>(cfg.d_e), 0.0);
        for (int o = 0; o < cfg.d_e; ++o) {
            const double* row = w1 + static_cast<std::size_t>(o) * static_cast<std::size_t>(d_c);
            double acc = b1[o];
            for (int c = 0; c < d_c; ++c) acc += row[c] * ctx[static_cast<std::size_t>(c)];
            z1[static_cast<std::size_t>(o)] = acc;
        }
        auto& out = fc.out[i];
        out.assign(static_cast<std::size_t>(cfg.d_e), 0.0);
        for (int o = 0; o < cfg.d_e; ++o) {
            const double* row = w2 + static_cast<std::size_t>(o) * static_cast<std::size_t>(cfg.d_e);
            double acc = b2[o];
            for (int h = 0; h < cfg.d_e; ++h) acc += row[h] * relu(z1[static_cast<std::size_t>(h)]);
            out[static_cast<std::size_t>(o)] = acc;
        }
        for (double v : out)
            if (!std::isfinite(v)) throw NumericError("non-finite value in encoder output");
    }
    return fc.out;
}

std::vector<double> dlem_forward(const DlemParams& params, const TokenSeq& seq) {
    // eval mode leaves params untouched; the cast keeps one forward path
    auto& mut = const_cast<DlemParams&>(params);
    std::vector<TokenSeq> one{seq};
    return dlem_forward_batch(mut, one, /*train=*/false)[0];
}

// ---- backward -----------------------------------------------------------

namespace {

void dlem_backward_batch(const DlemParams& params, const ForwardCache& fc,
                         const std::vector<std::vector<double>>& d_out, std::vector<double>& grad) {
    const auto& cfg = params.cfg;
    const int S = cfg.n_stacks();
    const int C = cfg.channels;
    const int d_c = cfg.concat_dim();
    const std::size_t B = fc.n_seqs;
    grad.assign(params.w.size(), 0.0);

    const double* w1 = params.w.data() + params.fc1_w_off;
    const double* w2 = params.w.data() + params.fc2_w_off;
    const double* att_k = params.w.data() + params.att_k_off;
    const double* att_u = params.w.data() + params.att_u_off;

    // gradient flowing into each sequence's concat buffer
    std::vector<std::vector<double>> d_concat(B);

    for (std::size_t i = 0; i < B; ++i) {
        const auto& go = d_out[i];
        const auto& z1 = fc.fc1_pre[i];
        const auto& ctx = fc.ctx[i];

        // fc2
        std::vector<double> d_r(static_cast<std::size_t>(cfg.d_e), 0.0);
        for (int o = 0; o < cfg.d_e; ++o) {
            double g = go[static_cast<std::size_t>(o)];
            grad[params.fc2_b_off + static_cast<std::size_t>(o)] += g;
            const double* row = w2 + static_cast<std::size_t>(o) * static_cast<std::size_t>(cfg.d_e);
            double* grow = grad.data() + params.fc2_w_off + static_cast<std::size_t>(o) * static_cast<std::size_t>(cfg.d_e);
            for (int h = 0; h < cfg.d_e; ++h) {
                double r = relu(z1[static_cast<std::size_t>(h)]);
                grow[h] += g * r;
                d_r[static_cast<std::size_t>(h)] += g * row[h];
            }
        }
        // relu + fc1
        std::vector<double> d_ctx(static_cast<std::size_t>(d_c), 0.0);
        for (int h = 0; h < cfg.d_e; ++h) {
            double g = (z1[static_cast<std::size_t>(h)] > 0.0) ? d_r[static_cast<std::size_t>(h)] : 0.0;
            if (g == 0.0) continue;
            grad[params.fc1_b_off + static_cast<std::size_t>(h)] += g;
            const double* row = w1 + static_cast<std::size_t>(h) * static_cast<std::size_t>(d_c);
            double* grow = grad.data() + params.fc1_w_off + static_cast<std::size_t>(h) * static_cast<std::size_t>(d_c);
            for (int c = 0; c < d_c; ++c) {
                grow[c] += g * ctx[static_cast<std::size_t>(c)];
                d_ctx[static_cast<std::size_t>(c)] += g * row[c];
            }
        }

        int f = fc.frames[i];
        if (f == 0) continue;
        const auto& cat = fc.concat[i];
        const auto& a = fc.att_a[i];
        const auto& th = fc.att_tanh[i];

        auto& dcat = d_concat[i];
        dcat.assign(cat.size(), 0.0);

        // context = sum_t a_t h_t
        std::vector<double> d_a(static_cast<std::size_t>(f), 0.0);
        for (int t = 0; t < f; ++t) {
            double acc = 0.0;
            for (int c = 0; c < d_c; ++c) {
                double hct = cat[static_cast<std::size_t>(c) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)];
                acc += hct * d_ctx[static_cast<std::size_t>(c)];
                dcat[static_cast<std::size_t>(c) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)] +=
                    a[static_cast<std::size_t>(t)] * d_ctx[static_cast<std::size_t>(c)];
            }
            d_a[static_cast<std::size_t>(t)] = acc;
        }
        // softmax
        double dot_ad = 0.0;
        for (int t = 0; t < f; ++t) dot_ad += a[static_cast<std::size_t>(t)] * d_a[static_cast<std::size_t>(t)];
        std::vector<double> d_s(static_cast<std::size_t>(f));
        for (int t = 0; t < f; ++t)
            d_s[static_cast<std::size_t>(t)] =
                a[static_cast<std::size_t>(t)] * (d_a[static_cast<std::size_t>(t)] - dot_ad);
        // scores and tanh projection
        for (int t = 0; t < f; ++t) {
            double ds = d_s[static_cast<std::size_t>(t)];
            for (int h = 0; h < cfg.d_h; ++h) {
                double y = th[static_cast<std::size_t>(h) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)];
                grad[params.att_u_off + static_cast<std::size_t>(h)] += ds * y;
                double dpre = ds * att_u[h] * (1.0 - y * y);
                if (dpre == 0.0) continue;
                const double* krow = att_k + static_cast<std::size_t>(h) * static_cast<std::size_t>(d_c);
                double* gkrow = grad.data() + params.att_k_off + static_cast<std::size_t>(h) * static_cast<std::size_t>(d_c);
                for (int c = 0; c < d_c; ++c) {
                    double hct = cat[static_cast<std::size_t>(c) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)];
                    gkrow[c] += dpre * hct;
                    dcat[static_cast<std::size_t>(c) * static_cast<std::size_t>(f) + static_cast<std::size_t>(t)] += dpre * krow[c];
                }
            }
        }
    }

    // backprop through each stack, top block to bottom, accumulating the
    // gradient reaching the embedding layer
    std::vector<SeqLayer> d_emb(B);
    for (std::size_t i = 0; i < B; ++i) {
        d_emb[i].len = fc.emb[i].len;
        d_emb[i].x.assign(fc.emb[i].x.size(), 0.0);
    }

    for (int s = 0; s < S; ++s) {
        int k = cfg.kernels[static_cast<std::size_t>(s)];
        // split concat gradient back into this stack's pooled output
        std::vector<SeqLayer> d_cur(B);
        for (std::size_t i = 0; i < B; ++i) {
            int f = fc.frames[i];
            d_cur[i].len = f;
            d_cur[i].x.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(f), 0.0);
            if (f == 0) continue;
            const auto& dcat = d_concat[i];
            for (int c = 0; c < C; ++c) {
                const double* src = dcat.data() + (static_cast<std::size_t>(s * C + c)) * static_cast<std::size_t>(f);
                double* dst = d_cur[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(f);
                std::copy(src, src + f, dst);
            }
        }

        for (int b = 2; b >= 0; --b) {
            const auto& bl = fc.stacks[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)];
            int cin = params.conv_in_channels(b);
            const double* gamma = params.w.data() + params.bn_g_off[s][b];

            std::vector<SeqLayer> d_bn(B);   // grad at BN output
            std::vector<SeqLayer> d_conv(B); // grad at conv output (BN input)

            // unpool: route gradient to argmax positions
            for (std::size_t i = 0; i < B; ++i) {
                const auto& bn = bl.bn[i];
                d_bn[i].len = bn.len;
                d_bn[i].x.assign(bn.x.size(), 0.0);
                if (bn.len == 0) continue;
                const auto& am = bl.argmax[i];
                int lo = bl.pooled[i].len;
                for (int c = 0; c < C; ++c) {
                    const double* gsrc = d_cur[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(lo);
                    double* gdst = d_bn[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(bn.len);
                    const int* ams = am.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(lo);
                    for (int t = 0; t < lo; ++t) gdst[ams[t]] += gsrc[t];
                }
            }

            // batch norm backward
            std::size_t count = 0;
            for (std::size_t i = 0; i < B; ++i) count += static_cast<std::size_t>(bl.conv[i].len);
            for (std::size_t i = 0; i < B; ++i) {
                d_conv[i].len = bl.conv[i].len;
                d_conv[i].x.assign(bl.conv[i].x.size(), 0.0);
            }
            if (count > 0) {
                for (int c = 0; c < C; ++c) {
                    double mean = bl.mean[static_cast<std::size_t>(c)];
                    double var = bl.var[static_cast<std::size_t>(c)];
                    double inv = 1.0 / std::sqrt(var + cfg.bn_eps);
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (std::size_t i = 0; i < B; ++i) {
                        int len = bl.conv[i].len;
                        const double* x = bl.conv[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(len);
                        const double* dy = d_bn[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(len);
                        for (int t = 0; t < len; ++t) {
                            double xhat = (x[t] - mean) * inv;
                            sum_dy += dy[t];
                            sum_dy_xhat += dy[t] * xhat;
                        }
                    }
                    grad[params.bn_g_off[s][b] + static_cast<std::size_t>(c)] += sum_dy_xhat;
                    grad[params.bn_b_off[s][b] + static_cast<std::size_t>(c)] += sum_dy;
                    double g = gamma[c];
                    double n = static_cast<double>(count);
                    for (std::size_t i = 0; i < B; ++i) {
                        int len = bl.conv[i].len;
                        const double* x = bl.conv[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(len);
                        const double* dy = d_bn[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(len);
                        double* dx = d_conv[i].x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(len);
                        if (fc.train) {
                            for (int t = 0; t < len; ++t) {
                                double xhat = (x[t] - mean) * inv;
                                dx[t] = g * inv / n * (n * dy[t] - sum_dy - xhat * sum_dy_xhat);
                            }
                        } else {
                            for (int t = 0; t < len; ++t) dx[t] = g * inv * dy[t];
                        }
                    }
                }
            }

            // conv backward
            const double* w = params.w.data() + params.conv_w_off[s][b];
            double* gw = grad.data() + params.conv_w_off[s][b];
            double* gb = grad.data() + params.conv_b_off[s][b];
            std::vector<SeqLayer> d_in(B);
            for (std::size_t i = 0; i < B; ++i) {
                const SeqLayer& in = (b == 0) ? fc.emb[i] : fc.stacks[static_cast<std::size_t>(s)][static_cast<std::size_t>(b - 1)].pooled[i];
                if (in.len == 0) {
                    d_in[i] = {};
                    continue;
                }
                conv1d_backward(w, in, d_conv[i], cin, C, k, d_in[i], gw, gb);
            }
            if (b == 0) {
                for (std::size_t i = 0; i < B; ++i)
                    for (std::size_t j = 0; j < d_in[i].x.size(); ++j) d_emb[i].x[j] += d_in[i].x[j];
            } else {
                d_cur = std::move(d_in);
            }
        }
    }

    // scatter into the embedding table; padding row 0 stays pinned at zero
    const int d_w = cfg.d_w;
    for (std::size_t i = 0; i < B; ++i) {
        int n = d_emb[i].len;
        for (int t = 0; t < n; ++t) {
            int id = fc.token_ids[i][static_cast<std::size_t>(t)];
            if (id == Vocabulary::kPad) continue;
            double* grow = grad.data() + params.emb_off +
                           static_cast<std::size_t>(id) * static_cast<std::size_t>(d_w);
            for (int c = 0; c < d_w; ++c)
                grow[c] += d_emb[i].x[static_cast<std::size_t>(c) * static_cast<std::size_t>(n) +
                                      static_cast<std::size_t>(t)];
        }
    }
}

}  // namespace

PairLossResult pair_batch_loss(DlemParams& params, const RelevanceHead& head,
                               std::span<const TrainingPair> pairs, bool train_mode,
                               bool want_grads) {
    const int d_e = params.cfg.d_e;
    if (static_cast<int>(head.w.size()) != 2 * d_e)
        throw ParameterError("relevance head size does not match encoder output");
    const std::size_t P = pairs.size();
    std::vector<TokenSeq> seqs;
    seqs.reserve(2 * P);
    for (const auto& pr : pairs) {
        seqs.push_back(pr.candidate);
        seqs.push_back(pr.job);
    }
    ForwardCache cache;
    auto embs = dlem_forward_batch(params, seqs, train_mode, &cache);

    PairLossResult res;
    res.p.resize(P);
    constexpr double eps = 1e-7;
    double total = 0.0;
    std::vector<std::vector<double>> d_out(2 * P, std::vector<double>(static_cast<std::size_t>(d_e), 0.0));
    if (want_grads) {
        res.grad_head_w.assign(head.w.size(), 0.0);
        res.grad_head_b = 0.0;
    }
    for (std::size_t i = 0; i < P; ++i) {
        const auto& gc = embs[2 * i];
        const auto& gj = embs[2 * i + 1];
        double logit = head.b;
        for (int o = 0; o < d_e; ++o) {
            logit += head.w[static_cast<std::size_t>(o)] * gc[static_cast<std::size_t>(o)];
            logit += head.w[static_cast<std::size_t>(d_e + o)] * gj[static_cast<std::size_t>(o)];
        }
        if (!std::isfinite(logit)) throw NumericError("non-finite logit in relevance head");
        double p = 1.0 / (1.0 + std::exp(-logit));
        res.p[i] = p;
        double pc = std::clamp(p, eps, 1.0 - eps);
        double R = static_cast<double>(pairs[i].label);
        total += -R * std::log(pc) - (1.0 - R) * std::log(1.0 - pc);
        if (want_grads) {
            double dlogit = (p - R) / static_cast<double>(P);  // mean reduction
            res.grad_head_b += dlogit;
            for (int o = 0; o < d_e; ++o) {
                res.grad_head_w[static_cast<std::size_t>(o)] += dlogit * gc[static_cast<std::size_t>(o)];
                res.grad_head_w[static_cast<std::size_t>(d_e + o)] += dlogit * gj[static_cast<std::size_t>(o)];
                d_out[2 * i][static_cast<std::size_t>(o)] = dlogit * head.w[static_cast<std::size_t>(o)];
                d_out[2 * i + 1][static_cast<std::size_t>(o)] = dlogit * head.w[static_cast<std::size_t>(d_e + o)];
            }
        }
    }
    res.loss = total / static_cast<double>(P);

    if (want_grads) dlem_backward_batch(params, cache, d_out, res.grad_params);
    return res;
}

PairLossResult pair_loss(DlemParams& params, const RelevanceHead& head, const TrainingPair& pair) {
    std::vector<TrainingPair> one{pair};
    return pair_batch_loss(params, head, one, /*train_mode=*/true);
}

std::vector<TrainingPair> sample_pairs(const Corpus& corpus, const Vocabulary& vocab, int seq_len,
                                       double neg_ratio, std::uint64_t seed) {
    if (corpus.applications.empty()) throw ParameterError("no applications to sample positives from");
    Rng rng(seed);
    std::vector<TrainingPair> pairs;
    for (const auto& a : corpus.applications) {
        TrainingPair p;
        p.candidate = encode_tokens(candidate_text(corpus.candidate(a.candidate_id)), vocab, seq_len);
        p.job = encode_tokens(job_text(corpus.job(a.job_id)), vocab, seq_len);
        p.label = 1;
        pairs.push_back(std::move(p));
    }
    std::size_t n_neg = static_cast<std::size_t>(std::llround(neg_ratio * static_cast<double>(pairs.size())));
    std::uniform_int_distribution<std::size_t> cd(0, corpus.candidates.size() - 1);
    std::uniform_int_distribution<std::size_t> jd(0, corpus.jobs.size() - 1);
    for (std::size_t i = 0; i < n_neg; ++i) {
        bool found = false;
        for (int tries = 0; tries < 1000; ++tries) {
            const auto& c = corpus.candidates[cd(rng)];
            const auto& j = corpus.jobs[jd(rng)];
            if (c.soc_major == j.soc_major) continue;  // same-SOC false negatives removed
            TrainingPair p;
            p.candidate = encode_tokens(candidate_text(c), vocab, seq_len);
            p.job = encode_tokens(job_text(j), vocab, seq_len);
            p.label = 0;
            pairs.push_back(std::move(p));
            found = true;
            break;
        }
        if (!found)
            throw SamplingError("cannot sample cross-SOC negatives (single SOC group in corpus?)");
    }
    return pairs;
}

DlemTrainResult train_dlem(DlemParams params, RelevanceHead head, std::vector<TrainingPair> pairs,
                           const DlemTrainConfig& cfg) {
    if (pairs.empty()) throw ParameterError("cannot train on an empty pair list");
    Rng rng(cfg.seed);
    // one shuffle up front keeps the per-epoch loss trace comparable
    std::shuffle(pairs.begin(), pairs.end(), rng);

    DlemTrainResult res;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::span<const TrainingPair> batch(pairs.data() + start, end - start);
            auto r = pair_batch_loss(params, head, batch, /*train_mode=*/true);
            if (!std::isfinite(r.loss))
                throw NumericError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
            sum += r.loss * static_cast<double>(batch.size());
            seen += batch.size();
            if (cfg.lr != 0.0) {
                for (std::size_t i = 0; i < params.w.size(); ++i) params.w[i] -= cfg.lr * r.grad_params[i];
                for (std::size_t i = 0; i < head.w.size(); ++i) head.w[i] -= cfg.lr * r.grad_head_w[i];
                head.b -= cfg.lr * r.grad_head_b;
            }
        }
        res.epoch_loss.push_back(sum / static_cast<double>(seen));
    }
    res.params = std::move(params);
    res.head = std::move(head);
    return res;
}

// ---- persistence --------------------------------------------------------

namespace {
constexpr std::uint32_t kDlemVersion = 1;

void write_tensor(std::ostream& os, const std::string& name, const std::vector<std::size_t>& shape,
                  const double* data) {
    write_string(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
    std::size_t n = 1;
    for (auto d : shape) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        n *= d;
    }
    for (std::size_t i = 0; i < n; ++i) write_pod<float>(os, static_cast<float>(data[i]));
}
}  // namespace

void save_dlem(const std::string& path, const DlemParams& p, const RelevanceHead& head) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write model file: " + path);
    os.write("DLEM", 4);
    write_pod<std::uint32_t>(os, kDlemVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.vocab_size));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.cfg.seq_len));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.cfg.d_w));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.cfg.channels));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.cfg.d_e));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.cfg.d_h));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.cfg.kernels.size()));
    for (int k : p.cfg.kernels) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(k));

    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensors.size()) + 4);
    for (const auto& t : p.tensors) write_tensor(os, t.name, t.shape, p.w.data() + t.offset);
    write_tensor(os, "bn_running_mean", {p.bn_mean.size()}, p.bn_mean.data());
    write_tensor(os, "bn_running_var", {p.bn_var.size()}, p.bn_var.data());
    write_tensor(os, "head_w", {head.w.size()}, head.w.data());
    write_tensor(os, "head_b", {1}, &head.b);
}

std::pair<DlemParams, RelevanceHead> load_dlem(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DependencyError("missing model file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "DLEM") throw FormatError("bad magic in " + path);
    auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kDlemVersion)
        throw FormatError("unsupported DLEM version " + std::to_string(version));

    DlemConfig cfg;
    auto vocab = read_pod<std::uint32_t>(is, "vocab_size");
    cfg.seq_len = static_cast<int>(read_pod<std::uint32_t>(is, "seq_len"));
    cfg.d_w = static_cast<int>(read_pod<std::uint32_t>(is, "d_w"));
    cfg.channels = static_cast<int>(read_pod<std::uint32_t>(is, "channels"));
    cfg.d_e = static_cast<int>(read_pod<std::uint32_t>(is, "d_e"));
    cfg.d_h = static_cast<int>(read_pod<std::uint32_t>(is, "d_h"));
    auto nk = read_pod<std::uint32_t>(is, "n_kernels");
    cfg.kernels.clear();
    for (std::uint32_t i = 0; i < nk; ++i)
        cfg.kernels.push_back(static_cast<int>(read_pod<std::uint32_t>(is, "kernel")));

    DlemParams p = DlemParams::init(cfg, vocab, /*seed=*/0);
    RelevanceHead head;
    head.w.assign(static_cast<std::size_t>(2 * cfg.d_e), 0.0);

    auto n_tensors = read_pod<std::uint32_t>(is, "tensor count");
    for (std::uint32_t ti = 0; ti < n_tensors; ++ti) {
        std::string name = read_string(is, "tensor name");
        auto ndim = read_pod<std::uint32_t>(is, "tensor rank");
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) n *= read_pod<std::uint32_t>(is, "tensor dim");
        std::vector<double> buf(n);
        for (auto& v : buf) v = static_cast<double>(read_pod<float>(is, "tensor payload"));
        if (name == "bn_running_mean") {
            if (n != p.bn_mean.size()) throw FormatError("bn_running_mean size mismatch");
            p.bn_mean = std::move(buf);
        } else if (name == "bn_running_var") {
            if (n != p.bn_var.size()) throw FormatError("bn_running_var size mismatch");
            p.bn_var = std::move(buf);
        } else if (name == "head_w") {
            if (n != head.w.size()) throw FormatError("head_w size mismatch");
            head.w = std::move(buf);
        } else if (name == "head_b") {
            head.b = buf.at(0);
        } else {
            bool found = false;
            for (const auto& t : p.tensors) {
                if (t.name == name) {
                    if (t.size() != n) throw FormatError("tensor size mismatch for " + name);
                    std::copy(buf.begin(), buf.end(), p.w.begin() + static_cast<std::ptrdiff_t>(t.offset));
                    found = true;
                    break;
                }
            }
            if (!found) throw FormatError("unknown tensor in model file: " + name);
        }
    }
    return {std::move(p), std::move(head)};
}

}  // namespace match
