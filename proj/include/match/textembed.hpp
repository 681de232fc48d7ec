#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "match/common.hpp"
#include "match/corpus.hpp"

namespace match {

// Fixed-length token index sequence, right-padded with 0.
struct TokenSeq {
    std::vector<int> ids;
    int content_len = 0;  // tokens before the padding tail
};

TokenSeq encode_tokens(const std::string& text, const Vocabulary& vocab, int length);

struct DlemConfig {
    int seq_len = 256;
    int d_w = 64;      // token embedding width
    int channels = 32;  // conv channels per block
    int d_e = 128;     // output embedding dim
    int d_h = 64;      // attention hidden dim
    std::vector<int> kernels = {1, 2, 3, 5, 7, 10};
    double bn_eps = 1e-5;
    double bn_momentum = 0.9;

    int n_stacks() const { return static_cast<int>(kernels.size()); }
    int concat_dim() const { return n_stacks() * channels; }
};

struct TensorSpec {
    std::string name;
    std::size_t offset;
    std::vector<std::size_t> shape;
    std::size_t size() const;
};

// Text encoder parameters: token embedding table, six conv stacks
// (three conv+batchnorm+maxpool blocks each), attention, two FC layers.
// Trainable weights live in one flat vector; batch-norm running stats are
// state, not parameters, and are kept separately.
struct DlemParams {
    DlemConfig cfg;
    std::size_t vocab_size = 0;
    std::vector<double> w;  // all trainable tensors, concatenated
    std::vector<double> bn_mean, bn_var;  // running stats, [stack][block][channel]

    std::vector<TensorSpec> tensors;  // shape table over w

    static DlemParams init(const DlemConfig& cfg, std::size_t vocab_size, std::uint64_t seed);

    // offsets into w
    std::size_t emb_off = 0;
    std::vector<std::vector<std::size_t>> conv_w_off, conv_b_off, bn_g_off, bn_b_off;
    std::size_t att_k_off = 0, att_u_off = 0;
    std::size_t fc1_w_off = 0, fc1_b_off = 0, fc2_w_off = 0, fc2_b_off = 0;

    int conv_in_channels(int block) const { return block == 0 ? cfg.d_w : cfg.channels; }
    std::size_t bn_state_index(int stack, int block) const {
        return (static_cast<std::size_t>(stack) * 3 + static_cast<std::size_t>(block)) *
               static_cast<std::size_t>(cfg.channels);
    }

};

struct RelevanceHead {
    std::vector<double> w;  // 2 * d_e
    double b = 0.0;

    static RelevanceHead init(int d_e, std::uint64_t seed);
};

struct TrainingPair {
    TokenSeq candidate;
    TokenSeq job;
    int label = 0;  // R in {0,1}
};

// Cached intermediates from a batched forward pass, reused by backward.
struct ForwardCache;

// Batched encoder forward. In train mode batch-norm uses batch statistics
// (and updates running stats); eval mode is a pure function of (params, seq).
std::vector<std::vector<double>> dlem_forward_batch(DlemParams& params,
                                                    std::span<const TokenSeq> seqs, bool train,
                                                    ForwardCache* cache = nullptr);

std::vector<double> dlem_forward(const DlemParams& params, const TokenSeq& seq);

struct PairLossResult {
    double loss = 0.0;  // mean over pairs
    std::vector<double> grad_params;  // same layout as DlemParams::w
    std::vector<double> grad_head_w;
    double grad_head_b = 0.0;
    std::vector<double> p;  // per-pair predicted relevance
};

// Relevance BCE over a pair batch:
//   p = sigmoid(w^T [g(c); g(j)] + b),  loss = -R ln p - (1-R) ln(1-p)
// p is clamped to [eps, 1-eps] with eps = 1e-7.
PairLossResult pair_batch_loss(DlemParams& params, const RelevanceHead& head,
                               std::span<const TrainingPair> pairs, bool train_mode,
                               bool want_grads = true);

PairLossResult pair_loss(DlemParams& params, const RelevanceHead& head, const TrainingPair& pair);

// Positives from the application log; negatives resampled until the SOC
// majors differ. Count of negatives = neg_ratio * positives.
std::vector<TrainingPair> sample_pairs(const Corpus& corpus, const Vocabulary& vocab, int seq_len,
                                       double neg_ratio, std::uint64_t seed);

struct DlemTrainConfig {
    int epochs = 5;
    double lr = 0.05;
    int batch_size = 16;
    std::uint64_t seed = 1;
};

struct DlemTrainResult {
    DlemParams params;
    RelevanceHead head;
    std::vector<double> epoch_loss;  // mean loss per epoch
};

DlemTrainResult train_dlem(DlemParams params, RelevanceHead head,
                           std::vector<TrainingPair> pairs, const DlemTrainConfig& config);

// Versioned binary model file (magic "DLEM"): hyperparameters, shape table,
// f32 tensor payloads, batch-norm running stats, and the relevance head.
void save_dlem(const std::string& path, const DlemParams& params, const RelevanceHead& head);
std::pair<DlemParams, RelevanceHead> load_dlem(const std::string& path);

}  // namespace match
