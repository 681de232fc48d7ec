#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "match/common.hpp"

namespace match {

enum class Metric : std::uint8_t { L2 = 0, IP = 1 };

struct IndexConfig {
    int nlist = 64;
    int m = 28;        // subquantizers
    int ks = 256;      // centroids per subquantizer (1 byte/code)
    int nprobe = 16;
    Metric metric = Metric::IP;
    int kmeans_iters = 15;
    int opq_outer_iters = 5;
    bool flat = false;  // store raw rotated vectors instead of codes
    std::uint64_t seed = 1;
};

struct KmeansResult {
    Matrix centroids;   // k x d
    double distortion;  // mean squared distance to nearest centroid
};

KmeansResult kmeans(const Matrix& points, int k, int iters, std::uint64_t seed);

struct OpqResult {
    Matrix rotation;                  // d x d orthonormal
    std::vector<Matrix> codebooks;    // m entries, each ks x (d/m)
    std::vector<double> mse_trace;    // training MSE per outer iteration
};

// Alternating minimization: per-subspace k-means codebooks, then rotation
// update by orthogonal Procrustes. outer_iters = 0 yields plain PQ
// (identity rotation).
OpqResult train_opq(const Matrix& points, int m, int ks, int outer_iters, int kmeans_iters,
                    std::uint64_t seed);

struct SearchHit {
    std::string id;
    double score;  // L2: smaller better; IP: larger better
    int cell;
};

struct IndexStats {
    std::uint64_t count = 0;
    std::uint64_t payload_bytes = 0;
    double compression_ratio = 0.0;  // (4 * dim) / m
    std::vector<std::uint64_t> list_sizes;
    std::string to_json() const;
};

class IvfIndex {
public:
    // Build from n x dim vectors (padded internally when m does not divide
    // dim). Residuals against the coarse centroid are PQ-encoded. A caller-
    // supplied orthonormal rotation (padded_dim x padded_dim) overrides the
    // OPQ-trained one.
    static IvfIndex build(const Matrix& vectors, const std::vector<std::string>& ids,
                          const IndexConfig& cfg, const Matrix* rotation = nullptr);

    std::vector<SearchHit> search(const std::vector<double>& query, int k, int nprobe) const;
    std::vector<SearchHit> search(const std::vector<double>& query, int k) const {
        return search(query, k, cfg_.nprobe);
    }

    // Decoded vector (coarse centroid + residual), still in rotated space.
    std::vector<double> reconstruct(const std::string& id) const;

    void save(const std::string& path) const;
    static IvfIndex load(const std::string& path);

    IndexStats stats() const;
    const IndexConfig& config() const { return cfg_; }
    std::uint32_t dim() const { return dim_; }
    std::uint32_t padded_dim() const { return padded_dim_; }

private:
    IndexConfig cfg_;
    std::uint32_t dim_ = 0;
    std::uint32_t padded_dim_ = 0;
    Matrix rotation_;   // padded_dim x padded_dim
    Matrix centroids_;  // nlist x padded_dim
    std::vector<Matrix> codebooks_;

    struct InvertedList {
        std::vector<std::uint64_t> ids;
        std::vector<std::uint8_t> codes;  // m bytes per entry
        std::vector<double> raw;          // padded_dim per entry, flat mode
    };
    std::vector<InvertedList> lists_;
    std::vector<std::string> id_table_;  // internal id -> external id
    std::vector<std::pair<std::uint32_t, std::uint32_t>> locator_;  // internal id -> (list, pos)

    std::vector<double> rotate_pad(const std::vector<double>& v) const;
};

// Pick the largest m <= target that divides dim (after padding dim by at
// most pad_budget extra zero components). Returns {m, padded_dim}.
std::pair<int, int> choose_subquantizers(int dim, int target_m);

}  // namespace match
