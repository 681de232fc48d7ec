#include "match/annindex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace match {

namespace {

double sqdist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

// Lloyd iterations over given initial centroids, with empty-cluster repair
// (re-seed at the farthest member of the largest cluster). Returns final
// mean squared distance to the nearest centroid.
double lloyd(const Matrix& points, Matrix& centroids, int iters) {
    const std::size_t n = points.rows, d = points.cols, k = centroids.rows;
    std::vector<std::size_t> assign(n, 0);
    std::vector<std::size_t> counts(k, 0);
    double distortion = 0.0;
    for (int it = 0; it <= iters; ++it) {
        // assignment
        distortion = 0.0;
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            std::size_t bj = 0;
            for (std::size_t j = 0; j < k; ++j) {
                double dd = sqdist(points.row(i), centroids.row(j), d);
                if (dd < best) {
                    best = dd;
                    bj = j;
                }
            }
            assign[i] = bj;
            ++counts[bj];
            distortion += best;
        }
        if (it == iters) break;
        // update
        Matrix sums(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            const double* p = points.row(i);
            double* srow = sums.row(assign[i]);
            for (std::size_t c = 0; c < d; ++c) srow[c] += p[c];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            double inv = 1.0 / static_cast<double>(counts[j]);
            double* crow = centroids.row(j);
            const double* srow = sums.row(j);
            for (std::size_t c = 0; c < d; ++c) crow[c] = srow[c] * inv;
        }
        // repair empty clusters
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) continue;
            std::size_t big = static_cast<std::size_t>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            double far_d = -1.0;
            std::size_t far_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assign[i] != big) continue;
                double dd = sqdist(points.row(i), centroids.row(big), d);
                if (dd > far_d) {
                    far_d = dd;
                    far_i = i;
                }
            }
            std::copy(points.row(far_i), points.row(far_i) + d, centroids.row(j));
            assign[far_i] = j;
            --counts[big];
            ++counts[j];
        }
    }
    return distortion / static_cast<double>(n);
}

Matrix kmeanspp_seed(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows, d = points.cols;
    Matrix centroids(k, d);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t c0 = first(rng);
    std::copy(points.row(c0), points.row(c0) + d, centroids.row(0));
    std::vector<double> mind(n);
    for (std::size_t i = 0; i < n; ++i) mind[i] = sqdist(points.row(i), centroids.row(0), d);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 1; j < k; ++j) {
        double total = 0.0;
        for (double v : mind) total += v;
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = unit(rng) * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += mind[i];
                if (cum >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);  // all points identical to chosen centroids
        }
        std::copy(points.row(pick), points.row(pick) + d, centroids.row(j));
        for (std::size_t i = 0; i < n; ++i)
            mind[i] = std::min(mind[i], sqdist(points.row(i), centroids.row(j), d));
    }
    return centroids;
}

}  // namespace

KmeansResult kmeans(const Matrix& points, int k, int iters, std::uint64_t seed) {
    if (k < 1) throw ParameterError("k must be >= 1");
    if (points.rows < static_cast<std::size_t>(k))
        throw ParameterError("kmeans needs at least k points (" + std::to_string(points.rows) +
                             " < " + std::to_string(k) + ")");
    Rng rng(seed);
    KmeansResult res;
    res.centroids = kmeanspp_seed(points, static_cast<std::size_t>(k), rng);
    res.distortion = lloyd(points, res.centroids, iters);
    return res;
}

namespace {

struct Subspaces {
    int m;
    std::size_t sub;  // dims per subspace
};

Matrix subspace_slice(const Matrix& points, int block, std::size_t sub) {
    Matrix s(points.rows, sub);
    std::size_t off = static_cast<std::size_t>(block) * sub;
    for (std::size_t i = 0; i < points.rows; ++i)
        std::copy(points.row(i) + off, points.row(i) + off + sub, s.row(i));
    return s;
}

// nearest codebook entry per point, returning total squared error
double encode_block(const Matrix& slice, const Matrix& codebook, std::vector<std::uint8_t>* codes,
                    Matrix* recon) {
    double err = 0.0;
    for (std::size_t i = 0; i < slice.rows; ++i) {
        double best = std::numeric_limits<double>::max();
        std::size_t bj = 0;
        for (std::size_t j = 0; j < codebook.rows; ++j) {
            double dd = sqdist(slice.row(i), codebook.row(j), slice.cols);
            if (dd < best) {
                best = dd;
                bj = j;
            }
        }
        err += best;
        if (codes) (*codes)[i] = static_cast<std::uint8_t>(bj);
        if (recon) std::copy(codebook.row(bj), codebook.row(bj) + slice.cols, recon->row(i));
    }
    return err;
}

Matrix matmul_rot(const Matrix& points, const Matrix& rot) {
    // y_i = R x_i for every row
    Matrix out(points.rows, points.cols);
    const std::size_t d = points.cols;
    for (std::size_t i = 0; i < points.rows; ++i) {
        const double* x = points.row(i);
        double* y = out.row(i);
        for (std::size_t r = 0; r < d; ++r) y[r] = dot(rot.row(r), x, d);
    }
    return out;
}

Matrix identity(std::size_t d) {
    Matrix I(d, d);
    for (std::size_t i = 0; i < d; ++i) I.at(i, i) = 1.0;
    return I;
}

}  // namespace

OpqResult train_opq(const Matrix& points, int m, int ks, int outer_iters, int kmeans_iters,
                    std::uint64_t seed) {
    const std::size_t d = points.cols;
    if (m < 1 || d % static_cast<std::size_t>(m) != 0)
        throw ParameterError("m must divide the vector dimension");
    if (ks < 1 || ks > 256) throw ParameterError("ks must be in [1, 256]");
    if (points.rows < static_cast<std::size_t>(ks))
        throw ParameterError("need at least ks training points");
    const std::size_t sub = d / static_cast<std::size_t>(m);

    OpqResult res;
    res.rotation = identity(d);
    res.codebooks.resize(static_cast<std::size_t>(m));

    auto train_codebooks = [&](const Matrix& rotated, bool warm) {
        double total = 0.0;
        for (int b = 0; b < m; ++b) {
            Matrix slice = subspace_slice(rotated, b, sub);
            auto& cb = res.codebooks[static_cast<std::size_t>(b)];
            if (!warm) {
                Rng rng(seed + static_cast<std::uint64_t>(b) + 1);
                cb = kmeanspp_seed(slice, static_cast<std::size_t>(ks), rng);
            }
            lloyd(slice, cb, kmeans_iters);
            total += encode_block(slice, cb, nullptr, nullptr);
        }
        return total / static_cast<double>(points.rows);
    };

    if (outer_iters == 0) {
        train_codebooks(points, false);
        return res;
    }

    Matrix rotated = points;  // R = I initially
    double mse = train_codebooks(rotated, false);
    res.mse_trace.push_back(mse);

    for (int it = 1; it < outer_iters; ++it) {
        // reconstruct in rotated space
        Matrix recon(points.rows, d);
        for (int b = 0; b < m; ++b) {
            Matrix slice = subspace_slice(rotated, b, sub);
            Matrix rblock(points.rows, sub);
            encode_block(slice, res.codebooks[static_cast<std::size_t>(b)], nullptr, &rblock);
            std::size_t off = static_cast<std::size_t>(b) * sub;
            for (std::size_t i = 0; i < points.rows; ++i)
                std::copy(rblock.row(i), rblock.row(i) + sub, recon.row(i) + off);
        }
        // orthogonal Procrustes: maximize sum_i <recon_i, R x_i>
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < points.rows; ++i) {
            Eigen::Map<const Eigen::VectorXd> x(points.row(i), static_cast<Eigen::Index>(d));
            Eigen::Map<const Eigen::VectorXd> xr(recon.row(i), static_cast<Eigen::Index>(d));
            A.noalias() += x * xr.transpose();
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.info() != Eigen::Success) throw NumericError("SVD failed in rotation update");
        Eigen::MatrixXd R = svd.matrixV() * svd.matrixU().transpose();
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c)
                res.rotation.at(r, c) = R(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));

        rotated = matmul_rot(points, res.rotation);
        mse = train_codebooks(rotated, /*warm=*/true);
        res.mse_trace.push_back(mse);
    }
    return res;
}

std::pair<int, int> choose_subquantizers(int dim, int target_m) {
    if (target_m < 1) throw ParameterError("m must be >= 1");
    int padded = ((dim + target_m - 1) / target_m) * target_m;
    return {target_m, padded};
}

// ---- index build --------------------------------------------------------

std::vector<double> IvfIndex::rotate_pad(const std::vector<double>& v) const {
    if (v.size() != dim_) throw ParameterError("query dimension mismatch: got " +
                                               std::to_string(v.size()) + ", expected " +
                                               std::to_string(dim_));
    std::vector<double> padded(padded_dim_, 0.0);
    std::copy(v.begin(), v.end(), padded.begin());
    std::vector<double> out(padded_dim_, 0.0);
    for (std::size_t r = 0; r < padded_dim_; ++r) out[r] = dot(rotation_.row(r), padded.data(), padded_dim_);
    return out;
}

IvfIndex IvfIndex::build(const Matrix& vectors, const std::vector<std::string>& ids,
                         const IndexConfig& cfg, const Matrix* rotation) {
    if (vectors.rows != ids.size()) throw ParameterError("vector/id count mismatch");
    if (cfg.nlist < 1) throw ParameterError("nlist must be >= 1");
    if (cfg.ks < 1 || cfg.ks > 256) throw ParameterError("ks must be in [1, 256]");
    if (vectors.rows < static_cast<std::size_t>(cfg.nlist))
        throw ParameterError("need at least nlist vectors");
    if (!cfg.flat && vectors.rows < static_cast<std::size_t>(cfg.ks))
        throw ParameterError("need at least ks vectors to train codebooks");
    {
        std::unordered_set<std::string> seen;
        for (const auto& id : ids)
            if (!seen.insert(id).second) throw DataError("duplicate id in index build: " + id);
    }

    IvfIndex idx;
    idx.cfg_ = cfg;
    idx.dim_ = static_cast<std::uint32_t>(vectors.cols);
    auto [m, padded] = choose_subquantizers(static_cast<int>(vectors.cols), cfg.m);
    idx.cfg_.m = m;
    idx.padded_dim_ = static_cast<std::uint32_t>(padded);
    const std::size_t pd = idx.padded_dim_;
    const std::size_t sub = pd / static_cast<std::size_t>(m);

    Matrix padded_pts(vectors.rows, pd);
    for (std::size_t i = 0; i < vectors.rows; ++i)
        std::copy(vectors.row(i), vectors.row(i) + vectors.cols, padded_pts.row(i));

    // rotation (OPQ on the padded vectors) then coarse clustering in the
    // rotated space
    if (rotation != nullptr) {
        if (rotation->rows != pd || rotation->cols != pd)
            throw ParameterError("rotation override must be padded_dim x padded_dim");
        idx.rotation_ = *rotation;
    } else if (cfg.opq_outer_iters > 0 && !cfg.flat) {
        auto opq = train_opq(padded_pts, m, cfg.ks, cfg.opq_outer_iters, cfg.kmeans_iters, cfg.seed);
        idx.rotation_ = std::move(opq.rotation);
    } else {
        idx.rotation_ = identity(pd);
    }
    Matrix rotated = matmul_rot(padded_pts, idx.rotation_);

    auto coarse = kmeans(rotated, cfg.nlist, cfg.kmeans_iters, cfg.seed + 17);
    idx.centroids_ = std::move(coarse.centroids);

    std::vector<std::size_t> assign(rotated.rows);
    for (std::size_t i = 0; i < rotated.rows; ++i) {
        double best = std::numeric_limits<double>::max();
        std::size_t bj = 0;
        for (std::size_t j = 0; j < idx.centroids_.rows; ++j) {
            double dd = sqdist(rotated.row(i), idx.centroids_.row(j), pd);
            if (dd < best) {
                best = dd;
                bj = j;
            }
        }
        assign[i] = bj;
    }

    idx.lists_.resize(static_cast<std::size_t>(cfg.nlist));
    idx.id_table_ = ids;
    idx.locator_.resize(ids.size());

    if (cfg.flat) {
        for (std::size_t i = 0; i < rotated.rows; ++i) {
            auto& list = idx.lists_[assign[i]];
            idx.locator_[i] = {static_cast<std::uint32_t>(assign[i]),
                               static_cast<std::uint32_t>(list.ids.size())};
            list.ids.push_back(i);
            list.raw.insert(list.raw.end(), rotated.row(i), rotated.row(i) + pd);
        }
    } else {
        Matrix residuals(rotated.rows, pd);
        for (std::size_t i = 0; i < rotated.rows; ++i) {
            const double* c = idx.centroids_.row(assign[i]);
            for (std::size_t j = 0; j < pd; ++j) residuals.at(i, j) = rotated.at(i, j) - c[j];
        }
        idx.codebooks_.resize(static_cast<std::size_t>(m));
        std::vector<std::vector<std::uint8_t>> codes(static_cast<std::size_t>(m),
                                                     std::vector<std::uint8_t>(rotated.rows));
        for (int b = 0; b < m; ++b) {
            Matrix slice = subspace_slice(residuals, b, sub);
            auto km = kmeans(slice, cfg.ks, cfg.kmeans_iters, cfg.seed + 31 + static_cast<std::uint64_t>(b));
            idx.codebooks_[static_cast<std::size_t>(b)] = std::move(km.centroids);
            encode_block(slice, idx.codebooks_[static_cast<std::size_t>(b)],
                         &codes[static_cast<std::size_t>(b)], nullptr);
        }
        for (std::size_t i = 0; i < rotated.rows; ++i) {
            auto& list = idx.lists_[assign[i]];
            idx.locator_[i] = {static_cast<std::uint32_t>(assign[i]),
                               static_cast<std::uint32_t>(list.ids.size())};
            list.ids.push_back(i);
            for (int b = 0; b < m; ++b) list.codes.push_back(codes[static_cast<std::size_t>(b)][i]);
        }
    }
    return idx;
}

std::vector<SearchHit> IvfIndex::search(const std::vector<double>& query, int k, int nprobe) const {
    if (k < 1) throw ParameterError("k must be >= 1");
    if (nprobe < 1 || nprobe > cfg_.nlist) throw ParameterError("nprobe out of range");
    const std::size_t pd = padded_dim_;
    const bool ip = cfg_.metric == Metric::IP;
    auto q = rotate_pad(query);

    // rank coarse cells
    std::vector<std::pair<double, int>> cells;
    cells.reserve(static_cast<std::size_t>(cfg_.nlist));
    for (int j = 0; j < cfg_.nlist; ++j) {
        double s = ip ? dot(q.data(), centroids_.row(static_cast<std::size_t>(j)), pd)
                      : sqdist(q.data(), centroids_.row(static_cast<std::size_t>(j)), pd);
        cells.emplace_back(s, j);
    }
    std::sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return ip ? a.first > b.first : a.first < b.first;
        return a.second < b.second;
    });

    // (score, internal id); ordering puts the worst kept hit on top
    auto worse = [&](const std::pair<double, std::uint64_t>& a,
                     const std::pair<double, std::uint64_t>& b) {
        if (a.first != b.first) return ip ? a.first > b.first : a.first < b.first;
        return a.second < b.second;
    };
    std::priority_queue<std::pair<double, std::uint64_t>, std::vector<std::pair<double, std::uint64_t>>,
                        decltype(worse)>
        heap(worse);

    const int m = cfg_.m;
    const std::size_t sub = pd / static_cast<std::size_t>(m);
    std::vector<double> lut;
    std::vector<double> qr(pd);
    for (int pi = 0; pi < nprobe; ++pi) {
        int cell = cells[static_cast<std::size_t>(pi)].second;
        const auto& list = lists_[static_cast<std::size_t>(cell)];
        if (list.ids.empty()) continue;
        if (cfg_.flat) {
            for (std::size_t e = 0; e < list.ids.size(); ++e) {
                const double* v = list.raw.data() + e * pd;
                double s = ip ? dot(q.data(), v, pd) : sqdist(q.data(), v, pd);
                heap.emplace(s, list.ids[e]);
                if (heap.size() > static_cast<std::size_t>(k)) heap.pop();
            }
        } else {
            const double* c = centroids_.row(static_cast<std::size_t>(cell));
            double base = 0.0;
            if (ip) {
                base = dot(q.data(), c, pd);
                // LUT over the query itself: <q, r> decomposes per subspace
                for (std::size_t j = 0; j < pd; ++j) qr[j] = q[j];
            } else {
                for (std::size_t j = 0; j < pd; ++j) qr[j] = q[j] - c[j];
            }
            lut.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(cfg_.ks), 0.0);
            for (int b = 0; b < m; ++b) {
                const auto& cb = codebooks_[static_cast<std::size_t>(b)];
                const double* qs = qr.data() + static_cast<std::size_t>(b) * sub;
                double* lrow = lut.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg_.ks);
                for (std::size_t j = 0; j < cb.rows; ++j)
                    lrow[j] = ip ? dot(qs, cb.row(j), sub) : sqdist(qs, cb.row(j), sub);
            }
            for (std::size_t e = 0; e < list.ids.size(); ++e) {
                const std::uint8_t* code = list.codes.data() + e * static_cast<std::size_t>(m);
                double s = base;
                for (int b = 0; b < m; ++b)
                    s += lut[static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg_.ks) + code[b]];
                heap.emplace(s, list.ids[e]);
                if (heap.size() > static_cast<std::size_t>(k)) heap.pop();
            }
        }
    }

    std::vector<SearchHit> hits(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        auto [s, iid] = heap.top();
        heap.pop();
        hits[i] = SearchHit{id_table_[iid], s, static_cast<int>(locator_[iid].first)};
    }
    return hits;
}

std::vector<double> IvfIndex::reconstruct(const std::string& id) const {
    auto it = std::find(id_table_.begin(), id_table_.end(), id);
    if (it == id_table_.end()) throw DataError("unknown id in reconstruct: " + id);
    std::uint64_t iid = static_cast<std::uint64_t>(it - id_table_.begin());
    auto [cell, pos] = locator_[iid];
    const auto& list = lists_[cell];
    const std::size_t pd = padded_dim_;
    std::vector<double> out(pd, 0.0);
    if (cfg_.flat) {
        const double* v = list.raw.data() + static_cast<std::size_t>(pos) * pd;
        std::copy(v, v + pd, out.begin());
    } else {
        const double* c = centroids_.row(cell);
        std::copy(c, c + pd, out.begin());
        const std::uint8_t* code = list.codes.data() + static_cast<std::size_t>(pos) * static_cast<std::size_t>(cfg_.m);
        const std::size_t sub = pd / static_cast<std::size_t>(cfg_.m);
        for (int b = 0; b < cfg_.m; ++b) {
            const double* cb = codebooks_[static_cast<std::size_t>(b)].row(code[b]);
            double* o = out.data() + static_cast<std::size_t>(b) * sub;
            for (std::size_t j = 0; j < sub; ++j) o[j] += cb[j];
        }
    }
    return out;
}

// ---- persistence (magic "IVFX", version 1, little-endian) ---------------

namespace {
constexpr std::uint32_t kIndexVersion = 1;

// Stored as f64 so a save/load round trip reproduces search scores bit for
// bit; the compressed payload is the codes, not these tables.
void write_matrix_f64(std::ostream& os, const Matrix& m) { write_vec(os, m.a); }

Matrix read_matrix_f64(std::istream& is, std::size_t rows, std::size_t cols, const char* what) {
    Matrix m(rows, cols);
    read_vec(is, m.a, rows * cols, what);
    return m;
}
}  // namespace

void IvfIndex::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write index: " + path);
    os.write("IVFX", 4);
    write_pod<std::uint32_t>(os, kIndexVersion);
    write_pod<std::uint32_t>(os, dim_);
    write_pod<std::uint32_t>(os, padded_dim_);
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(cfg_.metric));
    write_pod<std::uint8_t>(os, cfg_.flat ? 1 : 0);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.nlist));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.m));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.ks));
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(id_table_.size()));
    write_matrix_f64(os, rotation_);
    write_matrix_f64(os, centroids_);
    if (!cfg_.flat)
        for (const auto& cb : codebooks_) write_matrix_f64(os, cb);
    for (const auto& list : lists_) {
        write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(list.ids.size()));
        for (auto id : list.ids) write_pod<std::uint64_t>(os, id);
        if (cfg_.flat) {
            write_vec(os, list.raw);
        } else {
            os.write(reinterpret_cast<const char*>(list.codes.data()),
                     static_cast<std::streamsize>(list.codes.size()));
        }
    }
    for (const auto& id : id_table_) write_string(os, id);
}

IvfIndex IvfIndex::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DependencyError("missing index file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "IVFX")
        throw FormatError("bad magic at offset 0 in " + path);
    auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kIndexVersion)
        throw FormatError("unsupported index version " + std::to_string(version));

    IvfIndex idx;
    idx.dim_ = read_pod<std::uint32_t>(is, "dim");
    idx.padded_dim_ = read_pod<std::uint32_t>(is, "padded_dim");
    idx.cfg_.metric = static_cast<Metric>(read_pod<std::uint8_t>(is, "metric"));
    idx.cfg_.flat = read_pod<std::uint8_t>(is, "flat flag") != 0;
    idx.cfg_.nlist = static_cast<int>(read_pod<std::uint32_t>(is, "nlist"));
    idx.cfg_.m = static_cast<int>(read_pod<std::uint32_t>(is, "m"));
    idx.cfg_.ks = static_cast<int>(read_pod<std::uint32_t>(is, "ks"));
    auto count = read_pod<std::uint64_t>(is, "count");

    const std::size_t pd = idx.padded_dim_;
    idx.rotation_ = read_matrix_f64(is, pd, pd, "rotation");
    idx.centroids_ = read_matrix_f64(is, static_cast<std::size_t>(idx.cfg_.nlist), pd, "centroids");
    if (!idx.cfg_.flat) {
        const std::size_t sub = pd / static_cast<std::size_t>(idx.cfg_.m);
        idx.codebooks_.resize(static_cast<std::size_t>(idx.cfg_.m));
        for (auto& cb : idx.codebooks_)
            cb = read_matrix_f64(is, static_cast<std::size_t>(idx.cfg_.ks), sub, "codebooks");
    }
    idx.lists_.resize(static_cast<std::size_t>(idx.cfg_.nlist));
    idx.locator_.resize(count);
    std::uint64_t total = 0;
    for (std::size_t li = 0; li < idx.lists_.size(); ++li) {
        auto& list = idx.lists_[li];
        auto len = read_pod<std::uint64_t>(is, "list length");
        total += len;
        list.ids.resize(len);
        for (auto& id : list.ids) id = read_pod<std::uint64_t>(is, "list ids");
        for (std::size_t e = 0; e < len; ++e) {
            if (list.ids[e] >= count) throw FormatError("internal id out of range in list payload");
            idx.locator_[list.ids[e]] = {static_cast<std::uint32_t>(li), static_cast<std::uint32_t>(e)};
        }
        if (idx.cfg_.flat) {
            read_vec(is, list.raw, len * pd, "raw vectors");
        } else {
            read_vec(is, list.codes, len * static_cast<std::size_t>(idx.cfg_.m), "codes");
        }
    }
    if (total != count) throw FormatError("list lengths do not sum to count");
    idx.id_table_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) idx.id_table_.push_back(read_string(is, "id table"));
    return idx;
}

IndexStats IvfIndex::stats() const {
    IndexStats st;
    st.count = id_table_.size();
    for (const auto& list : lists_) {
        st.list_sizes.push_back(list.ids.size());
        st.payload_bytes += list.ids.size() * sizeof(std::uint64_t);
        st.payload_bytes += cfg_.flat ? list.raw.size() * sizeof(double) : list.codes.size();
    }
    st.compression_ratio = (4.0 * static_cast<double>(padded_dim_)) / static_cast<double>(cfg_.m);
    return st;
}

std::string IndexStats::to_json() const {
    std::ostringstream os;
    os << "{\"count\":" << count << ",\"payload_bytes\":" << payload_bytes
       << ",\"compression_ratio\":" << compression_ratio << ",\"list_sizes\":[";
    for (std::size_t i = 0; i < list_sizes.size(); ++i) {
        if (i) os << ",";
        os << list_sizes[i];
    }
    os << "]}";
    return os.str();
}

}  // namespace match
