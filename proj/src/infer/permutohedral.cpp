#include "wss/infer/permutohedral.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace wss {

namespace {

class KeyTable {
public:
    explicit KeyTable(int dims) : dims_(dims) {}

    /// Index of `key`, inserting it when `create` is set; -1 when absent.
    int find(const int* key, bool create) {
        std::string k(reinterpret_cast<const char*>(key), sizeof(int) * static_cast<std::size_t>(dims_));
        const auto it = index_.find(k);
        if (it != index_.end()) return it->second;
        if (!create) return -1;
        const int id = static_cast<int>(keys_.size() / static_cast<std::size_t>(dims_));
        keys_.insert(keys_.end(), key, key + dims_);
        index_.emplace(std::move(k), id);
        return id;
    }

    int size() const { return static_cast<int>(keys_.size() / static_cast<std::size_t>(dims_)); }
    const int* key(int i) const { return keys_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dims_); }

private:
    int dims_;
    std::vector<int> keys_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace

PermutohedralLattice::PermutohedralLattice(std::span<const float> features, int dims, int num_points)
    : dims_(dims), num_points_(num_points) {
    if (dims < 1) throw std::invalid_argument("lattice needs at least one feature dimension");
    if (features.size() != static_cast<std::size_t>(dims) * static_cast<std::size_t>(num_points))
        throw std::invalid_argument("lattice feature array has the wrong size");
    const int d = dims;
    const auto d1 = static_cast<std::size_t>(d + 1);
    offsets_.assign(static_cast<std::size_t>(num_points) * d1, 0);
    weights_.assign(static_cast<std::size_t>(num_points) * d1, 0.0f);

    KeyTable table(d);
    std::vector<float> scale(static_cast<std::size_t>(d));
    const float inv_std = std::sqrt(2.0f / 3.0f) * static_cast<float>(d + 1);
    for (int i = 0; i < d; ++i) scale[static_cast<std::size_t>(i)] = inv_std / std::sqrt(static_cast<float>((i + 1) * (i + 2)));

    std::vector<float> elevated(d1), barycentric(d1 + 1);
    std::vector<int> rem0(d1), rank(d1), key(static_cast<std::size_t>(d));
    const float down = 1.0f / static_cast<float>(d + 1);

    for (int n = 0; n < num_points; ++n) {
        const float* f = features.data() + static_cast<std::size_t>(n) * static_cast<std::size_t>(d);
        // Elevate onto the hyperplane x . 1 = 0.
        float sm = 0;
        for (int i = d; i > 0; --i) {
            const float cf = f[i - 1] * scale[static_cast<std::size_t>(i - 1)];
            elevated[static_cast<std::size_t>(i)] = sm - static_cast<float>(i) * cf;
            sm += cf;
        }
        elevated[0] = sm;

        // Closest remainder-0 point.
        int sum = 0;
        for (int i = 0; i <= d; ++i) {
            const float v = down * elevated[static_cast<std::size_t>(i)];
            const float up = std::ceil(v) * static_cast<float>(d + 1);
            const float dn = std::floor(v) * static_cast<float>(d + 1);
            rem0[static_cast<std::size_t>(i)] =
                static_cast<int>(up - elevated[static_cast<std::size_t>(i)] < elevated[static_cast<std::size_t>(i)] - dn ? up : dn);
            sum += rem0[static_cast<std::size_t>(i)];
        }
        sum /= d + 1;

        std::fill(rank.begin(), rank.end(), 0);
        for (int i = 0; i < d; ++i) {
            const float di = elevated[static_cast<std::size_t>(i)] - static_cast<float>(rem0[static_cast<std::size_t>(i)]);
            for (int j = i + 1; j <= d; ++j) {
                const float dj = elevated[static_cast<std::size_t>(j)] - static_cast<float>(rem0[static_cast<std::size_t>(j)]);
                if (di < dj) ++rank[static_cast<std::size_t>(i)];
                else ++rank[static_cast<std::size_t>(j)];
            }
        }
        if (sum > 0) {
            for (int i = 0; i <= d; ++i) {
                auto& r = rank[static_cast<std::size_t>(i)];
                if (r >= d + 1 - sum) {
                    rem0[static_cast<std::size_t>(i)] -= d + 1;
                    r += sum - (d + 1);
                } else {
                    r += sum;
                }
            }
        } else if (sum < 0) {
            for (int i = 0; i <= d; ++i) {
                auto& r = rank[static_cast<std::size_t>(i)];
                if (r < -sum) {
                    rem0[static_cast<std::size_t>(i)] += d + 1;
                    r += d + 1 + sum;
                } else {
                    r += sum;
                }
            }
        }

        std::fill(barycentric.begin(), barycentric.end(), 0.0f);
        for (int i = 0; i <= d; ++i) {
            const float v = (elevated[static_cast<std::size_t>(i)] - static_cast<float>(rem0[static_cast<std::size_t>(i)])) * down;
            barycentric[static_cast<std::size_t>(d - rank[static_cast<std::size_t>(i)])] += v;
            barycentric[static_cast<std::size_t>(d + 1 - rank[static_cast<std::size_t>(i)])] -= v;
        }
        barycentric[0] += 1.0f + barycentric[static_cast<std::size_t>(d + 1)];

        for (int r = 0; r <= d; ++r) {
            for (int i = 0; i < d; ++i) {
                // canonical simplex vertex r, coordinate with rank rank[i]
                const int rk = rank[static_cast<std::size_t>(i)];
                key[static_cast<std::size_t>(i)] = rem0[static_cast<std::size_t>(i)] + (rk <= d - r ? r : r - (d + 1));
            }
            const auto slot = static_cast<std::size_t>(n) * d1 + static_cast<std::size_t>(r);
            offsets_[slot] = table.find(key.data(), true);
            weights_[slot] = barycentric[static_cast<std::size_t>(r)];
        }
    }

    const int m = table.size();
    blur_neighbors_.assign(static_cast<std::size_t>(m) * d1, {-1, -1});
    std::vector<int> n1(static_cast<std::size_t>(d)), n2(static_cast<std::size_t>(d));
    for (int j = 0; j <= d; ++j) {
        for (int v = 0; v < m; ++v) {
            const int* k = table.key(v);
            for (int i = 0; i < d; ++i) {
                n1[static_cast<std::size_t>(i)] = k[i] - 1;
                n2[static_cast<std::size_t>(i)] = k[i] + 1;
            }
            if (j < d) {
                n1[static_cast<std::size_t>(j)] = k[j] + d;
                n2[static_cast<std::size_t>(j)] = k[j] - d;
            }
            blur_neighbors_[static_cast<std::size_t>(j) * static_cast<std::size_t>(m) + static_cast<std::size_t>(v)] = {
                table.find(n1.data(), false), table.find(n2.data(), false)};
        }
    }
}

void PermutohedralLattice::filter(std::span<const float> in, std::span<float> out, int value_size) const {
    const auto vs = static_cast<std::size_t>(value_size);
    const auto d1 = static_cast<std::size_t>(dims_ + 1);
    if (in.size() != static_cast<std::size_t>(num_points_) * vs || out.size() != in.size())
        throw std::invalid_argument("lattice filter: value array has the wrong size");
    const auto m = static_cast<std::size_t>(lattice_size());
    // Vertex 0 of the value buffer is a zero "missing neighbour" sentinel; vertices are shifted by one.
    std::vector<float> values((m + 1) * vs, 0.0f), next((m + 1) * vs, 0.0f);

    for (std::size_t n = 0; n < static_cast<std::size_t>(num_points_); ++n) {
        for (std::size_t r = 0; r < d1; ++r) {
            const auto o = static_cast<std::size_t>(offsets_[n * d1 + r] + 1) * vs;
            const float w = weights_[n * d1 + r];
            for (std::size_t k = 0; k < vs; ++k) values[o + k] += w * in[n * vs + k];
        }
    }

    for (std::size_t j = 0; j < d1; ++j) {
        for (std::size_t v = 0; v < m; ++v) {
            const auto [a, b] = blur_neighbors_[j * m + v];
            const float* old = values.data() + (v + 1) * vs;
            const float* va = values.data() + static_cast<std::size_t>(a + 1) * vs;
            const float* vb = values.data() + static_cast<std::size_t>(b + 1) * vs;
            float* dst = next.data() + (v + 1) * vs;
            for (std::size_t k = 0; k < vs; ++k) dst[k] = old[k] + 0.5f * (va[k] + vb[k]);
        }
        std::swap(values, next);
    }

    const float alpha = 1.0f / (1.0f + std::pow(2.0f, -static_cast<float>(dims_)));
    for (std::size_t n = 0; n < static_cast<std::size_t>(num_points_); ++n) {
        float* o = out.data() + n * vs;
        std::fill(o, o + vs, 0.0f);
        for (std::size_t r = 0; r < d1; ++r) {
            const auto src = static_cast<std::size_t>(offsets_[n * d1 + r] + 1) * vs;
            const float w = weights_[n * d1 + r];
            for (std::size_t k = 0; k < vs; ++k) o[k] += w * values[src + k] * alpha;
        }
    }
}

}  // namespace wss
