#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wss {

/// Permutohedral lattice for high-dimensional Gaussian filtering (Adams et al.). Points are
/// embedded into the lattice once; `filter` then splats values, blurs along each lattice
/// direction with a [1/2, 1, 1/2] kernel and slices back. The result approximates
///   out_i = sum_j exp(-|f_i - f_j|^2 / 2) * in_j
/// up to a constant factor, for features already divided by their standard deviations.
class PermutohedralLattice {
public:
    /// `features` is row-major, `num_points` x `dims`.
    PermutohedralLattice(std::span<const float> features, int dims, int num_points);

    /// `in` and `out` are `num_points` x `value_size`, row-major.
    void filter(std::span<const float> in, std::span<float> out, int value_size) const;

    int num_points() const { return num_points_; }
    int lattice_size() const { return static_cast<int>(blur_neighbors_.size() / static_cast<std::size_t>(dims_ + 1)); }

private:
    int dims_;
    int num_points_;
    std::vector<int> offsets_;    // num_points x (dims+1) lattice vertex indices
    std::vector<float> weights_;  // num_points x (dims+1) barycentric weights
    // For each lattice direction j and vertex v: (neighbor1, neighbor2) or -1.
    std::vector<std::pair<int, int>> blur_neighbors_;
};

}  // namespace wss
