#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "odit/core.hpp"

namespace odit {

/// Result of a k-nearest-neighbor query. Distances are Euclidean and
/// non-decreasing; ties are broken by lower reference index. When a
/// decomposition is requested, per_dimension_sq[i] holds the squared gap in
/// dimension i summed over neighbors n = k-s+1..k.
struct NeighborResult {
    std::vector<double> distances;
    std::vector<std::size_t> neighbor_indices;
    std::optional<std::vector<double>> per_dimension_sq;
};

struct KnnOptions {
    std::size_t k = 1;
    bool want_decomposition = false;
    std::size_t decomposition_s = 0;       // 0 means s = k
    std::size_t exclude_index = SIZE_MAX;  // self-exclusion for no-split training
};

NeighborResult exact_knn(std::span<const double> query, const Dataset& reference,
                         const KnnOptions& opt);

inline NeighborResult exact_knn(std::span<const double> query, const Dataset& reference,
                                std::size_t k, bool want_decomposition = false) {
    return exact_knn(query, reference, KnnOptions{k, want_decomposition});
}

/// Hierarchical k-means index over a reference dataset. Leaves hold at most
/// branching_C point indices; interior nodes hold cluster centers.
class KMeansTree {
public:
    struct Node {
        std::vector<double> center;
        std::vector<std::size_t> children;  // node ids; empty for leaves
        std::vector<std::size_t> points;    // reference indices; leaves only
        bool leaf() const { return children.empty(); }
    };

    KMeansTree() = default;

    std::size_t branching() const { return branching_; }
    std::size_t max_iters() const { return max_iters_; }
    std::size_t size() const { return total_points_; }
    std::size_t node_count() const { return nodes_.size(); }
    const Node& node(std::size_t id) const { return nodes_[id]; }
    const Dataset& reference() const { return *reference_; }
    std::size_t height() const;

    /// Priority search: visits leaves in order of query-to-center distance and
    /// stops after examining at least max_examined_B points.
    NeighborResult search(std::span<const double> query, std::size_t k,
                          std::size_t max_examined_B, bool want_decomposition = false,
                          std::size_t decomposition_s = 0) const;

    friend KMeansTree build_kmeans_tree(const Dataset& reference, std::size_t C,
                                        std::size_t Imax, std::uint64_t seed);

private:
    std::size_t build_node(const std::vector<std::size_t>& points, std::uint64_t seed,
                           std::size_t depth);

    const Dataset* reference_ = nullptr;
    std::vector<Node> nodes_;
    std::size_t branching_ = 0;
    std::size_t max_iters_ = 0;
    std::size_t total_points_ = 0;
    std::size_t height_ = 0;
};

KMeansTree build_kmeans_tree(const Dataset& reference, std::size_t C, std::size_t Imax,
                             std::uint64_t seed);

} // namespace odit
