#include "odit/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace odit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Squared Euclidean distance with early abandon: once the partial sum
/// exceeds `bound` the candidate cannot enter the current k-best set, so any
/// value > bound may be returned. The accumulation order is identical for
/// all callers, keeping exact and exhaustive-tree results bitwise equal.
double dist2_bounded(const double* a, const double* b, std::size_t d, double bound) {
    double sum = 0.0;
    std::size_t i = 0;
    while (i + 16 <= d) {
        for (std::size_t j = 0; j < 16; ++j) {
            double diff = a[i + j] - b[i + j];
            sum += diff * diff;
        }
        i += 16;
        if (sum > bound) return sum;
    }
    for (; i < d; ++i) {
        double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

struct Candidate {
    double d2;
    std::size_t index;
};

inline bool better(const Candidate& a, const Candidate& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
}

/// Max-heap on (d2, index); top() is the worst of the current k best.
struct BestSet {
    explicit BestSet(std::size_t k) : k(k) { heap.reserve(k); }

    double bound() const { return heap.size() < k ? kInf : heap.front().d2; }

    void offer(double d2, std::size_t index) {
        Candidate c{d2, index};
        if (heap.size() < k) {
            heap.push_back(c);
            std::push_heap(heap.begin(), heap.end(), better);
        } else if (better(c, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), better);
            heap.back() = c;
            std::push_heap(heap.begin(), heap.end(), better);
        }
    }

    std::vector<Candidate> sorted() && {
        std::sort(heap.begin(), heap.end(), better);
        return std::move(heap);
    }

    std::size_t k;
    std::vector<Candidate> heap;
};

NeighborResult finish(std::span<const double> query, const Dataset& reference, BestSet&& best,
                      std::size_t k, bool want_decomposition, std::size_t decomposition_s) {
    auto sorted = std::move(best).sorted();
    NeighborResult result;
    result.distances.reserve(k);
    result.neighbor_indices.reserve(k);
    for (const auto& c : sorted) {
        result.distances.push_back(std::sqrt(c.d2));
        result.neighbor_indices.push_back(c.index);
    }
    if (want_decomposition) {
        std::size_t s = decomposition_s == 0 ? k : decomposition_s;
        if (s > k) throw std::invalid_argument("knn: decomposition s must be <= k");
        const std::size_t d = reference.dim();
        std::vector<double> per_dim(d, 0.0);
        for (std::size_t n = k - s; n < k; ++n) {
            auto y = reference.row(result.neighbor_indices[n]);
            for (std::size_t i = 0; i < d; ++i) {
                double diff = query[i] - y[i];
                per_dim[i] += diff * diff;
            }
        }
        result.per_dimension_sq = std::move(per_dim);
    }
    return result;
}

} // namespace

NeighborResult exact_knn(std::span<const double> query, const Dataset& reference,
                         const KnnOptions& opt) {
    if (query.size() != reference.dim())
        throw std::invalid_argument("knn: query dimension mismatch");
    const std::size_t n = reference.rows();
    const std::size_t available = n - (opt.exclude_index < n ? 1 : 0);
    if (opt.k == 0 || opt.k > available)
        throw std::invalid_argument("knn: k must be in [1, |reference|]");

    BestSet best(opt.k);
    const double* q = query.data();
    const std::size_t d = reference.dim();
    for (std::size_t i = 0; i < n; ++i) {
        if (i == opt.exclude_index) continue;
        double bound = best.bound();
        double d2 = dist2_bounded(q, reference.row(i).data(), d, bound);
        if (d2 <= bound) best.offer(d2, i);
    }
    return finish(query, reference, std::move(best), opt.k, opt.want_decomposition,
                  opt.decomposition_s);
}

// --- k-means tree ---------------------------------------------------------

namespace {

std::vector<double> mean_of(const Dataset& ref, const std::vector<std::size_t>& points) {
    std::vector<double> center(ref.dim(), 0.0);
    for (auto p : points) {
        auto r = ref.row(p);
        for (std::size_t i = 0; i < center.size(); ++i) center[i] += r[i];
    }
    for (auto& c : center) c /= double(points.size());
    return center;
}

} // namespace

std::size_t KMeansTree::height() const { return height_; }

std::size_t KMeansTree::build_node(const std::vector<std::size_t>& points, std::uint64_t seed,
                                   std::size_t depth) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    nodes_[id].center = mean_of(*reference_, points);
    height_ = std::max(height_, depth);

    if (points.size() <= branching_) {
        nodes_[id].points = points;
        return id;
    }

    const std::size_t C = branching_;
    const std::size_t d = reference_->dim();

    // init: C distinct points of this node, chosen at random
    auto order = shuffled_indices(points.size(), seed);
    std::vector<std::vector<double>> centers(C);
    for (std::size_t c = 0; c < C; ++c) {
        auto r = reference_->row(points[order[c]]);
        centers[c].assign(r.begin(), r.end());
    }

    std::vector<std::size_t> assign(points.size(), SIZE_MAX);
    std::vector<std::vector<std::size_t>> clusters(C);
    for (std::size_t iter = 0; iter < max_iters_; ++iter) {
        bool changed = false;
        for (auto& cl : clusters) cl.clear();
        for (std::size_t p = 0; p < points.size(); ++p) {
            const double* x = reference_->row(points[p]).data();
            double best = kInf;
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < C; ++c) {
                double d2 = dist2_bounded(x, centers[c].data(), d, best);
                if (d2 < best) {
                    best = d2;
                    best_c = c;
                }
            }
            if (assign[p] != best_c) changed = true;
            assign[p] = best_c;
            clusters[best_c].push_back(p);
        }

        // empty clusters take the farthest point of the largest cluster
        for (std::size_t c = 0; c < C; ++c) {
            while (clusters[c].empty()) {
                std::size_t big = 0;
                for (std::size_t c2 = 1; c2 < C; ++c2)
                    if (clusters[c2].size() > clusters[big].size()) big = c2;
                if (clusters[big].size() < 2)
                    throw std::runtime_error("kmeans: cannot repair empty cluster");
                double far_d = -1.0;
                std::size_t far_pos = 0;
                for (std::size_t pos = 0; pos < clusters[big].size(); ++pos) {
                    const double* x = reference_->row(points[clusters[big][pos]]).data();
                    double d2 = dist2_bounded(x, centers[big].data(), d, kInf);
                    if (d2 > far_d) {
                        far_d = d2;
                        far_pos = pos;
                    }
                }
                std::size_t p = clusters[big][far_pos];
                clusters[big].erase(clusters[big].begin() + far_pos);
                clusters[c].push_back(p);
                assign[p] = c;
                changed = true;
            }
        }

        for (std::size_t c = 0; c < C; ++c) {
            std::fill(centers[c].begin(), centers[c].end(), 0.0);
            for (auto p : clusters[c]) {
                auto r = reference_->row(points[p]);
                for (std::size_t i = 0; i < d; ++i) centers[c][i] += r[i];
            }
            for (auto& v : centers[c]) v /= double(clusters[c].size());
        }
        if (!changed) break;
    }

    std::vector<std::vector<std::size_t>> child_points(C);
    for (std::size_t c = 0; c < C; ++c) {
        child_points[c].reserve(clusters[c].size());
        for (auto p : clusters[c]) child_points[c].push_back(points[p]);
    }

    std::uint64_t child_seed_state = seed;
    std::vector<std::size_t> children(C);
    for (std::size_t c = 0; c < C; ++c)
        children[c] = build_node(child_points[c], splitmix64(child_seed_state), depth + 1);
    nodes_[id].children = std::move(children);
    return id;
}

KMeansTree build_kmeans_tree(const Dataset& reference, std::size_t C, std::size_t Imax,
                             std::uint64_t seed) {
    if (C < 2) throw std::invalid_argument("kmeans tree: branching must be >= 2");
    if (reference.rows() == 0) throw std::invalid_argument("kmeans tree: empty reference");
    KMeansTree tree;
    tree.reference_ = &reference;
    tree.branching_ = C;
    tree.max_iters_ = std::max<std::size_t>(1, Imax);
    tree.total_points_ = reference.rows();
    std::vector<std::size_t> all(reference.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    tree.build_node(all, seed, 0);
    return tree;
}

NeighborResult KMeansTree::search(std::span<const double> query, std::size_t k,
                                  std::size_t max_examined_B, bool want_decomposition,
                                  std::size_t decomposition_s) const {
    if (query.size() != reference_->dim())
        throw std::invalid_argument("knn: query dimension mismatch");
    if (k == 0 || k > total_points_)
        throw std::invalid_argument("knn: k must be in [1, |reference|]");
    if (max_examined_B < k)
        throw std::invalid_argument("knn: B must be >= k");

    using Entry = std::pair<double, std::size_t>;  // (center dist2, node id)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
    frontier.emplace(0.0, 0);

    BestSet best(k);
    const double* q = query.data();
    const std::size_t d = reference_->dim();
    std::size_t examined = 0;
    while (!frontier.empty() && examined < max_examined_B) {
        auto [cd, id] = frontier.top();
        frontier.pop();
        const Node& node = nodes_[id];
        if (node.leaf()) {
            for (auto p : node.points) {
                double bound = best.bound();
                double d2 = dist2_bounded(q, reference_->row(p).data(), d, bound);
                if (d2 <= bound) best.offer(d2, p);
            }
            examined += node.points.size();
        } else {
            for (auto child : node.children) {
                double d2 = dist2_bounded(q, nodes_[child].center.data(), d, kInf);
                frontier.emplace(d2, child);
            }
        }
    }
    if (best.heap.size() < k)
        throw std::runtime_error("knn: priority search examined fewer than k points");
    return finish(query, *reference_, std::move(best), k, want_decomposition, decomposition_s);
}

} // namespace odit
