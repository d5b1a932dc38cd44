#ifndef QEXGAN_BALL_TREE_HPP
#define QEXGAN_BALL_TREE_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "qexgan/common.hpp"

namespace qexgan {

/// Exact Euclidean nearest-neighbor index. Nodes are built by splitting at
/// the median of the dimension with the largest spread; queries prune on the
/// triangle-inequality bound and return exactly what a linear scan would,
/// with distance ties broken by lower point index.
template <typename Scalar>
class BallTree {
public:
    using Matrix = MatrixX<Scalar>;
    using Vector = VectorX<Scalar>;

    struct Neighbor {
        Eigen::Index index;
        Scalar distance;
    };

    struct QueryResult {
        std::vector<Neighbor> neighbors;
        bool truncated = false;  // k exceeded the point count
    };

    explicit BallTree(Matrix points, int leaf_size = 16)
        : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
        if (points_.rows() == 0) throw ValidationError("BallTree: empty point set");
        order_.resize(static_cast<std::size_t>(points_.rows()));
        std::iota(order_.begin(), order_.end(), Eigen::Index(0));
        build_node(0, points_.rows());
    }

    Eigen::Index size() const { return points_.rows(); }
    int dimension() const { return static_cast<int>(points_.cols()); }
    const Matrix& points() const { return points_; }

    QueryResult nearest(const Vector& query, int k) const {
        if (k < 1) throw ValidationError("BallTree::nearest: k must be >= 1");
        if (query.size() != points_.cols()) {
            throw ValidationError("BallTree::nearest: query dimension mismatch");
        }
        QueryResult result;
        if (static_cast<Eigen::Index>(k) > points_.rows()) {
            result.truncated = true;
            k = static_cast<int>(points_.rows());
        }
        std::vector<Candidate> heap;  // max-heap on (dist2, index)
        heap.reserve(static_cast<std::size_t>(k));
        search(0, query, static_cast<std::size_t>(k), heap);
        std::sort(heap.begin(), heap.end(),
                  [](const Candidate& a, const Candidate& b) { return b.worse_than(a); });
        result.neighbors.reserve(heap.size());
        for (const Candidate& c : heap) {
            result.neighbors.push_back({c.index, std::sqrt(c.dist2)});
        }
        return result;
    }

private:
    struct Candidate {
        Scalar dist2;
        Eigen::Index index;
        // Lexicographic (dist2, index): larger is worse.
        bool worse_than(const Candidate& other) const {
            if (dist2 != other.dist2) return dist2 > other.dist2;
            return index > other.index;
        }
    };

    struct Node {
        Eigen::Index begin = 0;
        Eigen::Index end = 0;
        Vector centroid;
        Scalar radius = 0;
        int left = -1;
        int right = -1;
        bool is_leaf() const { return left < 0; }
    };

    int build_node(Eigen::Index begin, Eigen::Index end) {
        const int node_id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        {
            Node& node = nodes_.back();
            node.begin = begin;
            node.end = end;
            node.centroid = Vector::Zero(points_.cols());
            for (Eigen::Index i = begin; i < end; ++i) {
                node.centroid += points_.row(order_[static_cast<std::size_t>(i)]).transpose();
            }
            node.centroid /= static_cast<Scalar>(end - begin);
            Scalar max_d2 = 0;
            for (Eigen::Index i = begin; i < end; ++i) {
                const Scalar d2 = (points_.row(order_[static_cast<std::size_t>(i)]).transpose() -
                                   node.centroid)
                                      .squaredNorm();
                max_d2 = std::max(max_d2, d2);
            }
            node.radius = std::sqrt(max_d2);
        }
        if (end - begin <= leaf_size_) return node_id;

        // Split dimension: the coordinate with the widest spread in this node.
        Eigen::Index split_dim = 0;
        Scalar best_spread = -1;
        for (Eigen::Index d = 0; d < points_.cols(); ++d) {
            Scalar lo = points_(order_[static_cast<std::size_t>(begin)], d);
            Scalar hi = lo;
            for (Eigen::Index i = begin + 1; i < end; ++i) {
                const Scalar v = points_(order_[static_cast<std::size_t>(i)], d);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                split_dim = d;
            }
        }
        // (coordinate, index) sort pins the permutation regardless of the
        // standard library's partition choices.
        std::sort(order_.begin() + begin, order_.begin() + end,
                  [&](Eigen::Index a, Eigen::Index b) {
                      const Scalar va = points_(a, split_dim);
                      const Scalar vb = points_(b, split_dim);
                      if (va != vb) return va < vb;
                      return a < b;
                  });
        const Eigen::Index mid = begin + (end - begin) / 2;
        const int left = build_node(begin, mid);
        const int right = build_node(mid, end);
        nodes_[static_cast<std::size_t>(node_id)].left = left;
        nodes_[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }

    static void heap_push(std::vector<Candidate>& heap, const Candidate& c) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end(),
                       [](const Candidate& a, const Candidate& b) { return b.worse_than(a); });
    }

    static void heap_pop(std::vector<Candidate>& heap) {
        std::pop_heap(heap.begin(), heap.end(),
                      [](const Candidate& a, const Candidate& b) { return b.worse_than(a); });
        heap.pop_back();
    }

    void search(int node_id, const Vector& query, std::size_t k,
                std::vector<Candidate>& heap) const {
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        if (heap.size() == k) {
            const Scalar dist_c = (query - node.centroid).norm();
            const Scalar lb = std::max(Scalar(0), dist_c - node.radius);
            // Tiny relative slack keeps round-off in the bound from pruning a
            // point that ties the current worst distance.
            if (lb * lb * Scalar(1.0 - 1e-10) > heap.front().dist2) return;
        }
        if (node.is_leaf()) {
            for (Eigen::Index i = node.begin; i < node.end; ++i) {
                const Eigen::Index point = order_[static_cast<std::size_t>(i)];
                const Candidate c{(points_.row(point).transpose() - query).squaredNorm(), point};
                if (heap.size() < k) {
                    heap_push(heap, c);
                } else if (heap.front().worse_than(c)) {
                    heap_pop(heap);
                    heap_push(heap, c);
                }
            }
            return;
        }
        const Scalar d_left =
            (query - nodes_[static_cast<std::size_t>(node.left)].centroid).squaredNorm();
        const Scalar d_right =
            (query - nodes_[static_cast<std::size_t>(node.right)].centroid).squaredNorm();
        const int first = d_left <= d_right ? node.left : node.right;
        const int second = d_left <= d_right ? node.right : node.left;
        search(first, query, k, heap);
        search(second, query, k, heap);
    }

    Matrix points_;
    int leaf_size_;
    std::vector<Eigen::Index> order_;
    std::vector<Node> nodes_;
};

}  // namespace qexgan

#endif
