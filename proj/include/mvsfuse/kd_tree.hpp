#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "mvsfuse/error.hpp"

namespace mvsfuse {

/// Static kd-tree over 3D points with exact nearest-neighbor queries.
/// Build once, query from any number of threads.
class KdTree {
public:
    struct Hit {
        int index = -1;
        double distance = std::numeric_limits<double>::infinity();
    };

    explicit KdTree(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
        if (points_.empty()) throw EmptyCloud("kd-tree over empty point set");
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<int>(points_.size()));
    }

    std::size_t size() const { return points_.size(); }
    const Eigen::Vector3d& point(int i) const { return points_[i]; }

    Hit nearest(const Eigen::Vector3d& q) const {
        Hit best;
        double best_sq = std::numeric_limits<double>::infinity();
        search(0, q, best, best_sq);
        best.distance = std::sqrt(best_sq);
        return best;
    }

    /// k nearest neighbors sorted by increasing distance. Returns fewer than k
    /// hits if the tree holds fewer points.
    std::vector<Hit> knearest(const Eigen::Vector3d& q, int k) const {
        if (k < 1) throw InvalidArgument("kd-tree: k must be at least 1");
        KnnHeap heap(std::min<std::size_t>(k, points_.size()));
        search_knn(0, q, heap);
        return heap.sorted();
    }

private:
    static constexpr int kLeafSize = 16;

    struct Node {
        double split = 0.0;
        int axis = -1;      // -1 marks a leaf
        int left = -1;      // child node ids
        int right = -1;
        int begin = 0;      // leaf range in order_
        int end = 0;
    };

    // Fixed-capacity max-heap of squared distances.
    class KnnHeap {
    public:
        explicit KnnHeap(std::size_t cap) : cap_(cap) { hits_.reserve(cap); }

        double worst_sq() const {
            return hits_.size() < cap_ ? std::numeric_limits<double>::infinity()
                                       : hits_.front().distance;
        }

        void push(int index, double dist_sq) {
            if (hits_.size() < cap_) {
                hits_.push_back({index, dist_sq});
                std::push_heap(hits_.begin(), hits_.end(), cmp);
            } else if (dist_sq < hits_.front().distance) {
                std::pop_heap(hits_.begin(), hits_.end(), cmp);
                hits_.back() = {index, dist_sq};
                std::push_heap(hits_.begin(), hits_.end(), cmp);
            }
        }

        std::vector<Hit> sorted() {
            std::sort_heap(hits_.begin(), hits_.end(), cmp);
            for (auto& h : hits_) h.distance = std::sqrt(h.distance);
            return std::move(hits_);
        }

    private:
        static bool cmp(const Hit& a, const Hit& b) { return a.distance < b.distance; }
        std::size_t cap_;
        std::vector<Hit> hits_;
    };

    int build(int begin, int end) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        if (end - begin <= kLeafSize) {
            nodes_[id].begin = begin;
            nodes_[id].end = end;
            return id;
        }
        // Split the widest axis at the median.
        Eigen::Vector3d lo = points_[order_[begin]];
        Eigen::Vector3d hi = lo;
        for (int i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        const int mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
        nodes_[id].axis = axis;
        nodes_[id].split = points_[order_[mid]][axis];
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(int node_id, const Eigen::Vector3d& q, Hit& best, double& best_sq) const {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[i];
                const double d = (points_[idx] - q).squaredNorm();
                if (d < best_sq) {
                    best_sq = d;
                    best.index = idx;
                }
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search(near, q, best, best_sq);
        if (delta * delta < best_sq) search(far, q, best, best_sq);
    }

    void search_knn(int node_id, const Eigen::Vector3d& q, KnnHeap& heap) const {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[i];
                heap.push(idx, (points_[idx] - q).squaredNorm());
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search_knn(near, q, heap);
        if (delta * delta < heap.worst_sq()) search_knn(far, q, heap);
    }

    std::vector<Eigen::Vector3d> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace mvsfuse
