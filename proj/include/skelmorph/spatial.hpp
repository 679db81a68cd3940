#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "skelmorph/point.hpp"

namespace skelmorph {

struct Neighbor {
    std::uint32_t index = 0;
    double sq_dist = 0.0;

    // Ordering used everywhere ties matter: distance first, then lowest index.
    friend bool operator<(const Neighbor& a, const Neighbor& b) noexcept {
        return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
    }
};

// Static 3-d tree over a borrowed point array. Results are exact and break
// distance ties toward the lowest index, matching the brute-force kernels.
class KdTree {
public:
    explicit KdTree(std::span<const Point3> points);

    std::size_t size() const noexcept { return points_.size(); }

    Neighbor nearest(const Point3& query) const;

    // k nearest, sorted by (distance, index). k is clamped to size().
    std::vector<Neighbor> knn(const Point3& query, std::size_t k) const;

private:
    struct Node {
        std::uint32_t begin, end;  // range into order_
        std::int32_t left = -1, right = -1;
        int axis = -1;             // -1 for leaves
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void search(std::int32_t node, const Point3& q, std::size_t k, std::vector<Neighbor>& heap) const;

    std::span<const Point3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

// Below this many reference points nearest queries use the exhaustive SIMD
// kernel instead of building a tree.
inline constexpr std::size_t kBruteForceThreshold = 256;

// Nearest reference for every query. Picks the exhaustive kernel or a k-d tree
// by reference count; both give identical answers.
void nearest_batch(std::span<const Point3> queries, std::span<const Point3> refs,
                   std::span<std::uint32_t> index, std::span<double> sq_dist);

struct NearestResult {
    std::vector<std::uint32_t> index;
    std::vector<double> sq_dist;
};

NearestResult nearest_batch(std::span<const Point3> queries, std::span<const Point3> refs);

}  // namespace skelmorph
