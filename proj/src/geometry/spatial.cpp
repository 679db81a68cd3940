#include "skelmorph/spatial.hpp"

#include <algorithm>
#include <numeric>

#include "skelmorph/error.hpp"
#include "skelmorph/kernels.hpp"

namespace skelmorph {

namespace {

constexpr std::uint32_t kLeafSize = 8;

double coord(const Point3& p, int axis) noexcept {
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}

}  // namespace

KdTree::KdTree(std::span<const Point3> points) : points_(points), order_(points.size()) {
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 1);
        build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Point3 lo = points_[order_[begin]];
    Point3 hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Point3& p = points_[order_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Point3 ext = hi - lo;
    const int axis = (ext.x >= ext.y && ext.x >= ext.z) ? 0 : (ext.y >= ext.z ? 1 : 2);
    if (coord(ext, axis) == 0.0) return id;  // all coincident: keep as leaf

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         return coord(points_[a], axis) < coord(points_[b], axis);
                     });
    const double split = coord(points_[order_[mid]], axis);
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

void KdTree::search(std::int32_t node_id, const Point3& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t idx = order_[i];
            const Neighbor cand{idx, squared_distance(q, points_[idx])};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    const double diff = coord(q, node.axis) - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, heap);
    // <= keeps equal-distance candidates with lower indices reachable.
    if (heap.size() < k || diff * diff <= heap.front().sq_dist) search(far, q, k, heap);
}

Neighbor KdTree::nearest(const Point3& query) const {
    if (points_.empty()) fail(ErrorCode::empty_input, "nearest query on an empty point set");
    std::vector<Neighbor> heap;
    heap.reserve(1);
    search(0, query, 1, heap);
    return heap.front();
}

std::vector<Neighbor> KdTree::knn(const Point3& query, std::size_t k) const {
    if (points_.empty()) fail(ErrorCode::empty_input, "knn query on an empty point set");
    k = std::min(k, points_.size());
    std::vector<Neighbor> heap;
    heap.reserve(k + 1);
    if (k > 0) search(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
}

void nearest_batch(std::span<const Point3> queries, std::span<const Point3> refs,
                   std::span<std::uint32_t> index, std::span<double> sq_dist) {
    if (refs.empty()) fail(ErrorCode::empty_input, "nearest query against an empty reference set");
    if (index.size() != queries.size() || sq_dist.size() != queries.size())
        fail(ErrorCode::shape, "nearest_batch output spans do not match query count");
    if (refs.size() < kBruteForceThreshold) {
        kernels::active().nearest(queries, kernels::PointsSoA(refs), index, sq_dist);
        return;
    }
    const KdTree tree(refs);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const Neighbor n = tree.nearest(queries[i]);
        index[i] = n.index;
        sq_dist[i] = n.sq_dist;
    }
}

NearestResult nearest_batch(std::span<const Point3> queries, std::span<const Point3> refs) {
    NearestResult r{std::vector<std::uint32_t>(queries.size()), std::vector<double>(queries.size())};
    nearest_batch(queries, refs, r.index, r.sq_dist);
    return r;
}

}  // namespace skelmorph
