#include "skelmorph/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "skelmorph/error.hpp"
#include "skelmorph/random.hpp"
#include "skelmorph/spatial.hpp"

namespace skelmorph {

void PointCloud::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i)
        if (!is_finite(points[i])) fail(ErrorCode::numeric, "non-finite coordinate at point " + std::to_string(i));
    if (normals.empty()) return;
    if (normals.size() != points.size())
        fail(ErrorCode::shape, "normal count " + std::to_string(normals.size()) + " does not match point count " +
                                   std::to_string(points.size()));
    for (std::size_t i = 0; i < normals.size(); ++i)
        if (std::abs(norm(normals[i]) - 1.0) > 1e-6)
            fail(ErrorCode::precondition, "normal " + std::to_string(i) + " is not unit length");
}

Point3 centroid(std::span<const Point3> points) {
    if (points.empty()) fail(ErrorCode::empty_input, "centroid of an empty point set");
    Point3 c;
    for (const auto& p : points) c += p;
    return c * (1.0 / static_cast<double>(points.size()));
}

Bounds bounding_box(std::span<const Point3> points) {
    if (points.empty()) fail(ErrorCode::empty_input, "bounding box of an empty point set");
    Bounds b{points.front(), points.front()};
    for (const auto& p : points) {
        b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y), std::min(b.lo.z, p.z)};
        b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y), std::max(b.hi.z, p.z)};
    }
    return b;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

struct SamplePass {
    std::vector<std::uint32_t> picks;
    double min_sq_spacing = 0.0;
};

double min_pairwise_sq(std::span<const Point3> pts, std::span<const std::uint32_t> sel) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < sel.size(); ++a)
        for (std::size_t b = a + 1; b < sel.size(); ++b)
            best = std::min(best, squared_distance(pts[sel[a]], pts[sel[b]]));
    return best;
}

// Swap the most crowded selected points for unselected candidates that sit
// farther from the rest of the selection. Stops when no swap helps.
void refine_spacing(std::span<const Point3> pts, std::vector<std::uint32_t>& sel,
                    std::span<const double> priority, std::size_t iterations) {
    const std::size_t n = pts.size();
    const std::size_t m = sel.size();
    if (m < 2 || m == n) return;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> slot(n, -1);
    for (std::size_t s = 0; s < m; ++s) slot[sel[s]] = static_cast<std::int64_t>(s);

    std::vector<double> d1(n), d2(n);
    std::vector<std::int64_t> nn1(n);
    for (std::size_t it = 0; it < iterations; ++it) {
        // Two nearest selected slots for every point, excluding the point itself.
        for (std::size_t i = 0; i < n; ++i) {
            double a = inf, b = inf;
            std::int64_t ia = -1;
            for (std::size_t s = 0; s < m; ++s) {
                if (sel[s] == i) continue;
                const double d = squared_distance(pts[i], pts[sel[s]]);
                if (d < a) {
                    b = a;
                    a = d;
                    ia = static_cast<std::int64_t>(s);
                } else if (d < b) {
                    b = d;
                }
            }
            d1[i] = a;
            d2[i] = b;
            nn1[i] = ia;
        }
        double worst = inf;
        for (std::size_t s = 0; s < m; ++s) worst = std::min(worst, d1[sel[s]]);

        bool moved = false;
        for (std::size_t s = 0; s < m && !moved; ++s) {
            if (d1[sel[s]] > worst) continue;
            double best = -1.0;
            std::size_t best_u = n;
            for (std::size_t u = 0; u < n; ++u) {
                if (slot[u] >= 0) continue;
                const double d = nn1[u] == static_cast<std::int64_t>(s) ? d2[u] : d1[u];
                if (d > best || (d == best && best_u < n && priority[u] < priority[best_u])) {
                    best = d;
                    best_u = u;
                }
            }
            if (best_u < n && best > worst * (1.0 + 1e-12)) {
                slot[sel[s]] = -1;
                sel[s] = static_cast<std::uint32_t>(best_u);
                slot[best_u] = static_cast<std::int64_t>(s);
                moved = true;
            }
        }
        if (!moved) break;
    }
}

SamplePass farthest_point_pass(std::span<const Point3> pts, std::span<const double> weights, std::size_t m,
                               Random& rng, std::size_t refine_iterations) {
    const std::size_t n = pts.size();
    std::vector<double> priority(n);
    for (auto& p : priority) p = rng.uniform();

    // Start point drawn proportionally to the neighbour-distance weight.
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::size_t start = n - 1;
    if (total > 0.0) {
        double target = rng.uniform() * total;
        for (std::size_t i = 0; i < n; ++i) {
            target -= weights[i];
            if (target < 0.0) {
                start = i;
                break;
            }
        }
    } else {
        start = rng.index(n);
    }

    SamplePass pass;
    pass.picks.reserve(m);
    std::vector<double> dmin(n, std::numeric_limits<double>::infinity());
    std::vector<char> taken(n, 0);
    std::size_t next = start;
    for (std::size_t s = 0; s < m; ++s) {
        pass.picks.push_back(static_cast<std::uint32_t>(next));
        taken[next] = 1;
        const Point3 p = pts[next];
        double best = -1.0;
        std::size_t best_i = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            dmin[i] = std::min(dmin[i], squared_distance(p, pts[i]));
            if (dmin[i] > best || (dmin[i] == best && priority[i] < priority[best_i])) {
                best = dmin[i];
                best_i = i;
            }
        }
        next = best_i;
    }
    refine_spacing(pts, pass.picks, priority, refine_iterations);
    pass.min_sq_spacing = m > 1 ? min_pairwise_sq(pts, pass.picks) : 0.0;
    return pass;
}

}  // namespace

PointCloud weighted_sample(const PointCloud& cloud, std::size_t m, std::uint64_t seed, const SampleOptions& options) {
    if (m == 0) fail(ErrorCode::empty_input, "requested an empty sample");
    if (m > cloud.size())
        fail(ErrorCode::size, "requested " + std::to_string(m) + " samples from a cloud of " +
                                  std::to_string(cloud.size()));
    const std::size_t n = cloud.size();

    std::vector<double> weights(n, 0.0);
    if (n > 1) {
        const KdTree tree(cloud.points);
        const std::size_t k = std::min(options.neighbors, n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const auto nb = tree.knn(cloud.points[i], k + 1);
            double sum = 0.0;
            std::size_t used = 0;
            for (const auto& q : nb) {
                if (q.index == i || used == k) continue;
                sum += std::sqrt(q.sq_dist);
                ++used;
            }
            weights[i] = used ? sum / static_cast<double>(used) : 0.0;
        }
    }

    const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
    SamplePass best;
    for (std::size_t r = 0; r < restarts; ++r) {
        Random rng(derive_seed(seed, r));
        SamplePass pass = farthest_point_pass(cloud.points, weights, m, rng, options.refine_iterations);
        if (r == 0 || pass.min_sq_spacing > best.min_sq_spacing) best = std::move(pass);
    }

    PointCloud out;
    out.points.reserve(m);
    for (auto i : best.picks) out.points.push_back(cloud.points[i]);
    if (cloud.has_normals()) {
        out.normals.reserve(m);
        for (auto i : best.picks) out.normals.push_back(cloud.normals[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normals

PointCloud estimate_normals(const PointCloud& cloud, std::size_t k) {
    if (k < 3) fail(ErrorCode::parameter, "normal estimation needs k >= 3");
    const std::size_t n = cloud.size();
    if (n < k)
        fail(ErrorCode::size, "normal estimation with k=" + std::to_string(k) + " needs at least k points, got " +
                                  std::to_string(n));

    const KdTree tree(cloud.points);
    std::vector<std::vector<std::uint32_t>> nbrs(n);
    std::vector<Point3> normals(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = tree.knn(cloud.points[i], k);
        Point3 mu;
        for (const auto& q : nb) mu += cloud.points[q.index];
        mu *= 1.0 / static_cast<double>(nb.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& q : nb) {
            const Point3 d = cloud.points[q.index] - mu;
            const Eigen::Vector3d v(d.x, d.y, d.z);
            cov += v * v.transpose();
            if (q.index != i) nbrs[i].push_back(q.index);
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        const Eigen::Vector3d e = eig.eigenvectors().col(0).normalized();
        normals[i] = {e.x(), e.y(), e.z()};
    }

    // Symmetrised k-NN graph for orientation propagation.
    std::vector<std::vector<std::uint32_t>> graph(n);
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : nbrs[i]) {
            graph[i].push_back(j);
            graph[j].push_back(static_cast<std::uint32_t>(i));
        }
    for (auto& g : graph) {
        std::sort(g.begin(), g.end());
        g.erase(std::unique(g.begin(), g.end()), g.end());
    }

    // Prim's MST with cost 1 - |n_i . n_j|; each tree edge carries the sign.
    const Point3 c = centroid(cloud.points);
    std::vector<char> done(n, 0);
    using Item = std::tuple<double, std::uint32_t, std::uint32_t>;  // cost, node, parent
    for (std::size_t root = 0; root < n; ++root) {
        if (done[root]) continue;
        std::vector<std::uint32_t> component;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        heap.emplace(0.0, static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root));
        while (!heap.empty()) {
            const auto [cost, v, parent] = heap.top();
            heap.pop();
            if (done[v]) continue;
            done[v] = 1;
            component.push_back(v);
            if (v != parent && dot(normals[v], normals[parent]) < 0.0) normals[v] = -normals[v];
            for (auto w : graph[v])
                if (!done[w]) heap.emplace(1.0 - std::abs(dot(normals[v], normals[w])), w, v);
        }
        std::size_t outward = 0;
        for (auto v : component)
            if (dot(normals[v], cloud.points[v] - c) >= 0.0) ++outward;
        if (2 * outward < component.size())
            for (auto v : component) normals[v] = -normals[v];
    }

    PointCloud out{cloud.points, std::move(normals)};
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

PointCloud apply_transform(const PointCloud& cloud, const NormalizationTransform& t) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
    out.normals = cloud.normals;  // uniform scale keeps directions
    return out;
}

std::pair<PointCloud, NormalizationTransform> normalize_to_unit_cube(const PointCloud& cloud) {
    if (cloud.empty()) fail(ErrorCode::empty_input, "cannot normalize an empty cloud");
    const Bounds b = bounding_box(cloud.points);
    const Point3 half = (b.hi - b.lo) * 0.5;
    const double extent = std::max({half.x, half.y, half.z});
    if (!(extent > 0.0)) fail(ErrorCode::degenerate, "all points coincide; cannot normalize");

    NormalizationTransform t;
    t.translation = -((b.lo + b.hi) * 0.5);
    t.scale = 1.0 / extent;
    PointCloud out = apply_transform(cloud, t);
    // Snap rounding residue so the extreme coordinate is exactly +-1.
    for (auto& p : out.points)
        for (double* v : {&p.x, &p.y, &p.z})
            if (std::abs(std::abs(*v) - 1.0) < 1e-12) *v = std::copysign(1.0, *v);
    return {std::move(out), t};
}

// ---------------------------------------------------------------------------
// Set distances

double chamfer_distance(std::span<const Point3> a, std::span<const Point3> b, Aggregation aggregation) {
    if (a.empty() || b.empty()) fail(ErrorCode::empty_input, "chamfer distance of an empty set");
    const auto ab = nearest_batch(a, b);
    const auto ba = nearest_batch(b, a);
    double sa = 0.0, sb = 0.0;
    for (double d : ab.sq_dist) sa += std::sqrt(d);
    for (double d : ba.sq_dist) sb += std::sqrt(d);
    if (aggregation == Aggregation::mean) {
        sa /= static_cast<double>(a.size());
        sb /= static_cast<double>(b.size());
    }
    return sa + sb;
}

double hausdorff_distance(std::span<const Point3> a, std::span<const Point3> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::empty_input, "hausdorff distance of an empty set");
    const auto ab = nearest_batch(a, b);
    const auto ba = nearest_batch(b, a);
    double m = 0.0;
    for (double d : ab.sq_dist) m = std::max(m, d);
    for (double d : ba.sq_dist) m = std::max(m, d);
    return std::sqrt(m);
}

}  // namespace skelmorph
