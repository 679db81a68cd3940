#include "skelmorph/mat_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "skelmorph/error.hpp"

namespace skelmorph {

std::size_t InteriorGrid::inside_count() const noexcept {
    return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

InsideTest::InsideTest(const PointCloud& surface) : surface_(&surface), tree_(surface.points) {
    if (surface.empty()) fail(ErrorCode::empty_input, "inside test needs a non-empty surface");
    if (!surface.has_normals()) fail(ErrorCode::precondition, "inside test needs surface normals");
}

bool InsideTest::operator()(const Point3& q) const {
    const Neighbor nb = tree_.nearest(q);
    return dot(surface_->normals[nb.index], q - surface_->points[nb.index]) < 0.0;
}

InteriorGrid interior_grid(const PointCloud& cloud, const GridOptions& options) {
    if (cloud.empty()) fail(ErrorCode::empty_input, "interior grid of an empty cloud");
    if (!cloud.has_normals()) fail(ErrorCode::precondition, "interior grid needs surface normals");
    if (options.resolution < 8) fail(ErrorCode::parameter, "grid resolution must be at least 8");

    const Bounds b = bounding_box(cloud.points);
    const Point3 ext = b.hi - b.lo;
    const double longest = std::max({ext.x, ext.y, ext.z});
    if (!(longest > 0.0)) fail(ErrorCode::degenerate, "cloud has zero extent");

    InteriorGrid g;
    g.spacing = longest / static_cast<double>(options.resolution - 1);
    // Even counts put the box centre between lattice points, so no lattice
    // point sits exactly on a symmetry plane of the shape.
    auto count = [&](double e) {
        std::size_t n = static_cast<std::size_t>(std::ceil(e / g.spacing - 1e-9)) + 1 + 2 * options.pad;
        return n + (n % 2);
    };
    g.nx = count(ext.x);
    g.ny = count(ext.y);
    g.nz = count(ext.z);
    // Centre the lattice on the box so symmetric shapes get symmetric grids.
    const Point3 span{(g.nx - 1) * g.spacing, (g.ny - 1) * g.spacing, (g.nz - 1) * g.spacing};
    g.origin = (b.lo + b.hi) * 0.5 - span * 0.5;

    const InsideTest inside(cloud);
    g.occupancy.assign(g.nx * g.ny * g.nz, 0);
    for (std::size_t k = 0; k < g.nz; ++k)
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i) g.occupancy[g.index(i, j, k)] = inside(g.point(i, j, k)) ? 1 : 0;
    return g;
}

std::vector<MedialPoint> medial_points(const InteriorGrid& grid, const PointCloud& surface,
                                       const MedialOptions& options) {
    if (!(options.eps > 0.0)) fail(ErrorCode::parameter, "medial eps must be positive");
    if (!(options.min_angle > 0.0 && options.min_angle < std::numbers::pi))
        fail(ErrorCode::parameter, "medial min_angle must lie in (0, pi)");
    if (surface.empty()) fail(ErrorCode::empty_input, "medial points of an empty surface");
    if (!surface.has_normals()) fail(ErrorCode::precondition, "medial points need surface normals");

    // Nearest sample of every interior lattice point.
    const KdTree tree(surface.points);
    double min_chord = 0.0;
    if (surface.size() >= 2 && options.min_chord_spacings > 0.0) {
        std::vector<double> nn(surface.size());
        for (std::size_t i = 0; i < surface.size(); ++i) nn[i] = std::sqrt(tree.knn(surface.points[i], 2)[1].sq_dist);
        std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
        min_chord = options.min_chord_spacings * nn[nn.size() / 2];
    }
    constexpr std::uint32_t none = ~std::uint32_t{0};
    std::vector<std::uint32_t> feature(grid.size(), none);
    std::vector<double> dist(grid.size(), 0.0);
    for (std::size_t k = 0; k < grid.nz; ++k)
        for (std::size_t j = 0; j < grid.ny; ++j)
            for (std::size_t i = 0; i < grid.nx; ++i) {
                const std::size_t id = grid.index(i, j, k);
                if (!grid.occupancy[id]) continue;
                const Neighbor nb = tree.nearest(grid.point(i, j, k));
                feature[id] = nb.index;
                dist[id] = std::sqrt(nb.sq_dist);
            }

    const long dims[3] = {static_cast<long>(grid.nx), static_cast<long>(grid.ny), static_cast<long>(grid.nz)};
    const long steps[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    std::vector<MedialPoint> out;
    for (long k = 0; k < dims[2]; ++k)
        for (long j = 0; j < dims[1]; ++j)
            for (long i = 0; i < dims[0]; ++i) {
                const std::size_t id = grid.index(i, j, k);
                if (feature[id] == none) continue;
                const Point3 q = grid.point(i, j, k);
                const double d1 = dist[id];
                if (d1 <= 0.0) continue;
                const Point3& n1 = surface.normals[feature[id]];
                const double t1 = dot(n1, surface.points[feature[id]] - q);
                if (t1 <= 0.0) continue;
                double best = -1.0;
                for (const auto& st : steps) {
                    const long a = i + st[0], b = j + st[1], c = k + st[2];
                    if (a < 0 || b < 0 || c < 0 || a >= dims[0] || b >= dims[1] || c >= dims[2]) continue;
                    const std::uint32_t f2 = feature[grid.index(a, b, c)];
                    if (f2 == none || f2 == feature[id]) continue;
                    if (distance(surface.points[f2], surface.points[feature[id]]) < min_chord) continue;
                    const Point3& n2 = surface.normals[f2];
                    const Point3 step = grid.point(a, b, c) - q;
                    if (dot(n1, step) >= 0.0 || dot(n2, step) <= 0.0) continue;
                    const double t2 = dot(n2, surface.points[f2] - q);
                    if (std::abs(t1 - t2) > options.eps * t1) continue;
                    const double cosang = std::clamp(dot(n1, n2), -1.0, 1.0);
                    const double ang = std::acos(cosang);
                    if (ang >= options.min_angle) best = std::max(best, ang);
                }
                if (best >= 0.0) out.push_back(MedialPoint{q, d1, best});
            }
    return out;
}

std::vector<MedialPoint> simplify_mat(std::span<const MedialPoint> points, double angle_floor) {
    if (!(angle_floor >= 0.0 && angle_floor <= std::numbers::pi))
        fail(ErrorCode::parameter, "angle_floor must lie in [0, pi]");
    std::vector<MedialPoint> out;
    for (const auto& p : points)
        if (p.separation_angle >= angle_floor) out.push_back(p);
    return out;
}

double reconstruct_volume(std::span<const SkeletonBall> balls, std::size_t resolution) {
    if (balls.empty()) fail(ErrorCode::empty_input, "volume of zero balls");
    if (resolution < 16) fail(ErrorCode::parameter, "volume resolution must be at least 16");
    Point3 lo{INFINITY, INFINITY, INFINITY}, hi{-INFINITY, -INFINITY, -INFINITY};
    for (const auto& b : balls) {
        if (!is_finite(b.center) || !std::isfinite(b.radius) || b.radius < 0.0)
            fail(ErrorCode::domain, "ball with invalid centre or radius");
        lo = Point3{std::min(lo.x, b.center.x - b.radius), std::min(lo.y, b.center.y - b.radius),
                    std::min(lo.z, b.center.z - b.radius)};
        hi = Point3{std::max(hi.x, b.center.x + b.radius), std::max(hi.y, b.center.y + b.radius),
                    std::max(hi.z, b.center.z + b.radius)};
    }
    const Point3 ext = hi - lo;
    const double longest = std::max({ext.x, ext.y, ext.z});
    if (!(longest > 0.0)) return 0.0;
    const double h = longest / static_cast<double>(resolution);
    const std::size_t nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ext.x / h - 1e-9)));
    const std::size_t ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ext.y / h - 1e-9)));

    // Chord intervals per column, then union length.
    std::vector<std::vector<std::pair<double, double>>> columns(nx * ny);
    for (const auto& b : balls) {
        if (b.radius <= 0.0) continue;
        const auto i0 = static_cast<long>(std::floor((b.center.x - b.radius - lo.x) / h));
        const auto i1 = static_cast<long>(std::ceil((b.center.x + b.radius - lo.x) / h));
        const auto j0 = static_cast<long>(std::floor((b.center.y - b.radius - lo.y) / h));
        const auto j1 = static_cast<long>(std::ceil((b.center.y + b.radius - lo.y) / h));
        for (long j = std::max(0L, j0); j <= std::min<long>(ny - 1, j1); ++j)
            for (long i = std::max(0L, i0); i <= std::min<long>(nx - 1, i1); ++i) {
                const double x = lo.x + (static_cast<double>(i) + 0.5) * h - b.center.x;
                const double y = lo.y + (static_cast<double>(j) + 0.5) * h - b.center.y;
                const double s = b.radius * b.radius - x * x - y * y;
                if (s <= 0.0) continue;
                const double half = std::sqrt(s);
                columns[j * nx + i].emplace_back(b.center.z - half, b.center.z + half);
            }
    }
    double total = 0.0;
    for (auto& col : columns) {
        if (col.empty()) continue;
        std::sort(col.begin(), col.end());
        double start = col[0].first, end = col[0].second, len = 0.0;
        for (std::size_t t = 1; t < col.size(); ++t) {
            if (col[t].first > end) {
                len += end - start;
                start = col[t].first;
                end = col[t].second;
            } else {
                end = std::max(end, col[t].second);
            }
        }
        total += len + (end - start);
    }
    return total * h * h;
}

double vol_pct(double v_recon, double v_gt) {
    if (!(v_gt > 0.0)) fail(ErrorCode::domain, "vol_pct reference volume must be positive");
    if (!(v_recon >= 0.0)) fail(ErrorCode::domain, "vol_pct volume must be nonnegative");
    return std::abs(v_recon - v_gt) / v_gt;
}

std::vector<SkeletonBall> to_balls(std::span<const MedialPoint> points) {
    std::vector<SkeletonBall> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(SkeletonBall{p.position, p.radius});
    return out;
}

}  // namespace skelmorph
