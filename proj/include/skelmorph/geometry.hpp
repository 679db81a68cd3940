#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "skelmorph/point.hpp"

namespace skelmorph {

// Surface samples with optional unit normals (same length as points when set).
struct PointCloud {
    std::vector<Point3> points;
    std::vector<Point3> normals;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    bool has_normals() const noexcept { return !normals.empty(); }

    // Throws on non-finite coordinates, mismatched normal count, or normals
    // whose length is not 1 within 1e-6.
    void validate() const;
};

// p' = (p + translation) * scale
struct NormalizationTransform {
    Point3 translation;
    double scale = 1.0;

    Point3 apply(const Point3& p) const noexcept { return (p + translation) * scale; }
    Point3 invert(const Point3& p) const noexcept { return p * (1.0 / scale) - translation; }
    double apply_length(double len) const noexcept { return len * scale; }
};

struct SampleOptions {
    std::size_t neighbors = 8;   // k for the mean-neighbour-distance weight
    std::size_t restarts = 4;    // seeded farthest-point passes; best spread kept
    std::size_t refine_iterations = 100;
};

// Spatially uniform subsample of m points. Each pass starts from a point drawn
// with probability proportional to its mean distance to the k nearest
// neighbours, grows the set by farthest-point selection, then swaps crowded
// picks for better-spaced candidates. Deterministic for a given seed.
PointCloud weighted_sample(const PointCloud& cloud, std::size_t m, std::uint64_t seed,
                           const SampleOptions& options = {});

// Normals from the smallest-eigenvalue direction of each point's k-NN
// covariance, oriented consistently along a minimum spanning tree of the k-NN
// graph and flipped so most normals point away from the centroid.
PointCloud estimate_normals(const PointCloud& cloud, std::size_t k = 16);

// Centres the bounding box at the origin and scales uniformly so the largest
// absolute coordinate is exactly 1.
std::pair<PointCloud, NormalizationTransform> normalize_to_unit_cube(const PointCloud& cloud);

PointCloud apply_transform(const PointCloud& cloud, const NormalizationTransform& t);

enum class Aggregation { sum, mean };

// Sum (or per-set mean) of nearest distances in both directions.
double chamfer_distance(std::span<const Point3> a, std::span<const Point3> b,
                        Aggregation aggregation = Aggregation::sum);

double hausdorff_distance(std::span<const Point3> a, std::span<const Point3> b);

inline double chamfer_distance(const PointCloud& a, const PointCloud& b,
                               Aggregation aggregation = Aggregation::sum) {
    return chamfer_distance(a.points, b.points, aggregation);
}

inline double hausdorff_distance(const PointCloud& a, const PointCloud& b) {
    return hausdorff_distance(a.points, b.points);
}

Point3 centroid(std::span<const Point3> points);

struct Bounds {
    Point3 lo, hi;
};

Bounds bounding_box(std::span<const Point3> points);

}  // namespace skelmorph
