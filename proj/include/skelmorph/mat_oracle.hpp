#pragma once

// Brute-force medial axis on a voxel lattice. Used as ground truth for the
// optimizer and for volume comparisons.

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "skelmorph/geometry.hpp"
#include "skelmorph/skeleton.hpp"
#include "skelmorph/spatial.hpp"

namespace skelmorph {

struct InteriorGrid {
    Point3 origin;
    double spacing = 0.0;
    std::size_t nx = 0, ny = 0, nz = 0;
    std::vector<std::uint8_t> occupancy;  // x fastest

    std::size_t size() const noexcept { return occupancy.size(); }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept { return (k * ny + j) * nx + i; }
    Point3 point(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return origin + Point3{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)} * spacing;
    }
    bool inside(std::size_t i, std::size_t j, std::size_t k) const noexcept { return occupancy[index(i, j, k)] != 0; }
    std::size_t inside_count() const noexcept;
};

struct MedialPoint {
    Point3 position;
    double radius = 0.0;
    double separation_angle = 0.0;
};

// Inside/outside from the sign of the nearest sample's normal. Points with
// dot(n, q - p) == 0 count as outside.
class InsideTest {
public:
    explicit InsideTest(const PointCloud& surface);
    bool operator()(const Point3& q) const;
    const PointCloud& surface() const noexcept { return *surface_; }
    const KdTree& tree() const noexcept { return tree_; }

private:
    const PointCloud* surface_;
    KdTree tree_;
};

struct GridOptions {
    std::size_t resolution = 64;  // lattice points along the longest bounding-box axis
    std::size_t pad = 1;          // extra lattice layers on every side
};

InteriorGrid interior_grid(const PointCloud& cloud, const GridOptions& options = {});

struct MedialOptions {
    double eps = 0.05;
    double min_angle = std::numbers::pi / 6.0;
    // Partners closer than this many median sample spacings are neighbouring
    // samples of one surface patch, not two sides of the shape.
    double min_chord_spacings = 3.0;
};

// Interior lattice points q with two near-equidistant closest surface
// directions. Each sample stands for its tangent plane: the nearest sample p1
// of q gives the plane distance t1 = n1 . (p1 - q) and spoke direction n1. A
// face neighbour whose nearest sample p2 differs supplies the second
// candidate (t2 = n2 . (p2 - q), n2) when the two spokes diverge across the
// step (n1 points away from the neighbour, n2 away from q). q is medial
// when |t1 - t2| <= eps * t1,
// angle(n1, n2) >= min_angle and |p1 - p2| >= min_chord_spacings times the
// median sample spacing. separation_angle is the largest such angle and the
// radius is the Euclidean distance to p1.
std::vector<MedialPoint> medial_points(const InteriorGrid& grid, const PointCloud& surface,
                                       const MedialOptions& options = {});

// Keeps points with separation_angle >= angle_floor.
std::vector<MedialPoint> simplify_mat(std::span<const MedialPoint> points,
                                      double angle_floor = std::numbers::pi / 3.0);

// Volume of the union of balls. The lattice covers the balls' bounding box
// with `resolution` columns along its longest axis; each (x, y) column adds
// the exact length of its union of chord intervals.
double reconstruct_volume(std::span<const SkeletonBall> balls, std::size_t resolution = 64);

// |v_recon - v_gt| / v_gt
double vol_pct(double v_recon, double v_gt);

std::vector<SkeletonBall> to_balls(std::span<const MedialPoint> points);

}  // namespace skelmorph
