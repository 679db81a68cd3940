#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "skelmorph/geometry.hpp"
#include "skelmorph/skeleton.hpp"

namespace skelmorph {

// crescent is a bent tube (partial torus with hemispherical caps), the
// concave fixture for the inside-shape checks.
enum class ShapeKind { sphere, capsule, ellipsoid, torus, ybranch, crescent };

ShapeKind parse_shape_kind(std::string_view name);
std::string_view to_string(ShapeKind kind) noexcept;

// Dimensions by kind:
//   sphere     radius
//   capsule    length (cylinder part, along z), radius
//   ellipsoid  semi_axes (x, y, z)
//   torus      major_radius (circle in z=0), radius (tube)
//   ybranch    length (each of three arms from the origin), radius
//   crescent   major_radius, radius, arc_angle (centred on +x, in z=0)
struct SynthShapeSpec {
    ShapeKind kind = ShapeKind::sphere;
    double radius = 1.0;
    double length = 2.0;
    Point3 semi_axes{1.0, 0.7, 0.4};
    double major_radius = 1.0;
    double arc_angle = 4.0 * std::numbers::pi / 3.0;
    std::size_t count = 1000;

    static SynthShapeSpec defaults(ShapeKind kind);
    void validate() const;
};

// `count` surface points, uniform by area, with analytic outward normals.
PointCloud synth_shape(const SynthShapeSpec& spec, std::uint64_t seed);

// Dense samples of the analytic medial axis (curve skeleton) of tubular
// kinds and the centre of a sphere. Ellipsoids have a medial surface and are
// rejected.
std::vector<Point3> analytic_medial_axis(const SynthShapeSpec& spec, std::size_t samples_per_unit = 200);

// Inside test against the analytic shape.
bool analytic_inside(const SynthShapeSpec& spec, const Point3& p);

// Balls spread along the analytic medial axis with the local inscribed radius,
// centres jittered by `jitter` (absolute). Used to build skeleton-graph
// fixtures without running the optimizer.
std::vector<SkeletonBall> analytic_skeleton_balls(const SynthShapeSpec& spec, std::size_t n_balls, double jitter,
                                                  std::uint64_t seed);

// Ybranch arm directions (stem, left, right) in the x-z plane.
std::vector<Point3> ybranch_directions();

}  // namespace skelmorph
