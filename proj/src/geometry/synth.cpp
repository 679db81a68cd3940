#include "skelmorph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "skelmorph/error.hpp"
#include "skelmorph/random.hpp"

namespace skelmorph {

std::vector<Point3> centers_of(const std::vector<SkeletonBall>& balls) {
    std::vector<Point3> c;
    c.reserve(balls.size());
    for (const auto& b : balls) c.push_back(b.center);
    return c;
}

namespace {

using std::numbers::pi;

struct Segment {
    Point3 a, b;
};

Point3 random_direction(Random& rng) {
    for (;;) {
        const Point3 v{rng.normal(), rng.normal(), rng.normal()};
        const double n = norm(v);
        if (n > 1e-12) return v * (1.0 / n);
    }
}

double distance_to_segment(const Point3& p, const Segment& s) {
    const Point3 d = s.b - s.a;
    const double len2 = dot(d, d);
    double t = len2 > 0.0 ? dot(p - s.a, d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, s.a + d * t);
}

// Orthonormal pair perpendicular to unit vector `axis`.
std::pair<Point3, Point3> frame(const Point3& axis) {
    const Point3 helper = std::abs(axis.x) < 0.9 ? Point3{1, 0, 0} : Point3{0, 1, 0};
    Point3 u = cross(axis, helper);
    u *= 1.0 / norm(u);
    return {u, cross(axis, u)};
}

struct Surfel {
    Point3 p, n;
};

// Uniform-by-area sample on the surface of a capsule around segment s.
Surfel capsule_surfel(const Segment& s, double r, Random& rng) {
    const Point3 d = s.b - s.a;
    const double len = norm(d);
    const double side = 2.0 * pi * r * len;
    const double caps = 4.0 * pi * r * r;
    if (len > 0.0 && rng.uniform() * (side + caps) < side) {
        const Point3 axis = d * (1.0 / len);
        const auto [u, v] = frame(axis);
        const double theta = rng.uniform(0.0, 2.0 * pi);
        const Point3 n = u * std::cos(theta) + v * std::sin(theta);
        return {s.a + d * rng.uniform() + n * r, n};
    }
    const Point3 n = random_direction(rng);
    const Point3 axis = len > 0.0 ? d * (1.0 / len) : Point3{0, 0, 1};
    const Point3 c = dot(n, axis) >= 0.0 ? s.b : s.a;
    return {c + n * r, n};
}

// Tube of radius r around the circle of radius R in z=0, restricted to
// azimuth [theta0, theta0 + span).
Surfel tube_surfel(double R, double r, double theta0, double span, Random& rng) {
    const double theta = theta0 + span * rng.uniform();
    double phi = 0.0;
    for (;;) {
        phi = rng.uniform(0.0, 2.0 * pi);
        if (rng.uniform() * (R + r) <= R + r * std::cos(phi)) break;
    }
    const Point3 n{std::cos(theta) * std::cos(phi), std::sin(theta) * std::cos(phi), std::sin(phi)};
    const Point3 c{R * std::cos(theta), R * std::sin(theta), 0.0};
    return {c + n * r, n};
}

std::vector<Segment> ybranch_segments(const SynthShapeSpec& s) {
    std::vector<Segment> out;
    for (const auto& d : ybranch_directions()) out.push_back({Point3{}, d * s.length});
    return out;
}

double distance_to_arc(const Point3& p, double R, double arc) {
    const double theta = std::atan2(p.y, p.x);
    const double rho = std::hypot(p.x, p.y);
    if (std::abs(theta) <= arc / 2.0) return std::hypot(rho - R, p.z);
    const Point3 e1{R * std::cos(arc / 2.0), R * std::sin(arc / 2.0), 0.0};
    const Point3 e2{e1.x, -e1.y, 0.0};
    return std::min(distance(p, e1), distance(p, e2));
}

Surfel sample_one(const SynthShapeSpec& s, Random& rng) {
    switch (s.kind) {
        case ShapeKind::sphere: {
            const Point3 n = random_direction(rng);
            return {n * s.radius, n};
        }
        case ShapeKind::capsule:
            return capsule_surfel({{0, 0, -s.length / 2}, {0, 0, s.length / 2}}, s.radius, rng);
        case ShapeKind::ellipsoid: {
            const Point3 a = s.semi_axes;
            const double gmax = 1.0 / std::min({a.x, a.y, a.z});
            for (;;) {
                const Point3 u = random_direction(rng);
                const double g = std::sqrt((u.x / a.x) * (u.x / a.x) + (u.y / a.y) * (u.y / a.y) +
                                           (u.z / a.z) * (u.z / a.z));
                if (rng.uniform() * gmax > g) continue;
                const Point3 p{a.x * u.x, a.y * u.y, a.z * u.z};
                Point3 n{p.x / (a.x * a.x), p.y / (a.y * a.y), p.z / (a.z * a.z)};
                n *= 1.0 / norm(n);
                return {p, n};
            }
        }
        case ShapeKind::torus:
            return tube_surfel(s.major_radius, s.radius, 0.0, 2.0 * pi, rng);
        case ShapeKind::ybranch: {
            const auto segs = ybranch_segments(s);
            for (;;) {
                const std::size_t k = rng.index(segs.size());
                const Surfel f = capsule_surfel(segs[k], s.radius, rng);
                bool buried = false;
                for (std::size_t j = 0; j < segs.size() && !buried; ++j)
                    buried = j != k && distance_to_segment(f.p, segs[j]) < s.radius * (1.0 - 1e-9);
                if (!buried) return f;
            }
        }
        case ShapeKind::crescent: {
            const double R = s.major_radius, r = s.radius, arc = s.arc_angle;
            const double tube = 2.0 * pi * r * R * arc;
            const double caps = 4.0 * pi * r * r;
            if (rng.uniform() * (tube + caps) < tube) return tube_surfel(R, r, -arc / 2.0, arc, rng);
            const double end = rng.uniform() < 0.5 ? arc / 2.0 : -arc / 2.0;
            const Point3 c{R * std::cos(end), R * std::sin(end), 0.0};
            // outward tangent at the chosen end
            Point3 t{-std::sin(end), std::cos(end), 0.0};
            if (end < 0.0) t = -t;
            Point3 n = random_direction(rng);
            if (dot(n, t) < 0.0) n = n - t * (2.0 * dot(n, t));
            return {c + n * r, n};
        }
    }
    fail(ErrorCode::parameter, "unknown shape kind");
}

}  // namespace

ShapeKind parse_shape_kind(std::string_view name) {
    for (ShapeKind k : {ShapeKind::sphere, ShapeKind::capsule, ShapeKind::ellipsoid, ShapeKind::torus,
                        ShapeKind::ybranch, ShapeKind::crescent})
        if (to_string(k) == name) return k;
    fail(ErrorCode::parameter, "unknown shape kind '" + std::string(name) + "'");
}

std::string_view to_string(ShapeKind kind) noexcept {
    switch (kind) {
        case ShapeKind::sphere: return "sphere";
        case ShapeKind::capsule: return "capsule";
        case ShapeKind::ellipsoid: return "ellipsoid";
        case ShapeKind::torus: return "torus";
        case ShapeKind::ybranch: return "ybranch";
        case ShapeKind::crescent: return "crescent";
    }
    return "unknown";
}

std::vector<Point3> ybranch_directions() {
    const double s = std::sin(pi / 4.0), c = std::cos(pi / 4.0);
    return {{0.0, 0.0, -1.0}, {-s, 0.0, c}, {s, 0.0, c}};
}

SynthShapeSpec SynthShapeSpec::defaults(ShapeKind kind) {
    SynthShapeSpec s;
    s.kind = kind;
    switch (kind) {
        case ShapeKind::sphere: s.radius = 1.0; break;
        case ShapeKind::capsule: s.length = 2.0; s.radius = 0.5; break;
        case ShapeKind::ellipsoid: s.semi_axes = {1.0, 0.7, 0.4}; break;
        case ShapeKind::torus: s.major_radius = 1.0; s.radius = 0.25; break;
        case ShapeKind::ybranch: s.length = 1.0; s.radius = 0.2; break;
        case ShapeKind::crescent: s.major_radius = 1.0; s.radius = 0.3; s.arc_angle = 4.0 * pi / 3.0; break;
    }
    return s;
}

void SynthShapeSpec::validate() const {
    if (count == 0) fail(ErrorCode::parameter, "shape sample count must be positive");
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::parameter, std::string(what) + " must be positive");
    };
    switch (kind) {
        case ShapeKind::sphere: positive(radius, "radius"); break;
        case ShapeKind::capsule:
        case ShapeKind::ybranch:
            positive(radius, "radius");
            positive(length, "length");
            break;
        case ShapeKind::ellipsoid:
            positive(semi_axes.x, "semi-axis x");
            positive(semi_axes.y, "semi-axis y");
            positive(semi_axes.z, "semi-axis z");
            break;
        case ShapeKind::torus:
            positive(radius, "radius");
            positive(major_radius, "major radius");
            if (radius >= major_radius) fail(ErrorCode::parameter, "torus tube radius must be below the major radius");
            break;
        case ShapeKind::crescent:
            positive(radius, "radius");
            positive(major_radius, "major radius");
            positive(arc_angle, "arc angle");
            if (radius >= major_radius) fail(ErrorCode::parameter, "crescent tube radius must be below the major radius");
            if (arc_angle >= 2.0 * pi) fail(ErrorCode::parameter, "crescent arc angle must be below 2*pi");
            break;
    }
}

PointCloud synth_shape(const SynthShapeSpec& spec, std::uint64_t seed) {
    spec.validate();
    Random rng(seed);
    PointCloud cloud;
    cloud.points.reserve(spec.count);
    cloud.normals.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const Surfel f = sample_one(spec, rng);
        cloud.points.push_back(f.p);
        cloud.normals.push_back(f.n);
    }
    return cloud;
}

namespace {

// Medial curve as a polyline list, with arc-length parametrisation helpers.
std::vector<std::vector<Point3>> medial_polylines(const SynthShapeSpec& s) {
    constexpr int kArcSteps = 256;
    switch (s.kind) {
        case ShapeKind::sphere: return {{Point3{}}};
        case ShapeKind::capsule: return {{{0, 0, -s.length / 2}, {0, 0, s.length / 2}}};
        case ShapeKind::ybranch: {
            std::vector<std::vector<Point3>> out;
            for (const auto& d : ybranch_directions()) out.push_back({Point3{}, d * s.length});
            return out;
        }
        case ShapeKind::torus:
        case ShapeKind::crescent: {
            const bool full = s.kind == ShapeKind::torus;
            const double span = full ? 2.0 * pi : s.arc_angle;
            const double start = full ? 0.0 : -s.arc_angle / 2.0;
            std::vector<Point3> line;
            for (int i = 0; i <= kArcSteps; ++i) {
                const double t = start + span * i / kArcSteps;
                line.push_back({s.major_radius * std::cos(t), s.major_radius * std::sin(t), 0.0});
            }
            return {line};
        }
        case ShapeKind::ellipsoid:
            break;
    }
    fail(ErrorCode::parameter, "shape kind has no curve skeleton: " + std::string(to_string(s.kind)));
}

double polyline_length(const std::vector<Point3>& line) {
    double len = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) len += distance(line[i - 1], line[i]);
    return len;
}

Point3 polyline_at(const std::vector<Point3>& line, double arc) {
    for (std::size_t i = 1; i < line.size(); ++i) {
        const double seg = distance(line[i - 1], line[i]);
        if (arc <= seg || i + 1 == line.size()) {
            const double t = seg > 0.0 ? std::clamp(arc / seg, 0.0, 1.0) : 0.0;
            return line[i - 1] + (line[i] - line[i - 1]) * t;
        }
        arc -= seg;
    }
    return line.front();
}

}  // namespace

std::vector<Point3> analytic_medial_axis(const SynthShapeSpec& spec, std::size_t samples_per_unit) {
    spec.validate();
    std::vector<Point3> out;
    for (const auto& line : medial_polylines(spec)) {
        const double len = polyline_length(line);
        const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len * samples_per_unit)));
        if (line.size() == 1 || len == 0.0) {
            out.push_back(line.front());
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) out.push_back(polyline_at(line, len * static_cast<double>(i) / n));
    }
    return out;
}

bool analytic_inside(const SynthShapeSpec& s, const Point3& p) {
    switch (s.kind) {
        case ShapeKind::sphere: return norm(p) < s.radius;
        case ShapeKind::capsule: return distance_to_segment(p, {{0, 0, -s.length / 2}, {0, 0, s.length / 2}}) < s.radius;
        case ShapeKind::ellipsoid: {
            const Point3 a = s.semi_axes;
            return (p.x / a.x) * (p.x / a.x) + (p.y / a.y) * (p.y / a.y) + (p.z / a.z) * (p.z / a.z) < 1.0;
        }
        case ShapeKind::torus: return std::hypot(std::hypot(p.x, p.y) - s.major_radius, p.z) < s.radius;
        case ShapeKind::ybranch:
            for (const auto& seg : ybranch_segments(s))
                if (distance_to_segment(p, seg) < s.radius) return true;
            return false;
        case ShapeKind::crescent: return distance_to_arc(p, s.major_radius, s.arc_angle) < s.radius;
    }
    return false;
}

std::vector<SkeletonBall> analytic_skeleton_balls(const SynthShapeSpec& spec, std::size_t n_balls, double jitter,
                                                  std::uint64_t seed) {
    spec.validate();
    if (n_balls == 0) fail(ErrorCode::parameter, "need at least one ball");
    Random rng(seed);
    const double r = spec.radius;
    const auto lines = medial_polylines(spec);
    std::vector<double> lengths;
    double total = 0.0;
    for (const auto& l : lines) {
        lengths.push_back(polyline_length(l));
        total += lengths.back();
    }
    std::vector<SkeletonBall> balls;
    balls.reserve(n_balls);
    if (total == 0.0) {
        for (std::size_t i = 0; i < n_balls; ++i) balls.push_back({lines.front().front(), r});
    } else {
        // Evenly spaced by arc length over the concatenated polylines.
        const bool closed = spec.kind == ShapeKind::torus;
        const double step = closed ? total / static_cast<double>(n_balls)
                                   : (n_balls > 1 ? total / static_cast<double>(n_balls - 1) : 0.0);
        for (std::size_t i = 0; i < n_balls; ++i) {
            double arc = step * static_cast<double>(i);
            std::size_t li = 0;
            while (li + 1 < lines.size() && arc > lengths[li]) arc -= lengths[li++];
            balls.push_back({polyline_at(lines[li], std::min(arc, lengths[li])), r});
        }
    }
    for (auto& b : balls)
        b.center += Point3{rng.normal(0.0, jitter), rng.normal(0.0, jitter), rng.normal(0.0, jitter)};
    return balls;
}

}  // namespace skelmorph
