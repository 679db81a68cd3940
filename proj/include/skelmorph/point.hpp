#pragma once

#include <cmath>

namespace skelmorph {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Point3& operator+=(const Point3& o) noexcept { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Point3& operator-=(const Point3& o) noexcept { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Point3& operator*=(double s) noexcept { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Point3 operator+(Point3 a, const Point3& b) noexcept { return a += b; }
    friend constexpr Point3 operator-(Point3 a, const Point3& b) noexcept { return a -= b; }
    friend constexpr Point3 operator*(Point3 a, double s) noexcept { return a *= s; }
    friend constexpr Point3 operator*(double s, Point3 a) noexcept { return a *= s; }
    friend constexpr Point3 operator-(const Point3& a) noexcept { return {-a.x, -a.y, -a.z}; }
    friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

constexpr double dot(const Point3& a, const Point3& b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Point3 cross(const Point3& a, const Point3& b) noexcept {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Evaluated as ((dx*dx + dy*dy) + dz*dz); the SIMD kernels use the same order.
inline double squared_distance(const Point3& a, const Point3& b) noexcept {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) noexcept { return std::sqrt(squared_distance(a, b)); }

inline double norm(const Point3& a) noexcept { return std::sqrt(dot(a, a)); }

inline bool is_finite(const Point3& p) noexcept {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

}  // namespace skelmorph
