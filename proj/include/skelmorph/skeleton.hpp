#pragma once

#include <vector>

#include "skelmorph/point.hpp"

namespace skelmorph {

// One medial sphere: centre and radius.
struct SkeletonBall {
    Point3 center;
    double radius = 0.0;

    friend bool operator==(const SkeletonBall&, const SkeletonBall&) = default;
};

std::vector<Point3> centers_of(const std::vector<SkeletonBall>& balls);

}  // namespace skelmorph
