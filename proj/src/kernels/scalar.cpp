#include "skelmorph/kernels.hpp"

#include <limits>

namespace skelmorph::kernels {

PointsSoA::PointsSoA(std::span<const Point3> points) {
    x.reserve(points.size());
    y.reserve(points.size());
    z.reserve(points.size());
    for (const auto& p : points) {
        x.push_back(p.x);
        y.push_back(p.y);
        z.push_back(p.z);
    }
}

namespace scalar {

void nearest(std::span<const Point3> queries, const PointsSoA& refs,
             std::span<std::uint32_t> index, std::span<double> sq_dist) {
    const std::size_t nr = refs.size();
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const Point3 p = queries[q];
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_i = 0;
        for (std::size_t r = 0; r < nr; ++r) {
            const double dx = p.x - refs.x[r];
            const double dy = p.y - refs.y[r];
            const double dz = p.z - refs.z[r];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < best) {
                best = d2;
                best_i = static_cast<std::uint32_t>(r);
            }
        }
        index[q] = best_i;
        sq_dist[q] = best;
    }
}

void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = a[i * k + p];
            if (s == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
        }
    }
}

double sq_dist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

}  // namespace scalar
}  // namespace skelmorph::kernels
