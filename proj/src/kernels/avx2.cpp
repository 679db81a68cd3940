#include "skelmorph/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <limits>

// Compiled for baseline x86-64; the functions opt in to AVX2 individually and
// are only reached through the runtime dispatch in dispatch.cpp. FMA is left
// off so every lane rounds exactly like the scalar reference.
#define SKELMORPH_AVX2 __attribute__((target("avx2")))

namespace skelmorph::kernels::avx2 {

SKELMORPH_AVX2
void nearest(std::span<const Point3> queries, const PointsSoA& refs,
             std::span<std::uint32_t> index, std::span<double> sq_dist) {
    const std::size_t nr = refs.size();
    const std::size_t body = nr & ~std::size_t{3};
    const double* rx = refs.x.data();
    const double* ry = refs.y.data();
    const double* rz = refs.z.data();
    const double inf = std::numeric_limits<double>::infinity();

    for (std::size_t q = 0; q < queries.size(); ++q) {
        const Point3 p = queries[q];
        const __m256d px = _mm256_set1_pd(p.x);
        const __m256d py = _mm256_set1_pd(p.y);
        const __m256d pz = _mm256_set1_pd(p.z);
        __m256d best = _mm256_set1_pd(inf);
        // Lane indices carried as doubles; exact for any realistic size.
        __m256d best_i = _mm256_setzero_pd();
        __m256d lane_i = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
        const __m256d step = _mm256_set1_pd(4.0);

        for (std::size_t r = 0; r < body; r += 4) {
            const __m256d dx = _mm256_sub_pd(px, _mm256_loadu_pd(rx + r));
            const __m256d dy = _mm256_sub_pd(py, _mm256_loadu_pd(ry + r));
            const __m256d dz = _mm256_sub_pd(pz, _mm256_loadu_pd(rz + r));
            const __m256d d2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                             _mm256_mul_pd(dz, dz));
            const __m256d lt = _mm256_cmp_pd(d2, best, _CMP_LT_OQ);
            best = _mm256_blendv_pd(best, d2, lt);
            best_i = _mm256_blendv_pd(best_i, lane_i, lt);
            lane_i = _mm256_add_pd(lane_i, step);
        }

        alignas(32) double lane_best[4];
        alignas(32) double lane_idx[4];
        _mm256_store_pd(lane_best, best);
        _mm256_store_pd(lane_idx, best_i);

        double b = inf;
        std::uint32_t bi = 0;
        for (int l = 0; l < 4; ++l) {
            const auto li = static_cast<std::uint32_t>(lane_idx[l]);
            if (lane_best[l] < b || (lane_best[l] == b && li < bi)) {
                b = lane_best[l];
                bi = li;
            }
        }
        for (std::size_t r = body; r < nr; ++r) {
            const double dx = p.x - rx[r];
            const double dy = p.y - ry[r];
            const double dz = p.z - rz[r];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < b) {
                b = d2;
                bi = static_cast<std::uint32_t>(r);
            }
        }
        index[q] = bi;
        sq_dist[q] = b;
    }
}

SKELMORPH_AVX2
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t body = n & ~std::size_t{3};
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = a[i * k + p];
            if (s == 0.0) continue;
            const double* brow = b + p * n;
            const __m256d vs = _mm256_set1_pd(s);
            std::size_t j = 0;
            for (; j < body; j += 4) {
                const __m256d prod = _mm256_mul_pd(vs, _mm256_loadu_pd(brow + j));
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), prod));
            }
            for (; j < n; ++j) crow[j] += s * brow[j];
        }
    }
}

SKELMORPH_AVX2
double sq_dist(const double* a, const double* b, std::size_t d) {
    const std::size_t body = d & ~std::size_t{3};
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i < body; i += 4) {
        const __m256d t = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(t, t));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

}  // namespace skelmorph::kernels::avx2

#endif
