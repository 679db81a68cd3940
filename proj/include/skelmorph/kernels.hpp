#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant selected at runtime. Nearest-neighbour and GEMM variants are
// bit-identical to the scalar path; sq_dist agrees to rounding only.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "skelmorph/point.hpp"

namespace skelmorph::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

// Structure-of-arrays copy of a point set, the layout the kernels stream over.
struct PointsSoA {
    std::vector<double> x, y, z;

    PointsSoA() = default;
    explicit PointsSoA(std::span<const Point3> points);
    std::size_t size() const noexcept { return x.size(); }
};

struct KernelTable {
    Isa isa;
    // For every query, the index of the nearest reference (lowest index on
    // ties) and the squared distance to it. refs must be non-empty.
    void (*nearest)(std::span<const Point3> queries, const PointsSoA& refs,
                    std::span<std::uint32_t> index, std::span<double> sq_dist);
    // c(m x n) += a(m x k) * b(k x n), all row-major.
    void (*gemm_acc)(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n);
    // Sum of squared differences of two length-d vectors.
    double (*sq_dist)(const double* a, const double* b, std::size_t d);
};

bool supported(Isa isa) noexcept;

// Table for a specific ISA; throws Error(parameter) when the CPU lacks it.
const KernelTable& table(Isa isa);

// Best supported table. SKELMORPH_ISA=scalar in the environment forces the
// reference path.
const KernelTable& active();

namespace scalar {
void nearest(std::span<const Point3> queries, const PointsSoA& refs,
             std::span<std::uint32_t> index, std::span<double> sq_dist);
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t d);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void nearest(std::span<const Point3> queries, const PointsSoA& refs,
             std::span<std::uint32_t> index, std::span<double> sq_dist);
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t d);
}  // namespace avx2
#endif

}  // namespace skelmorph::kernels
