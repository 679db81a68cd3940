#pragma once

// Skeleton balls as convex combinations of surface samples, fitted by
// gradient descent on the combination logits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelmorph/autodiff.hpp"
#include "skelmorph/geometry.hpp"
#include "skelmorph/skeleton.hpp"

namespace skelmorph {

// How each point-to-sphere residual (distance minus radius) enters the loss.
// absolute: |residual|, a reconstruction error that vanishes on the exact
// medial balls. signed: the residual itself, which rewards oversized balls.
enum class ResidualMode { absolute, signed_ };

ResidualMode parse_residual_mode(std::string_view name);
std::string_view to_string(ResidualMode mode) noexcept;

struct SkeletonOptConfig {
    std::size_t n_skeleton_points = 64;
    std::size_t iterations = 1500;
    double learning_rate = 0.01;
    double lambda_r = 0.3;
    double lambda_n = 0.1;
    // Sphere samples per ball; 0 picks ceil(M' / N) so that the sphere
    // samples match the surface samples in number (16 at M' = 1024, N = 64).
    std::size_t k_s = 0;
    ResidualMode residual = ResidualMode::absolute;
    std::uint64_t seed = 0;

    std::size_t sphere_samples(std::size_t m) const;

    void validate() const;
};

// M' x N logits; weights are their column softmax.
struct WeightMatrix {
    ad::Tensor logits;
    ad::Tensor weights() const;
};

// --- plain evaluation -------------------------------------------------------

// C = W^T P
std::vector<Point3> compute_centers(const ad::Tensor& weights, std::span<const Point3> points);
// R = W^T D, D_i = min_c |p_i - c|
std::vector<double> compute_radii(const ad::Tensor& weights, std::span<const Point3> points,
                                  std::span<const Point3> centers);
std::vector<SkeletonBall> balls_from_weights(const ad::Tensor& weights, std::span<const Point3> points);

// k unit directions on a spherical Fibonacci lattice.
std::vector<Point3> fibonacci_sphere(std::size_t k);
// k_s samples per ball, ball-major.
PointCloud sample_sphere_points(std::span<const SkeletonBall> balls, std::size_t k_s);

double loss_sampling(std::span<const Point3> t, std::span<const Point3> p);
double loss_point_to_sphere(std::span<const Point3> p, std::span<const SkeletonBall> balls,
                            ResidualMode mode = ResidualMode::absolute);
double loss_radius(std::span<const SkeletonBall> balls);
double loss_norm(const PointCloud& p, std::span<const SkeletonBall> balls);

// --- tape versions ----------------------------------------------------------
// points (M x 3), centers (N x 3), radii (N x 1). Nearest correspondences are
// found on the current values and enter as constant gather indices.

ad::Var tensor_of(ad::Tape& tape, std::span<const Point3> points, bool variable = false);
std::vector<Point3> points_of(const ad::Tensor& t);

ad::Var tape_centers(ad::Var weights, ad::Var points);
ad::Var tape_radii(ad::Var weights, ad::Var points, ad::Var centers);
// Sphere samples T = c_j + r_j u_k for the directions (k_s x 3).
ad::Var tape_sphere_samples(ad::Var centers, ad::Var radii, const ad::Tensor& directions);
ad::Var tape_loss_sampling(ad::Var t, ad::Var points);
ad::Var tape_loss_point_to_sphere(ad::Var points, ad::Var centers, ad::Var radii,
                                  ResidualMode mode = ResidualMode::absolute);
ad::Var tape_loss_radius(ad::Var radii);
ad::Var tape_loss_norm(ad::Var points, ad::Var normals, ad::Var centers);

// Fibonacci directions as a (k_s x 3) tensor.
ad::Tensor direction_tensor(std::size_t k_s);

struct LossTerms {
    ad::Var sampling, point_to_sphere, radius, norm, total;
};

// Full objective from logits: L_s + L_p + lambda_r L_r + lambda_n L_n.
LossTerms skeleton_objective(ad::Var logits, const PointCloud& cloud, const SkeletonOptConfig& cfg);

// --- optimization -----------------------------------------------------------

struct LossRecord {
    double total = 0.0, sampling = 0.0, point_to_sphere = 0.0, radius = 0.0, norm = 0.0;
};

struct SkeletonResult {
    std::vector<SkeletonBall> balls;
    WeightMatrix weights;
    std::vector<LossRecord> trace;  // one entry per iteration, before its step
};

// Seeds column j at the j-th farthest-point sample: Gaussian logits
// (sigma 0.01) plus log(M') on that row.
WeightMatrix initial_logits(std::span<const Point3> points, std::size_t n, std::uint64_t seed);

// Expects a cloud normalized to the unit cube, with normals.
SkeletonResult optimize_skeleton(const PointCloud& cloud, const SkeletonOptConfig& cfg);

// --- text formats -------------------------------------------------------------

// One "x y z r" line per ball.
std::string format_skeleton(std::span<const SkeletonBall> balls);
std::vector<SkeletonBall> parse_skeleton(std::string_view text);
std::vector<SkeletonBall> load_skeleton(const std::filesystem::path& path);
// Rows = surface samples, columns = balls.
std::string format_weights_csv(const ad::Tensor& weights);

}  // namespace skelmorph
