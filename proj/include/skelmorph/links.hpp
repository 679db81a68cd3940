#pragma once

// Skeleton mesh connectivity: geometric priors fix some adjacency entries, a
// two-layer graph auto-encoder predicts the rest.

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

// Dense symmetric n x n boolean matrix, row-major.
struct Adjacency {
    std::size_t n = 0;
    std::vector<std::uint8_t> bits;

    Adjacency() = default;
    explicit Adjacency(std::size_t n_) : n(n_), bits(n_ * n_, 0) {}
    bool operator()(std::size_t i, std::size_t j) const noexcept { return bits[i * n + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v = true) noexcept {
        bits[i * n + j] = bits[j * n + i] = v ? 1 : 0;
    }
    std::size_t edge_count() const noexcept;
    // (i, j) with i < j, row-major.
    std::vector<std::pair<std::size_t, std::size_t>> edges() const;
    friend bool operator==(const Adjacency&, const Adjacency&) = default;
};

struct AdjacencyInit {
    Adjacency known_edges;  // known-true entries
    Adjacency known_mask;   // entries whose label is trusted
    std::size_t size() const noexcept { return known_edges.n; }
};

struct LinkPrediction {
    std::size_t n = 0;
    std::vector<double> probabilities;  // n x n, symmetric
    double threshold = 0.5;
    double operator()(std::size_t i, std::size_t j) const noexcept { return probabilities[i * n + j]; }
};

// Per-ball [cx, cy, cz, r, prior degree, mean spoke length, surface count].
struct NodeFeatures {
    ad::Tensor values;  // n x 7
    static constexpr std::size_t width = 7;
};

// Prior A: overlapping spheres. Prior B: mutual k-nearest centres. Pairs with
// neither prior and |ci - cj| > 3 (ri + rj) are known-false.
AdjacencyInit init_adjacency(std::span<const SkeletonBall> balls, std::size_t k = 2);

// Mean spoke length is the mean distance from a ball's centre to the surface
// samples whose nearest centre it is (the radius when it has none). The
// surface count is the number of samples whose weight row peaks at the ball.
// Without a surface both fall back to (radius, 0).
NodeFeatures node_features(std::span<const SkeletonBall> balls, const AdjacencyInit& init,
                           const PointCloud* surface = nullptr, const ad::Tensor* weights = nullptr);

struct GaeConfig {
    std::size_t epochs = 200;
    std::size_t hidden1 = 16;
    std::size_t hidden2 = 8;
    double learning_rate = 0.01;
    bool standardize = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GaeResult {
    LinkPrediction prediction;
    std::vector<double> loss_trace;  // MBCE before each epoch's step
};

// D^-1/2 (A + I) D^-1/2 for the known-true edges.
ad::Tensor normalized_adjacency(const Adjacency& a);

// Masked balanced cross-entropy over the trusted i < j entries of a logit
// matrix: positives and negatives each carry half the weight.
ad::Var mbce_loss(ad::Var logits, const AdjacencyInit& init);

GaeResult gae_train(const NodeFeatures& features, const AdjacencyInit& init, const GaeConfig& cfg = {});

// Edge iff known-true, or unknown with probability >= threshold. With
// ensure_connected, components are joined by the shortest cross-component
// centre distances (Kruskal).
Adjacency threshold_links(const LinkPrediction& pred, const AdjacencyInit& init, bool ensure_connected,
                          std::span<const SkeletonBall> balls = {});

struct SkeletonMesh {
    std::vector<SkeletonBall> balls;
    Adjacency adjacency;
};

// "n_balls n_edges", then "x y z r" lines, then "i j" lines.
std::string format_mesh(const SkeletonMesh& mesh);
SkeletonMesh parse_mesh(std::string_view text);
SkeletonMesh load_mesh(const std::filesystem::path& path);

}  // namespace skelmorph
