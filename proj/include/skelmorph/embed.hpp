#pragma once

// Graph-level embeddings by mutual-information maximisation between node
// (patch) and pooled (global) representations, the adjacency-spectrum
// baseline, and the clustering protocols used to score both.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skelmorph/autodiff.hpp"
#include "skelmorph/random.hpp"
#include "skelmorph/skelgraph.hpp"

namespace skelmorph {

enum class Pooling { sum, mean };

Pooling parse_pooling(std::string_view name);
std::string_view to_string(Pooling p) noexcept;

struct EmbedConfig {
    std::vector<std::size_t> gcn_widths{32, 32, 36};
    Pooling pooling = Pooling::sum;
    std::vector<std::size_t> disc_widths{64, 64, 64};
    std::size_t epochs = 100;
    double learning_rate = 0.001;
    std::size_t negatives_per_positive = 1;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t global_width() const;  // sum of gcn widths
};

inline constexpr std::size_t kNodeInputWidth = 5;

// Per node [x, y, z, radius, degree].
ad::Tensor node_inputs(const SkeletonGraph& g);

// GCN weights (no bias) then phi and psi as (W, b) for each of three layers.
struct EncoderParams {
    std::vector<ad::Tensor> gcn;
    std::vector<ad::Tensor> phi;
    std::vector<ad::Tensor> psi;

    static EncoderParams init(const EmbedConfig& cfg, std::uint64_t seed);
    std::vector<ad::Tensor*> all();
};

struct Encoding {
    ad::Tensor patches;  // n x global_width
    ad::Tensor global;   // 1 x global_width
};

struct TapeEncoding {
    ad::Var patches;
    ad::Var global;
};

// relu(A_hat H W) per layer; patches concatenate every layer's output.
TapeEncoding tape_encode(ad::Tape& tape, const SkeletonGraph& g, std::span<const ad::Var> gcn, Pooling pooling);
Encoding encode(const SkeletonGraph& g, const EncoderParams& params, const EmbedConfig& cfg);

// Three linear layers, relu after the first two; rows of x are inputs.
ad::Var tape_discriminator(ad::Var x, std::span<const ad::Var> layers);
double discriminator_score(std::span<const double> h, std::span<const double> H, const EncoderParams& params);

// mean(-sp(-T_pos)) - mean(-sp(-T_neg)), scores clamped to +-30.
ad::Var jsd_mi(ad::Var positive, ad::Var negative);
double jsd_mi(std::span<const double> positive, std::span<const double> negative);

inline constexpr double kScoreClamp = 30.0;

// Rows index patches (all graphs' nodes stacked in order), columns graphs.
struct PairBatch {
    std::vector<std::uint32_t> pos_patch, pos_graph;
    std::vector<std::uint32_t> neg_patch, neg_graph;
};

// One positive per node with its own graph; each is matched by
// `negatives_per_positive` patches drawn uniformly from the other graphs.
PairBatch sample_pairs(std::span<const std::size_t> graph_sizes, std::size_t negatives_per_positive, Random& rng);

struct InfoGraphResult {
    EncoderParams params;
    ad::Tensor globals;                   // graphs x global_width
    std::vector<double> objective_trace;  // estimator value before each step
};

InfoGraphResult infograph_train(std::span<const SkeletonGraph> graphs, const EmbedConfig& cfg);

// Eigenvalues of the weighted adjacency by cyclic Jacobi rotations, sorted
// descending, truncated or zero-padded to d.
std::vector<double> graph_spectrum(const SkeletonGraph& g, std::size_t d);
std::vector<double> symmetric_eigenvalues(const ad::Tensor& a);

using Vectors = std::vector<std::vector<double>>;

struct KMeansResult {
    std::vector<std::size_t> assignments;
    Vectors centers;
    double inertia = 0.0;
    std::vector<double> inertia_trace;  // after each Lloyd iteration
    std::size_t iterations = 0;
};

KMeansResult kmeanspp(const Vectors& vectors, std::size_t k, std::uint64_t seed, std::size_t max_iters = 300);

// Ties go to the lower index.
std::size_t assign_nearest_center(std::span<const double> v, const Vectors& centers);

// Modal label per cluster, ties to the smallest label. Empty clusters stay
// unset and are listed in `empty` (when given).
std::vector<std::optional<int>> majority_label(std::span<const std::size_t> assignments, std::span<const int> labels,
                                               std::size_t k, std::vector<std::size_t>* empty = nullptr);

// Fraction of vectors whose cluster's majority label equals their own.
double cluster_accuracy(const Vectors& vectors, std::span<const int> labels, std::size_t k, std::uint64_t seed);

ad::Tensor distance_matrix(const Vectors& reps);

struct InterIntra {
    std::vector<int> classes;                            // sorted
    std::vector<std::vector<std::optional<double>>> mean; // absent when undefined
};

InterIntra inter_intra(const ad::Tensor& distances, std::span<const int> labels);

enum class Linkage { single, average, complete };

Linkage parse_linkage(std::string_view name);

// Cluster ids follow the usual convention: leaves 0..n-1, the cluster made
// at step s gets id n + s.
struct Merge {
    std::size_t a = 0, b = 0;
    double height = 0.0;
    std::size_t size = 0;
};

std::vector<Merge> hierarchical_cluster(const ad::Tensor& distances, Linkage linkage);

Vectors rows_of(const ad::Tensor& t);

std::string embeddings_csv(std::span<const std::string> ids, const Vectors& reps);
std::string dendrogram_csv(std::span<const Merge> merges);
std::string matrix_csv(std::span<const std::string> ids, const ad::Tensor& m);

// Skeleton graphs of capsules (label 0) and ybranches (label 1) with varied
// size, built from analytic medial balls connected by the link priors.
struct GraphCorpus {
    std::vector<SkeletonGraph> graphs;
    std::vector<int> labels;
    std::vector<std::string> ids;
};

GraphCorpus synthetic_corpus(std::size_t per_class, std::uint64_t seed);

}  // namespace skelmorph
