#pragma once

// Skeleton graphs and neuron morphometry: longest simple paths, trunk and
// branch extraction, SWC input.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelmorph/error.hpp"
#include "skelmorph/links.hpp"
#include "skelmorph/skeleton.hpp"

namespace skelmorph {

struct GraphEdge {
    std::uint32_t u = 0, v = 0;  // u < v
    double weight = 0.0;
};

class SkeletonGraph {
public:
    struct Arc {
        std::uint32_t to;
        double weight;
    };

    std::uint32_t add_node(const Point3& position, double radius);
    // Weight is the endpoint distance. Throws on self loops, duplicates and
    // coincident endpoints.
    void add_edge(std::uint32_t u, std::uint32_t v);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    const SkeletonBall& node(std::size_t i) const { return nodes_[i]; }
    const std::vector<GraphEdge>& edges() const noexcept { return edges_; }
    // Sorted by neighbour index.
    std::span<const Arc> neighbors(std::size_t i) const { return adj_[i]; }
    bool has_edge(std::size_t u, std::size_t v) const;
    double median_edge_weight() const;

private:
    std::vector<SkeletonBall> nodes_;
    std::vector<GraphEdge> edges_;
    std::vector<std::vector<Arc>> adj_;
};

SkeletonGraph from_mesh(std::span<const SkeletonBall> balls, const Adjacency& adjacency);
inline SkeletonGraph from_mesh(const SkeletonMesh& mesh) { return from_mesh(mesh.balls, mesh.adjacency); }

struct PathResult {
    double length = 0.0;
    std::vector<std::uint32_t> nodes;
};

// Throws precondition unless the path is simple, follows edges and its
// length matches the edge weights within 1e-9 relative.
void validate_path(const SkeletonGraph& g, const PathResult& p);

inline constexpr std::uint64_t kDefaultPathBudget = 5'000'000;

// Raised when a search runs out of node visits; carries the best path found.
class BudgetExceeded : public Error {
public:
    BudgetExceeded(const std::string& message, PathResult best)
        : Error(ErrorCode::budget_exceeded, message), best_(std::move(best)) {}
    const PathResult& best() const noexcept { return best_; }

private:
    PathResult best_;
};

// Depth-first search with visited marking, unmarked on return. Lengths
// within 1e-12 * max(1, length) count as equal; among equal paths the
// lexicographically smallest node sequence wins. `excluded` nodes (if
// non-empty, size node_count) are never entered.
PathResult longest_simple_path_from(const SkeletonGraph& g, std::uint32_t start,
                                    std::uint64_t budget = kDefaultPathBudget,
                                    std::span<const std::uint8_t> excluded = {});

// Maximum over all start nodes; each start gets its own budget.
PathResult neuron_length(const SkeletonGraph& g, std::uint64_t budget = kDefaultPathBudget);

struct BranchSet {
    PathResult trunk;
    std::vector<PathResult> branches;
    std::size_t count() const noexcept { return branches.size(); }
};

// min_branch_len < 0 selects 2 x the median edge weight.
//
// For each trunk node in order, repeatedly takes the longest simple path from
// it that avoids the rest of the trunk and every node of earlier branches,
// keeping it while its length is >= min_branch_len.
BranchSet branches(const SkeletonGraph& g, double min_branch_len = -1.0,
                   std::uint64_t budget = kDefaultPathBudget);

double len_pct(double computed, double reference);
double num_pct(std::size_t computed, std::size_t reference);

SkeletonGraph parse_swc(std::string_view text);
SkeletonGraph load_swc(const std::filesystem::path& path);
// Sample id = node index + 1, type 0; each component is rooted at its lowest
// index. Graphs with cycles are rejected (precondition).
std::string format_swc(const SkeletonGraph& g);

struct Morphometry {
    std::string graph_id;
    double length = 0.0;
    std::size_t n_branches = 0;
    std::size_t n_nodes = 0;
    std::size_t n_edges = 0;
    bool exact = true;
};

// Never throws on budget exhaustion; falls back to best-so-far with exact
// cleared.
Morphometry analyze(const SkeletonGraph& g, std::string graph_id, double min_branch_len = -1.0,
                    std::uint64_t budget = kDefaultPathBudget, BranchSet* detail = nullptr);

std::string morphometry_csv(std::span<const Morphometry> rows);

}  // namespace skelmorph
