#pragma once

// Subcommand implementations behind the command-line tool. Each reads its
// declared inputs, writes outputs atomically under the output directory and
// records a manifest next to them.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skelmorph/run_config.hpp"
#include "skelmorph/skelgraph.hpp"

namespace skelmorph {

struct CommandIO {
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path output;     // primary output; empty picks the default name
    std::filesystem::path reference;  // metrics
    std::filesystem::path skeleton;   // oracle: skeletonize output to compare
    std::filesystem::path cloud;      // links: surface for node features
    std::filesystem::path labels;     // cluster: graph_id,label CSV
};

struct CommandResult {
    std::vector<std::filesystem::path> outputs;
    std::filesystem::path manifest;
};

const std::vector<std::string>& command_names();

CommandResult run_command(std::string_view name, const RunConfig& cfg, const CommandIO& io);

// Skeleton artifact in any of the supported text forms: "x y z r" ball list,
// skeleton mesh, or SWC (by extension).
struct SkeletonArtifact {
    std::vector<SkeletonBall> balls;
    std::optional<SkeletonGraph> graph;
};

SkeletonArtifact load_skeleton_artifact(const std::filesystem::path& path);

// Metric set of the `metrics` command. Both skeletons are shifted to their
// own ball-centre centroid and scaled by the reference's largest absolute
// coordinate. len/num entries need graphs on both sides.
struct MetricReport {
    double cd_skel = 0.0;      // mean-aggregated Chamfer over ball centres
    double cd_skel_sum = 0.0;
    double hd_skel = 0.0;
    double cd_recon = 0.0;     // over sphere samples of the balls
    double hd_recon = 0.0;
    double vol_pct = 0.0;
    std::optional<double> len_pct;
    std::optional<double> num_pct;
};

MetricReport compute_metrics(const SkeletonArtifact& computed, const SkeletonArtifact& reference,
                             const RunConfig& cfg);

}  // namespace skelmorph
