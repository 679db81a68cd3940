#include "skelmorph/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "skelmorph/error.hpp"
#include "skelmorph/geometry.hpp"
#include "skelmorph/io.hpp"

namespace skelmorph {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> n{"sample", "normals", "skeletonize", "links",  "analyze",
                                            "embed",  "cluster", "metrics",     "synth",  "oracle"};
    return n;
}

namespace {

struct Context {
    const RunConfig& cfg;
    const CommandIO& io;
    std::vector<fs::path> inputs;  // every file read, for the manifest
    std::vector<fs::path> outputs;

    fs::path out(const std::string& default_name, bool primary = true) const {
        if (primary && !io.output.empty()) return io.output;
        return cfg.output_dir() / default_name;
    }
    void write(const fs::path& path, std::string_view text) {
        io::write_text_atomic(path, text);
        outputs.push_back(path);
    }
    void read(const fs::path& path) { inputs.push_back(path); }
};

// Without explicit inputs a command reads the previous stage's output.
fs::path single_input(const Context& ctx, std::string_view cmd) {
    const CommandIO& io = ctx.io;
    if (io.inputs.empty()) {
        static const std::map<std::string, std::string, std::less<>> chained{
            {"sample", "cloud.xyz"}, {"normals", "cloud.xyz"}, {"skeletonize", "cloud.xyz"},
            {"oracle", "cloud.xyz"}, {"links", "skeleton.txt"}, {"metrics", "skeleton.txt"},
            {"cluster", "embeddings.csv"}};
        const auto it = chained.find(cmd);
        if (it != chained.end()) return ctx.cfg.output_dir() / it->second;
    }
    if (io.inputs.size() != 1)
        fail(ErrorCode::parameter, std::string(cmd) + " takes exactly one input, got " + std::to_string(io.inputs.size()));
    return io.inputs.front();
}

PointCloud read_cloud(Context& ctx, const fs::path& path) {
    ctx.read(path);
    PointCloud c = io::load_point_cloud(path);
    c.validate();
    return c;
}

std::string json_text(const ordered_json& j) { return j.dump(2) + '\n'; }

double nan_to_null_guard(double v) {
    if (!std::isfinite(v)) fail(ErrorCode::numeric, "non-finite metric");
    return v;
}

void cmd_synth(Context& ctx) {
    const auto spec = ctx.cfg.synth_spec();
    ctx.write(ctx.out("cloud.xyz"), io::format_xyz(synth_shape(spec, ctx.cfg.integer("synth_seed"))));
}

void cmd_sample(Context& ctx) {
    const PointCloud c = read_cloud(ctx, single_input(ctx, "sample"));
    ctx.write(ctx.out("sampled.xyz"),
              io::format_xyz(weighted_sample(c, ctx.cfg.integer("m"), ctx.cfg.integer("sample_seed"))));
}

void cmd_normals(Context& ctx) {
    const PointCloud c = read_cloud(ctx, single_input(ctx, "normals"));
    ctx.write(ctx.out("normals.xyz"), io::format_xyz(estimate_normals(c, ctx.cfg.integer("normals_k"))));
}

// Unit-cube frame shared by skeletonize, links and oracle.
PointCloud normalized_with_normals(const RunConfig& cfg, PointCloud c, NormalizationTransform* t = nullptr) {
    if (!c.has_normals()) c = estimate_normals(c, cfg.integer("normals_k"));
    auto [n, tr] = normalize_to_unit_cube(c);
    if (t) *t = tr;
    return n;
}

void cmd_skeletonize(Context& ctx) {
    const auto opt = ctx.cfg.skeleton_config();
    PointCloud cloud = normalized_with_normals(ctx.cfg, read_cloud(ctx, single_input(ctx, "skeletonize")));
    const std::size_t m = ctx.cfg.integer("m");
    if (cloud.size() > m) cloud = weighted_sample(cloud, m, ctx.cfg.integer("sample_seed"));
    const SkeletonResult r = optimize_skeleton(cloud, opt);
    ctx.write(ctx.out("skeleton.txt"), format_skeleton(r.balls));
    std::string trace = "iteration,total,sampling,point_to_sphere,radius,norm\n";
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& t = r.trace[i];
        trace += std::to_string(i) + ',' + io::format_real(t.total) + ',' + io::format_real(t.sampling) + ',' +
                 io::format_real(t.point_to_sphere) + ',' + io::format_real(t.radius) + ',' + io::format_real(t.norm) +
                 '\n';
    }
    ctx.write(ctx.out("loss.csv", false), trace);
}

void cmd_links(Context& ctx) {
    const fs::path in = single_input(ctx, "links");
    ctx.read(in);
    const auto balls = load_skeleton(in);
    const auto init = init_adjacency(balls, ctx.cfg.integer("links_k"));
    PointCloud surface;
    if (!ctx.io.cloud.empty()) surface = normalized_with_normals(ctx.cfg, read_cloud(ctx, ctx.io.cloud));
    const auto features = node_features(balls, init, surface.empty() ? nullptr : &surface);
    GaeResult r = gae_train(features, init, ctx.cfg.gae_config());
    r.prediction.threshold = ctx.cfg.real("threshold");
    const Adjacency adj = threshold_links(r.prediction, init, ctx.cfg.flag("ensure_connected"), balls);
    ctx.write(ctx.out("mesh.txt"), format_mesh({balls, adj}));
    std::string probs = "i,j,probability,known\n";
    for (std::size_t i = 0; i < balls.size(); ++i)
        for (std::size_t j = i + 1; j < balls.size(); ++j)
            probs += std::to_string(i) + ',' + std::to_string(j) + ',' + io::format_real(r.prediction(i, j)) + ',' +
                     (init.known_mask(i, j) ? (init.known_edges(i, j) ? "1" : "0") : "") + '\n';
    ctx.write(ctx.out("link_probabilities.csv", false), probs);
}

SkeletonGraph read_graph(Context& ctx, const fs::path& path) {
    ctx.read(path);
    auto art = load_skeleton_artifact(path);
    if (!art.graph) fail(ErrorCode::precondition, path.string() + " has no edges section (expected a mesh or SWC)");
    return std::move(*art.graph);
}

std::vector<std::string> unique_ids(const std::vector<fs::path>& paths) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& p : paths) {
        std::string id = p.stem().string();
        if (!seen.insert(id).second) fail(ErrorCode::duplicate, "two inputs share the graph id '" + id + "'");
        ids.push_back(id);
    }
    return ids;
}

void cmd_analyze(Context& ctx) {
    if (ctx.io.inputs.empty()) fail(ErrorCode::parameter, "analyze needs at least one mesh or SWC input");
    const auto ids = unique_ids(ctx.io.inputs);
    std::vector<Morphometry> rows;
    for (std::size_t i = 0; i < ids.size(); ++i)
        rows.push_back(analyze(read_graph(ctx, ctx.io.inputs[i]), ids[i], ctx.cfg.real("min_branch_len"),
                               ctx.cfg.integer("path_budget")));
    ctx.write(ctx.out("morphometry.csv"), morphometry_csv(rows));
}

void cmd_embed(Context& ctx) {
    const EmbedConfig ecfg = ctx.cfg.embed_config();
    std::vector<SkeletonGraph> graphs;
    std::vector<std::string> ids;
    std::vector<int> labels;
    if (!ctx.io.inputs.empty()) {
        ids = unique_ids(ctx.io.inputs);
        for (const auto& p : ctx.io.inputs) graphs.push_back(read_graph(ctx, p));
    } else {
        const auto per = ctx.cfg.integer("corpus_per_class");
        if (per == 0) fail(ErrorCode::parameter, "embed needs inputs or corpus_per_class > 0");
        auto c = synthetic_corpus(per, ctx.cfg.integer("corpus_seed"));
        graphs = std::move(c.graphs);
        ids = std::move(c.ids);
        labels = std::move(c.labels);
    }
    const auto r = infograph_train(graphs, ecfg);
    ctx.write(ctx.out("embeddings.csv"), embeddings_csv(ids, rows_of(r.globals)));
    Vectors spectra;
    for (const auto& g : graphs) spectra.push_back(graph_spectrum(g, ctx.cfg.integer("spectrum_d")));
    ctx.write(ctx.out("spectrum.csv", false), embeddings_csv(ids, spectra));
    std::string trace = "epoch,objective\n";
    for (std::size_t e = 0; e < r.objective_trace.size(); ++e)
        trace += std::to_string(e) + ',' + io::format_real(r.objective_trace[e]) + '\n';
    ctx.write(ctx.out("embed_trace.csv", false), trace);
    if (!labels.empty()) {
        std::string l = "graph_id,label\n";
        for (std::size_t i = 0; i < ids.size(); ++i) l += ids[i] + ',' + std::to_string(labels[i]) + '\n';
        ctx.write(ctx.out("labels.csv", false), l);
    }
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::istringstream in(io::read_text(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto c = line.find(',', start);
            cells.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        rows.push_back(std::move(cells));
    }
    if (rows.size() < 2) fail(ErrorCode::empty_input, path.string() + " has no data rows");
    return rows;
}

void cmd_cluster(Context& ctx) {
    const fs::path in = single_input(ctx, "cluster");
    ctx.read(in);
    const auto rows = read_csv(in);
    std::vector<std::string> ids;
    Vectors reps;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            fail(ErrorCode::parse, in.string() + " row " + std::to_string(r + 1) + ": wrong column count");
        ids.push_back(rows[r][0]);
        std::vector<double> v;
        for (std::size_t c = 1; c < rows[r].size(); ++c) v.push_back(io::parse_real(rows[r][c], r + 1));
        reps.push_back(std::move(v));
    }
    std::vector<int> labels;
    fs::path labels_path = ctx.io.labels;
    if (labels_path.empty() && ctx.io.inputs.empty() && fs::exists(ctx.cfg.output_dir() / "labels.csv"))
        labels_path = ctx.cfg.output_dir() / "labels.csv";
    if (!labels_path.empty()) {
        ctx.read(labels_path);
        std::map<std::string, int> by_id;
        const auto lr = read_csv(labels_path);
        for (std::size_t r = 1; r < lr.size(); ++r) {
            if (lr[r].size() != 2) fail(ErrorCode::parse, "labels row " + std::to_string(r + 1) + ": expected id,label");
            by_id[lr[r][0]] = static_cast<int>(io::parse_real(lr[r][1], r + 1));
        }
        for (const auto& id : ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) fail(ErrorCode::reference, "no label for graph '" + id + "'");
            labels.push_back(it->second);
        }
    }
    const std::size_t k = ctx.cfg.integer("clusters");
    const auto km = kmeanspp(reps, k, ctx.cfg.integer("cluster_seed"), ctx.cfg.integer("kmeans_iters"));
    ordered_json summary{{"k", k}, {"inertia", km.inertia}, {"iterations", km.iterations}};
    std::string out = labels.empty() ? "graph_id,cluster\n" : "graph_id,cluster,label,predicted\n";
    std::vector<std::optional<int>> maj;
    if (!labels.empty()) maj = majority_label(km.assignments, labels, k);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += ids[i] + ',' + std::to_string(km.assignments[i]);
        if (!labels.empty()) {
            const auto p = maj[km.assignments[i]];
            out += ',' + std::to_string(labels[i]) + ',' + (p ? std::to_string(*p) : "");
            correct += p == labels[i] ? 1 : 0;
        }
        out += '\n';
    }
    ctx.write(ctx.out("clusters.csv"), out);
    const auto d = distance_matrix(reps);
    ctx.write(ctx.out("distances.csv", false), matrix_csv(ids, d));
    ctx.write(ctx.out("dendrogram.csv", false),
              dendrogram_csv(hierarchical_cluster(d, parse_linkage(ctx.cfg.get("linkage")))));
    if (!labels.empty()) {
        summary["accuracy"] = static_cast<double>(correct) / static_cast<double>(ids.size());
        const auto ii = inter_intra(d, labels);
        std::string t = "class";
        for (int c : ii.classes) t += ',' + std::to_string(c);
        t += '\n';
        for (std::size_t a = 0; a < ii.classes.size(); ++a) {
            t += std::to_string(ii.classes[a]);
            for (std::size_t b = 0; b < ii.classes.size(); ++b)
                t += ',' + (ii.mean[a][b] ? io::format_real(*ii.mean[a][b]) : std::string());
            t += '\n';
        }
        ctx.write(ctx.out("inter_intra.csv", false), t);
    }
    ctx.write(ctx.out("cluster_summary.json", false), json_text(summary));
}

void cmd_metrics(Context& ctx) {
    const fs::path in = single_input(ctx, "metrics");
    if (ctx.io.reference.empty()) fail(ErrorCode::parameter, "metrics needs --reference");
    ctx.read(in);
    ctx.read(ctx.io.reference);
    const auto m = compute_metrics(load_skeleton_artifact(in), load_skeleton_artifact(ctx.io.reference), ctx.cfg);
    ordered_json j{{"cd_skel", m.cd_skel}, {"cd_skel_sum", m.cd_skel_sum}, {"hd_skel", m.hd_skel},
                   {"cd_recon", m.cd_recon}, {"hd_recon", m.hd_recon},     {"vol_pct", m.vol_pct}};
    j["len_pct"] = m.len_pct ? ordered_json(*m.len_pct) : ordered_json(nullptr);
    j["num_pct"] = m.num_pct ? ordered_json(*m.num_pct) : ordered_json(nullptr);
    ctx.write(ctx.out("metrics.json"), json_text(j));
}

void cmd_oracle(Context& ctx) {
    NormalizationTransform t;
    const fs::path in = single_input(ctx, "oracle");
    const PointCloud cloud = normalized_with_normals(ctx.cfg, read_cloud(ctx, in), &t);
    const auto grid = interior_grid(cloud, ctx.cfg.grid_options());
    auto mat = medial_points(grid, cloud, ctx.cfg.medial_options());
    mat = simplify_mat(mat, ctx.cfg.real("oracle_angle_floor_deg") * std::numbers::pi / 180.0);
    if (mat.empty()) fail(ErrorCode::degenerate, "medial axis oracle found no medial points");
    const auto mat_balls = to_balls(mat);
    ctx.write(ctx.out("mat.txt"), format_skeleton(mat_balls));

    std::vector<Point3> mat_pts;
    for (const auto& b : mat_balls) mat_pts.push_back(b.center);
    ordered_json j{{"medial_points", mat_pts.size()}, {"voxel_spacing", grid.spacing}};
    std::vector<Point3> analytic;
    const bool analytic_on = ctx.cfg.get("oracle_analytic") == "auto" ? ctx.io.inputs.empty()
                                                                       : ctx.cfg.flag("oracle_analytic");
    if (analytic_on) {
        for (const Point3& p : analytic_medial_axis(ctx.cfg.synth_spec())) analytic.push_back(t.apply(p));
        j["hd_mat_vs_analytic"] = hausdorff_distance(mat_pts, analytic);
        j["cd_mat_vs_analytic"] = chamfer_distance(mat_pts, analytic, Aggregation::mean);
    }
    fs::path skel_path = ctx.io.skeleton;
    if (skel_path.empty() && ctx.io.inputs.empty() && fs::exists(ctx.cfg.output_dir() / "skeleton.txt"))
        skel_path = ctx.cfg.output_dir() / "skeleton.txt";
    if (!skel_path.empty()) {
        ctx.read(skel_path);
        std::vector<Point3> skel;
        for (const auto& b : load_skeleton(skel_path)) skel.push_back(b.center);
        j["skeleton_points"] = skel.size();
        j["hd_skel_vs_mat"] = hausdorff_distance(skel, mat_pts);
        j["cd_skel_vs_mat"] = chamfer_distance(skel, mat_pts, Aggregation::mean);
        if (!analytic.empty()) {
            j["hd_skel_vs_analytic"] = hausdorff_distance(skel, analytic);
            j["cd_skel_vs_analytic"] = chamfer_distance(skel, analytic, Aggregation::mean);
        }
    }
    ctx.write(ctx.out("oracle.json", false), json_text(j));
}

std::string manifest_text(std::string_view name, const RunConfig& cfg, const Context& ctx) {
    ordered_json j;
    j["command"] = name;
    j["config_sha256"] = sha256_hex(cfg.canonical_text());
    ordered_json conf = ordered_json::object();
    std::istringstream lines(cfg.canonical_text());
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        conf[line.substr(0, eq)] = line.substr(eq + 1);
    }
    j["config"] = conf;
    j["seeds"] = cfg.seeds();
    ordered_json inputs = ordered_json::array();
    for (const auto& p : ctx.inputs) inputs.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
    j["inputs"] = inputs;
    ordered_json outputs = ordered_json::array();
    for (const auto& p : ctx.outputs) outputs.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
    j["outputs"] = outputs;
    return json_text(j);
}

}  // namespace

SkeletonArtifact load_skeleton_artifact(const fs::path& path) {
    SkeletonArtifact a;
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".swc") {
        a.graph = load_swc(path);
        for (std::size_t i = 0; i < a.graph->node_count(); ++i) a.balls.push_back(a.graph->node(i));
        return a;
    }
    const std::string text = io::read_text(path);
    // a mesh starts with the two-count header line
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> first;
    while (std::getline(in, line)) {
        first = io::split_ws(line);
        if (!first.empty() && first.front().front() != '#') break;
    }
    if (first.size() == 2) {
        const auto mesh = parse_mesh(text);
        a.balls = mesh.balls;
        a.graph = from_mesh(mesh);
    } else {
        a.balls = parse_skeleton(text);
    }
    return a;
}

MetricReport compute_metrics(const SkeletonArtifact& computed, const SkeletonArtifact& reference,
                             const RunConfig& cfg) {
    if (computed.balls.empty() || reference.balls.empty()) fail(ErrorCode::empty_input, "metrics on an empty skeleton");
    auto shifted = [](std::vector<SkeletonBall> balls) {
        std::vector<Point3> c;
        for (const auto& b : balls) c.push_back(b.center);
        const Point3 mid = centroid(c);
        for (auto& b : balls) b.center -= mid;
        return balls;
    };
    auto comp = shifted(computed.balls);
    auto ref = shifted(reference.balls);
    double extent = 0.0;
    for (const auto& b : ref)
        extent = std::max({extent, std::abs(b.center.x), std::abs(b.center.y), std::abs(b.center.z)});
    if (!(extent > 0.0)) extent = std::max(ref.front().radius, 1.0);
    for (auto* set : {&comp, &ref})
        for (auto& b : *set) {
            b.center *= 1.0 / extent;
            b.radius /= extent;
        }
    std::vector<Point3> cc, rc;
    for (const auto& b : comp) cc.push_back(b.center);
    for (const auto& b : ref) rc.push_back(b.center);
    MetricReport m;
    m.cd_skel = nan_to_null_guard(chamfer_distance(cc, rc, Aggregation::mean));
    m.cd_skel_sum = nan_to_null_guard(chamfer_distance(cc, rc, Aggregation::sum));
    m.hd_skel = nan_to_null_guard(hausdorff_distance(cc, rc));
    const std::size_t ks = cfg.integer("recon_samples");
    const PointCloud cr = sample_sphere_points(comp, ks), rr = sample_sphere_points(ref, ks);
    m.cd_recon = nan_to_null_guard(chamfer_distance(cr, rr, Aggregation::mean));
    m.hd_recon = nan_to_null_guard(hausdorff_distance(cr, rr));
    const std::size_t res = cfg.integer("volume_resolution");
    m.vol_pct = vol_pct(reconstruct_volume(comp, res), reconstruct_volume(ref, res));
    if (computed.graph && reference.graph) {
        const double min_branch = cfg.real("min_branch_len");
        const auto budget = cfg.integer("path_budget");
        const auto a = analyze(*computed.graph, "computed", min_branch, budget);
        const auto b = analyze(*reference.graph, "reference", min_branch, budget);
        if (b.length > 0.0) m.len_pct = len_pct(a.length, b.length);
        if (b.n_branches > 0) m.num_pct = num_pct(a.n_branches, b.n_branches);
        else if (a.n_branches == 0) m.num_pct = 0.0;
    }
    return m;
}

CommandResult run_command(std::string_view name, const RunConfig& cfg, const CommandIO& io) {
    Context ctx{cfg, io, {}, {}};
    if (name == "synth") cmd_synth(ctx);
    else if (name == "sample") cmd_sample(ctx);
    else if (name == "normals") cmd_normals(ctx);
    else if (name == "skeletonize") cmd_skeletonize(ctx);
    else if (name == "links") cmd_links(ctx);
    else if (name == "analyze") cmd_analyze(ctx);
    else if (name == "embed") cmd_embed(ctx);
    else if (name == "cluster") cmd_cluster(ctx);
    else if (name == "metrics") cmd_metrics(ctx);
    else if (name == "oracle") cmd_oracle(ctx);
    else fail(ErrorCode::parameter, "unknown command '" + std::string(name) + "'");
    CommandResult r;
    r.outputs = ctx.outputs;
    r.manifest = cfg.output_dir() / (std::string(name) + ".manifest.json");
    io::write_text_atomic(r.manifest, manifest_text(name, cfg, ctx));
    return r;
}

}  // namespace skelmorph
