// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <unistd.h>
#include <vector>

#include "skelmorph/autodiff.hpp"
#include "skelmorph/embed.hpp"
#include "skelmorph/io.hpp"
#include "skelmorph/links.hpp"
#include "skelmorph/mat_oracle.hpp"
#include "skelmorph/pipeline.hpp"
#include "skelmorph/random.hpp"
#include "skelmorph/run_config.hpp"
#include "skelmorph/skeleton_opt.hpp"
#include "skelmorph/skelgraph.hpp"
#include "skelmorph/synth.hpp"

using namespace skelmorph;
using ad::Tape;
using ad::Tensor;
using ad::Var;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Tensor random_tensor(std::size_t r, std::size_t c, Random& rng, double s = 1.0) {
    Tensor t(r, c);
    for (auto& v : t.values()) v = rng.normal(0.0, s);
    return t;
}

PointCloud random_cloud(std::size_t n, Random& rng) {
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        c.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Point3 nv{rng.normal(), rng.normal(), rng.normal()};
        c.normals.push_back(nv * (1.0 / norm(nv)));
    }
    return c;
}

// Connected graph: random tree plus extra edges, distinct random positions.
SkeletonGraph random_connected(Random& rng, std::size_t n, std::size_t extra) {
    SkeletonGraph g;
    for (std::size_t i = 0; i < n; ++i) g.add_node({rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 4)}, 0.1);
    for (std::size_t i = 1; i < n; ++i) g.add_edge(static_cast<std::uint32_t>(rng.index(i)), static_cast<std::uint32_t>(i));
    for (std::size_t tries = 0; extra > 0 && tries < 200; ++tries) {
        const auto u = rng.index(n), v = rng.index(n);
        if (u == v || g.has_edge(u, v)) continue;
        g.add_edge(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
        --extra;
    }
    return g;
}

SkeletonGraph graph_of(const std::vector<Point3>& pos, const std::vector<std::pair<int, int>>& edges) {
    SkeletonGraph g;
    for (const auto& p : pos) g.add_node(p, 0.1);
    for (auto [u, v] : edges) g.add_edge(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    return g;
}

// --- criteria -----------------------------------------------------------------

Outcome gradients() {
    using Fn = std::function<Var(Tape&, Var)>;
    double worst = 0.0;
    std::size_t instances = 0, checked = 0;
    auto run = [&](const Fn& f, const Tensor& x) {
        const auto rep = ad::grad_check(f, x, 1e-6);
        worst = std::max(worst, rep.max_rel_error);
        checked += rep.checked;
        ++instances;
    };
    Random rng(2024);
    std::map<std::string, double> per;
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud cloud = random_cloud(10, rng);
        const Tensor logits = random_tensor(10, 3, rng);
        const Tensor u = direction_tensor(4);
        auto through = [&](auto loss) -> Fn {
            return [&, loss](Tape& t, Var l) {
                const Var w = ad::column_softmax(l);
                const Var p = tensor_of(t, cloud.points);
                const Var c = tape_centers(w, p);
                return loss(t, p, c, tape_radii(w, p, c));
            };
        };
        run(through([&](Tape&, Var p, Var c, Var r) { return tape_loss_sampling(tape_sphere_samples(c, r, u), p); }),
            logits);
        run(through([](Tape&, Var p, Var c, Var r) { return tape_loss_point_to_sphere(p, c, r); }), logits);
        run(through([](Tape&, Var, Var, Var r) { return tape_loss_radius(r); }), logits);
        run(through([&](Tape& t, Var p, Var c, Var) { return tape_loss_norm(p, tensor_of(t, cloud.normals), c); }),
            logits);

        // masked balanced cross-entropy through a two-layer graph autoencoder
        std::vector<SkeletonBall> balls;
        for (int i = 0; i < 6; ++i)
            balls.push_back({{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3)}, rng.uniform(0.1, 0.5)});
        const auto init = init_adjacency(balls, 2);
        const Tensor a_hat = normalized_adjacency(init.known_edges);
        const Tensor x = random_tensor(6, 3, rng), w2 = random_tensor(4, 2, rng);
        run(
            [&](Tape& t, Var w1) {
                const Var a = t.constant(a_hat);
                const Var h = ad::relu(ad::matmul(a, ad::matmul(t.constant(x), w1)));
                const Var z = ad::matmul(a, ad::matmul(h, t.constant(w2)));
                return mbce_loss(ad::matmul(z, ad::transpose(z)), init);
            },
            random_tensor(3, 4, rng));

        // mutual-information objective through encoder and discriminators
        EmbedConfig cfg;
        cfg.gcn_widths = {4, 3};
        cfg.disc_widths = {5, 5, 4};
        const SkeletonGraph graphs[] = {random_connected(rng, 4, 1), random_connected(rng, 3, 0)};
        const auto params = EncoderParams::init(cfg, static_cast<std::uint64_t>(trial));
        const std::size_t sizes[] = {4, 3};
        Random pr(static_cast<std::uint64_t>(trial));
        const auto batch = sample_pairs(sizes, 1, pr);
        run(
            [&](Tape& t, Var w0) {
                std::vector<Var> gcn{w0, t.constant(params.gcn[1])}, phi, psi;
                for (const auto& p : params.phi) phi.push_back(t.constant(p));
                for (const auto& p : params.psi) psi.push_back(t.constant(p));
                std::vector<Var> patches, globals;
                for (const auto& g : graphs) {
                    const auto e = tape_encode(t, g, gcn, Pooling::sum);
                    patches.push_back(e.patches);
                    globals.push_back(e.global);
                }
                const Var s = ad::matmul(tape_discriminator(ad::concat_rows(patches), phi),
                                         ad::transpose(tape_discriminator(ad::concat_rows(globals), psi)));
                std::vector<std::uint32_t> pi, ni;
                for (std::size_t k = 0; k < batch.pos_patch.size(); ++k)
                    pi.push_back(batch.pos_patch[k] * 2 + batch.pos_graph[k]);
                for (std::size_t k = 0; k < batch.neg_patch.size(); ++k)
                    ni.push_back(batch.neg_patch[k] * 2 + batch.neg_graph[k]);
                return jsd_mi(ad::gather(s, pi), ad::gather(s, ni));
            },
            params.gcn[0]);
    }
    return {worst < 1e-4 && instances == 60,
            fmt("%zu instances, %zu coordinates, max rel error %.2e", instances, checked, worst)};
}

std::pair<PointCloud, NormalizationTransform> prepared(const SynthShapeSpec& spec, std::uint64_t seed,
                                                      PointCloud* normalized = nullptr) {
    const auto [nc, tr] = normalize_to_unit_cube(synth_shape(spec, seed));
    if (normalized) *normalized = nc;
    return {weighted_sample(nc, 1024, seed), tr};
}

Outcome sphere() {
    auto spec = SynthShapeSpec::defaults(ShapeKind::sphere);
    spec.count = 2000;
    const auto [cloud, tr] = prepared(spec, 0);
    SkeletonOptConfig cfg;
    cfg.n_skeleton_points = 8;
    const auto r = optimize_skeleton(cloud, cfg);
    double off = 0.0, rad = 0.0;
    for (const auto& b : r.balls) {
        off = std::max(off, norm(tr.invert(b.center)));
        rad = std::max(rad, std::abs(b.radius / tr.scale - 1.0));
    }
    // oracle as the oracle command runs it: raw medial points, then the angle floor
    const RunConfig oc;
    const PointCloud raw = synth_shape(spec, 0);
    const auto grid = interior_grid(raw, oc.grid_options());
    const auto candidates = medial_points(grid, raw, oc.medial_options());
    const auto mat = simplify_mat(candidates, oc.real("oracle_angle_floor_deg") * std::numbers::pi / 180.0);
    double mat_off = 0.0;
    for (const auto& m : mat) mat_off = std::max(mat_off, norm(m.position));
    const bool mat_ok = !mat.empty() && mat_off <= 2.0 * grid.spacing;
    return {off < 0.15 && rad < 0.1 && mat_ok,
            fmt("max centre offset %.4f, max |r-1| %.4f; %zu of %zu medial points kept, max offset %.4f (2 spacings "
                "%.4f)",
                off, rad, mat.size(), candidates.size(), mat_off, 2.0 * grid.spacing)};
}

Outcome capsule() {
    auto spec = SynthShapeSpec::defaults(ShapeKind::capsule);
    spec.count = 2000;
    const auto [cloud, tr] = prepared(spec, 0);
    const auto r = optimize_skeleton(cloud, SkeletonOptConfig{});
    std::vector<Point3> axis;
    for (const auto& p : analytic_medial_axis(spec)) axis.push_back(tr.apply(p));
    const auto c = centers_of(r.balls);
    const double hd = hausdorff_distance(c, axis), cd = chamfer_distance(c, axis, Aggregation::mean);
    return {hd < 0.15 && cd < 0.1, fmt("HD %.4f, CD-skel %.4f", hd, cd)};
}

Outcome concavity() {
    auto spec = SynthShapeSpec::defaults(ShapeKind::crescent);
    spec.count = 2000;
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto [cloud, tr] = prepared(spec, seed);
        double frac[2];
        for (int k = 0; k < 2; ++k) {
            SkeletonOptConfig cfg;
            cfg.lambda_n = k == 0 ? 0.1 : 0.0;
            cfg.seed = seed;
            const auto r = optimize_skeleton(cloud, cfg);
            std::size_t in = 0;
            for (const auto& b : r.balls) in += analytic_inside(spec, tr.invert(b.center)) ? 1 : 0;
            frac[k] = static_cast<double>(in) / static_cast<double>(r.balls.size());
        }
        wins += frac[0] > frac[1] ? 1 : 0;
        detail += fmt("%s%.3f vs %.3f", seed ? ", " : "", frac[0], frac[1]);
    }
    return {wins >= 4, fmt("with/without norm term inside fraction: %s; %d/5 seeds higher", detail.c_str(), wins)};
}

// Exhaustive enumeration of simple paths.
double enumerate_longest(const SkeletonGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<char> used(n, 0);
    double best = 0.0;
    std::function<void(std::size_t, double)> walk = [&](std::size_t v, double len) {
        best = std::max(best, len);
        used[v] = 1;
        for (const auto& a : g.neighbors(v))
            if (!used[a.to]) walk(a.to, len + a.weight);
        used[v] = 0;
    };
    for (std::size_t s = 0; s < n; ++s) walk(s, 0.0);
    return best;
}

Outcome longest_path() {
    Random rng(77);
    int mismatches = 0;
    std::size_t max_m = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.index(9);
        const std::size_t room = std::min<std::size_t>(15 - (n - 1), n * (n - 1) / 2 - (n - 1));
        const auto g = random_connected(rng, n, rng.index(room + 1));
        max_m = std::max(max_m, g.edge_count());
        const double want = enumerate_longest(g);
        const auto got = neuron_length(g);
        validate_path(g, got);
        if (std::abs(got.length - want) > 1e-9 * std::max(1.0, want)) ++mismatches;
    }
    return {mismatches == 0, fmt("200 graphs (max %zu edges), %d mismatches", max_m, mismatches)};
}

Outcome branch_fixtures() {
    const auto y = graph_of({{0, 0, 0}, {3, 0, 0}, {6, 0, 0}, {3, 2, 0}}, {{0, 1}, {1, 2}, {1, 3}});
    const auto plus = graph_of({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}}, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    const auto by = branches(y, 1.0), bp = branches(plus, 0.5);
    return {by.count() == 1 && bp.count() == 2, fmt("Y-tree %zu branch(es), plus-sign %zu", by.count(), bp.count())};
}

Outcome metric_identities() {
    Random rng(5);
    double worst_zero = 0.0, worst_sym = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Point3> a, b;
        for (std::size_t i = 0, n = 1 + rng.index(60); i < n; ++i)
            a.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        for (std::size_t i = 0, n = 1 + rng.index(60); i < n; ++i)
            b.push_back({rng.normal(), rng.normal(), rng.normal()});
        for (double v : {chamfer_distance(a, a), chamfer_distance(a, a, Aggregation::mean), hausdorff_distance(a, a)})
            worst_zero = std::max(worst_zero, std::abs(v));
        for (auto agg : {Aggregation::sum, Aggregation::mean})
            worst_sym = std::max(worst_sym, std::abs(chamfer_distance(a, b, agg) - chamfer_distance(b, a, agg)));
        worst_sym = std::max(worst_sym, std::abs(hausdorff_distance(a, b) - hausdorff_distance(b, a)));
    }
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<SkeletonBall> balls;
        for (int i = 0; i < 8; ++i) balls.push_back({{rng.uniform(-1, 1), rng.uniform(-1, 1), 0}, rng.uniform(0.1, 0.4)});
        const double v = reconstruct_volume(balls);
        worst_zero = std::max(worst_zero, vol_pct(v, v));
        const auto g = random_connected(rng, 8, 3);
        const auto m = analyze(g, "g", 0.0);
        worst_zero = std::max({worst_zero, len_pct(m.length, m.length)});
        if (m.n_branches > 0) worst_zero = std::max(worst_zero, num_pct(m.n_branches, m.n_branches));
    }
    worst_zero = std::max(worst_zero, num_pct(3, 3));
    return {worst_zero == 0.0 && worst_sym <= 1e-9,
            fmt("max value on identical inputs %.3g, max asymmetry %.3g", worst_zero, worst_sym)};
}

Outcome separability() {
    int info_ok = 0, spec_ok = 0, ordered = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto corpus = synthetic_corpus(20, seed);
        EmbedConfig cfg;
        cfg.pooling = Pooling::mean;
        cfg.seed = seed;
        const auto r = infograph_train(corpus.graphs, cfg);
        const double info = cluster_accuracy(rows_of(r.globals), corpus.labels, 2, seed);
        Vectors spectra;
        for (const auto& g : corpus.graphs) spectra.push_back(graph_spectrum(g, 100));
        const double spec = cluster_accuracy(spectra, corpus.labels, 2, seed);
        info_ok += info >= 0.9 ? 1 : 0;
        spec_ok += spec >= 0.7 ? 1 : 0;
        ordered += spec < info ? 1 : 0;
        detail += fmt("%s%.3f/%.3f", seed ? ", " : "", info, spec);
    }
    return {info_ok == 5 && spec_ok == 5 && ordered >= 4,
            fmt("infograph/spectrum per seed: %s; infograph>=0.9 %d/5, spectrum>=0.7 %d/5, spectrum lower %d/5",
                detail.c_str(), info_ok, spec_ok, ordered)};
}

Outcome spectrum_invariance() {
    Random rng(31);
    double worst = 0.0;
    for (int gi = 0; gi < 20; ++gi) {
        const std::size_t n = 3 + rng.index(10);
        const auto g = random_connected(rng, n, rng.index(n));
        const auto base = graph_spectrum(g, 16);
        for (int p = 0; p < 50; ++p) {
            std::vector<std::uint32_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0u);
            for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
            std::vector<std::uint32_t> where(n);
            for (std::size_t i = 0; i < n; ++i) where[perm[i]] = static_cast<std::uint32_t>(i);
            SkeletonGraph h;
            for (std::size_t i = 0; i < n; ++i) h.add_node(g.node(perm[i]).center, g.node(perm[i]).radius);
            for (const auto& e : g.edges()) h.add_edge(where[e.u], where[e.v]);
            const auto s = graph_spectrum(h, 16);
            for (std::size_t k = 0; k < s.size(); ++k) worst = std::max(worst, std::abs(s[k] - base[k]));
        }
    }
    const auto k3 = graph_spectrum(graph_of({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(0.75), 0}}, {{0, 1}, {1, 2}, {0, 2}}), 3);
    const double k3_err = std::max({std::abs(k3[0] - 2.0), std::abs(k3[1] + 1.0), std::abs(k3[2] + 1.0)});
    return {worst <= 1e-8 && k3_err <= 1e-8,
            fmt("max deviation over 1000 permutations %.3g; K3 (%.12g, %.12g, %.12g)", worst, k3[0], k3[1], k3[2])};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files[e.path().filename().string()] = io::read_text(e.path());
    return files;
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / ("skelmorph_acceptance_" + std::to_string(::getpid()));
    RunConfig cfg;
    cfg.merge_text("kind=capsule\ncorpus_per_class=10\n");
    cfg.set("output_dir", dir.string());
    auto run = [&] {
        fs::remove_all(dir);
        fs::create_directories(dir);
        auto with = [](std::vector<fs::path> in) {
            CommandIO io;
            io.inputs = std::move(in);
            return io;
        };
        run_command("synth", cfg, {});
        run_command("sample", cfg, {});
        run_command("normals", cfg, {});
        run_command("skeletonize", cfg, {});
        CommandIO links;
        links.cloud = dir / "cloud.xyz";
        run_command("links", cfg, links);
        run_command("analyze", cfg, with({dir / "mesh.txt"}));
        run_command("oracle", cfg, {});
        CommandIO metrics = with({dir / "skeleton.txt"});
        metrics.reference = dir / "mat.txt";
        run_command("metrics", cfg, metrics);
        run_command("embed", cfg, {});
        run_command("cluster", cfg, {});
        return snapshot(dir);
    };
    const auto first = run();
    const auto second = run();
    fs::remove_all(dir);
    std::size_t differing = 0;
    for (const auto& [name, text] : first) {
        const auto it = second.find(name);
        if (it == second.end() || it->second != text) ++differing;
    }
    const bool same_set = first.size() == second.size();
    return {same_set && differing == 0 && first.size() >= 20,
            fmt("%zu files from 10 subcommands, %zu differ", first.size(), differing)};
}

Outcome swc_round_trip() {
    std::size_t bad = 0;
    std::string lengths;
    for (std::size_t n : {2, 3, 10, 57, 200}) {
        SkeletonGraph path;
        for (std::size_t i = 0; i < n; ++i) path.add_node({static_cast<double>(i), 0, 0}, 0.5);
        for (std::size_t i = 1; i < n; ++i) path.add_edge(static_cast<std::uint32_t>(i - 1), static_cast<std::uint32_t>(i));
        const auto back = parse_swc(format_swc(path));
        const double len = neuron_length(back).length;
        const double pct = len_pct(len, static_cast<double>(n - 1));
        if (len != static_cast<double>(n - 1) || pct != 0.0) ++bad;
        lengths += fmt("%s%zu:%g", lengths.empty() ? "" : ", ", n, len);
    }
    return {bad == 0, fmt("n:length %s; %zu mismatches", lengths.c_str(), bad)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"gradient_correctness", gradients},
        {"sphere_oracle", sphere},
        {"capsule_oracle", capsule},
        {"concavity_ablation", concavity},
        {"longest_path_exactness", longest_path},
        {"branch_procedure", branch_fixtures},
        {"metric_identities", metric_identities},
        {"embedding_separability", separability},
        {"spectrum_invariance", spectrum_invariance},
        {"determinism", determinism},
        {"swc_round_trip", swc_round_trip},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
