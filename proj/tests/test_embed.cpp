#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "skelmorph/embed.hpp"

using namespace skelmorph;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

SkeletonGraph make_graph(const std::vector<Point3>& pos, const std::vector<std::pair<int, int>>& edges,
                         double radius = 0.1) {
    SkeletonGraph g;
    for (const auto& p : pos) g.add_node(p, radius);
    for (auto [u, v] : edges) g.add_edge(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    return g;
}

SkeletonGraph random_graph(Random& rng, std::size_t n, double p_edge) {
    SkeletonGraph g;
    for (std::size_t i = 0; i < n; ++i)
        g.add_node({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.05, 0.2));
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j)
            if (rng.uniform() < p_edge) g.add_edge(i, j);
    return g;
}

SkeletonGraph permuted(const SkeletonGraph& g, Random& rng) {
    const std::size_t n = g.node_count();
    std::vector<std::uint32_t> perm(n), inv(n);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = static_cast<std::uint32_t>(i);
    SkeletonGraph h;
    for (std::size_t i = 0; i < n; ++i) h.add_node(g.node(perm[i]).center, g.node(perm[i]).radius);
    for (const auto& e : g.edges()) h.add_edge(inv[e.u], inv[e.v]);
    return h;
}

double sp(double x) { return std::log1p(std::exp(x)); }

}  // namespace

TEST_CASE("encode basics") {
    EmbedConfig cfg;
    auto params = EncoderParams::init(cfg, 1);
    for (auto& w : params.gcn) w = Tensor(w.rows(), w.cols());
    const auto single = make_graph({{0.3, 0.2, 0.1}}, {});
    const auto e = encode(single, params, cfg);
    CHECK(e.global.cols() == 100);
    for (double v : e.global.values()) CHECK(v == 0.0);

    params = EncoderParams::init(cfg, 2);
    Random rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_graph(rng, 3 + rng.index(8), 0.4);
        const auto a = encode(g, params, cfg);
        const auto b = encode(permuted(g, rng), params, cfg);
        REQUIRE(a.patches.rows() == g.node_count());
        for (std::size_t k = 0; k < a.global.size(); ++k)
            CHECK(a.global[k] == doctest::Approx(b.global[k]).epsilon(1e-12));
    }
}

TEST_CASE("node inputs") {
    const auto g = make_graph({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1}, {0, 2}}, 0.25);
    const Tensor x = node_inputs(g);
    CHECK(x.cols() == kNodeInputWidth);
    CHECK(x(0, 4) == 2.0);
    CHECK(x(1, 4) == 1.0);
    CHECK(x(2, 1) == 1.0);
    CHECK(x(2, 3) == 0.25);
}

TEST_CASE("global-patch pairs") {
    Random rng(0);
    const std::size_t sizes[] = {8, 6};
    const auto b = sample_pairs(sizes, 1, rng);
    CHECK(b.pos_patch.size() == 14);
    CHECK(b.neg_patch.size() == 14);
    for (std::size_t k = 0; k < 14; ++k) {
        const std::uint32_t own = b.neg_patch[k] < 8 ? 0u : 1u;
        CHECK(own != b.neg_graph[k]);
        CHECK(b.pos_graph[k] == (b.pos_patch[k] < 8 ? 0u : 1u));
    }
    const std::size_t one[] = {5};
    CHECK_THROWS_AS(sample_pairs(one, 1, rng), Error);
}

TEST_CASE("discriminator score") {
    EmbedConfig cfg;
    auto params = EncoderParams::init(cfg, 3);
    std::vector<double> h(100), H(100);
    Random rng(1);
    for (auto& v : h) v = rng.normal();
    for (auto& v : H) v = rng.normal();
    auto zeroed = params;
    zeroed.phi[4] = Tensor(zeroed.phi[4].rows(), zeroed.phi[4].cols());
    zeroed.phi[5] = Tensor(1, zeroed.phi[5].cols());
    CHECK(discriminator_score(h, H, zeroed) == 0.0);

    auto same = params;
    same.psi = same.phi;
    Tape tape;
    std::vector<Var> phi;
    for (const auto& t : same.phi) phi.push_back(tape.constant(t));
    const Tensor v = tape_discriminator(tape.constant(Tensor(1, 100, h)), phi).value();
    double sq = 0.0;
    for (double c : v.values()) sq += c * c;
    CHECK(sq > 0.0);
    CHECK(discriminator_score(h, h, same) == doctest::Approx(sq).epsilon(1e-12));

    CHECK_THROWS_AS(discriminator_score(std::vector<double>(99), H, params), Error);
}

TEST_CASE("discriminator gradient check") {
    EmbedConfig cfg;
    cfg.gcn_widths = {3, 2};
    cfg.disc_widths = {4, 4, 3};
    Random rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto params = EncoderParams::init(cfg, static_cast<std::uint64_t>(trial));
        Tensor H(1, 5);
        for (auto& v : H.values()) v = rng.normal();
        Tensor h(1, 5);
        for (auto& v : h.values()) v = rng.normal();
        const auto report = ad::grad_check(
            [&](Tape& t, Var x) {
                std::vector<Var> phi, psi;
                for (const auto& p : params.phi) phi.push_back(t.constant(p));
                for (const auto& p : params.psi) psi.push_back(t.constant(p));
                return ad::dot(tape_discriminator(x, phi), tape_discriminator(t.constant(H), psi));
            },
            h, 1e-6);
        CHECK(report.max_rel_error < 1e-4);
    }
}

TEST_CASE("jsd_mi closed forms") {
    const double zeros[] = {0.0, 0.0};
    CHECK(jsd_mi(zeros, zeros) == doctest::Approx(0.0));
    const double one[] = {1.0};
    CHECK(jsd_mi(one, one) == 0.0);
    const double minus[] = {-1.0};
    // -sp(-1) - (-sp(1)) = 1
    CHECK(jsd_mi(one, minus) == doctest::Approx(-sp(-1.0) + sp(1.0)));
    CHECK(jsd_mi(one, minus) == doctest::Approx(1.0));
    const double big[] = {1e6}, small[] = {-1e6};
    CHECK(jsd_mi(big, big) == 0.0);
    CHECK(std::isfinite(jsd_mi(big, small)));
    CHECK(jsd_mi(big, small) == doctest::Approx(sp(kScoreClamp)));
    CHECK_THROWS_AS(jsd_mi(std::span<const double>{}, one), Error);

    Tape tape;
    const Var p = tape.constant(Tensor(2, 1, {0.5, -2.0}));
    const Var n = tape.constant(Tensor(3, 1, {0.1, 0.2, -0.3}));
    const double direct = (-sp(-0.5) - sp(2.0)) / 2.0 + (sp(-0.1) + sp(-0.2) + sp(0.3)) / 3.0;
    CHECK(jsd_mi(p, n).value().item() == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("jsd_mi of a shared score distribution centres on zero") {
    Random rng(17);
    std::vector<double> values;
    for (int r = 0; r < 1000; ++r) {
        std::vector<double> a(20), b(20);
        for (auto& v : a) v = rng.normal(0.5, 2.0);
        for (auto& v : b) v = rng.normal(0.5, 2.0);
        values.push_back(jsd_mi(a, b));
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / 1000.0;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / 999.0) / std::sqrt(1000.0);
    CHECK(std::abs(mean) < 3.0 * se);
}

TEST_CASE("jsd_mi and full objective gradient checks") {
    Random rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor scores(7, 1);
        for (auto& v : scores.values()) v = rng.normal(0.0, 3.0);
        const auto report = ad::grad_check(
            [](Tape&, Var x) {
                const std::uint32_t pos[] = {0, 1, 2}, neg[] = {3, 4, 5, 6};
                return jsd_mi(ad::gather(x, pos), ad::gather(x, neg));
            },
            scores, 1e-6);
        CHECK(report.max_rel_error < 1e-4);
    }

    EmbedConfig cfg;
    cfg.gcn_widths = {4, 3};
    cfg.disc_widths = {5, 5, 4};
    for (int trial = 0; trial < 3; ++trial) {
        const SkeletonGraph graphs[] = {random_graph(rng, 4, 0.6), random_graph(rng, 3, 0.6)};
        auto params = EncoderParams::init(cfg, static_cast<std::uint64_t>(trial));
        const std::size_t sizes[] = {4, 3};
        Random pr(static_cast<std::uint64_t>(trial));
        const auto batch = sample_pairs(sizes, 1, pr);
        const auto report = ad::grad_check(
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
            params.gcn[0], 1e-6);
        CHECK(report.max_rel_error < 1e-4);
    }
}

TEST_CASE("infograph training") {
    const auto corpus = synthetic_corpus(20, 0);
    REQUIRE(corpus.graphs.size() == 40);
    CHECK_THROWS_AS(infograph_train(std::span(corpus.graphs.data(), 1), EmbedConfig{}), Error);

    int ascended = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EmbedConfig cfg;
        cfg.epochs = 21;
        cfg.seed = seed;
        const auto r = infograph_train(corpus.graphs, cfg);
        ascended += r.objective_trace[20] > r.objective_trace[0] ? 1 : 0;
    }
    CHECK(ascended >= 9);

    std::vector<SkeletonGraph> twice;
    for (std::size_t i = 0; i < 6; ++i) {
        twice.push_back(corpus.graphs[i * 6]);
        twice.push_back(corpus.graphs[i * 6]);
    }
    EmbedConfig cfg;
    cfg.epochs = 20;
    const auto r = infograph_train(twice, cfg);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < r.globals.cols(); ++c)
            CHECK(std::abs(r.globals(2 * i, c) - r.globals(2 * i + 1, c)) <= 1e-6);
    const auto again = infograph_train(twice, cfg);
    CHECK(again.globals == r.globals);
}

TEST_CASE("train/test label protocol") {
    const auto corpus = synthetic_corpus(20, 3);
    std::vector<SkeletonGraph> train, test;
    std::vector<int> train_labels, test_labels;
    for (std::size_t i = 0; i < corpus.graphs.size(); ++i) {
        ((i % 4 == 3) ? test : train).push_back(corpus.graphs[i]);
        ((i % 4 == 3) ? test_labels : train_labels).push_back(corpus.labels[i]);
    }
    EmbedConfig cfg;
    cfg.pooling = Pooling::mean;
    const auto r = infograph_train(train, cfg);
    const auto km = kmeanspp(rows_of(r.globals), 2, 0);
    const auto maj = majority_label(km.assignments, train_labels, 2);
    std::size_t train_ok = 0, test_ok = 0;
    for (std::size_t i = 0; i < train.size(); ++i) train_ok += maj[km.assignments[i]] == train_labels[i] ? 1 : 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto e = encode(test[i], r.params, cfg);
        test_ok += maj[assign_nearest_center(e.global.values(), km.centers)] == test_labels[i] ? 1 : 0;
    }
    const double train_acc = double(train_ok) / double(train.size());
    const double test_acc = double(test_ok) / double(test.size());
    CHECK(std::abs(train_acc - test_acc) <= 0.1);
}

TEST_CASE("graph spectrum") {
    const auto k3 = make_graph({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(0.75), 0}}, {{0, 1}, {1, 2}, {0, 2}});
    const auto s = graph_spectrum(k3, 3);
    CHECK(s[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(s[1] == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(s[2] == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(graph_spectrum(k3, 5)[4] == 0.0);
    CHECK(graph_spectrum(k3, 1).size() == 1);

    for (double v : graph_spectrum(make_graph({{0, 0, 0}, {1, 1, 1}}, {}), 4)) CHECK(v == 0.0);
    CHECK_THROWS_AS(graph_spectrum(k3, 0), Error);

    Random rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_graph(rng, 3 + rng.index(12), 0.3);
        const auto base = graph_spectrum(g, 20);
        CHECK(std::abs(std::accumulate(base.begin(), base.end(), 0.0)) < 1e-8);
        const auto p = graph_spectrum(permuted(g, rng), 20);
        for (std::size_t k = 0; k < 20; ++k) CHECK(std::abs(p[k] - base[k]) < 1e-8);
    }
}

TEST_CASE("kmeans++") {
    Vectors pts{{0, 0}, {1, 0}, {5, 5}, {2, 7}};
    const auto full = kmeanspp(pts, 4, 0);
    CHECK(full.inertia == 0.0);
    CHECK_THROWS_AS(kmeanspp(pts, 5, 0), Error);

    const Vectors same(6, std::vector<double>{1.0, 2.0});
    CHECK(kmeanspp(same, 2, 0).inertia == 0.0);

    int perfect = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Random rng(seed + 1000);
        Vectors v;
        std::vector<int> truth;
        for (int i = 0; i < 40; ++i) {
            const int c = i % 2;
            v.push_back({rng.normal(10.0 * c, 1.0), rng.normal(0.0, 1.0)});
            truth.push_back(c);
        }
        const auto r = kmeanspp(v, 2, seed);
        bool ok = true;
        for (int i = 0; i < 40; ++i) ok = ok && ((r.assignments[i] == r.assignments[0]) == (truth[i] == truth[0]));
        perfect += ok ? 1 : 0;
        for (std::size_t k = 1; k < r.inertia_trace.size(); ++k)
            CHECK(r.inertia_trace[k] <= r.inertia_trace[k - 1] + 1e-9);
    }
    CHECK(perfect >= 95);
}

TEST_CASE("majority labels and nearest centre") {
    const std::size_t asg[] = {0, 0, 0, 1, 1};
    const int labels[] = {7, 7, 3, 4, 2};
    std::vector<std::size_t> empty;
    const auto m = majority_label(asg, labels, 3, &empty);
    CHECK(m[0] == 7);
    CHECK(m[1] == 2);
    CHECK_FALSE(m[2].has_value());
    CHECK(empty == std::vector<std::size_t>{2});

    const Vectors centers{{0, 0}, {2, 0}};
    const double mid[] = {1, 0};
    CHECK(assign_nearest_center(mid, centers) == 0);
    const double right[] = {1.5, 0};
    CHECK(assign_nearest_center(right, centers) == 1);
}

TEST_CASE("distance matrix and class blocks") {
    const auto zero = distance_matrix(Vectors(3, std::vector<double>{1, 1}));
    for (double v : zero.values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(distance_matrix(Vectors{{1.0}}), Error);

    Vectors reps{{0, 0}, {1, 0}, {0, 1}, {10, 0}, {11, 0}, {10, 1}};
    const int labels[] = {0, 0, 0, 1, 1, 1};
    const auto d = distance_matrix(reps);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < 6; ++j) CHECK(d(i, j) == d(j, i));
    }
    const auto ii = inter_intra(d, labels);
    REQUIRE(ii.classes == std::vector<int>{0, 1});
    const double intra = (1.0 + 1.0 + std::sqrt(2.0)) / 3.0;
    CHECK(*ii.mean[0][0] == doctest::Approx(intra));
    CHECK(*ii.mean[1][1] == doctest::Approx(intra));
    CHECK(*ii.mean[0][1] > 9.0);
    CHECK(*ii.mean[0][1] == doctest::Approx(*ii.mean[1][0]));

    const int lonely[] = {0, 0, 0, 1, 1, 2};
    CHECK_FALSE(inter_intra(d, lonely).mean[2][2].has_value());
}

TEST_CASE("hierarchical clustering") {
    Tensor d(3, 3, {0, 1, 5, 1, 0, 5, 5, 5, 0});
    for (auto link : {Linkage::single, Linkage::average, Linkage::complete}) {
        const auto m = hierarchical_cluster(d, link);
        REQUIRE(m.size() == 2);
        CHECK(m[0].a == 0);
        CHECK(m[0].b == 1);
        CHECK(m[0].height == 1.0);
        CHECK(m[1].a == 2);
        CHECK(m[1].b == 3);
        CHECK(m[1].height == 5.0);
        CHECK(m[1].size == 3);
    }
    CHECK(hierarchical_cluster(Tensor(1, 1), Linkage::average).empty());
    Tensor bad(2, 2, {0, 1, 2, 0});
    CHECK_THROWS_AS(hierarchical_cluster(bad, Linkage::single), Error);

    Random rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        Vectors v;
        for (std::size_t i = 0; i < 12; ++i) v.push_back({rng.normal(), rng.normal(), rng.normal()});
        const auto dm = distance_matrix(v);
        for (auto link : {Linkage::single, Linkage::average, Linkage::complete}) {
            const auto m = hierarchical_cluster(dm, link);
            CHECK(m.size() == 11);
            for (std::size_t k = 1; k < m.size(); ++k) CHECK(m[k].height >= m[k - 1].height - 1e-12);
        }
    }
}

TEST_CASE("CSV exports") {
    const std::string ids[] = {"a", "b"};
    CHECK(embeddings_csv(ids, Vectors{{1, 2}, {3, 4.5}}) == "graph_id,e0,e1\na,1,2\nb,3,4.5\n");
    const Merge m[] = {{0, 1, 0.5, 2}};
    CHECK(dendrogram_csv(m) == "step,a,b,height\n0,0,1,0.5\n");
    CHECK(matrix_csv(ids, Tensor(2, 2, {0, 1, 1, 0})) == "id,a,b\na,0,1\nb,1,0\n");
}

TEST_CASE("corpus shape") {
    const auto c = synthetic_corpus(3, 5);
    REQUIRE(c.graphs.size() == 6);
    CHECK(c.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& g = c.graphs[i];
        CHECK(g.edge_count() >= g.node_count() - 1);
        std::size_t max_degree = 0;
        for (std::size_t k = 0; k < g.node_count(); ++k) max_degree = std::max(max_degree, g.neighbors(k).size());
        if (c.labels[i] == 0) CHECK(max_degree == 2);
        else CHECK(max_degree >= 3);
    }
    const auto again = synthetic_corpus(3, 5);
    CHECK(again.graphs[4].edges().size() == c.graphs[4].edges().size());
}
