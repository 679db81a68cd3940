#include <doctest.h>

#include <cmath>
#include <numbers>

#include "skelmorph/error.hpp"
#include "skelmorph/random.hpp"
#include "skelmorph/skeleton_opt.hpp"
#include "skelmorph/spatial.hpp"
#include "skelmorph/synth.hpp"

using namespace skelmorph;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

PointCloud unit_sphere(std::size_t n, std::uint64_t seed) {
    auto spec = SynthShapeSpec::defaults(ShapeKind::sphere);
    spec.count = n;
    return synth_shape(spec, seed);
}

Tensor random_logits(std::size_t m, std::size_t n, Random& rng) {
    Tensor t(m, n);
    for (auto& v : t.values()) v = rng.normal(0.0, 1.0);
    return t;
}

Tensor one_hot(std::size_t m, std::size_t n, std::span<const std::size_t> rows) {
    Tensor w(m, n);
    for (std::size_t j = 0; j < n; ++j) w(rows[j], j) = 1.0;
    return w;
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

}  // namespace

TEST_CASE("compute_centers") {
    const PointCloud s = unit_sphere(200, 1);
    const std::size_t rows[] = {17, 3};
    const auto c = compute_centers(one_hot(200, 2, rows), s.points);
    CHECK(c[0] == s.points[17]);
    CHECK(c[1] == s.points[3]);

    // Centrally symmetric cloud: uniform weights give the centroid.
    std::vector<Point3> sym;
    for (const auto& p : s.points) {
        sym.push_back(p);
        sym.push_back(p * -1.0);
    }
    const auto mid = compute_centers(Tensor(sym.size(), 1, 1.0 / static_cast<double>(sym.size())), sym);
    CHECK(norm(mid[0]) < 1e-12);

    Random rng(2);
    Tape t;
    const Tensor w = ad::column_softmax(t.constant(random_logits(200, 12, rng))).value();
    for (const auto& p : compute_centers(w, s.points)) CHECK(norm(p) <= 1.0 + 1e-9);
    CHECK_THROWS_AS(compute_centers(Tensor(5, 2, 0.5), s.points), Error);
}

TEST_CASE("compute_radii") {
    const PointCloud s = unit_sphere(300, 3);
    Random rng(4);
    Tape t;
    const Tensor w = ad::column_softmax(t.constant(random_logits(300, 1, rng))).value();
    const std::vector<Point3> origin{{0, 0, 0}};
    CHECK(compute_radii(w, s.points, origin)[0] == doctest::Approx(1.0).epsilon(1e-9));

    Random rng2(5);
    std::vector<Point3> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({rng2.uniform(-1, 1), rng2.uniform(-1, 1), rng2.uniform(-1, 1)});
    const std::vector<Point3> centers{{0.1, 0.2, 0.3}, {-0.5, 0.0, 0.2}};
    const std::size_t rows[] = {7, 31};
    const auto r = compute_radii(one_hot(50, 2, rows), pts, centers);
    for (int j = 0; j < 2; ++j) {
        const Point3 p = pts[rows[j]];
        CHECK(r[j] == std::min(distance(p, centers[0]), distance(p, centers[1])));
    }
}

TEST_CASE("sample_sphere_points") {
    const std::vector<SkeletonBall> one{{{0, 0, 0}, 2.0}};
    for (const auto& p : sample_sphere_points(one, 100).points) CHECK(std::abs(norm(p) - 2.0) < 1e-9);
    const std::vector<SkeletonBall> zero{{{1, 2, 3}, 0.0}};
    for (const auto& p : sample_sphere_points(zero, 16).points) CHECK(p == Point3{1, 2, 3});
    const std::vector<SkeletonBall> twin{{{0.5, 0, 0}, 0.3}, {{0.5, 0, 0}, 0.3}};
    const auto t = sample_sphere_points(twin, 16);
    for (std::size_t k = 0; k < 16; ++k) CHECK(t.points[k] == t.points[16 + k]);
    CHECK_THROWS_AS(sample_sphere_points(one, 3), Error);
}

TEST_CASE("loss_sampling") {
    const PointCloud s = unit_sphere(500, 6);
    CHECK(loss_sampling(s.points, s.points) == 0.0);
    // Denser sphere samples approach the analytic sphere. The raw sum gains a
    // term per sphere sample, so the floor is read per point.
    const std::vector<SkeletonBall> ball{{{0, 0, 0}, 1.0}};
    double prev = INFINITY;
    for (std::size_t k : {16, 64, 256, 1024}) {
        const auto t = sample_sphere_points(ball, k).points;
        const double l = chamfer_distance(t, s.points, Aggregation::mean);
        CHECK(l < prev);
        CHECK(loss_sampling(t, s.points) == doctest::Approx(chamfer_distance(t, s.points)).epsilon(1e-12));
        prev = l;
    }
    CHECK_THROWS_AS(loss_sampling({}, s.points), Error);
}

TEST_CASE("loss_point_to_sphere") {
    const PointCloud s = unit_sphere(400, 7);
    const std::vector<SkeletonBall> exact{{{0, 0, 0}, 1.0}};
    CHECK(std::abs(loss_point_to_sphere(s.points, exact)) < 1e-9);
    CHECK(std::abs(loss_point_to_sphere(s.points, exact, ResidualMode::signed_)) < 1e-9);
    const std::vector<SkeletonBall> empty_ball{{{0, 0, 0}, 0.0}};
    // First sum: 400 unit distances; second: one unit distance.
    for (auto mode : {ResidualMode::absolute, ResidualMode::signed_})
        CHECK(loss_point_to_sphere(s.points, empty_ball, mode) == doctest::Approx(401.0).epsilon(1e-12));
    // Oversized ball: signed residuals go negative, absolute ones do not.
    const std::vector<SkeletonBall> big{{{0, 0, 0}, 1.5}};
    CHECK(loss_point_to_sphere(s.points, big, ResidualMode::signed_) == doctest::Approx(-0.5 * 401));
    CHECK(loss_point_to_sphere(s.points, big, ResidualMode::absolute) == doctest::Approx(0.5 * 401));
}

TEST_CASE("loss_radius") {
    const std::vector<SkeletonBall> b{{{0, 0, 0}, 1}, {{1, 0, 0}, 2}, {{2, 0, 0}, 3}};
    CHECK(loss_radius(b) == -6.0);
    const std::vector<SkeletonBall> z{{{0, 0, 0}, 0}, {{1, 0, 0}, 0}};
    CHECK(loss_radius(z) == 0.0);
    Tape t;
    const Var r = t.variable(Tensor(3, 1, std::vector<double>{1, 2, 3}));
    t.backward(tape_loss_radius(r));
    for (double g : r.grad().values()) CHECK(g == -1.0);
}

TEST_CASE("loss_norm") {
    const PointCloud s = unit_sphere(400, 8);
    const std::vector<SkeletonBall> centre{{{0, 0, 0}, 1.0}};
    CHECK(std::abs(loss_norm(s, centre)) < 1e-6);

    // Crescent: a ball in the notch, outside the concave side. Spokes from
    // it to inner-wall samples point against the outward normal there.
    auto spec = SynthShapeSpec::defaults(ShapeKind::crescent);
    spec.count = 2000;
    const PointCloud cres = synth_shape(spec, 9);
    const Point3 notch{-0.9, 0.0, 0.0};
    REQUIRE_FALSE(analytic_inside(spec, notch));
    const auto f = nearest_batch(std::vector<Point3>{notch}, cres.points).index[0];
    const Point3 spoke = cres.points[f] - notch;
    CHECK(1.0 - dot(cres.normals[f], spoke) / norm(spoke) > 1.0);
    CHECK(loss_norm(cres, std::vector<SkeletonBall>{{notch, 0.1}}) > loss_norm(cres, std::vector<SkeletonBall>{{{1, 0, 0}, 0.3}}));

    PointCloud bare;
    bare.points = s.points;
    CHECK_THROWS_AS(loss_norm(bare, centre), Error);
}

TEST_CASE("gradients of each loss match finite differences") {
    Random rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud cloud = random_cloud(10, rng);
        const Tensor x0 = random_logits(10, 3, rng);
        const Tensor u = direction_tensor(4);
        auto with = [&](auto loss) {
            return [&, loss](Tape& t, Var logits) {
                const Var w = ad::column_softmax(logits);
                const Var p = tensor_of(t, cloud.points);
                const Var c = tape_centers(w, p);
                const Var r = tape_radii(w, p, c);
                return loss(t, p, c, r);
            };
        };
        const auto ls = with([&](Tape&, Var p, Var c, Var r) { return tape_loss_sampling(tape_sphere_samples(c, r, u), p); });
        const auto lp = with([&](Tape&, Var p, Var c, Var r) { return tape_loss_point_to_sphere(p, c, r); });
        const auto lps = with([&](Tape&, Var p, Var c, Var r) {
            return tape_loss_point_to_sphere(p, c, r, ResidualMode::signed_);
        });
        const auto lr = with([&](Tape&, Var, Var, Var r) { return tape_loss_radius(r); });
        const auto ln = with([&](Tape& t, Var p, Var c, Var) { return tape_loss_norm(p, tensor_of(t, cloud.normals), c); });
        for (const auto& f : {std::function<Var(Tape&, Var)>(ls), std::function<Var(Tape&, Var)>(lp),
                              std::function<Var(Tape&, Var)>(lps), std::function<Var(Tape&, Var)>(lr),
                              std::function<Var(Tape&, Var)>(ln)}) {
            const auto rep = ad::grad_check(f, x0, 1e-6);
            CHECK(rep.checked > 0);
            CHECK(rep.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("optimize_skeleton preconditions and invariants") {
    auto spec = SynthShapeSpec::defaults(ShapeKind::sphere);
    spec.count = 300;
    const PointCloud s = synth_shape(spec, 11);
    SkeletonOptConfig cfg;
    cfg.n_skeleton_points = 301;
    try {
        optimize_skeleton(s, cfg);
        FAIL("expected parameter error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parameter);
    }
    PointCloud bare;
    bare.points = s.points;
    cfg.n_skeleton_points = 4;
    CHECK_THROWS_AS(optimize_skeleton(bare, cfg), Error);

    cfg.iterations = 60;
    const auto r1 = optimize_skeleton(s, cfg);
    const auto r2 = optimize_skeleton(s, cfg);
    CHECK(r1.trace.size() == 60);
    CHECK(r1.balls == r2.balls);
    const Tensor w = r1.weights.weights();
    for (std::size_t j = 0; j < w.cols(); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) {
            CHECK(w(i, j) >= 0.0);
            col += w(i, j);
        }
        CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (const auto& b : r1.balls) {
        CHECK(norm(b.center) <= 1.0 + 1e-9);
        CHECK(b.radius >= 0.0);
        CHECK(b.radius <= 2.0);
    }
    CHECK(r1.trace.back().total < r1.trace.front().total);

    // lambda_n = 0 drops the norm term from the total exactly.
    cfg.lambda_n = 0.0;
    cfg.iterations = 1;
    const auto r0 = optimize_skeleton(s, cfg);
    const auto& t0 = r0.trace[0];
    CHECK(t0.total == t0.sampling + t0.point_to_sphere + cfg.lambda_r * t0.radius);
}

TEST_CASE("automatic sphere sample count") {
    SkeletonOptConfig cfg;
    CHECK(cfg.sphere_samples(1024) == 16);
    cfg.n_skeleton_points = 8;
    CHECK(cfg.sphere_samples(1024) == 128);
    cfg.k_s = 20;
    CHECK(cfg.sphere_samples(1024) == 20);
    cfg.k_s = 3;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("skeleton text round trip") {
    const std::vector<SkeletonBall> balls{{{0.1, -2.5, 3}, 0.25}, {{1e-17, 4, 5.5}, 0}};
    CHECK(parse_skeleton(format_skeleton(balls)) == balls);
    CHECK_THROWS_AS(parse_skeleton("1 2 3\n"), Error);
    CHECK_THROWS_AS(parse_skeleton("1 2 3 -1\n"), Error);
    CHECK(format_weights_csv(Tensor(2, 2, std::vector<double>{0.5, 1, 0.5, 0})) == "0.5,1\n0.5,0\n");
}
