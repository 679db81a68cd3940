#include "skelmorph/skeleton_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "skelmorph/error.hpp"
#include "skelmorph/io.hpp"
#include "skelmorph/random.hpp"
#include "skelmorph/spatial.hpp"

namespace skelmorph {

using ad::Tape;
using ad::Tensor;
using ad::Var;

void SkeletonOptConfig::validate() const {
    if (n_skeleton_points < 1) fail(ErrorCode::parameter, "n_skeleton_points must be at least 1");
    if (iterations < 1) fail(ErrorCode::parameter, "iterations must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail(ErrorCode::parameter, "learning_rate must be positive");
    if (!(lambda_r >= 0.0) || !(lambda_n >= 0.0) || !std::isfinite(lambda_r) || !std::isfinite(lambda_n))
        fail(ErrorCode::parameter, "loss weights must be nonnegative");
    if (k_s != 0 && k_s < 4) fail(ErrorCode::parameter, "k_s must be at least 4 (or 0 for automatic)");
}

std::size_t SkeletonOptConfig::sphere_samples(std::size_t m) const {
    if (k_s != 0) return k_s;
    const std::size_t n = std::max<std::size_t>(1, n_skeleton_points);
    return std::max<std::size_t>(4, (m + n - 1) / n);
}

ResidualMode parse_residual_mode(std::string_view name) {
    if (name == "absolute") return ResidualMode::absolute;
    if (name == "signed") return ResidualMode::signed_;
    fail(ErrorCode::parameter, "unknown residual mode '" + std::string(name) + "' (absolute, signed)");
}

std::string_view to_string(ResidualMode mode) noexcept {
    return mode == ResidualMode::absolute ? "absolute" : "signed";
}

Tensor WeightMatrix::weights() const {
    Tape tape;
    return ad::column_softmax(tape.constant(logits)).value();
}

// ---------------------------------------------------------------------------
// tensors <-> points

Var tensor_of(Tape& tape, std::span<const Point3> points, bool variable) {
    Tensor t(points.size(), 3);
    for (std::size_t i = 0; i < points.size(); ++i) {
        t(i, 0) = points[i].x;
        t(i, 1) = points[i].y;
        t(i, 2) = points[i].z;
    }
    return variable ? tape.variable(std::move(t)) : tape.constant(std::move(t));
}

std::vector<Point3> points_of(const Tensor& t) {
    if (t.cols() != 3) fail(ErrorCode::shape, "point tensor needs 3 columns");
    std::vector<Point3> out(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) out[i] = {t(i, 0), t(i, 1), t(i, 2)};
    return out;
}

namespace {

Var radii_tensor(Tape& tape, std::span<const SkeletonBall> balls) {
    Tensor r(balls.size(), 1);
    for (std::size_t j = 0; j < balls.size(); ++j) r[j] = balls[j].radius;
    return tape.constant(std::move(r));
}

std::vector<std::uint32_t> nearest_indices(const Tensor& queries, const Tensor& refs) {
    const auto q = points_of(queries);
    const auto r = points_of(refs);
    if (r.empty()) fail(ErrorCode::empty_input, "nearest search against an empty set");
    return nearest_batch(q, r).index;
}

void require_rows(Var v, std::size_t rows, const char* what) {
    if (v.rows() != rows) fail(ErrorCode::shape, std::string(what) + ": row count mismatch");
}

// Floor inside the square root keeps unit spokes defined when a centre
// coincides with a surface sample.
constexpr double kSpokeEps = 1e-18;

}  // namespace

// ---------------------------------------------------------------------------
// tape versions

Var tape_centers(Var weights, Var points) {
    require_rows(points, weights.rows(), "centers");
    return ad::matmul(ad::transpose(weights), points);
}

Var tape_radii(Var weights, Var points, Var centers) {
    require_rows(points, weights.rows(), "radii");
    const auto a = nearest_indices(points.value(), centers.value());
    const Var d = ad::l2_norm(points - ad::gather_rows(centers, a));
    return ad::matmul(ad::transpose(weights), d);
}

Var tape_sphere_samples(Var centers, Var radii, const Tensor& directions) {
    require_rows(radii, centers.rows(), "sphere samples");
    const std::size_t n = centers.rows(), k = directions.rows();
    std::vector<std::uint32_t> rep(n * k);
    Tensor u(n * k, 3);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t s = 0; s < k; ++s) {
            rep[j * k + s] = static_cast<std::uint32_t>(j);
            for (std::size_t c = 0; c < 3; ++c) u(j * k + s, c) = directions(s, c);
        }
    Tape& tape = centers.tape();
    return ad::gather_rows(centers, rep) + ad::mul(tape.constant(std::move(u)), ad::gather_rows(radii, rep));
}

Var tape_loss_sampling(Var t, Var points) {
    if (t.rows() == 0 || points.rows() == 0) fail(ErrorCode::empty_input, "sampling loss of an empty set");
    const auto tp = nearest_indices(t.value(), points.value());
    const auto pt = nearest_indices(points.value(), t.value());
    return ad::sum(ad::l2_norm(points - ad::gather_rows(t, pt))) +
           ad::sum(ad::l2_norm(t - ad::gather_rows(points, tp)));
}

Var tape_loss_point_to_sphere(Var points, Var centers, Var radii, ResidualMode mode) {
    if (points.rows() == 0 || centers.rows() == 0)
        fail(ErrorCode::empty_input, "point-to-sphere loss of an empty set");
    require_rows(radii, centers.rows(), "point-to-sphere loss");
    const auto a = nearest_indices(points.value(), centers.value());
    const auto f = nearest_indices(centers.value(), points.value());
    const Var first = ad::l2_norm(points - ad::gather_rows(centers, a)) - ad::gather_rows(radii, a);
    const Var second = ad::l2_norm(centers - ad::gather_rows(points, f)) - radii;
    if (mode == ResidualMode::signed_) return ad::sum(first) + ad::sum(second);
    return ad::sum(ad::abs(first)) + ad::sum(ad::abs(second));
}

Var tape_loss_radius(Var radii) { return -ad::sum(radii); }

Var tape_loss_norm(Var points, Var normals, Var centers) {
    if (points.rows() == 0 || centers.rows() == 0) fail(ErrorCode::empty_input, "norm loss of an empty set");
    require_rows(normals, points.rows(), "norm loss");
    const auto a = nearest_indices(points.value(), centers.value());
    const auto f = nearest_indices(centers.value(), points.value());
    auto misalignment = [](Var n, Var spoke) {
        const Var cosine = ad::div(ad::dot(n, spoke), ad::l2_norm(spoke, kSpokeEps));
        return ad::sum(ad::add_scalar(-cosine, 1.0));
    };
    const Var ball_spokes = ad::gather_rows(points, f) - centers;
    const Var point_spokes = points - ad::gather_rows(centers, a);
    return misalignment(ad::gather_rows(normals, f), ball_spokes) + misalignment(normals, point_spokes);
}

ad::Tensor direction_tensor(std::size_t k_s) {
    const auto dirs = fibonacci_sphere(k_s);
    Tensor u(dirs.size(), 3);
    for (std::size_t s = 0; s < dirs.size(); ++s) {
        u(s, 0) = dirs[s].x;
        u(s, 1) = dirs[s].y;
        u(s, 2) = dirs[s].z;
    }
    return u;
}

LossTerms skeleton_objective(Var logits, const PointCloud& cloud, const SkeletonOptConfig& cfg) {
    Tape& tape = logits.tape();
    if (logits.rows() != cloud.size()) fail(ErrorCode::shape, "logits rows must equal the sample count");
    const Var w = ad::column_softmax(logits);
    const Var p = tensor_of(tape, cloud.points);
    const Var c = tape_centers(w, p);
    const Var r = tape_radii(w, p, c);
    LossTerms terms;
    const Tensor dirs = direction_tensor(cfg.sphere_samples(cloud.size()));
    terms.sampling = tape_loss_sampling(tape_sphere_samples(c, r, dirs), p);
    terms.point_to_sphere = tape_loss_point_to_sphere(p, c, r, cfg.residual);
    terms.radius = tape_loss_radius(r);
    terms.total = terms.sampling + terms.point_to_sphere + ad::scale(terms.radius, cfg.lambda_r);
    if (cloud.has_normals()) {
        terms.norm = tape_loss_norm(p, tensor_of(tape, cloud.normals), c);
        if (cfg.lambda_n > 0.0) terms.total = terms.total + ad::scale(terms.norm, cfg.lambda_n);
    } else if (cfg.lambda_n > 0.0) {
        fail(ErrorCode::precondition, "norm loss needs surface normals");
    }
    return terms;
}

// ---------------------------------------------------------------------------
// plain evaluation

std::vector<Point3> compute_centers(const Tensor& weights, std::span<const Point3> points) {
    if (weights.rows() != points.size()) fail(ErrorCode::shape, "weight rows must equal the point count");
    Tape tape;
    return points_of(tape_centers(tape.constant(weights), tensor_of(tape, points)).value());
}

std::vector<double> compute_radii(const Tensor& weights, std::span<const Point3> points,
                                  std::span<const Point3> centers) {
    if (weights.rows() != points.size()) fail(ErrorCode::shape, "weight rows must equal the point count");
    if (weights.cols() != centers.size()) fail(ErrorCode::shape, "weight columns must equal the centre count");
    Tape tape;
    const Tensor& r =
        tape_radii(tape.constant(weights), tensor_of(tape, points), tensor_of(tape, centers)).value();
    return {r.values().begin(), r.values().end()};
}

std::vector<SkeletonBall> balls_from_weights(const Tensor& weights, std::span<const Point3> points) {
    const auto c = compute_centers(weights, points);
    const auto r = compute_radii(weights, points, c);
    std::vector<SkeletonBall> out(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) out[j] = {c[j], r[j]};
    return out;
}

std::vector<Point3> fibonacci_sphere(std::size_t k) {
    if (k < 1) fail(ErrorCode::parameter, "fibonacci lattice needs at least one point");
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Point3> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(k);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        out[i] = {rho * std::cos(phi), rho * std::sin(phi), z};
    }
    return out;
}

PointCloud sample_sphere_points(std::span<const SkeletonBall> balls, std::size_t k_s) {
    if (k_s < 4) fail(ErrorCode::parameter, "k_s must be at least 4");
    const auto dirs = fibonacci_sphere(k_s);
    PointCloud out;
    out.points.reserve(balls.size() * k_s);
    for (const auto& b : balls)
        for (const auto& u : dirs) out.points.push_back(b.center + u * b.radius);
    return out;
}

double loss_sampling(std::span<const Point3> t, std::span<const Point3> p) {
    if (t.empty() || p.empty()) fail(ErrorCode::empty_input, "sampling loss of an empty set");
    Tape tape;
    return tape_loss_sampling(tensor_of(tape, t), tensor_of(tape, p)).value().item();
}

double loss_point_to_sphere(std::span<const Point3> p, std::span<const SkeletonBall> balls, ResidualMode mode) {
    if (p.empty() || balls.empty()) fail(ErrorCode::empty_input, "point-to-sphere loss of an empty set");
    Tape tape;
    const auto c = centers_of({balls.begin(), balls.end()});
    return tape_loss_point_to_sphere(tensor_of(tape, p), tensor_of(tape, c), radii_tensor(tape, balls), mode)
        .value()
        .item();
}

double loss_radius(std::span<const SkeletonBall> balls) {
    double s = 0.0;
    for (const auto& b : balls) s += b.radius;
    return -s;
}

double loss_norm(const PointCloud& p, std::span<const SkeletonBall> balls) {
    if (!p.has_normals()) fail(ErrorCode::precondition, "norm loss needs surface normals");
    if (p.empty() || balls.empty()) fail(ErrorCode::empty_input, "norm loss of an empty set");
    Tape tape;
    const auto c = centers_of({balls.begin(), balls.end()});
    return tape_loss_norm(tensor_of(tape, p.points), tensor_of(tape, p.normals), tensor_of(tape, c))
        .value()
        .item();
}

// ---------------------------------------------------------------------------
// optimization

WeightMatrix initial_logits(std::span<const Point3> points, std::size_t n, std::uint64_t seed) {
    const std::size_t m = points.size();
    if (n < 1) fail(ErrorCode::parameter, "need at least one skeleton point");
    if (n > m)
        fail(ErrorCode::parameter,
             "more skeleton points (" + std::to_string(n) + ") than samples (" + std::to_string(m) + ")");
    // Farthest-point order, starting from the sample farthest from the centroid.
    const Point3 mid = centroid(points);
    std::size_t cur = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (squared_distance(points[i], mid) > squared_distance(points[cur], mid)) cur = i;
    std::vector<double> gap(m);
    for (std::size_t i = 0; i < m; ++i) gap[i] = squared_distance(points[i], points[cur]);
    std::vector<std::size_t> order{cur};
    while (order.size() < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < m; ++i)
            if (gap[i] > gap[best]) best = i;
        order.push_back(best);
        for (std::size_t i = 0; i < m; ++i) gap[i] = std::min(gap[i], squared_distance(points[i], points[best]));
    }

    WeightMatrix w{Tensor(m, n)};
    Random rng(derive_seed(seed, 0x5EED));
    for (auto& v : w.logits.values()) v = rng.normal(0.0, 0.01);
    const double bias = std::log(static_cast<double>(m));
    for (std::size_t j = 0; j < n; ++j) w.logits(order[j], j) += bias;
    return w;
}

SkeletonResult optimize_skeleton(const PointCloud& cloud, const SkeletonOptConfig& cfg) {
    cfg.validate();
    cloud.validate();
    if (cloud.empty()) fail(ErrorCode::empty_input, "skeletonize an empty cloud");
    if (!cloud.has_normals()) fail(ErrorCode::precondition, "skeletonize needs surface normals");

    SkeletonResult result;
    result.weights = initial_logits(cloud.points, cfg.n_skeleton_points, cfg.seed);
    result.trace.reserve(cfg.iterations);
    ad::Adam adam(ad::AdamConfig{cfg.learning_rate});
    Tensor& logits = result.weights.logits;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        try {
            Tape tape;
            const Var x = tape.variable(logits);
            const LossTerms terms = skeleton_objective(x, cloud, cfg);
            result.trace.push_back({terms.total.value().item(), terms.sampling.value().item(),
                                    terms.point_to_sphere.value().item(), terms.radius.value().item(),
                                    terms.norm.valid() ? terms.norm.value().item() : 0.0});
            tape.backward(terms.total);
            const Tensor& g = x.grad();
            if (!g.all_finite()) fail(ErrorCode::numeric, "non-finite gradient");
            Tensor* params[] = {&logits};
            const Tensor* grads[] = {&g};
            adam.step(params, grads);
            if (!logits.all_finite()) fail(ErrorCode::numeric, "non-finite logits after step");
        } catch (const Error& e) {
            if (e.code() != ErrorCode::numeric) throw;
            fail(ErrorCode::numeric, "iteration " + std::to_string(it) + ": " + e.what());
        }
    }
    result.balls = balls_from_weights(result.weights.weights(), cloud.points);
    return result;
}

// ---------------------------------------------------------------------------
// text formats

std::string format_skeleton(std::span<const SkeletonBall> balls) {
    std::string out;
    for (const auto& b : balls) {
        out += io::format_real(b.center.x) + ' ' + io::format_real(b.center.y) + ' ' +
               io::format_real(b.center.z) + ' ' + io::format_real(b.radius) + '\n';
    }
    return out;
}

std::vector<SkeletonBall> parse_skeleton(std::string_view text) {
    std::vector<SkeletonBall> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = io::split_ws(line);
        if (toks.empty() || toks.front().front() == '#') continue;
        if (toks.size() != 4)
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected 'x y z r', got " +
                                       std::to_string(toks.size()) + " fields");
        SkeletonBall b{{io::parse_real(toks[0], line_no), io::parse_real(toks[1], line_no),
                        io::parse_real(toks[2], line_no)},
                       io::parse_real(toks[3], line_no)};
        if (b.radius < 0.0) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": negative radius");
        out.push_back(b);
    }
    return out;
}

std::vector<SkeletonBall> load_skeleton(const std::filesystem::path& path) {
    auto balls = parse_skeleton(io::read_text(path));
    if (balls.empty()) fail(ErrorCode::empty_input, "no balls in " + path.string());
    return balls;
}

std::string format_weights_csv(const Tensor& weights) {
    std::string out;
    for (std::size_t r = 0; r < weights.rows(); ++r) {
        for (std::size_t c = 0; c < weights.cols(); ++c) {
            if (c) out += ',';
            out += io::format_real(weights(r, c));
        }
        out += '\n';
    }
    return out;
}

}  // namespace skelmorph
