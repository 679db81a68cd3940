#include "skelmorph/links.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "skelmorph/error.hpp"
#include "skelmorph/io.hpp"
#include "skelmorph/random.hpp"
#include "skelmorph/spatial.hpp"

namespace skelmorph {

using ad::Tape;
using ad::Tensor;
using ad::Var;

std::size_t Adjacency::edge_count() const noexcept {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) c += (*this)(i, j) ? 1 : 0;
    return c;
}

std::vector<std::pair<std::size_t, std::size_t>> Adjacency::edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if ((*this)(i, j)) out.emplace_back(i, j);
    return out;
}

AdjacencyInit init_adjacency(std::span<const SkeletonBall> balls, std::size_t k) {
    const std::size_t n = balls.size();
    if (n < 2) fail(ErrorCode::size, "init_adjacency needs at least 2 balls, got " + std::to_string(n));
    if (k < 1) fail(ErrorCode::parameter, "init_adjacency: k must be >= 1");

    std::vector<Point3> centers(n);
    for (std::size_t i = 0; i < n; ++i) centers[i] = balls[i].center;

    // knn[i][j] true when j is among the k nearest other centres of i
    Adjacency knn(n);
    KdTree tree(centers);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = tree.knn(centers[i], std::min(k + 1, n));
        std::size_t taken = 0;
        for (const Neighbor& m : nb) {
            if (m.index == i || taken == k) continue;
            knn.bits[i * n + m.index] = 1;
            ++taken;
        }
    }

    AdjacencyInit init{Adjacency(n), Adjacency(n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(centers[i], centers[j]);
            const double rs = balls[i].radius + balls[j].radius;
            const bool overlap = d <= rs;
            const bool mutual = knn(i, j) && knn(j, i);
            if (overlap || mutual) {
                init.known_edges.set(i, j);
                init.known_mask.set(i, j);
            } else if (d > 3.0 * rs) {
                init.known_mask.set(i, j);
            }
        }
    }
    return init;
}

NodeFeatures node_features(std::span<const SkeletonBall> balls, const AdjacencyInit& init,
                           const PointCloud* surface, const ad::Tensor* weights) {
    const std::size_t n = balls.size();
    if (init.size() != n) fail(ErrorCode::shape, "node_features: adjacency size does not match ball count");
    std::vector<double> spoke(n, 0.0), count(n, 0.0), hits(n, 0.0);
    if (surface && !surface->empty()) {
        std::vector<Point3> centers(n);
        for (std::size_t i = 0; i < n; ++i) centers[i] = balls[i].center;
        const NearestResult nr = nearest_batch(surface->points, centers);
        for (std::size_t p = 0; p < surface->size(); ++p) {
            spoke[nr.index[p]] += std::sqrt(nr.sq_dist[p]);
            hits[nr.index[p]] += 1.0;
        }
        if (weights) {
            if (weights->rows() != surface->size() || weights->cols() != n)
                fail(ErrorCode::shape, "node_features: weight matrix must be M x N");
            for (std::size_t p = 0; p < weights->rows(); ++p) {
                std::size_t best = 0;
                for (std::size_t j = 1; j < n; ++j)
                    if ((*weights)(p, j) > (*weights)(p, best)) best = j;
                count[best] += 1.0;
            }
        }
    }
    NodeFeatures f{Tensor(n, NodeFeatures::width)};
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t degree = 0;
        for (std::size_t j = 0; j < n; ++j) degree += init.known_edges(i, j) ? 1 : 0;
        f.values(i, 0) = balls[i].center.x;
        f.values(i, 1) = balls[i].center.y;
        f.values(i, 2) = balls[i].center.z;
        f.values(i, 3) = balls[i].radius;
        f.values(i, 4) = static_cast<double>(degree);
        f.values(i, 5) = hits[i] > 0.0 ? spoke[i] / hits[i] : balls[i].radius;
        f.values(i, 6) = count[i];
    }
    if (!f.values.all_finite()) fail(ErrorCode::numeric, "node_features: non-finite feature");
    return f;
}

void GaeConfig::validate() const {
    if (epochs < 1) fail(ErrorCode::parameter, "gae: epochs must be >= 1");
    if (hidden1 < 1 || hidden2 < 1) fail(ErrorCode::parameter, "gae: hidden dims must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail(ErrorCode::parameter, "gae: learning rate must be positive");
}

Tensor normalized_adjacency(const Adjacency& a) {
    const std::size_t n = a.n;
    std::vector<double> dinv(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 1.0;
        for (std::size_t j = 0; j < n; ++j) d += (i != j && a(i, j)) ? 1.0 : 0.0;
        dinv[i] = 1.0 / std::sqrt(d);
    }
    Tensor out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i == j || a(i, j)) out(i, j) = dinv[i] * dinv[j];
    return out;
}

Var mbce_loss(Var logits, const AdjacencyInit& init) {
    const std::size_t n = init.size();
    if (logits.rows() != n || logits.cols() != n) fail(ErrorCode::shape, "mbce_loss: logits must be n x n");
    std::vector<std::uint32_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!init.known_mask(i, j)) continue;
            (init.known_edges(i, j) ? pos : neg).push_back(static_cast<std::uint32_t>(i * n + j));
        }
    if (pos.empty() && neg.empty()) fail(ErrorCode::degenerate, "mbce_loss: no masked entries");
    // one class missing: the other carries the full weight
    const double wp = pos.empty() ? 0.0 : (neg.empty() ? 1.0 : 0.5) / static_cast<double>(pos.size());
    const double wn = neg.empty() ? 0.0 : (pos.empty() ? 1.0 : 0.5) / static_cast<double>(neg.size());
    Var total;
    if (!pos.empty()) {
        const Var l = ad::gather(logits, pos);
        total = ad::scale(ad::sum(ad::softplus(ad::scale(l, -1.0))), wp);  // softplus(l) - l
    }
    if (!neg.empty()) {
        const Var l = ad::gather(logits, neg);
        const Var t = ad::scale(ad::sum(ad::softplus(l)), wn);
        total = total.valid() ? ad::add(total, t) : t;
    }
    return total;
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Random& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t(rows, cols);
    for (auto& v : t.values()) v = rng.uniform(-a, a);
    return t;
}

Tensor standardized(const Tensor& x) {
    Tensor out = x;
    const std::size_t n = x.rows();
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double mu = 0.0;
        for (std::size_t r = 0; r < n; ++r) mu += x(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mu) * (x(r, c) - mu);
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (std::size_t r = 0; r < n; ++r) out(r, c) = sd > 1e-12 ? (x(r, c) - mu) / sd : 0.0;
    }
    return out;
}

}  // namespace

GaeResult gae_train(const NodeFeatures& features, const AdjacencyInit& init, const GaeConfig& cfg) {
    cfg.validate();
    const std::size_t n = init.size();
    if (features.values.rows() != n) fail(ErrorCode::shape, "gae_train: feature rows do not match node count");
    if (init.known_mask.edge_count() == 0) fail(ErrorCode::degenerate, "gae_train: no masked entries to train on");

    const Tensor a_hat = normalized_adjacency(init.known_edges);
    const Tensor x = cfg.standardize ? standardized(features.values) : features.values;
    Random rng(derive_seed(cfg.seed, 0x6AE));
    Tensor w1 = glorot(x.cols(), cfg.hidden1, rng);
    Tensor w2 = glorot(cfg.hidden1, cfg.hidden2, rng);

    auto forward = [&](Tape& tape, Var& v1, Var& v2) {
        const Var a = tape.constant(a_hat);
        const Var xin = tape.constant(x);
        v1 = tape.variable(w1);
        v2 = tape.variable(w2);
        const Var h = ad::relu(ad::matmul(a, ad::matmul(xin, v1)));
        const Var z = ad::matmul(a, ad::matmul(h, v2));
        return ad::matmul(z, ad::transpose(z));
    };

    GaeResult result;
    result.loss_trace.reserve(cfg.epochs);
    ad::Adam adam(ad::AdamConfig{cfg.learning_rate});
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        Tape tape;
        Var v1, v2;
        const Var loss = mbce_loss(forward(tape, v1, v2), init);
        const double lv = loss.value().item();
        if (!std::isfinite(lv)) fail(ErrorCode::numeric, "gae_train: non-finite loss at epoch " + std::to_string(e));
        result.loss_trace.push_back(lv);
        tape.backward(loss);
        Tensor* params[] = {&w1, &w2};
        const Tensor* grads[] = {&v1.grad(), &v2.grad()};
        adam.step(params, grads);
    }

    Tape tape;
    Var v1, v2;
    const Tensor logits = forward(tape, v1, v2).value();
    LinkPrediction& pred = result.prediction;
    pred.n = n;
    pred.probabilities.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p = ad::sigmoid(0.5 * (logits(i, j) + logits(j, i)));
            pred.probabilities[i * n + j] = pred.probabilities[j * n + i] = p;
        }
    return result;
}

Adjacency threshold_links(const LinkPrediction& pred, const AdjacencyInit& init, bool ensure_connected,
                          std::span<const SkeletonBall> balls) {
    const std::size_t n = init.size();
    if (!(pred.threshold > 0.0 && pred.threshold < 1.0))
        fail(ErrorCode::parameter, "threshold must lie in (0, 1)");
    if (pred.n != n || pred.probabilities.size() != n * n)
        fail(ErrorCode::shape, "threshold_links: prediction size does not match adjacency");
    Adjacency out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (init.known_mask(i, j)) {
                if (init.known_edges(i, j)) out.set(i, j);
            } else if (pred(i, j) >= pred.threshold) {
                out.set(i, j);
            }
        }
    if (!ensure_connected || n < 2) return out;
    if (balls.size() != n) fail(ErrorCode::shape, "ensure_connected needs the balls for centre distances");

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    std::size_t components = n;
    for (const auto& [i, j] : out.edges()) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    if (components == 1) return out;
    struct Pair {
        double d;
        std::size_t i, j;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (find(i) != find(j)) pairs.push_back({distance(balls[i].center, balls[j].center), i, j});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return a.d < b.d || (a.d == b.d && (a.i < b.i || (a.i == b.i && a.j < b.j)));
    });
    for (const Pair& p : pairs) {
        const std::size_t a = find(p.i), b = find(p.j);
        if (a == b) continue;
        parent[a] = b;
        out.set(p.i, p.j);
        if (--components == 1) break;
    }
    return out;
}

std::string format_mesh(const SkeletonMesh& mesh) {
    const auto edges = mesh.adjacency.edges();
    std::string out = std::to_string(mesh.balls.size()) + ' ' + std::to_string(edges.size()) + '\n';
    for (const SkeletonBall& b : mesh.balls)
        out += io::format_real(b.center.x) + ' ' + io::format_real(b.center.y) + ' ' + io::format_real(b.center.z) +
               ' ' + io::format_real(b.radius) + '\n';
    for (const auto& [i, j] : edges) out += std::to_string(i) + ' ' + std::to_string(j) + '\n';
    return out;
}

SkeletonMesh parse_mesh(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto next = [&]() -> std::vector<std::string> {
        while (std::getline(in, line)) {
            ++line_no;
            auto toks = io::split_ws(line);
            if (!toks.empty() && toks.front().front() != '#') return toks;
        }
        return {};
    };
    auto count = [&](const std::string& tok) {
        const double v = io::parse_real(tok, line_no);
        if (v < 0.0 || v != std::floor(v)) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": bad count");
        return static_cast<std::size_t>(v);
    };
    const auto header = next();
    if (header.empty()) fail(ErrorCode::empty_input, "empty skeleton mesh");
    if (header.size() != 2) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected 'n_balls n_edges'");
    const std::size_t nb = count(header[0]), ne = count(header[1]);
    SkeletonMesh mesh;
    mesh.balls.reserve(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        const auto t = next();
        if (t.size() != 4) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected 'x y z r'");
        mesh.balls.push_back({{io::parse_real(t[0], line_no), io::parse_real(t[1], line_no),
                               io::parse_real(t[2], line_no)},
                              io::parse_real(t[3], line_no)});
    }
    mesh.adjacency = Adjacency(nb);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto t = next();
        if (t.size() != 2) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected 'i j'");
        const std::size_t i = count(t[0]), j = count(t[1]);
        if (i >= nb || j >= nb) fail(ErrorCode::reference, "line " + std::to_string(line_no) + ": edge index out of range");
        if (i == j) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": self loop");
        if (mesh.adjacency(i, j)) fail(ErrorCode::duplicate, "line " + std::to_string(line_no) + ": duplicate edge");
        mesh.adjacency.set(i, j);
    }
    if (!next().empty()) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": trailing data");
    return mesh;
}

SkeletonMesh load_mesh(const std::filesystem::path& path) { return parse_mesh(io::read_text(path)); }

}  // namespace skelmorph
