#include "skelmorph/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "skelmorph/error.hpp"
#include "skelmorph/io.hpp"
#include "skelmorph/links.hpp"
#include "skelmorph/synth.hpp"

namespace skelmorph {

using ad::Tape;
using ad::Tensor;
using ad::Var;

Pooling parse_pooling(std::string_view name) {
    if (name == "sum") return Pooling::sum;
    if (name == "mean") return Pooling::mean;
    fail(ErrorCode::parameter, "unknown pooling '" + std::string(name) + "'");
}

std::string_view to_string(Pooling p) noexcept { return p == Pooling::sum ? "sum" : "mean"; }

void EmbedConfig::validate() const {
    if (gcn_widths.empty()) fail(ErrorCode::parameter, "embed: need at least one graph-convolution layer");
    if (disc_widths.size() != 3) fail(ErrorCode::parameter, "embed: discriminator needs exactly 3 widths");
    for (auto w : gcn_widths)
        if (w < 1) fail(ErrorCode::parameter, "embed: layer widths must be >= 1");
    for (auto w : disc_widths)
        if (w < 1) fail(ErrorCode::parameter, "embed: discriminator widths must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail(ErrorCode::parameter, "embed: learning rate must be positive");
    if (negatives_per_positive < 1) fail(ErrorCode::parameter, "embed: need at least one negative per positive");
}

std::size_t EmbedConfig::global_width() const {
    std::size_t s = 0;
    for (auto w : gcn_widths) s += w;
    return s;
}

Tensor node_inputs(const SkeletonGraph& g) {
    Tensor x(g.node_count(), kNodeInputWidth);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto& b = g.node(i);
        x(i, 0) = b.center.x;
        x(i, 1) = b.center.y;
        x(i, 2) = b.center.z;
        x(i, 3) = b.radius;
        x(i, 4) = static_cast<double>(g.neighbors(i).size());
    }
    return x;
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Random& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t(rows, cols);
    for (auto& v : t.values()) v = rng.uniform(-a, a);
    return t;
}

void init_mlp(std::vector<Tensor>& out, std::size_t in, std::span<const std::size_t> widths, Random& rng) {
    for (auto w : widths) {
        out.push_back(glorot(in, w, rng));
        out.emplace_back(1, w);
        in = w;
    }
}

Tensor graph_adjacency(const SkeletonGraph& g) {
    Adjacency a(g.node_count());
    for (const auto& e : g.edges()) a.set(e.u, e.v);
    return normalized_adjacency(a);
}

}  // namespace

EncoderParams EncoderParams::init(const EmbedConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Random rng(derive_seed(seed, 0xE4B));
    EncoderParams p;
    std::size_t in = kNodeInputWidth;
    for (auto w : cfg.gcn_widths) {
        p.gcn.push_back(glorot(in, w, rng));
        in = w;
    }
    init_mlp(p.phi, cfg.global_width(), cfg.disc_widths, rng);
    init_mlp(p.psi, cfg.global_width(), cfg.disc_widths, rng);
    return p;
}

std::vector<Tensor*> EncoderParams::all() {
    std::vector<Tensor*> out;
    for (auto* group : {&gcn, &phi, &psi})
        for (auto& t : *group) out.push_back(&t);
    return out;
}

TapeEncoding tape_encode(Tape& tape, const SkeletonGraph& g, std::span<const Var> gcn, Pooling pooling) {
    if (g.node_count() == 0) fail(ErrorCode::empty_input, "encode: graph has no nodes");
    const Var a = tape.constant(graph_adjacency(g));
    Var h = tape.constant(node_inputs(g));
    std::vector<Var> outs;
    for (const Var& w : gcn) {
        h = ad::relu(ad::matmul(a, ad::matmul(h, w)));
        outs.push_back(h);
    }
    TapeEncoding e;
    e.patches = outs.size() == 1 ? outs.front() : ad::concat_cols(outs);
    e.global = ad::col_sum(e.patches);
    if (pooling == Pooling::mean) e.global = ad::scale(e.global, 1.0 / static_cast<double>(g.node_count()));
    return e;
}

Encoding encode(const SkeletonGraph& g, const EncoderParams& params, const EmbedConfig& cfg) {
    Tape tape;
    std::vector<Var> w;
    for (const auto& t : params.gcn) w.push_back(tape.constant(t));
    const auto e = tape_encode(tape, g, w, cfg.pooling);
    return {e.patches.value(), e.global.value()};
}

Var tape_discriminator(Var x, std::span<const Var> layers) {
    if (layers.size() != 6) fail(ErrorCode::shape, "discriminator expects 3 (W, b) layers");
    for (std::size_t l = 0; l < 3; ++l) {
        if (x.cols() != layers[2 * l].rows())
            fail(ErrorCode::shape, "discriminator input width " + std::to_string(x.cols()) + " does not match layer " +
                                       std::to_string(l));
        x = ad::add(ad::matmul(x, layers[2 * l]), layers[2 * l + 1]);
        if (l < 2) x = ad::relu(x);
    }
    return x;
}

double discriminator_score(std::span<const double> h, std::span<const double> H, const EncoderParams& params) {
    if (h.size() != H.size()) fail(ErrorCode::shape, "patch and global widths differ");
    Tape tape;
    std::vector<Var> phi, psi;
    for (const auto& t : params.phi) phi.push_back(tape.constant(t));
    for (const auto& t : params.psi) psi.push_back(tape.constant(t));
    const Var a = tape_discriminator(tape.constant(Tensor(1, h.size(), {h.begin(), h.end()})), phi);
    const Var b = tape_discriminator(tape.constant(Tensor(1, H.size(), {H.begin(), H.end()})), psi);
    if (a.cols() != b.cols()) fail(ErrorCode::shape, "discriminator output widths differ");
    return ad::dot(a, b).value().item();
}

Var jsd_mi(Var positive, Var negative) {
    if (positive.value().empty() || negative.value().empty())
        fail(ErrorCode::degenerate, "jsd_mi needs at least one positive and one negative score");
    auto term = [](Var t) {
        return ad::scale(ad::mean(ad::softplus(ad::scale(ad::clamp(t, -kScoreClamp, kScoreClamp), -1.0))), -1.0);
    };
    return ad::sub(term(positive), term(negative));
}

double jsd_mi(std::span<const double> positive, std::span<const double> negative) {
    if (positive.empty() || negative.empty())
        fail(ErrorCode::degenerate, "jsd_mi needs at least one positive and one negative score");
    auto term = [](std::span<const double> s) {
        double acc = 0.0;
        for (double t : s) acc -= ad::softplus(-std::clamp(t, -kScoreClamp, kScoreClamp));
        return acc / static_cast<double>(s.size());
    };
    return term(positive) - term(negative);
}

PairBatch sample_pairs(std::span<const std::size_t> graph_sizes, std::size_t negatives_per_positive, Random& rng) {
    if (graph_sizes.size() < 2) fail(ErrorCode::degenerate, "negative pairs need at least two graphs");
    std::size_t total = 0;
    for (auto s : graph_sizes) total += s;
    PairBatch b;
    std::size_t start = 0;
    for (std::size_t gi = 0; gi < graph_sizes.size(); ++gi) {
        const std::size_t n = graph_sizes[gi];
        if (n == total) fail(ErrorCode::degenerate, "negative pairs need nodes outside every graph");
        for (std::size_t j = 0; j < n; ++j) {
            b.pos_patch.push_back(static_cast<std::uint32_t>(start + j));
            b.pos_graph.push_back(static_cast<std::uint32_t>(gi));
            for (std::size_t r = 0; r < negatives_per_positive; ++r) {
                std::size_t u = rng.index(total - n);
                if (u >= start) u += n;
                b.neg_patch.push_back(static_cast<std::uint32_t>(u));
                b.neg_graph.push_back(static_cast<std::uint32_t>(gi));
            }
        }
        start += n;
    }
    return b;
}

InfoGraphResult infograph_train(std::span<const SkeletonGraph> graphs, const EmbedConfig& cfg) {
    cfg.validate();
    if (graphs.size() < 2) fail(ErrorCode::degenerate, "infograph needs at least two graphs");
    std::vector<std::size_t> sizes;
    for (const auto& g : graphs) {
        if (g.node_count() == 0) fail(ErrorCode::empty_input, "infograph: graph with no nodes");
        sizes.push_back(g.node_count());
    }
    InfoGraphResult result;
    result.params = EncoderParams::init(cfg, cfg.seed);
    Random rng(derive_seed(cfg.seed, 0x1F0));
    ad::Adam adam(ad::AdamConfig{cfg.learning_rate});
    const std::size_t n_graphs = graphs.size();
    auto params = result.params.all();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const PairBatch batch = sample_pairs(sizes, cfg.negatives_per_positive, rng);
        Tape tape;
        std::vector<Var> vars;
        for (Tensor* t : params) vars.push_back(tape.variable(*t));
        const std::span<const Var> gcn(vars.data(), cfg.gcn_widths.size());
        const std::span<const Var> phi(vars.data() + gcn.size(), 6);
        const std::span<const Var> psi(vars.data() + gcn.size() + 6, 6);
        std::vector<Var> patches, globals;
        for (const auto& g : graphs) {
            const auto e = tape_encode(tape, g, gcn, cfg.pooling);
            patches.push_back(e.patches);
            globals.push_back(e.global);
        }
        const Var pa = tape_discriminator(ad::concat_rows(patches), phi);
        const Var gl = tape_discriminator(ad::concat_rows(globals), psi);
        const Var scores = ad::matmul(pa, ad::transpose(gl));  // patches x graphs
        auto flat = [&](const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& cols) {
            std::vector<std::uint32_t> idx(rows.size());
            for (std::size_t k = 0; k < rows.size(); ++k)
                idx[k] = static_cast<std::uint32_t>(rows[k] * n_graphs + cols[k]);
            return ad::gather(scores, idx);
        };
        const Var mi = jsd_mi(flat(batch.pos_patch, batch.pos_graph), flat(batch.neg_patch, batch.neg_graph));
        const double value = mi.value().item();
        if (!std::isfinite(value))
            fail(ErrorCode::numeric, "infograph: non-finite objective at epoch " + std::to_string(epoch));
        result.objective_trace.push_back(value);
        const Var loss = ad::scale(mi, -1.0);
        tape.backward(loss);
        std::vector<const Tensor*> grads;
        for (const Var& v : vars) grads.push_back(&v.grad());
        adam.step(params, grads);
    }

    result.globals = Tensor(n_graphs, cfg.global_width());
    for (std::size_t i = 0; i < n_graphs; ++i) {
        const auto e = encode(graphs[i], result.params, cfg);
        std::copy(e.global.values().begin(), e.global.values().end(),
                  result.globals.values().begin() + static_cast<std::ptrdiff_t>(i * cfg.global_width()));
    }
    return result;
}

std::vector<double> symmetric_eigenvalues(const Tensor& input) {
    const std::size_t n = input.rows();
    if (input.cols() != n) fail(ErrorCode::shape, "eigenvalues need a square matrix");
    Tensor a = input;
    double total = 0.0;
    for (double v : a.values()) total += v * v;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-30 * std::max(total, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

std::vector<double> graph_spectrum(const SkeletonGraph& g, std::size_t d) {
    if (d < 1) fail(ErrorCode::parameter, "graph_spectrum: d must be >= 1");
    Tensor a(g.node_count(), g.node_count());
    for (const auto& e : g.edges()) a(e.u, e.v) = a(e.v, e.u) = e.weight;
    auto ev = symmetric_eigenvalues(a);
    ev.resize(d, 0.0);
    return ev;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

void check_vectors(const Vectors& v) {
    if (v.empty()) fail(ErrorCode::empty_input, "no vectors");
    for (const auto& x : v) {
        if (x.size() != v.front().size()) fail(ErrorCode::shape, "vectors have different widths");
        for (double c : x)
            if (!std::isfinite(c)) fail(ErrorCode::numeric, "non-finite vector component");
    }
}

}  // namespace

std::size_t assign_nearest_center(std::span<const double> v, const Vectors& centers) {
    if (centers.empty()) fail(ErrorCode::empty_input, "no centers");
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (centers[c].size() != v.size()) fail(ErrorCode::shape, "center width mismatch");
        const double d = sq_dist(v, centers[c]);
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    return best;
}

KMeansResult kmeanspp(const Vectors& vectors, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
    check_vectors(vectors);
    const std::size_t n = vectors.size();
    if (k < 1 || k > n)
        fail(ErrorCode::size, "kmeans: k = " + std::to_string(k) + " needs 1 <= k <= " + std::to_string(n));
    Random rng(derive_seed(seed, 0x4B4D));
    KMeansResult r;
    std::vector<std::uint8_t> chosen(n, 0);
    std::size_t first = rng.index(n);
    r.centers.push_back(vectors[first]);
    chosen[first] = 1;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(vectors[i], r.centers.back());
    while (r.centers.size() < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
        } else {
            // every point coincides with a centre: take the lowest unused index
            for (std::size_t i = 0; i < n && pick == n; ++i)
                if (!chosen[i]) pick = i;
        }
        chosen[pick] = 1;
        r.centers.push_back(vectors[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(vectors[i], r.centers.back()));
    }

    const std::size_t dim = vectors.front().size();
    r.assignments.assign(n, 0);
    bool first_pass = true;
    for (std::size_t it = 0; it < max_iters; ++it) {
        bool changed = first_pass;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = assign_nearest_center(vectors[i], r.centers);
            if (c != r.assignments[i]) changed = true;
            r.assignments[i] = c;
        }
        first_pass = false;
        if (!changed) break;
        Vectors sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[r.assignments[i]];
            for (std::size_t d = 0; d < dim; ++d) sums[r.assignments[i]][d] += vectors[i][d];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (std::size_t d = 0; d < dim; ++d) r.centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(vectors[i], r.centers[r.assignments[i]]);
        r.inertia_trace.push_back(inertia);
        r.iterations = it + 1;
    }
    r.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) r.inertia += sq_dist(vectors[i], r.centers[r.assignments[i]]);
    return r;
}

std::vector<std::optional<int>> majority_label(std::span<const std::size_t> assignments, std::span<const int> labels,
                                               std::size_t k, std::vector<std::size_t>* empty) {
    if (assignments.size() != labels.size()) fail(ErrorCode::shape, "assignments and labels differ in length");
    std::vector<std::map<int, std::size_t>> votes(k);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] >= k) fail(ErrorCode::reference, "assignment out of range");
        ++votes[assignments[i]][labels[i]];
    }
    std::vector<std::optional<int>> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        if (votes[c].empty()) {
            if (empty) empty->push_back(c);
            continue;
        }
        std::size_t best = 0;
        for (const auto& [label, count] : votes[c])  // ascending labels, strict > keeps the smallest
            if (count > best) {
                best = count;
                out[c] = label;
            }
    }
    return out;
}

double cluster_accuracy(const Vectors& vectors, std::span<const int> labels, std::size_t k, std::uint64_t seed) {
    const auto km = kmeanspp(vectors, k, seed);
    const auto maj = majority_label(km.assignments, labels, k);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += maj[km.assignments[i]] == labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

Tensor distance_matrix(const Vectors& reps) {
    check_vectors(reps);
    if (reps.size() < 2) fail(ErrorCode::size, "distance_matrix needs at least two vectors");
    const std::size_t n = reps.size();
    Tensor d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = std::sqrt(sq_dist(reps[i], reps[j]));
    return d;
}

InterIntra inter_intra(const Tensor& distances, std::span<const int> labels) {
    const std::size_t n = distances.rows();
    if (distances.cols() != n || labels.size() != n) fail(ErrorCode::shape, "inter_intra: size mismatch");
    InterIntra out;
    out.classes.assign(labels.begin(), labels.end());
    std::sort(out.classes.begin(), out.classes.end());
    out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
    const std::size_t c = out.classes.size();
    auto cls = [&](int l) {
        return static_cast<std::size_t>(std::lower_bound(out.classes.begin(), out.classes.end(), l) -
                                        out.classes.begin());
    };
    std::vector<double> sum(c * c, 0.0);
    std::vector<std::size_t> cnt(c * c, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const std::size_t a = cls(labels[i]), b = cls(labels[j]);
            const std::size_t k = std::min(a, b) * c + std::max(a, b);
            sum[k] += distances(i, j);
            ++cnt[k];
        }
    out.mean.assign(c, std::vector<std::optional<double>>(c));
    for (std::size_t a = 0; a < c; ++a)
        for (std::size_t b = a; b < c; ++b)
            if (cnt[a * c + b] > 0)
                out.mean[a][b] = out.mean[b][a] = sum[a * c + b] / static_cast<double>(cnt[a * c + b]);
    return out;
}

Linkage parse_linkage(std::string_view name) {
    if (name == "single") return Linkage::single;
    if (name == "average") return Linkage::average;
    if (name == "complete") return Linkage::complete;
    fail(ErrorCode::parameter, "unknown linkage '" + std::string(name) + "'");
}

std::vector<Merge> hierarchical_cluster(const Tensor& distances, Linkage linkage) {
    const std::size_t n = distances.rows();
    if (distances.cols() != n) fail(ErrorCode::precondition, "distance matrix must be square");
    for (std::size_t i = 0; i < n; ++i) {
        if (distances(i, i) != 0.0) fail(ErrorCode::precondition, "distance matrix diagonal must be zero");
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(distances(i, j) - distances(j, i)) > 1e-9 * std::max(1.0, std::abs(distances(i, j))))
                fail(ErrorCode::precondition, "distance matrix is not symmetric");
    }
    Tensor d = distances;
    std::vector<std::size_t> id(n), size(n, 1);
    std::vector<std::uint8_t> active(n, 1);
    for (std::size_t i = 0; i < n; ++i) id[i] = i;
    std::vector<Merge> merges;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = n, bj = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                if (bi == n || d(i, j) < best || (d(i, j) == best && std::min(id[i], id[j]) < std::min(id[bi], id[bj]))) {
                    best = d(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        merges.push_back({std::min(id[bi], id[bj]), std::max(id[bi], id[bj]), best, size[bi] + size[bj]});
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            double v = 0.0;
            switch (linkage) {
                case Linkage::single: v = std::min(d(bi, k), d(bj, k)); break;
                case Linkage::complete: v = std::max(d(bi, k), d(bj, k)); break;
                case Linkage::average:
                    v = (static_cast<double>(size[bi]) * d(bi, k) + static_cast<double>(size[bj]) * d(bj, k)) /
                        static_cast<double>(size[bi] + size[bj]);
                    break;
            }
            d(bi, k) = d(k, bi) = v;
        }
        active[bj] = 0;
        size[bi] += size[bj];
        id[bi] = n + step;
    }
    return merges;
}

Vectors rows_of(const Tensor& t) {
    Vectors out(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) out[r][c] = t(r, c);
    return out;
}

std::string embeddings_csv(std::span<const std::string> ids, const Vectors& reps) {
    if (ids.size() != reps.size()) fail(ErrorCode::shape, "ids and embeddings differ in length");
    std::string out = "graph_id";
    const std::size_t w = reps.empty() ? 0 : reps.front().size();
    for (std::size_t c = 0; c < w; ++c) out += ",e" + std::to_string(c);
    out += '\n';
    for (std::size_t i = 0; i < reps.size(); ++i) {
        out += ids[i];
        for (double v : reps[i]) out += ',' + io::format_real(v);
        out += '\n';
    }
    return out;
}

std::string dendrogram_csv(std::span<const Merge> merges) {
    std::string out = "step,a,b,height\n";
    for (std::size_t s = 0; s < merges.size(); ++s)
        out += std::to_string(s) + ',' + std::to_string(merges[s].a) + ',' + std::to_string(merges[s].b) + ',' +
               io::format_real(merges[s].height) + '\n';
    return out;
}

std::string matrix_csv(std::span<const std::string> ids, const Tensor& m) {
    if (ids.size() != m.rows() || m.rows() != m.cols()) fail(ErrorCode::shape, "matrix_csv: size mismatch");
    std::string out = "id";
    for (const auto& id : ids) out += ',' + id;
    out += '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += ids[i];
        for (std::size_t j = 0; j < m.cols(); ++j) out += ',' + io::format_real(m(i, j));
        out += '\n';
    }
    return out;
}

GraphCorpus synthetic_corpus(std::size_t per_class, std::uint64_t seed) {
    if (per_class < 1) fail(ErrorCode::parameter, "corpus needs at least one graph per class");
    Random rng(derive_seed(seed, 0xC0A));
    GraphCorpus c;
    for (int label : {0, 1}) {
        for (std::size_t i = 0; i < per_class; ++i) {
            SynthShapeSpec spec = SynthShapeSpec::defaults(label == 0 ? ShapeKind::capsule : ShapeKind::ybranch);
            // same total medial length range for both classes, sampled at a
            // roughly fixed resolution
            const double total = rng.uniform(1.5, 3.0);
            spec.length = label == 0 ? total : total / 3.0;
            const double target_spacing = rng.uniform(0.08, 0.12);
            const auto n_balls = static_cast<std::size_t>(std::lround(total / target_spacing)) + 1;
            const double spacing = total / static_cast<double>(n_balls - 1);
            // thinner than half the spacing, so overlap alone does not close chords
            spec.radius = rng.uniform(0.3, 0.45) * spacing;
            const auto balls = analytic_skeleton_balls(spec, n_balls, 0.1 * spacing, rng.next());
            const auto init = init_adjacency(balls, 2);
            LinkPrediction none;
            none.n = balls.size();
            none.probabilities.assign(none.n * none.n, 0.0);
            const Adjacency adj = threshold_links(none, init, true, balls);
            c.graphs.push_back(from_mesh(balls, adj));
            c.labels.push_back(label);
            c.ids.push_back(std::string(label == 0 ? "capsule_" : "ybranch_") + std::to_string(i));
        }
    }
    return c;
}

}  // namespace skelmorph
