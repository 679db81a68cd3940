#include "skelmorph/skelgraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "skelmorph/io.hpp"

namespace skelmorph {

std::uint32_t SkeletonGraph::add_node(const Point3& position, double radius) {
    if (!is_finite(position) || !std::isfinite(radius)) fail(ErrorCode::numeric, "graph node is not finite");
    nodes_.push_back({position, radius});
    adj_.emplace_back();
    return static_cast<std::uint32_t>(nodes_.size() - 1);
}

void SkeletonGraph::add_edge(std::uint32_t u, std::uint32_t v) {
    if (u >= nodes_.size() || v >= nodes_.size())
        fail(ErrorCode::reference, "edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range");
    if (u == v) fail(ErrorCode::degenerate, "self loop at node " + std::to_string(u));
    if (u > v) std::swap(u, v);
    if (has_edge(u, v))
        fail(ErrorCode::duplicate, "duplicate edge (" + std::to_string(u) + ", " + std::to_string(v) + ")");
    const double w = distance(nodes_[u].center, nodes_[v].center);
    if (!(w > 0.0))
        fail(ErrorCode::degenerate, "edge (" + std::to_string(u) + ", " + std::to_string(v) + ") has zero length");
    edges_.push_back({u, v, w});
    auto insert = [](std::vector<Arc>& list, Arc a) {
        list.insert(std::lower_bound(list.begin(), list.end(), a,
                                     [](const Arc& x, const Arc& y) { return x.to < y.to; }),
                    a);
    };
    insert(adj_[u], {v, w});
    insert(adj_[v], {u, w});
}

bool SkeletonGraph::has_edge(std::size_t u, std::size_t v) const {
    const auto& list = adj_[u];
    const auto it = std::lower_bound(list.begin(), list.end(), v, [](const Arc& a, std::size_t x) { return a.to < x; });
    return it != list.end() && it->to == v;
}

double SkeletonGraph::median_edge_weight() const {
    if (edges_.empty()) return 0.0;
    std::vector<double> w;
    w.reserve(edges_.size());
    for (const auto& e : edges_) w.push_back(e.weight);
    std::sort(w.begin(), w.end());
    const std::size_t m = w.size() / 2;
    return w.size() % 2 ? w[m] : 0.5 * (w[m - 1] + w[m]);
}

SkeletonGraph from_mesh(std::span<const SkeletonBall> balls, const Adjacency& adjacency) {
    if (adjacency.n != balls.size() || adjacency.bits.size() != balls.size() * balls.size())
        fail(ErrorCode::shape, "adjacency size " + std::to_string(adjacency.n) + " does not match " +
                                   std::to_string(balls.size()) + " balls");
    SkeletonGraph g;
    for (const auto& b : balls) g.add_node(b.center, b.radius);
    for (std::size_t i = 0; i < balls.size(); ++i)
        for (std::size_t j = i + 1; j < balls.size(); ++j) {
            if (adjacency(i, j) != adjacency(j, i)) fail(ErrorCode::shape, "adjacency is not symmetric");
            if (adjacency(i, j)) g.add_edge(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    return g;
}

void validate_path(const SkeletonGraph& g, const PathResult& p) {
    if (p.nodes.empty()) fail(ErrorCode::precondition, "path has no nodes");
    std::vector<std::uint8_t> seen(g.node_count(), 0);
    double len = 0.0;
    for (std::size_t k = 0; k < p.nodes.size(); ++k) {
        const auto v = p.nodes[k];
        if (v >= g.node_count() || seen[v]) fail(ErrorCode::precondition, "path repeats or leaves the graph");
        seen[v] = 1;
        if (k > 0) {
            if (!g.has_edge(p.nodes[k - 1], v)) fail(ErrorCode::precondition, "path steps along a non-edge");
            len += distance(g.node(p.nodes[k - 1]).center, g.node(v).center);
        }
    }
    if (std::abs(len - p.length) > 1e-9 * std::max(1.0, len))
        fail(ErrorCode::precondition, "path length does not match its edges");
}

namespace {

bool longer(double len, const std::vector<std::uint32_t>& seq, const PathResult& best) {
    const double tol = 1e-12 * std::max({1.0, len, best.length});
    if (len > best.length + tol) return true;
    if (len < best.length - tol) return false;
    return std::lexicographical_compare(seq.begin(), seq.end(), best.nodes.begin(), best.nodes.end());
}

bool better(const PathResult& a, const PathResult& b) { return longer(a.length, a.nodes, b); }

}  // namespace

PathResult longest_simple_path_from(const SkeletonGraph& g, std::uint32_t start, std::uint64_t budget,
                                    std::span<const std::uint8_t> excluded) {
    const std::size_t n = g.node_count();
    if (start >= n) fail(ErrorCode::reference, "start node " + std::to_string(start) + " out of range");
    if (budget < 1) fail(ErrorCode::parameter, "path budget must be >= 1");
    if (!excluded.empty() && excluded.size() != n) fail(ErrorCode::shape, "exclusion mask size mismatch");

    std::vector<std::uint8_t> visited(n, 0);
    if (!excluded.empty()) std::copy(excluded.begin(), excluded.end(), visited.begin());
    visited[start] = 1;

    PathResult best{0.0, {start}};
    std::vector<std::uint32_t> seq{start};
    struct Frame {
        std::uint32_t node;
        std::size_t next;  // index into neighbours
        double length;
    };
    std::vector<Frame> stack{{start, 0, 0.0}};
    std::uint64_t visits = 1;
    while (!stack.empty()) {
        Frame& f = stack.back();
        const auto nbrs = g.neighbors(f.node);
        if (f.next == nbrs.size()) {
            if (stack.size() > 1) visited[f.node] = 0;
            seq.pop_back();
            stack.pop_back();
            continue;
        }
        const auto arc = nbrs[f.next++];
        if (visited[arc.to]) continue;
        if (visits++ >= budget)
            throw BudgetExceeded("longest path search from node " + std::to_string(start) + " exceeded " +
                                     std::to_string(budget) + " visits",
                                 best);
        const double len = f.length + arc.weight;
        visited[arc.to] = 1;
        seq.push_back(arc.to);
        if (longer(len, seq, best)) best = {len, seq};
        stack.push_back({arc.to, 0, len});
    }
    return best;
}

PathResult neuron_length(const SkeletonGraph& g, std::uint64_t budget) {
    if (g.node_count() == 0) fail(ErrorCode::empty_input, "neuron_length on an empty graph");
    PathResult best{-1.0, {}};
    for (std::uint32_t s = 0; s < g.node_count(); ++s) {
        try {
            PathResult p = longest_simple_path_from(g, s, budget);
            if (best.nodes.empty() || better(p, best)) best = std::move(p);
        } catch (const BudgetExceeded& e) {
            PathResult p = e.best();
            if (best.nodes.empty() || better(p, best)) best = std::move(p);
            throw BudgetExceeded(e.what(), best);
        }
    }
    return best;
}

namespace {

// Appends branches to out; on budget exhaustion the partial set stays in out.
void grow_branches(const SkeletonGraph& g, double min_branch_len, std::uint64_t budget, BranchSet& out) {
    std::vector<std::uint8_t> claimed(g.node_count(), 0);
    for (auto v : out.trunk.nodes) claimed[v] = 1;
    for (auto root : out.trunk.nodes) {
        for (;;) {
            const PathResult p = longest_simple_path_from(g, root, budget, claimed);
            if (p.nodes.size() < 2 || p.length < min_branch_len) break;
            for (std::size_t k = 1; k < p.nodes.size(); ++k) claimed[p.nodes[k]] = 1;
            out.branches.push_back(p);
        }
    }
}

double resolve_min_branch(const SkeletonGraph& g, double min_branch_len) {
    return min_branch_len < 0.0 ? 2.0 * g.median_edge_weight() : min_branch_len;
}

}  // namespace

BranchSet branches(const SkeletonGraph& g, double min_branch_len, std::uint64_t budget) {
    BranchSet out;
    out.trunk = neuron_length(g, budget);
    grow_branches(g, resolve_min_branch(g, min_branch_len), budget, out);
    return out;
}

double len_pct(double computed, double reference) {
    if (!(reference > 0.0)) fail(ErrorCode::domain, "len_pct reference must be positive");
    return std::abs(computed - reference) / reference;
}

double num_pct(std::size_t computed, std::size_t reference) {
    if (reference == 0) fail(ErrorCode::domain, "num_pct reference must be positive");
    const double c = static_cast<double>(computed), r = static_cast<double>(reference);
    return std::abs(c - r) / r;
}

SkeletonGraph parse_swc(std::string_view text) {
    struct Sample {
        long id, parent;
        Point3 p;
        double r;
        std::size_t line;
    };
    std::vector<Sample> samples;
    std::map<long, std::uint32_t> index;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto integer = [&](const std::string& tok) {
        const double v = io::parse_real(tok, line_no);
        if (v != std::floor(v)) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": non-integer id");
        return static_cast<long>(v);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = io::split_ws(line);
        if (t.empty() || t.front().front() == '#') continue;
        if (t.size() != 7) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected 7 SWC fields");
        Sample s{integer(t[0]),
                 integer(t[6]),
                 {io::parse_real(t[2], line_no), io::parse_real(t[3], line_no), io::parse_real(t[4], line_no)},
                 io::parse_real(t[5], line_no),
                 line_no};
        integer(t[1]);
        if (!index.emplace(s.id, static_cast<std::uint32_t>(samples.size())).second)
            fail(ErrorCode::duplicate, "line " + std::to_string(line_no) + ": duplicate sample id " + std::to_string(s.id));
        samples.push_back(s);
    }
    if (samples.empty()) fail(ErrorCode::empty_input, "SWC contains no samples");
    SkeletonGraph g;
    for (const auto& s : samples) g.add_node(s.p, s.r);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        if (s.parent == -1) continue;
        const auto it = index.find(s.parent);
        if (it == index.end())
            fail(ErrorCode::reference, "line " + std::to_string(s.line) + ": parent id " + std::to_string(s.parent) +
                                           " not found");
        g.add_edge(static_cast<std::uint32_t>(k), it->second);
    }
    return g;
}

SkeletonGraph load_swc(const std::filesystem::path& path) { return parse_swc(io::read_text(path)); }

std::string format_swc(const SkeletonGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<long> parent(n, -2);
    std::size_t components = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (parent[root] != -2) continue;
        ++components;
        parent[root] = -1;
        std::vector<std::size_t> queue{root};
        for (std::size_t q = 0; q < queue.size(); ++q)
            for (const auto& a : g.neighbors(queue[q]))
                if (parent[a.to] == -2) {
                    parent[a.to] = static_cast<long>(queue[q]) + 1;
                    queue.push_back(a.to);
                }
    }
    if (g.edge_count() + components != n) fail(ErrorCode::precondition, "SWC output needs a forest; graph has cycles");
    std::string out = "# id type x y z radius parent\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = g.node(i);
        out += std::to_string(i + 1) + " 0 " + io::format_real(b.center.x) + ' ' + io::format_real(b.center.y) + ' ' +
               io::format_real(b.center.z) + ' ' + io::format_real(b.radius) + ' ' + std::to_string(parent[i]) + '\n';
    }
    return out;
}

Morphometry analyze(const SkeletonGraph& g, std::string graph_id, double min_branch_len, std::uint64_t budget,
                    BranchSet* detail) {
    Morphometry m{std::move(graph_id), 0.0, 0, g.node_count(), g.edge_count(), true};
    BranchSet set;
    try {
        set.trunk = neuron_length(g, budget);
        grow_branches(g, resolve_min_branch(g, min_branch_len), budget, set);
    } catch (const BudgetExceeded& e) {
        m.exact = false;
        if (set.trunk.nodes.empty()) set.trunk = e.best();
    }
    m.length = set.trunk.length;
    m.n_branches = set.count();
    if (detail) *detail = std::move(set);
    return m;
}

std::string morphometry_csv(std::span<const Morphometry> rows) {
    std::string out = "graph_id,length,n_branches,n_nodes,n_edges,exact_flag\n";
    for (const auto& r : rows)
        out += r.graph_id + ',' + io::format_real(r.length) + ',' + std::to_string(r.n_branches) + ',' +
               std::to_string(r.n_nodes) + ',' + std::to_string(r.n_edges) + ',' + (r.exact ? "1" : "0") + '\n';
    return out;
}

}  // namespace skelmorph
