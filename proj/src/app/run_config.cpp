#include "skelmorph/run_config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <sstream>

#include "skelmorph/error.hpp"
#include "skelmorph/io.hpp"

namespace skelmorph {

const std::vector<RunConfig::Key>& RunConfig::keys() {
    static const std::vector<Key> k{
        {"output_dir", "out", "directory for outputs (overridden by SKELMORPH_OUT)"},
        {"kind", "sphere", "synth shape: sphere|capsule|ellipsoid|torus|ybranch|crescent"},
        {"count", "2000", "synth surface samples"},
        {"radius", "1", "synth radius (tube radius for tubular kinds)"},
        {"length", "2", "synth capsule length or ybranch arm length"},
        {"major_radius", "1", "synth torus/crescent major radius"},
        {"arc_angle_deg", "240", "synth crescent arc"},
        {"semi_x", "1", "synth ellipsoid semi-axis"},
        {"semi_y", "0.7", "synth ellipsoid semi-axis"},
        {"semi_z", "0.4", "synth ellipsoid semi-axis"},
        {"synth_seed", "0", ""},
        {"m", "1024", "sample: points kept"},
        {"sample_seed", "0", ""},
        {"normals_k", "16", "normals: neighbours"},
        {"n_skeleton_points", "64", "skeletonize: N"},
        {"iterations", "1500", "skeletonize: Adam steps"},
        {"skeleton_lr", "0.01", ""},
        {"lambda_r", "0.3", ""},
        {"lambda_n", "0.1", ""},
        {"k_s", "0", "sphere samples per ball, 0 = auto"},
        {"residual", "absolute", "absolute|signed"},
        {"skeleton_seed", "0", ""},
        {"links_k", "2", "mutual k-NN prior"},
        {"gae_epochs", "200", ""},
        {"gae_hidden1", "16", ""},
        {"gae_hidden2", "8", ""},
        {"gae_lr", "0.01", ""},
        {"threshold", "0.5", "link probability threshold"},
        {"ensure_connected", "true", ""},
        {"gae_seed", "0", ""},
        {"min_branch_len", "-1", "negative = 2 x median edge weight"},
        {"path_budget", "5000000", "node visits per longest-path search"},
        {"gcn_widths", "32,32,36", ""},
        {"pooling", "sum", "sum|mean"},
        {"disc_widths", "64,64,64", ""},
        {"embed_epochs", "100", ""},
        {"embed_lr", "0.001", ""},
        {"negatives", "1", "negatives per positive pair"},
        {"embed_seed", "0", ""},
        {"spectrum_d", "100", "spectrum baseline width"},
        {"corpus_per_class", "0", "embed: synthetic corpus size when no inputs are given"},
        {"corpus_seed", "0", ""},
        {"clusters", "2", "k for k-means++"},
        {"linkage", "average", "single|average|complete"},
        {"kmeans_iters", "300", ""},
        {"cluster_seed", "0", ""},
        {"oracle_resolution", "64", ""},
        {"oracle_eps", "0.05", ""},
        {"oracle_min_angle_deg", "30", ""},
        {"oracle_angle_floor_deg", "60", "simplification floor"},
        {"oracle_analytic", "auto", "compare against the analytic axis of the synth keys (true, false, auto = when reading the default synth cloud)"},
        {"volume_resolution", "64", ""},
        {"recon_samples", "16", "sphere samples per ball for reconstruction metrics"},
    };
    return k;
}

RunConfig::RunConfig() {
    for (const auto& k : keys()) values_.emplace(k.name, k.default_value);
}

bool RunConfig::known(std::string_view key) const { return values_.find(key) != values_.end(); }

void RunConfig::set(std::string_view key, std::string_view value) {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::config, "unknown config key '" + std::string(key) + "'");
    it->second = std::string(value);
}

const std::string& RunConfig::get(std::string_view key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::config, "unknown config key '" + std::string(key) + "'");
    return it->second;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void RunConfig::merge_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::config, "config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        if (!known(key))
            fail(ErrorCode::config, "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        set(key, trim(t.substr(eq + 1)));
    }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error& e) {
        fail(ErrorCode::config, e.what());
    }
    merge_text(text);
}

double RunConfig::real(std::string_view key) const {
    const std::string& v = get(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        fail(ErrorCode::config, "config key '" + std::string(key) + "': '" + v + "' is not a number");
    return out;
}

std::uint64_t RunConfig::integer(std::string_view key) const {
    const std::string& v = get(key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        fail(ErrorCode::config, "config key '" + std::string(key) + "': '" + v + "' is not a non-negative integer");
    return out;
}

bool RunConfig::flag(std::string_view key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorCode::config, "config key '" + std::string(key) + "': '" + v + "' is not a boolean");
}

std::vector<std::size_t> RunConfig::list(std::string_view key) const {
    const std::string& v = get(key);
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto end = std::min(v.find(',', start), v.size());
        const std::string tok = trim(std::string_view(v).substr(start, end - start));
        std::size_t x = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
            fail(ErrorCode::config, "config key '" + std::string(key) + "': bad list '" + v + "'");
        out.push_back(x);
        start = end + 1;
    }
    return out;
}

std::string RunConfig::canonical_text() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        if (k == "output_dir") continue;  // where results go does not change them
        out += k + '=' + v + '\n';
    }
    return out;
}

std::map<std::string, std::uint64_t> RunConfig::seeds() const {
    std::map<std::string, std::uint64_t> out;
    for (const auto& [k, v] : values_)
        if (k.size() > 5 && k.compare(k.size() - 5, 5, "_seed") == 0) out[k] = integer(k);
    return out;
}

std::filesystem::path RunConfig::output_dir() const { return get("output_dir"); }

SynthShapeSpec RunConfig::synth_spec() const {
    SynthShapeSpec s = SynthShapeSpec::defaults(parse_shape_kind(get("kind")));
    s.count = integer("count");
    s.radius = real("radius");
    s.length = real("length");
    s.major_radius = real("major_radius");
    s.arc_angle = real("arc_angle_deg") * std::numbers::pi / 180.0;
    s.semi_axes = {real("semi_x"), real("semi_y"), real("semi_z")};
    s.validate();
    return s;
}

SkeletonOptConfig RunConfig::skeleton_config() const {
    SkeletonOptConfig c;
    c.n_skeleton_points = integer("n_skeleton_points");
    c.iterations = integer("iterations");
    c.learning_rate = real("skeleton_lr");
    c.lambda_r = real("lambda_r");
    c.lambda_n = real("lambda_n");
    c.k_s = integer("k_s");
    c.residual = parse_residual_mode(get("residual"));
    c.seed = integer("skeleton_seed");
    c.validate();
    return c;
}

GaeConfig RunConfig::gae_config() const {
    GaeConfig c;
    c.epochs = integer("gae_epochs");
    c.hidden1 = integer("gae_hidden1");
    c.hidden2 = integer("gae_hidden2");
    c.learning_rate = real("gae_lr");
    c.seed = integer("gae_seed");
    c.validate();
    return c;
}

EmbedConfig RunConfig::embed_config() const {
    EmbedConfig c;
    c.gcn_widths = list("gcn_widths");
    c.pooling = parse_pooling(get("pooling"));
    c.disc_widths = list("disc_widths");
    c.epochs = integer("embed_epochs");
    c.learning_rate = real("embed_lr");
    c.negatives_per_positive = integer("negatives");
    c.seed = integer("embed_seed");
    c.validate();
    return c;
}

GridOptions RunConfig::grid_options() const {
    GridOptions g;
    g.resolution = integer("oracle_resolution");
    return g;
}

MedialOptions RunConfig::medial_options() const {
    MedialOptions m;
    m.eps = real("oracle_eps");
    m.min_angle = real("oracle_min_angle_deg") * std::numbers::pi / 180.0;
    return m;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        fail(ErrorCode::io, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(io::read_text(path)); }

}  // namespace skelmorph
