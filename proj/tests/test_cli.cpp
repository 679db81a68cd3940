#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "skelmorph/io.hpp"
#include "skelmorph/pipeline.hpp"
#include "skelmorph/run_config.hpp"

using namespace skelmorph;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("skelmorph_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunConfig config_in(const fs::path& dir) {
    RunConfig cfg;
    cfg.set("output_dir", dir.string());
    return cfg;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::io;
}

}  // namespace

TEST_CASE("run config rejects unknown keys and malformed values") {
    RunConfig cfg;
    CHECK(code_of([&] { cfg.set("no_such_key", "1"); }) == ErrorCode::config);
    CHECK(code_of([&] { cfg.merge_text("m=5\nbogus=2\n"); }) == ErrorCode::config);
    CHECK(code_of([&] { cfg.merge_text("just a line\n"); }) == ErrorCode::config);
    cfg.set("m", "-3");
    CHECK(code_of([&] { cfg.integer("m"); }) == ErrorCode::config);
    cfg.set("ensure_connected", "maybe");
    CHECK(code_of([&] { cfg.flag("ensure_connected"); }) == ErrorCode::config);
}

TEST_CASE("run config file merge, later lines win, comments skipped") {
    RunConfig cfg;
    cfg.merge_text("# comment\n\nm = 10\nm=20\nkind=capsule\n");
    CHECK(cfg.integer("m") == 20);
    CHECK(cfg.get("kind") == "capsule");
    CHECK(cfg.synth_spec().kind == ShapeKind::capsule);
}

TEST_CASE("every seed is explicit and defaults to zero") {
    RunConfig cfg;
    const auto seeds = cfg.seeds();
    CHECK(seeds.size() >= 7);
    for (const auto& [k, v] : seeds) CHECK(v == 0);
}

TEST_CASE("canonical text ignores the output directory") {
    RunConfig a, b;
    b.set("output_dir", "/elsewhere");
    CHECK(a.canonical_text() == b.canonical_text());
    b.set("lambda_n", "0");
    CHECK(a.canonical_text() != b.canonical_text());
}

TEST_CASE("sha256 standard vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("analyze on a 3-sample SWC gives length 2 and no branches") {
    TempDir t("analyze");
    const fs::path swc = t.path / "three.swc";
    io::write_text_atomic(swc, "1 3 0 0 0 0.5 -1\n2 3 1 0 0 0.5 1\n3 3 2 0 0 0.5 2\n");
    CommandIO io;
    io.inputs = {swc};
    run_command("analyze", config_in(t.path), io);
    CHECK(io::read_text(t.path / "morphometry.csv") ==
          "graph_id,length,n_branches,n_nodes,n_edges,exact_flag\nthree,2,0,3,2,1\n");
}

TEST_CASE("metrics on identical skeletons are all zero") {
    TempDir t("metrics");
    const fs::path mesh = t.path / "mesh.txt";
    std::vector<SkeletonBall> balls{{{0, 0, 0}, 0.3}, {{1, 0, 0}, 0.3}, {{1, 1, 0}, 0.2}, {{2, 0, 0}, 0.25}};
    Adjacency adj(4);
    adj.set(0, 1, true);
    adj.set(1, 2, true);
    adj.set(1, 3, true);
    io::write_text_atomic(mesh, format_mesh({balls, adj}));
    CommandIO io;
    io.inputs = {mesh};
    io.reference = mesh;
    run_command("metrics", config_in(t.path), io);
    const auto j = nlohmann::json::parse(io::read_text(t.path / "metrics.json"));
    for (const char* key : {"cd_skel", "cd_skel_sum", "hd_skel", "cd_recon", "hd_recon", "vol_pct", "len_pct"})
        CHECK(j[key].get<double>() == 0.0);
    CHECK(j["num_pct"].is_number());
}

TEST_CASE("manifest records config hash, seeds and digests") {
    TempDir t("manifest");
    RunConfig cfg = config_in(t.path);
    cfg.set("count", "50");
    cfg.set("m", "20");
    const auto r = run_command("synth", cfg, {});
    const auto m = nlohmann::json::parse(io::read_text(r.manifest));
    CHECK(m["command"] == "synth");
    CHECK(m["config_sha256"] == sha256_hex(cfg.canonical_text()));
    CHECK(m["seeds"]["synth_seed"] == 0);
    REQUIRE(m["outputs"].size() == 1);
    CHECK(m["outputs"][0]["sha256"] == file_sha256(t.path / "cloud.xyz"));

    const auto s = run_command("sample", cfg, {});
    const auto ms = nlohmann::json::parse(io::read_text(s.manifest));
    REQUIRE(ms["inputs"].size() == 1);
    CHECK(ms["inputs"][0]["sha256"] == file_sha256(t.path / "cloud.xyz"));
}

TEST_CASE("short pipeline is byte-identical across runs") {
    TempDir a("det_a"), b("det_b");
    auto run = [](const fs::path& dir) {
        RunConfig cfg = config_in(dir);
        cfg.merge_text("kind=capsule\ncount=400\niterations=40\nn_skeleton_points=12\ngae_epochs=20\n");
        for (const char* cmd : {"synth", "skeletonize", "links", "analyze"}) {
            CommandIO io;
            if (std::string(cmd) == "analyze") io.inputs = {dir / "mesh.txt"};
            run_command(cmd, cfg, io);
        }
    };
    run(a.path);
    run(b.path);
    for (const char* f : {"cloud.xyz", "skeleton.txt", "loss.csv", "mesh.txt", "link_probabilities.csv",
                          "morphometry.csv"})
        CHECK_MESSAGE(io::read_text(a.path / f) == io::read_text(b.path / f), f);
}

TEST_CASE("unknown command and missing inputs") {
    TempDir t("errors");
    CHECK(code_of([&] { run_command("frobnicate", config_in(t.path), {}); }) == ErrorCode::parameter);
    CHECK(code_of([&] { run_command("analyze", config_in(t.path), {}); }) == ErrorCode::parameter);
    CommandIO io;
    io.inputs = {t.path / "absent.xyz"};
    CHECK(exit_code(code_of([&] { run_command("sample", config_in(t.path), io); })) == 3);
}

#ifdef SKELMORPH_CLI_PATH
TEST_CASE("binary exit codes") {
    TempDir t("exit");
    const std::string bin = SKELMORPH_CLI_PATH;
    const std::string out = " --output_dir " + t.path.string() + " >/dev/null 2>&1";
    auto status = [](const std::string& cmd) { return WEXITSTATUS(std::system(cmd.c_str())); };
    CHECK(status(bin + " synth --count 30" + out) == 0);
    CHECK(status(bin + " synth --count abc" + out) == 2);
    CHECK(status(bin + " synth --no_such_key 1" + out) == 2);
    CHECK(status(bin + " analyze " + (t.path / "missing.swc").string() + out) == 3);
    CHECK(status(bin + " analyze --path_budget 0 " + (t.path / "cloud.xyz").string() + out) == 3);
}
#endif
