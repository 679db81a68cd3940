// skelmorph: command-line front end. Every run-config key is also a flag;
// precedence is defaults < --config file < SKELMORPH_OUT < flags.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "skelmorph/error.hpp"
#include "skelmorph/pipeline.hpp"
#include "skelmorph/run_config.hpp"

using namespace skelmorph;

namespace {

int report(const Error& e) {
    std::string msg = e.what();
    for (char& c : msg)
        if (c == '\n') c = ' ';
    std::cerr << "error: code=" << to_string(e.code()) << " exit=" << exit_code(e.code()) << " message=" << msg
              << '\n';
    return exit_code(e.code());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point-cloud skeletonization and skeleton-graph analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "key=value run configuration file");
    std::map<std::string, std::string> overrides;
    std::map<std::string, CLI::Option*> key_opts;
    for (const auto& k : RunConfig::keys()) {
        std::string help = k.help.empty() ? std::string() : k.help + " ";
        help += "(default " + k.default_value + ")";
        key_opts[k.name] = app.add_option("--" + k.name, overrides[k.name], help)->group("Run configuration");
    }

    CommandIO io;
    std::string output, reference, skeleton, cloud, labels;
    std::vector<std::string> inputs;
    for (const auto& name : command_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("inputs", inputs, "input files");
        sub->add_option("-o,--output", output, "primary output path");
        if (name == "metrics") sub->add_option("--reference", reference, "reference skeleton")->required();
        if (name == "oracle") sub->add_option("--skeleton", skeleton, "skeleton to compare");
        if (name == "links") sub->add_option("--cloud", cloud, "surface cloud for node features");
        if (name == "cluster") sub->add_option("--labels", labels, "graph_id,label CSV");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: code=CONFIG exit=2 message=" << e.what() << '\n';
        return 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.merge_file(config_path);
        if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.set("output_dir", env);
        for (const auto& [key, opt] : key_opts)
            if (opt->count() > 0) cfg.set(key, overrides[key]);

        for (const auto& s : inputs) io.inputs.emplace_back(s);
        io.output = output;
        io.reference = reference;
        io.skeleton = skeleton;
        io.cloud = cloud;
        io.labels = labels;

        const std::string name = app.get_subcommands().front()->get_name();
        const CommandResult r = run_command(name, cfg, io);
        for (const auto& p : r.outputs) std::cout << p.string() << '\n';
        std::cout << r.manifest.string() << '\n';
        return 0;
    } catch (const Error& e) {
        return report(e);
    } catch (const std::exception& e) {
        std::cerr << "error: code=IO exit=3 message=" << e.what() << '\n';
        return 3;
    }
}
