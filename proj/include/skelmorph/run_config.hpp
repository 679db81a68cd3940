#pragma once

// Flat key=value run configuration shared by every subcommand.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "skelmorph/embed.hpp"
#include "skelmorph/links.hpp"
#include "skelmorph/mat_oracle.hpp"
#include "skelmorph/skeleton_opt.hpp"
#include "skelmorph/synth.hpp"

namespace skelmorph {

inline constexpr const char* kOutputDirEnv = "SKELMORPH_OUT";

class RunConfig {
public:
    struct Key {
        std::string name;
        std::string default_value;
        std::string help;
    };

    static const std::vector<Key>& keys();

    RunConfig();

    // Throws config for unknown keys.
    void set(std::string_view key, std::string_view value);
    const std::string& get(std::string_view key) const;
    bool known(std::string_view key) const;

    // '#' comments and blank lines allowed; later lines win.
    void merge_text(std::string_view text);
    void merge_file(const std::filesystem::path& path);

    // Typed reads; malformed values throw config naming the key.
    double real(std::string_view key) const;
    std::uint64_t integer(std::string_view key) const;
    bool flag(std::string_view key) const;
    std::vector<std::size_t> list(std::string_view key) const;

    // Sorted key=value lines; hashed for the manifest.
    std::string canonical_text() const;
    std::map<std::string, std::uint64_t> seeds() const;
    std::filesystem::path output_dir() const;

    SynthShapeSpec synth_spec() const;
    SkeletonOptConfig skeleton_config() const;
    GaeConfig gae_config() const;
    EmbedConfig embed_config() const;
    GridOptions grid_options() const;
    MedialOptions medial_options() const;

private:
    std::map<std::string, std::string, std::less<>> values_;
};

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace skelmorph
