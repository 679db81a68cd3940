#include "skelmorph/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "skelmorph/error.hpp"

namespace skelmorph::io {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    for (std::string tok; ss >> tok;) out.push_back(tok);
    return out;
}

double parse_real(const std::string& tok, std::size_t line_no) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": invalid number '" + tok + "'");
    return v;
}

namespace {

Point3 unit_or_throw(Point3 n, std::size_t line_no) {
    const double len = norm(n);
    if (!(len > 0.0)) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": zero-length normal");
    return n * (1.0 / len);
}

bool skippable(const std::vector<std::string>& toks) { return toks.empty() || toks.front().front() == '#'; }

PointCloud read_xyz(std::istream& in) {
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    bool normals_mode = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (skippable(toks)) continue;
        if (toks.size() != 3 && toks.size() != 6)
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected 3 or 6 fields, got " +
                                       std::to_string(toks.size()));
        const bool with_normal = toks.size() == 6;
        if (cloud.points.empty()) normals_mode = with_normal;
        if (with_normal != normals_mode)
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": inconsistent field count");
        cloud.points.push_back({parse_real(toks[0], line_no), parse_real(toks[1], line_no),
                                parse_real(toks[2], line_no)});
        if (with_normal)
            cloud.normals.push_back(unit_or_throw({parse_real(toks[3], line_no), parse_real(toks[4], line_no),
                                                   parse_real(toks[5], line_no)},
                                                  line_no));
    }
    if (cloud.points.empty()) fail(ErrorCode::empty_input, "point cloud file contains no points");
    return cloud;
}

PointCloud read_ply(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next_line()) fail(ErrorCode::empty_input, "empty PLY file");
    if (line != "ply") fail(ErrorCode::parse, "line 1: missing 'ply' magic");

    std::size_t vertex_count = 0;
    bool in_vertex = false, seen_vertex = false;
    std::vector<std::string> props;
    for (;;) {
        if (!next_line()) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": unterminated PLY header");
        const auto toks = split_ws(line);
        if (toks.empty() || toks[0] == "comment" || toks[0] == "obj_info") continue;
        if (toks[0] == "end_header") break;
        if (toks[0] == "format") {
            if (toks.size() < 2 || toks[1] != "ascii")
                fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": only ascii PLY is supported");
        } else if (toks[0] == "element") {
            if (toks.size() != 3) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": bad element line");
            in_vertex = toks[1] == "vertex";
            if (in_vertex) {
                if (seen_vertex) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": duplicate vertex element");
                seen_vertex = true;
                vertex_count = static_cast<std::size_t>(parse_real(toks[2], line_no));
            }
        } else if (toks[0] == "property") {
            if (in_vertex) {
                if (toks.size() != 3)
                    fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": unsupported vertex property");
                props.push_back(toks[2]);
            }
        } else {
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": unknown header keyword '" + toks[0] + "'");
        }
    }
    auto find = [&](const char* name) -> long {
        const auto it = std::find(props.begin(), props.end(), name);
        return it == props.end() ? -1 : static_cast<long>(it - props.begin());
    };
    const long ix = find("x"), iy = find("y"), iz = find("z");
    if (ix < 0 || iy < 0 || iz < 0) fail(ErrorCode::parse, "PLY vertex element lacks x/y/z");
    const long inx = find("nx"), iny = find("ny"), inz = find("nz");
    const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    while (cloud.points.size() < vertex_count) {
        if (!next_line())
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected " + std::to_string(vertex_count) +
                                       " vertices, found " + std::to_string(cloud.points.size()));
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != props.size())
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected " + std::to_string(props.size()) +
                                       " vertex fields, got " + std::to_string(toks.size()));
        auto at = [&](long i) { return parse_real(toks[static_cast<std::size_t>(i)], line_no); };
        cloud.points.push_back({at(ix), at(iy), at(iz)});
        if (with_normals) cloud.normals.push_back(unit_or_throw({at(inx), at(iny), at(inz)}, line_no));
    }
    if (cloud.points.empty()) fail(ErrorCode::empty_input, "PLY file contains no vertices");
    return cloud;
}

PointCloud read_off(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_tokens = [&]() -> std::vector<std::string> {
        while (std::getline(in, line)) {
            ++line_no;
            auto toks = split_ws(line);
            if (!skippable(toks)) return toks;
        }
        return {};
    };
    auto toks = next_tokens();
    if (toks.empty()) fail(ErrorCode::empty_input, "empty OFF file");
    std::string magic = toks.front();
    if (!magic.empty() && magic.back() == ',') magic.pop_back();
    if (magic != "OFF") fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": missing 'OFF' magic");
    toks.erase(toks.begin());
    if (toks.empty()) toks = next_tokens();
    if (toks.size() < 1) fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": missing OFF counts");
    const auto nv = static_cast<std::size_t>(parse_real(toks[0], line_no));

    PointCloud cloud;
    cloud.points.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        const auto v = next_tokens();
        if (v.size() < 3)
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected 3 vertex coordinates");
        cloud.points.push_back({parse_real(v[0], line_no), parse_real(v[1], line_no), parse_real(v[2], line_no)});
    }
    if (cloud.points.empty()) fail(ErrorCode::empty_input, "OFF file contains no vertices");
    return cloud;
}

}  // namespace

CloudFormat parse_cloud_format(std::string_view name) {
    if (name == "xyz") return CloudFormat::xyz;
    if (name == "ply" || name == "ply_ascii") return CloudFormat::ply_ascii;
    if (name == "off") return CloudFormat::off;
    fail(ErrorCode::parameter, "unknown point cloud format '" + std::string(name) + "'");
}

CloudFormat format_from_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    if (!ext.empty()) ext.erase(0, 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return parse_cloud_format(ext);
}

PointCloud read_point_cloud(std::istream& in, CloudFormat format) {
    switch (format) {
        case CloudFormat::xyz: return read_xyz(in);
        case CloudFormat::ply_ascii: return read_ply(in);
        case CloudFormat::off: return read_off(in);
    }
    fail(ErrorCode::parameter, "unknown point cloud format");
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open " + path.string());
    return read_point_cloud(in, format);
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
    return load_point_cloud(path, format_from_extension(path));
}

std::string format_real(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_xyz(const PointCloud& cloud) {
    std::string out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        out += format_real(p.x) + ' ' + format_real(p.y) + ' ' + format_real(p.z);
        if (cloud.has_normals()) {
            const Point3& n = cloud.normals[i];
            out += ' ' + format_real(n.x) + ' ' + format_real(n.y) + ' ' + format_real(n.z);
        }
        out += '\n';
    }
    return out;
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::io, "cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) fail(ErrorCode::io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace skelmorph::io
