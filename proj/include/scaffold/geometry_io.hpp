// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "field.hpp"
#include "mesh.hpp"
#include "vec3.hpp"

static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");

namespace scaffold {

enum class MeshFormat { automatic, obj, stl_binary, stl_ascii, ply_ascii };

namespace io_detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("failed reading " + path);
    }
    return bytes;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return s;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid number '" + std::string(tok) + "'");
    }
    return v;
}

inline long long parse_int(std::string_view tok, std::size_t line_no) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid integer '" + std::string(tok) + "'");
    }
    return v;
}

/// Calls fn(line, line_no) for each line, with '\r' stripped.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        fn(line, line_no);
        if (nl == std::string_view::npos) {
            break;
        }
        text.remove_prefix(nl + 1);
    }
}

/// Welds bit-identical positions; used for index-free formats like STL.
class ExactWelder {
public:
    explicit ExactWelder(TriangleMesh& mesh) : mesh_(mesh) {}

    std::uint32_t add(const Vec3& p) {
        Key key{std::bit_cast<std::uint64_t>(p.x), std::bit_cast<std::uint64_t>(p.y),
                std::bit_cast<std::uint64_t>(p.z)};
        auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(mesh_.vertices.size()));
        if (inserted) {
            mesh_.vertices.push_back(p);
        }
        return it->second;
    }

private:
    struct Key {
        std::uint64_t x, y, z;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            return static_cast<std::size_t>(k.x * 0x9e3779b97f4a7c15ULL ^ (k.y + 0x632be59bd9b4e019ULL) * 31 ^
                                            k.z * 0xbf58476d1ce4e5b9ULL);
        }
    };
    TriangleMesh& mesh_;
    std::unordered_map<Key, std::uint32_t, KeyHash> index_;
};

inline TriangleMesh parse_obj(std::string_view text) {
    TriangleMesh mesh;
    std::vector<Vec3> file_normals;
    std::vector<long long> normal_of_vertex;
    bool any_normal_ref = false;

    const auto resolve = [](long long idx, std::size_t count, std::size_t line_no, const char* what) {
        long long r = idx > 0 ? idx - 1 : static_cast<long long>(count) + idx;
        if (idx == 0 || r < 0 || r >= static_cast<long long>(count)) {
            throw ParseError("line " + std::to_string(line_no) + ": " + what + " index " + std::to_string(idx) +
                             " out of range");
        }
        return static_cast<std::size_t>(r);
    };

    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const auto tok = split_ws(line);
        if (tok.empty()) {
            return;
        }
        if (tok[0] == "v") {
            if (tok.size() < 4) {
                throw ParseError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
            }
            mesh.vertices.push_back(
                {parse_double(tok[1], line_no), parse_double(tok[2], line_no), parse_double(tok[3], line_no)});
            normal_of_vertex.push_back(-1);
        } else if (tok[0] == "vn") {
            if (tok.size() < 4) {
                throw ParseError("line " + std::to_string(line_no) + ": normal needs 3 components");
            }
            file_normals.push_back(
                {parse_double(tok[1], line_no), parse_double(tok[2], line_no), parse_double(tok[3], line_no)});
        } else if (tok[0] == "f") {
            if (tok.size() < 4) {
                throw ParseError("line " + std::to_string(line_no) + ": face needs at least 3 vertices");
            }
            std::vector<std::uint32_t> poly;
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const auto ref = tok[i];
                const auto s1 = ref.find('/');
                const auto v = resolve(parse_int(ref.substr(0, s1), line_no), mesh.vertices.size(), line_no, "vertex");
                if (s1 != std::string_view::npos) {
                    const auto s2 = ref.find('/', s1 + 1);
                    if (s2 != std::string_view::npos && s2 + 1 < ref.size()) {
                        const auto n = resolve(parse_int(ref.substr(s2 + 1), line_no), file_normals.size(), line_no,
                                               "normal");
                        normal_of_vertex[v] = static_cast<long long>(n);
                        any_normal_ref = true;
                    }
                }
                poly.push_back(static_cast<std::uint32_t>(v));
            }
            for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
                mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
            }
        }
        // vt, o, g, s, usemtl, mtllib and friends carry nothing we need.
    });

    if (any_normal_ref &&
        std::all_of(normal_of_vertex.begin(), normal_of_vertex.end(), [](long long n) { return n >= 0; })) {
        mesh.normals.reserve(mesh.vertices.size());
        for (auto n : normal_of_vertex) {
            const Vec3 u = normalized(file_normals[static_cast<std::size_t>(n)]);
            if (u == Vec3{}) {
                mesh.normals.clear();
                break;
            }
            mesh.normals.push_back(u);
        }
    }
    return mesh;
}

inline TriangleMesh parse_stl_ascii(std::string_view text) {
    TriangleMesh mesh;
    ExactWelder weld(mesh);
    std::vector<std::uint32_t> facet;
    bool seen_solid = false;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const auto tok = split_ws(line);
        if (tok.empty()) {
            return;
        }
        const std::string key = lower(std::string(tok[0]));
        if (key == "solid") {
            seen_solid = true;
        } else if (key == "facet" || key == "outer") {
            facet.clear();
        } else if (key == "vertex") {
            if (tok.size() < 4) {
                throw ParseError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
            }
            facet.push_back(weld.add(
                {parse_double(tok[1], line_no), parse_double(tok[2], line_no), parse_double(tok[3], line_no)}));
        } else if (key == "endloop") {
            if (facet.size() != 3) {
                throw ParseError("line " + std::to_string(line_no) + ": facet has " + std::to_string(facet.size()) +
                                 " vertices, expected 3");
            }
            mesh.triangles.push_back({facet[0], facet[1], facet[2]});
        } else if (key != "endfacet" && key != "endsolid") {
            throw ParseError("line " + std::to_string(line_no) + ": unexpected token '" + std::string(tok[0]) + "'");
        }
    });
    if (!seen_solid) {
        throw ParseError("ASCII STL must start with 'solid'");
    }
    return mesh;
}

template <typename T>
T read_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

inline TriangleMesh parse_stl_binary(std::string_view bytes) {
    if (bytes.size() < 84) {
        throw ParseError("binary STL shorter than its 84-byte preamble");
    }
    const auto count = read_le<std::uint32_t>(bytes.data() + 80);
    if (bytes.size() != 84 + 50ull * count) {
        throw ParseError("binary STL declares " + std::to_string(count) + " triangles but has " +
                         std::to_string(bytes.size()) + " bytes");
    }
    TriangleMesh mesh;
    ExactWelder weld(mesh);
    mesh.triangles.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        const char* rec = bytes.data() + 84 + 50ull * t;
        Triangle tri{};
        for (int v = 0; v < 3; ++v) {
            const char* p = rec + 12 + 12 * v;
            tri[v] = weld.add({read_le<float>(p), read_le<float>(p + 4), read_le<float>(p + 8)});
        }
        mesh.triangles.push_back(tri);
    }
    return mesh;
}

inline TriangleMesh parse_ply_ascii(std::string_view text) {
    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> props;
        std::vector<bool> is_list;
    };
    std::vector<Element> elements;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    const auto next_line = [&]() -> std::string_view {
        if (pos >= text.size()) {
            throw ParseError("PLY ended unexpectedly at line " + std::to_string(line_no));
        }
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        return line;
    };

    if (trim(next_line()) != "ply") {
        throw ParseError("missing 'ply' magic");
    }
    for (;;) {
        const auto tok = split_ws(next_line());
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") {
            continue;
        }
        if (tok[0] == "format") {
            if (tok.size() < 2 || tok[1] != "ascii") {
                throw UnsupportedFormat("only ASCII PLY is supported");
            }
        } else if (tok[0] == "element") {
            if (tok.size() != 3) {
                throw ParseError("line " + std::to_string(line_no) + ": malformed element");
            }
            const auto n = parse_int(tok[2], line_no);
            if (n < 0) {
                throw ParseError("line " + std::to_string(line_no) + ": negative element count");
            }
            elements.push_back({std::string(tok[1]), static_cast<std::size_t>(n), {}, {}});
        } else if (tok[0] == "property") {
            if (elements.empty() || tok.size() < 3) {
                throw ParseError("line " + std::to_string(line_no) + ": property outside element");
            }
            const bool list = tok[1] == "list";
            if (list && tok.size() != 5) {
                throw ParseError("line " + std::to_string(line_no) + ": malformed list property");
            }
            elements.back().props.emplace_back(tok.back());
            elements.back().is_list.push_back(list);
        } else if (tok[0] == "end_header") {
            break;
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": unknown header keyword '" + std::string(tok[0]) +
                             "'");
        }
    }

    TriangleMesh mesh;
    std::vector<Vec3> normals;
    bool has_normals = false;
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
            for (std::size_t i = 0; i < el.props.size(); ++i) {
                const auto& p = el.props[i];
                const int idx = static_cast<int>(i);
                if (p == "x") ix = idx;
                if (p == "y") iy = idx;
                if (p == "z") iz = idx;
                if (p == "nx") inx = idx;
                if (p == "ny") iny = idx;
                if (p == "nz") inz = idx;
            }
            if (ix < 0 || iy < 0 || iz < 0) {
                throw ParseError("PLY vertex element lacks x/y/z");
            }
            has_normals = inx >= 0 && iny >= 0 && inz >= 0;
            for (std::size_t v = 0; v < el.count; ++v) {
                const auto tok = split_ws(next_line());
                if (tok.size() < el.props.size()) {
                    throw ParseError("line " + std::to_string(line_no) + ": vertex has too few values");
                }
                mesh.vertices.push_back({parse_double(tok[std::size_t(ix)], line_no),
                                         parse_double(tok[std::size_t(iy)], line_no),
                                         parse_double(tok[std::size_t(iz)], line_no)});
                if (has_normals) {
                    normals.push_back({parse_double(tok[std::size_t(inx)], line_no),
                                       parse_double(tok[std::size_t(iny)], line_no),
                                       parse_double(tok[std::size_t(inz)], line_no)});
                }
            }
        } else if (el.name == "face") {
            for (std::size_t f = 0; f < el.count; ++f) {
                const auto tok = split_ws(next_line());
                if (tok.empty()) {
                    throw ParseError("line " + std::to_string(line_no) + ": empty face");
                }
                const auto n = parse_int(tok[0], line_no);
                if (n < 3 || tok.size() < static_cast<std::size_t>(n) + 1) {
                    throw ParseError("line " + std::to_string(line_no) + ": malformed face");
                }
                std::vector<std::uint32_t> poly;
                for (long long i = 1; i <= n; ++i) {
                    const auto idx = parse_int(tok[std::size_t(i)], line_no);
                    if (idx < 0 || static_cast<std::size_t>(idx) >= mesh.vertices.size()) {
                        throw ParseError("line " + std::to_string(line_no) + ": face index " + std::to_string(idx) +
                                         " out of range");
                    }
                    poly.push_back(static_cast<std::uint32_t>(idx));
                }
                for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
                    mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
                }
            }
        } else {
            for (std::size_t i = 0; i < el.count; ++i) {
                next_line();
            }
        }
    }
    if (has_normals) {
        for (auto& n : normals) {
            n = normalized(n);
            if (n == Vec3{}) {
                normals.clear();
                break;
            }
        }
        mesh.normals = std::move(normals);
    }
    return mesh;
}

inline MeshFormat detect_format(const std::string& path, std::string_view bytes) {
    const std::string ext = lower(std::filesystem::path(path).extension().string());
    if (ext == ".obj") {
        return MeshFormat::obj;
    }
    if (ext == ".ply") {
        return MeshFormat::ply_ascii;
    }
    if (ext == ".stl") {
        if (bytes.size() >= 84) {
            const auto count = read_le<std::uint32_t>(bytes.data() + 80);
            if (bytes.size() == 84 + 50ull * count) {
                return MeshFormat::stl_binary;
            }
        }
        return MeshFormat::stl_ascii;
    }
    throw UnsupportedFormat("unrecognized mesh extension '" + ext + "' for " + path);
}

} // namespace io_detail

/// Loads an OBJ, STL or ASCII PLY mesh. Indices are validated, missing
/// vertex normals are filled with area-weighted face normals, and zero-area
/// faces are kept but counted in `degenerate_triangles`.
inline TriangleMesh load_mesh(const std::string& path, MeshFormat format = MeshFormat::automatic) {
    const std::string bytes = io_detail::read_file(path);
    if (format == MeshFormat::automatic) {
        format = io_detail::detect_format(path, bytes);
    }
    TriangleMesh mesh;
    switch (format) {
    case MeshFormat::obj:
        mesh = io_detail::parse_obj(bytes);
        break;
    case MeshFormat::stl_binary:
        mesh = io_detail::parse_stl_binary(bytes);
        break;
    case MeshFormat::stl_ascii:
        mesh = io_detail::parse_stl_ascii(bytes);
        break;
    case MeshFormat::ply_ascii:
        mesh = io_detail::parse_ply_ascii(bytes);
        break;
    case MeshFormat::automatic:
        break;
    }
    if (mesh.triangles.empty()) {
        throw EmptyGeometry(path + " contains no triangles");
    }
    validate_mesh(mesh);
    if (mesh.normals.empty()) {
        mesh.normals = area_weighted_normals(mesh);
    }
    mesh.degenerate_triangles = count_degenerate(mesh);
    return mesh;
}

/// One point per vertex, merging vertices closer than `dedup_epsilon` into the
/// first one seen. Merged normals are averaged. Epsilon 0 disables merging.
inline PointCloud mesh_to_points(const TriangleMesh& mesh, double dedup_epsilon) {
    if (mesh.vertices.empty()) {
        throw EmptyGeometry("mesh has no vertices");
    }
    validate_mesh(mesh);
    const bool with_normals = mesh.normals.size() == mesh.vertices.size();
    PointCloud cloud;
    if (!(dedup_epsilon > 0.0)) {
        cloud.points = mesh.vertices;
        cloud.weights.assign(mesh.vertices.size(), 1.0);
        if (with_normals) {
            cloud.normals = mesh.normals;
        }
        return cloud;
    }

    struct Cell {
        std::int64_t x, y, z;
        bool operator==(const Cell&) const = default;
    };
    struct CellHash {
        std::size_t operator()(const Cell& c) const noexcept {
            return static_cast<std::size_t>(mix64(std::uint64_t(c.x) * 73856093ULL ^ std::uint64_t(c.y) * 19349663ULL ^
                                                  std::uint64_t(c.z) * 83492791ULL));
        }
        static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            return z ^ (z >> 31);
        }
    };
    const auto cell_of = [&](const Vec3& p) {
        return Cell{static_cast<std::int64_t>(std::floor(p.x / dedup_epsilon)),
                    static_cast<std::int64_t>(std::floor(p.y / dedup_epsilon)),
                    static_cast<std::int64_t>(std::floor(p.z / dedup_epsilon))};
    };
    std::unordered_map<Cell, std::vector<std::size_t>, CellHash> grid;
    std::vector<Vec3> normal_sum;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const Vec3& p = mesh.vertices[v];
        const Cell c = cell_of(p);
        std::size_t match = SIZE_MAX;
        for (std::int64_t dx = -1; dx <= 1 && match == SIZE_MAX; ++dx) {
            for (std::int64_t dy = -1; dy <= 1 && match == SIZE_MAX; ++dy) {
                for (std::int64_t dz = -1; dz <= 1 && match == SIZE_MAX; ++dz) {
                    const auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) {
                        continue;
                    }
                    for (auto idx : it->second) {
                        if (distance(cloud.points[idx], p) < dedup_epsilon) {
                            match = std::min(match, idx);
                        }
                    }
                }
            }
        }
        if (match == SIZE_MAX) {
            grid[c].push_back(cloud.points.size());
            cloud.push_back(p);
            if (with_normals) {
                normal_sum.push_back(mesh.normals[v]);
            }
        } else if (with_normals) {
            normal_sum[match] += mesh.normals[v];
        }
    }
    if (with_normals) {
        cloud.normals.resize(cloud.points.size());
        for (std::size_t i = 0; i < cloud.points.size(); ++i) {
            const Vec3 n = normalized(normal_sum[i]);
            cloud.normals[i] = n == Vec3{} ? Vec3{0.0, 0.0, 1.0} : n;
        }
    }
    return cloud;
}

/// Offsets every point by +/- offset along its normal, producing 2N points
/// (p + offset*n, p - offset*n for each input in order).
inline PointCloud thicken_points(const PointCloud& cloud, double offset) {
    if (!(offset > 0.0)) {
        throw ValidationError("thicken_offset", "must be > 0");
    }
    if (cloud.normals.size() != cloud.points.size() || cloud.points.empty()) {
        throw MissingNormals("thickening needs one normal per point");
    }
    PointCloud out;
    out.points.reserve(2 * cloud.size());
    out.normals.reserve(2 * cloud.size());
    out.weights.reserve(2 * cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        const Vec3& n = cloud.normals[i];
        const double w = i < cloud.weights.size() ? cloud.weights[i] : 1.0;
        out.points.push_back(p + offset * n);
        out.points.push_back(p - offset * n);
        out.normals.push_back(n);
        out.normals.push_back(n);
        out.weights.push_back(w);
        out.weights.push_back(w);
    }
    return out;
}

/// Reads whitespace-separated point rows: "x y z", "x y z nx ny nz" or
/// "x y z nx ny nz w". Blank lines and '#' comments are skipped.
inline PointCloud load_points_text(const std::string& path) {
    const std::string text = io_detail::read_file(path);
    PointCloud cloud;
    std::size_t columns = 0;
    io_detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const auto tok = io_detail::split_ws(line);
        if (tok.empty()) {
            return;
        }
        if (tok.size() != 3 && tok.size() != 6 && tok.size() != 7) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 3, 6 or 7 columns");
        }
        if (columns == 0) {
            columns = tok.size();
        } else if (columns != tok.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": inconsistent column count");
        }
        double v[7];
        for (std::size_t i = 0; i < tok.size(); ++i) {
            v[i] = io_detail::parse_double(tok[i], line_no);
        }
        const double w = tok.size() == 7 ? v[6] : 1.0;
        if (w < 0.0) {
            throw ParseError("line " + std::to_string(line_no) + ": negative weight");
        }
        cloud.push_back({v[0], v[1], v[2]}, w);
        if (tok.size() >= 6) {
            const Vec3 n = normalized({v[3], v[4], v[5]});
            if (n == Vec3{}) {
                throw ParseError("line " + std::to_string(line_no) + ": zero-length normal");
            }
            cloud.normals.push_back(n);
        }
    });
    if (cloud.points.empty()) {
        throw EmptyGeometry(path + " contains no points");
    }
    return cloud;
}

// ---------------------------------------------------------------------------
// Writers

namespace io_detail {

template <typename T>
void put_le(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

} // namespace io_detail

/// Binary STL image of `mesh` (header, count, 50-byte records).
inline std::string encode_stl_binary(const TriangleMesh& mesh) {
    validate_mesh(mesh);
    std::string out;
    out.reserve(84 + 50 * mesh.triangles.size());
    out.append(80, '\0');
    io_detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.triangles.size()));
    for (const auto& tri : mesh.triangles) {
        Vec3 v[3];
        for (int i = 0; i < 3; ++i) {
            const Vec3& p = mesh.vertices[tri[i]];
            // The normal is taken from the f32-rounded corners that are stored.
            v[i] = {double(float(p.x)), double(float(p.y)), double(float(p.z))};
        }
        const Vec3 n = normalized(cross(v[1] - v[0], v[2] - v[0]));
        for (int a = 0; a < 3; ++a) {
            io_detail::put_le<float>(out, float(n[a]));
        }
        for (const auto& p : v) {
            for (int a = 0; a < 3; ++a) {
                io_detail::put_le<float>(out, float(p[a]));
            }
        }
        io_detail::put_le<std::uint16_t>(out, 0);
    }
    return out;
}

/// Returns the number of bytes written: 84 + 50 * triangle count.
inline std::size_t write_stl_binary(const TriangleMesh& mesh, const std::string& path) {
    if (mesh.triangles.empty()) {
        throw EmptyGeometry("refusing to write an STL with no triangles");
    }
    const std::string bytes = encode_stl_binary(mesh);
    io_detail::write_file(path, bytes);
    return bytes.size();
}

/// NPY v1.0 image of `field` as little-endian f32 in C order.
inline std::string encode_npy(const ScalarField3D& field) {
    const Dims& d = field.dims();
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(d.nx) + ", " +
                         std::to_string(d.ny) + ", " + std::to_string(d.nz) + "), }";
    // magic(6) + version(2) + header length(2) + dict + padding + '\n'
    const std::size_t unpadded = 10 + header.size() + 1;
    const std::size_t total = (unpadded + 63) / 64 * 64;
    header.append(total - unpadded, ' ');
    header.push_back('\n');
    if (header.size() > 0xffff) {
        throw IoError("NPY header too large for format 1.0");
    }
    std::string out;
    out.reserve(total + 4 * field.size());
    out.append("\x93NUMPY", 6);
    out.push_back('\x01');
    out.push_back('\x00');
    io_detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
    out += header;
    const auto data = field.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
    return out;
}

inline std::size_t write_npy(const ScalarField3D& field, const std::string& path) {
    if (field.empty()) {
        throw ValidationError("field", "cannot write an empty field");
    }
    const std::string bytes = encode_npy(field);
    io_detail::write_file(path, bytes);
    return bytes.size();
}

/// Reads a 3D NPY array (v1/v2/v3; '<f4' or '<f8'; C order) into a field
/// with unit voxel size and zero origin.
inline ScalarField3D read_npy(const std::string& path) {
    const std::string bytes = io_detail::read_file(path);
    if (bytes.size() < 10 || std::memcmp(bytes.data(), "\x93NUMPY", 6) != 0) {
        throw ParseError(path + ": not an NPY file");
    }
    const int major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = io_detail::read_le<std::uint16_t>(bytes.data() + 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) {
            throw ParseError(path + ": truncated NPY preamble");
        }
        header_len = io_detail::read_le<std::uint32_t>(bytes.data() + 8);
        offset = 12;
    } else {
        throw UnsupportedFormat(path + ": NPY version " + std::to_string(major) + " not supported");
    }
    if (bytes.size() < offset + header_len) {
        throw ParseError(path + ": truncated NPY header");
    }
    const std::string_view header(bytes.data() + offset, header_len);

    const auto value_of = [&](std::string_view key) -> std::string_view {
        const auto k = header.find(key);
        if (k == std::string_view::npos) {
            throw ParseError(path + ": NPY header lacks " + std::string(key));
        }
        const auto colon = header.find(':', k + key.size());
        if (colon == std::string_view::npos) {
            throw ParseError(path + ": malformed NPY header");
        }
        return io_detail::trim(header.substr(colon + 1));
    };

    const auto descr_v = value_of("'descr'");
    std::size_t item = 0;
    if (descr_v.starts_with("'<f4'") || descr_v.starts_with("'f4'")) {
        item = 4;
    } else if (descr_v.starts_with("'<f8'") || descr_v.starts_with("'f8'")) {
        item = 8;
    } else {
        throw UnsupportedFormat(path + ": NPY dtype must be little-endian float32 or float64");
    }
    if (!value_of("'fortran_order'").starts_with("False")) {
        throw UnsupportedFormat(path + ": Fortran-ordered NPY not supported");
    }
    const auto shape_v = value_of("'shape'");
    const auto close = shape_v.find(')');
    if (shape_v.empty() || shape_v.front() != '(' || close == std::string_view::npos) {
        throw ParseError(path + ": malformed NPY shape");
    }
    std::vector<std::size_t> shape;
    std::string inner(shape_v.substr(1, close - 1));
    std::replace(inner.begin(), inner.end(), ',', ' ');
    for (auto tok : io_detail::split_ws(inner)) {
        const auto n = io_detail::parse_int(tok, 1);
        if (n <= 0) {
            throw ParseError(path + ": NPY shape entries must be positive");
        }
        shape.push_back(static_cast<std::size_t>(n));
    }
    if (shape.size() != 3) {
        throw UnsupportedFormat(path + ": expected a 3D array, got " + std::to_string(shape.size()) + "D");
    }
    const Dims dims{shape[0], shape[1], shape[2]};
    const std::size_t data_at = offset + header_len;
    if (bytes.size() != data_at + item * dims.count()) {
        throw ParseError(path + ": NPY payload size does not match its shape");
    }
    ScalarField3D field(dims);
    auto data = field.data();
    const char* src = bytes.data() + data_at;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double v = item == 4 ? double(io_detail::read_le<float>(src + 4 * i))
                                   : io_detail::read_le<double>(src + 8 * i);
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ParseError(path + ": field values must be finite and non-negative");
        }
        data[i] = static_cast<float>(v);
    }
    return field;
}

} // namespace scaffold
