// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "case_table.hpp"
#include "error.hpp"
#include "field.hpp"
#include "mesh.hpp"

namespace scaffold {

struct IsoSurface {
    TriangleMesh mesh;
    /// No voxel reached the iso value; `mesh` is empty.
    bool empty_result = false;
};

/// Extracts the iso surface {field >= iso} as a closed, outward-wound mesh.
///
/// The field is treated as if surrounded by one layer of (iso - delta)
/// voxels, delta = max(1e-6, 1e-6 * iso), so surfaces that reach the grid
/// boundary are capped. Voxels exactly at iso count as iso + delta. One
/// vertex is created per sign-changing grid edge, keyed by the edge itself,
/// so neighbouring cubes share vertices without welding.
inline IsoSurface marching_cubes(const ScalarField3D& field, double iso, const GridTransform& transform) {
    if (!(iso > 0.0) || !std::isfinite(iso)) {
        throw ValidationError("iso", "iso value must be > 0");
    }
    IsoSurface result;
    const Dims d = field.dims();
    if (field.empty()) {
        result.empty_result = true;
        return result;
    }
    const double delta = std::max(1e-6, 1e-6 * iso);
    const double outside = iso - delta;
    const auto data = field.data();

    // Padded grid: index p in [0, n + 1] maps to field index p - 1.
    const std::size_t px = d.nx + 2;
    const std::size_t py = d.ny + 2;
    const std::size_t pz = d.nz + 2;
    const auto value = [&](std::size_t i, std::size_t j, std::size_t k) -> double {
        if (i == 0 || j == 0 || k == 0 || i > d.nx || j > d.ny || k > d.nz) {
            return outside;
        }
        const double v = data[((i - 1) * d.ny + (j - 1)) * d.nz + (k - 1)];
        return v == iso ? iso + delta : v;
    };

    bool any_inside = false;
    for (float v : data) {
        if (double(v) >= iso) {
            any_inside = true;
            break;
        }
    }
    if (!any_inside) {
        result.empty_result = true;
        return result;
    }

    // Vertex id per (padded lower corner, axis); -1 when not yet created.
    std::vector<std::int32_t> vertex_of(3 * px * py * pz, -1);
    const auto& table = mc::case_table();
    auto& mesh = result.mesh;

    const auto edge_vertex = [&](std::size_t i, std::size_t j, std::size_t k, int e) -> std::uint32_t {
        const auto info = mc::edge_info(e);
        const std::size_t ci = i + (info.lo & 1);
        const std::size_t cj = j + ((info.lo >> 1) & 1);
        const std::size_t ck = k + ((info.lo >> 2) & 1);
        const std::size_t key = ((ci * py + cj) * pz + ck) * 3 + std::size_t(info.axis);
        std::int32_t& slot = vertex_of[key];
        if (slot < 0) {
            const double v0 = value(ci, cj, ck);
            const double v1 = value(ci + (info.axis == 0), cj + (info.axis == 1), ck + (info.axis == 2));
            const double t = std::clamp((iso - v0) / (v1 - v0), 0.0, 1.0);
            Vec3 g{double(ci) - 1.0, double(cj) - 1.0, double(ck) - 1.0};
            g[info.axis] += t;
            slot = static_cast<std::int32_t>(mesh.vertices.size());
            mesh.vertices.push_back(transform.to_model(g));
        }
        return static_cast<std::uint32_t>(slot);
    };

    for (std::size_t i = 0; i + 1 < px; ++i) {
        for (std::size_t j = 0; j + 1 < py; ++j) {
            for (std::size_t k = 0; k + 1 < pz; ++k) {
                int mask = 0;
                for (int c = 0; c < 8; ++c) {
                    if (value(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) >= iso) {
                        mask |= 1 << c;
                    }
                }
                if (mask == 0 || mask == 255) {
                    continue;
                }
                for (const auto& tri : table[std::size_t(mask)]) {
                    const Triangle t{edge_vertex(i, j, k, tri[0]), edge_vertex(i, j, k, tri[1]),
                                     edge_vertex(i, j, k, tri[2])};
                    if (t[0] == t[1] && t[1] == t[2]) {
                        continue;
                    }
                    mesh.triangles.push_back(t);
                }
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Structural checks

struct MeshStats {
    std::size_t vertex_count = 0;
    std::size_t triangle_count = 0;
    std::size_t edge_count = 0;
    std::size_t boundary_edge_count = 0;
    long long euler_characteristic = 0;
    std::size_t connected_component_count = 0;
    double surface_area = 0.0;
};

namespace mesh_detail {

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    const auto lo = std::min(a, b);
    const auto hi = std::max(a, b);
    return (std::uint64_t(lo) << 32) | hi;
}

struct EdgeUse {
    std::uint32_t count = 0;
    std::uint32_t forward = 0; ///< traversals from the smaller to the larger index
};

inline std::unordered_map<std::uint64_t, EdgeUse> edge_uses(const TriangleMesh& mesh) {
    std::unordered_map<std::uint64_t, EdgeUse> uses;
    uses.reserve(mesh.triangles.size() * 2);
    for (const auto& t : mesh.triangles) {
        for (int i = 0; i < 3; ++i) {
            const auto a = t[std::size_t(i)];
            const auto b = t[std::size_t((i + 1) % 3)];
            auto& u = uses[edge_key(a, b)];
            ++u.count;
            u.forward += a < b;
        }
    }
    return uses;
}

inline std::size_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

} // namespace mesh_detail

inline MeshStats mesh_stats(const TriangleMesh& mesh) {
    validate_mesh(mesh);
    MeshStats s;
    s.vertex_count = mesh.vertices.size();
    s.triangle_count = mesh.triangles.size();
    const auto uses = mesh_detail::edge_uses(mesh);
    s.edge_count = uses.size();
    for (const auto& [key, use] : uses) {
        s.boundary_edge_count += use.count == 1;
    }
    s.euler_characteristic =
        static_cast<long long>(s.vertex_count) - static_cast<long long>(s.edge_count) + static_cast<long long>(s.triangle_count);

    std::vector<std::uint32_t> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0u);
    std::vector<char> used(mesh.vertices.size(), 0);
    for (const auto& t : mesh.triangles) {
        for (auto v : t) {
            used[v] = 1;
        }
        const auto r0 = mesh_detail::find_root(parent, t[0]);
        for (int i = 1; i < 3; ++i) {
            const auto r = mesh_detail::find_root(parent, t[std::size_t(i)]);
            if (r != r0) {
                parent[r] = static_cast<std::uint32_t>(r0);
            }
        }
        s.surface_area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    }
    for (std::uint32_t v = 0; v < parent.size(); ++v) {
        s.connected_component_count += used[v] && mesh_detail::find_root(parent, v) == v;
    }
    return s;
}

struct WatertightReport {
    bool watertight = false;
    std::size_t boundary_edges = 0;     ///< used by one triangle
    std::size_t nonmanifold_edges = 0;  ///< used by three or more
    std::size_t misoriented_edges = 0;  ///< used twice in the same direction
    /// Offending edges as "a-b: reason", at most 100 entries.
    std::vector<std::string> diagnostics;
};

/// Watertight means every undirected edge belongs to exactly two triangles
/// that traverse it in opposite directions. An empty mesh is not watertight.
inline WatertightReport is_watertight(const TriangleMesh& mesh) {
    validate_mesh(mesh);
    WatertightReport r;
    const auto uses = mesh_detail::edge_uses(mesh);
    for (const auto& [key, use] : uses) {
        const char* reason = nullptr;
        if (use.count == 1) {
            ++r.boundary_edges;
            reason = "boundary";
        } else if (use.count > 2) {
            ++r.nonmanifold_edges;
            reason = "non-manifold";
        } else if (use.forward != 1) {
            ++r.misoriented_edges;
            reason = "inconsistent orientation";
        }
        if (reason) {
            r.diagnostics.push_back(std::to_string(key >> 32) + "-" + std::to_string(key & 0xffffffffu) + ": " +
                                    reason);
        }
    }
    std::sort(r.diagnostics.begin(), r.diagnostics.end());
    if (r.diagnostics.size() > 100) {
        r.diagnostics.resize(100);
    }
    r.watertight = !mesh.triangles.empty() && r.boundary_edges == 0 && r.nonmanifold_edges == 0 &&
                   r.misoriented_edges == 0;
    return r;
}

/// Signed enclosed volume; positive for outward-wound closed meshes.
inline double signed_volume(const TriangleMesh& mesh) {
    double v = 0.0;
    for (const auto& t : mesh.triangles) {
        v += dot(mesh.vertices[t[0]], cross(mesh.vertices[t[1]], mesh.vertices[t[2]]));
    }
    return v / 6.0;
}

} // namespace scaffold
