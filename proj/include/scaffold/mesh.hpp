// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"
#include "vec3.hpp"

namespace scaffold {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh in model units (millimeters).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    /// Empty, or one unit normal per vertex.
    std::vector<Vec3> normals;
    /// Zero-area faces seen while loading. They are kept in `triangles`.
    std::size_t degenerate_triangles = 0;

    bool empty() const noexcept { return triangles.empty(); }
};

/// Food-source positions with optional normals and per-point weights.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<double> weights;

    std::size_t size() const noexcept { return points.size(); }
    bool has_normals() const noexcept { return !normals.empty(); }

    void push_back(const Vec3& p, double weight = 1.0) {
        points.push_back(p);
        weights.push_back(weight);
    }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

/// Throws ParseError when an index is out of range or normals are malformed.
inline void validate_mesh(const TriangleMesh& mesh) {
    const auto n = mesh.vertices.size();
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        for (auto idx : mesh.triangles[t]) {
            if (idx >= n) {
                throw ParseError("triangle " + std::to_string(t) + " references vertex " +
                                 std::to_string(idx) + " but mesh has " + std::to_string(n));
            }
        }
    }
    if (!mesh.normals.empty() && mesh.normals.size() != n) {
        throw ParseError("normal count does not match vertex count");
    }
}

/// Area-weighted average of incident face normals. The un-normalized cross
/// product is twice the face area, so summing it weights by area. Vertices
/// with no non-degenerate incident face get +z.
inline std::vector<Vec3> area_weighted_normals(const TriangleMesh& mesh) {
    std::vector<Vec3> acc(mesh.vertices.size());
    for (const auto& tri : mesh.triangles) {
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        const Vec3 n = cross(b - a, c - a);
        for (auto idx : tri) {
            acc[idx] += n;
        }
    }
    for (auto& n : acc) {
        const double len = norm(n);
        n = len > 0.0 ? n / len : Vec3{0.0, 0.0, 1.0};
    }
    return acc;
}

inline std::size_t count_degenerate(const TriangleMesh& mesh) {
    std::size_t count = 0;
    for (const auto& tri : mesh.triangles) {
        if (triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) == 0.0) {
            ++count;
        }
    }
    return count;
}

} // namespace scaffold
