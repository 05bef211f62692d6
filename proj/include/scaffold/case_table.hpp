// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

/// Marching-cubes case table built from a single face rule.
///
/// Corner c of the unit cube sits at (c & 1, (c >> 1) & 1, (c >> 2) & 1);
/// bit c of a configuration mask is set when that corner is inside
/// (value >= iso). Edge e runs along axis e / 4 and its other two
/// coordinates are the low and high bit of e % 4, in increasing axis order.
/// Face f lies on axis f / 2 at coordinate f % 2.
///
/// Every face is contoured from its own four corners: two crossings are
/// joined directly, and on an ambiguous face (inside corners diagonal) each
/// inside corner is cut off separately. Both cubes sharing a face therefore
/// emit the same contour segments, traversed in opposite directions, which
/// is what makes the extracted surface crack-free.
namespace scaffold::mc {

using EdgeTriple = std::array<std::uint8_t, 3>;
using CaseTable = std::array<std::vector<EdgeTriple>, 256>;

struct EdgeInfo {
    int axis;
    int lo; ///< corner with the smaller coordinate along `axis`
    int hi;
};

constexpr int other_axis(int axis, int which) { return which == 0 ? (axis == 0 ? 1 : 0) : (axis == 2 ? 1 : 2); }

constexpr EdgeInfo edge_info(int e) {
    const int axis = e / 4;
    const int b0 = (e % 4) & 1;
    const int b1 = ((e % 4) >> 1) & 1;
    const int lo = (b0 << other_axis(axis, 0)) | (b1 << other_axis(axis, 1));
    return {axis, lo, lo | (1 << axis)};
}

constexpr int edge_between(int c0, int c1) {
    const int diff = c0 ^ c1;
    const int axis = diff == 1 ? 0 : (diff == 2 ? 1 : 2);
    const int lo = c0 & ~diff;
    const int b0 = (lo >> other_axis(axis, 0)) & 1;
    const int b1 = (lo >> other_axis(axis, 1)) & 1;
    return axis * 4 + b0 + 2 * b1;
}

/// The four corners of face f in cyclic order.
constexpr std::array<int, 4> face_corners(int f) {
    const int axis = f / 2;
    const int side = f % 2;
    const int u = other_axis(axis, 0);
    const int v = other_axis(axis, 1);
    const int base = side << axis;
    return {base, base | (1 << u), base | (1 << u) | (1 << v), base | (1 << v)};
}

constexpr bool edge_on_face(int e, int f) {
    const auto info = edge_info(e);
    const int axis = f / 2;
    return info.axis != axis && ((info.lo >> axis) & 1) == f % 2;
}

constexpr bool edges_share_face(int a, int b) {
    for (int f = 0; f < 6; ++f) {
        if (edge_on_face(a, f) && edge_on_face(b, f)) {
            return true;
        }
    }
    return false;
}

/// Edge e mirrored across the plane orthogonal to `axis`.
constexpr int mirror_edge(int e, int axis) {
    const auto info = edge_info(e);
    return edge_between(info.lo ^ (1 << axis), info.hi ^ (1 << axis));
}

namespace detail {

struct Pt {
    double v[3];
};

inline Pt corner_pos(int c) { return {{double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)}}; }

inline Pt edge_mid(int e) {
    const auto info = edge_info(e);
    Pt p = corner_pos(info.lo);
    p.v[info.axis] = 0.5;
    return p;
}

/// Directed contour segments (from edge, to edge) on face f. Each segment is
/// oriented so that, looking from outside the cube, the inside corners are
/// on its left; chaining them gives loops whose fan triangles face away from
/// the inside region.
inline std::vector<std::pair<int, int>> face_segments(int mask, int f) {
    const auto corners = face_corners(f);
    const auto inside = [&](int c) { return ((mask >> c) & 1) != 0; };
    std::vector<int> crossed;
    for (int i = 0; i < 4; ++i) {
        const int a = corners[std::size_t(i)];
        const int b = corners[std::size_t((i + 1) % 4)];
        if (inside(a) != inside(b)) {
            crossed.push_back(edge_between(a, b));
        }
    }
    std::vector<std::pair<int, int>> pairs;
    std::vector<Pt> inside_ref;
    if (crossed.size() == 2) {
        pairs.emplace_back(crossed[0], crossed[1]);
        Pt centroid{{0, 0, 0}};
        int n = 0;
        for (int c : corners) {
            if (inside(c)) {
                const Pt p = corner_pos(c);
                for (int a = 0; a < 3; ++a) centroid.v[a] += p.v[a];
                ++n;
            }
        }
        for (int a = 0; a < 3; ++a) centroid.v[a] /= n;
        inside_ref.push_back(centroid);
    } else if (crossed.size() == 4) {
        for (int i = 0; i < 4; ++i) {
            const int c = corners[std::size_t(i)];
            if (inside(c)) {
                const int prev = corners[std::size_t((i + 3) % 4)];
                const int next = corners[std::size_t((i + 1) % 4)];
                pairs.emplace_back(edge_between(prev, c), edge_between(c, next));
                inside_ref.push_back(corner_pos(c));
            }
        }
    }
    const int axis = f / 2;
    const double normal_sign = f % 2 ? 1.0 : -1.0;
    std::vector<std::pair<int, int>> out;
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        auto [u, w] = pairs[s];
        const Pt pu = edge_mid(u);
        const Pt pw = edge_mid(w);
        double d[3], n[3] = {0, 0, 0}, toward[3];
        n[axis] = normal_sign;
        for (int a = 0; a < 3; ++a) {
            d[a] = pw.v[a] - pu.v[a];
            toward[a] = inside_ref[s].v[a] - 0.5 * (pu.v[a] + pw.v[a]);
        }
        const double cr[3] = {d[1] * n[2] - d[2] * n[1], d[2] * n[0] - d[0] * n[2], d[0] * n[1] - d[1] * n[0]};
        if (cr[0] * toward[0] + cr[1] * toward[1] + cr[2] * toward[2] < 0.0) {
            std::swap(u, w);
        }
        out.emplace_back(u, w);
    }
    return out;
}

// Triangulates a closed loop of edge ids without any diagonal joining two
// edges of a common cube face. Such a diagonal would also be producible by
// the neighbouring cube and the shared mesh edge would gain a third face.
inline std::vector<EdgeTriple> triangulate_loop(const std::vector<int>& loop) {
    const std::size_t m = loop.size();
    std::vector<EdgeTriple> out;
    if (m < 3) {
        return out;
    }
    const auto allowed = [&](std::size_t i, std::size_t j) {
        return j == i + 1 || (i == 0 && j == m - 1) || !edges_share_face(loop[i], loop[j]);
    };
    // split[i][j]: chosen apex for sub-polygon i..j, or -1 when infeasible.
    std::vector<std::vector<int>> split(m, std::vector<int>(m, -1));
    std::vector<std::vector<char>> ok(m, std::vector<char>(m, 0));
    for (std::size_t i = 0; i + 1 < m; ++i) {
        ok[i][i + 1] = 1;
    }
    for (std::size_t len = 2; len < m; ++len) {
        for (std::size_t i = 0; i + len < m; ++i) {
            const std::size_t j = i + len;
            if (!allowed(i, j)) {
                continue;
            }
            // Prefer the most central apex for better-shaped triangles.
            const std::size_t mid = i + len / 2;
            for (std::size_t off = 0; off < len && !ok[i][j]; ++off) {
                for (int sgn : {1, -1}) {
                    const long long kk = static_cast<long long>(mid) + sgn * static_cast<long long>(off);
                    if (kk <= static_cast<long long>(i) || kk >= static_cast<long long>(j)) continue;
                    const auto k = static_cast<std::size_t>(kk);
                    if (ok[i][k] && ok[k][j]) {
                        ok[i][j] = 1;
                        split[i][j] = static_cast<int>(k);
                        break;
                    }
                    if (off == 0) break;
                }
            }
        }
    }
    if (!ok[0][m - 1]) {
        // No face-safe triangulation; fall back to a plain fan. The table
        // validator reports any configuration where this happens.
        for (std::size_t i = 1; i + 1 < m; ++i) {
            out.push_back({std::uint8_t(loop[0]), std::uint8_t(loop[i]), std::uint8_t(loop[i + 1])});
        }
        return out;
    }
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, m - 1}};
    while (!stack.empty()) {
        const auto [i, j] = stack.back();
        stack.pop_back();
        if (j <= i + 1) {
            continue;
        }
        const auto k = static_cast<std::size_t>(split[i][j]);
        out.push_back({std::uint8_t(loop[i]), std::uint8_t(loop[k]), std::uint8_t(loop[j])});
        stack.emplace_back(i, k);
        stack.emplace_back(k, j);
    }
    return out;
}

inline std::vector<EdgeTriple> build_case(int mask) {
    std::array<int, 12> next;
    next.fill(-1);
    for (int f = 0; f < 6; ++f) {
        for (auto [u, w] : face_segments(mask, f)) {
            next[std::size_t(u)] = w;
        }
    }
    std::vector<EdgeTriple> tris;
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
        if (next[std::size_t(start)] < 0 || used[std::size_t(start)]) {
            continue;
        }
        std::vector<int> loop;
        for (int e = start; !used[std::size_t(e)]; e = next[std::size_t(e)]) {
            used[std::size_t(e)] = true;
            loop.push_back(e);
        }
        const auto part = triangulate_loop(loop);
        tris.insert(tris.end(), part.begin(), part.end());
    }
    return tris;
}

} // namespace detail

inline CaseTable build_case_table() {
    CaseTable table;
    for (int mask = 0; mask < 256; ++mask) {
        table[std::size_t(mask)] = detail::build_case(mask);
    }
    return table;
}

/// The shipped table, built once on first use.
inline const CaseTable& case_table() {
    static const CaseTable table = build_case_table();
    return table;
}

struct CaseTableReport {
    std::size_t configurations_checked = 0;
    std::size_t face_checks = 0;
    std::size_t mismatches = 0;
    std::vector<std::string> failures;

    bool ok() const noexcept { return mismatches == 0; }
};

/// Checks that `table` produces crack-free, consistently oriented surfaces:
/// per configuration, triangles use exactly the sign-changing edges, every
/// interior triangle edge is traversed once each way, and open edges lie on
/// cube faces. Per face, the open edges must equal the reversed open edges
/// that every compatible neighbouring configuration emits on the mirrored
/// face. Interior edges may not connect two edges of one face.
inline CaseTableReport validate_case_table(const CaseTable& table) {
    CaseTableReport report;
    const auto fail = [&](std::string msg) {
        ++report.mismatches;
        if (report.failures.size() < 100) {
            report.failures.push_back(std::move(msg));
        }
    };

    // Open (boundary) directed edges of each configuration, bucketed by face.
    std::array<std::array<std::set<std::pair<int, int>>, 6>, 256> open{};
    for (int mask = 0; mask < 256; ++mask) {
        ++report.configurations_checked;
        const auto& tris = table[std::size_t(mask)];
        std::set<int> expected;
        for (int e = 0; e < 12; ++e) {
            const auto info = edge_info(e);
            if (((mask >> info.lo) & 1) != ((mask >> info.hi) & 1)) {
                expected.insert(e);
            }
        }
        std::set<int> used;
        std::map<std::pair<int, int>, int> directed;
        for (const auto& t : tris) {
            for (int i = 0; i < 3; ++i) {
                used.insert(t[std::size_t(i)]);
                ++directed[{t[std::size_t(i)], t[std::size_t((i + 1) % 3)]}];
            }
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
                fail("mask " + std::to_string(mask) + ": triangle repeats an edge");
            }
        }
        if (used != expected) {
            fail("mask " + std::to_string(mask) + ": triangles do not use exactly the crossed edges");
        }
        for (const auto& [edge, count] : directed) {
            if (count != 1) {
                fail("mask " + std::to_string(mask) + ": directed edge used " + std::to_string(count) + " times");
                continue;
            }
            if (directed.count({edge.second, edge.first})) {
                // Interior edge. One joining two edges of a common face could
                // be emitted by the neighbouring cube as well.
                if (edge.first < edge.second && edges_share_face(edge.first, edge.second)) {
                    fail("mask " + std::to_string(mask) + ": interior edge lies in a cube face");
                }
                continue;
            }
            int face = -1;
            for (int f = 0; f < 6; ++f) {
                if (edge_on_face(edge.first, f) && edge_on_face(edge.second, f)) {
                    face = f;
                }
            }
            if (face < 0) {
                fail("mask " + std::to_string(mask) + ": open edge not on a cube face");
                continue;
            }
            open[std::size_t(mask)][std::size_t(face)].insert(edge);
        }
    }

    for (int mask = 0; mask < 256; ++mask) {
        for (int f = 0; f < 6; ++f) {
            ++report.face_checks;
            const int axis = f / 2;
            const int mf = f ^ 1; // the same plane seen from the neighbour
            const auto mine = face_corners(f);
            std::set<std::pair<int, int>> want;
            for (auto [u, w] : open[std::size_t(mask)][std::size_t(f)]) {
                want.insert({mirror_edge(w, axis), mirror_edge(u, axis)});
            }
            for (int other = 0; other < 256; ++other) {
                bool compatible = true;
                for (int c : mine) {
                    const int mc = c ^ (1 << axis);
                    if (((mask >> c) & 1) != ((other >> mc) & 1)) {
                        compatible = false;
                        break;
                    }
                }
                if (!compatible) {
                    continue;
                }
                if (open[std::size_t(other)][std::size_t(mf)] != want) {
                    fail("mask " + std::to_string(mask) + " face " + std::to_string(f) + " disagrees with mask " +
                         std::to_string(other));
                    break;
                }
            }
        }
    }
    return report;
}

} // namespace scaffold::mc
