// SPDX-License-Identifier: Apache-2.0
// Test fixtures and reference implementations. Nothing here calls into the
// library code it is used to check.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "scaffold/field.hpp"
#include "scaffold/mesh.hpp"
#include "scaffold/vec3.hpp"

namespace testing_support {

using scaffold::Vec3;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("scaffold_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// ---------------------------------------------------------------------------
// Reference algorithms

/// Kruskal over all n^2/2 edges with union-find.
inline double kruskal_mst(const std::vector<Vec3>& pts) {
    const std::size_t n = pts.size();
    std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = pts[i].x - pts[j].x;
            const double dy = pts[i].y - pts[j].y;
            const double dz = pts[i].z - pts[j].z;
            edges.emplace_back(std::sqrt(dx * dx + dy * dy + dz * dz), i, j);
        }
    }
    std::sort(edges.begin(), edges.end());
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    const auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            x = parent[x] = parent[parent[x]];
        }
        return x;
    };
    double total = 0.0;
    for (const auto& [d, a, b] : edges) {
        const auto ra = find(a);
        const auto rb = find(b);
        if (ra != rb) {
            parent[ra] = rb;
            total += d;
        }
    }
    return total;
}

/// Number of points with no earlier point closer than eps (O(n^2)).
inline std::size_t distinct_count(const std::vector<Vec3>& pts, double eps) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dup = false;
        for (std::size_t j = 0; j < i && !dup; ++j) {
            const double dx = pts[i].x - pts[j].x;
            const double dy = pts[i].y - pts[j].y;
            const double dz = pts[i].z - pts[j].z;
            dup = std::sqrt(dx * dx + dy * dy + dz * dz) < eps;
        }
        count += !dup;
    }
    return count;
}

/// Recursive pairwise summation.
inline double pairwise_sum(const float* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += v[i];
        }
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline double field_sum(const scaffold::ScalarField3D& f) { return pairwise_sum(f.data().data(), f.size()); }

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
    if (x <= 0.0) {
        return 1.0;
    }
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        double sum = 1.0 / a;
        double term = sum;
        for (int n = 1; n < 1000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-15) {
                break;
            }
        }
        return 1.0 - sum * std::exp(log_prefix);
    }
    // Lentz continued fraction.
    double b = x + 1.0 - a;
    double c = 1e300;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        d = std::abs(d) < 1e-300 ? 1e-300 : d;
        c = b + an / c;
        c = std::abs(c) < 1e-300 ? 1e-300 : c;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) {
            break;
        }
    }
    return std::exp(log_prefix) * h;
}

/// Upper-tail p-value of a chi-square statistic.
inline double chi_square_p(double statistic, std::size_t dof) { return gamma_q(0.5 * double(dof), 0.5 * statistic); }

inline double chi_square(const std::vector<std::size_t>& counts, const std::vector<double>& probs) {
    std::size_t n = 0;
    for (auto c : counts) {
        n += c;
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = probs[i] * double(n);
        stat += (double(counts[i]) - e) * (double(counts[i]) - e) / e;
    }
    return stat;
}

// ---------------------------------------------------------------------------
// NPY reader written from the format description, for little-endian <f4 only.

struct NpyArray {
    std::vector<std::size_t> shape;
    std::string descr;
    bool fortran = true;
    std::size_t preamble = 0;
    std::vector<float> values;
};

inline NpyArray parse_npy(const std::string& bytes) {
    if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) {
        throw std::runtime_error("bad magic");
    }
    const std::size_t hlen = std::uint8_t(bytes[8]) | (std::size_t(std::uint8_t(bytes[9])) << 8);
    NpyArray a;
    a.preamble = 10 + hlen;
    const std::string header = bytes.substr(10, hlen);
    const auto value_of = [&](const std::string& key) {
        const auto k = header.find("'" + key + "':");
        if (k == std::string::npos) {
            throw std::runtime_error("missing " + key);
        }
        std::size_t p = k + key.size() + 3;
        while (header[p] == ' ') {
            ++p;
        }
        return p;
    };
    std::size_t p = value_of("descr");
    a.descr = header.substr(p + 1, header.find('\'', p + 1) - p - 1);
    p = value_of("fortran_order");
    a.fortran = header.compare(p, 4, "True") == 0;
    p = value_of("shape");
    const std::string shape = header.substr(p + 1, header.find(')', p) - p - 1);
    std::size_t i = 0;
    while (i < shape.size()) {
        while (i < shape.size() && !std::isdigit(static_cast<unsigned char>(shape[i]))) {
            ++i;
        }
        if (i == shape.size()) {
            break;
        }
        std::size_t v = 0;
        while (i < shape.size() && std::isdigit(static_cast<unsigned char>(shape[i]))) {
            v = v * 10 + std::size_t(shape[i] - '0');
            ++i;
        }
        a.shape.push_back(v);
    }
    std::size_t count = 1;
    for (auto s : a.shape) {
        count *= s;
    }
    if (bytes.size() != a.preamble + 4 * count) {
        throw std::runtime_error("payload size mismatch");
    }
    a.values.resize(count);
    std::memcpy(a.values.data(), bytes.data() + a.preamble, 4 * count);
    return a;
}

// ---------------------------------------------------------------------------
// Fixtures

/// Unit cube, 8 shared vertices, 12 outward triangles.
inline scaffold::TriangleMesh unit_cube() {
    scaffold::TriangleMesh m;
    for (int c = 0; c < 8; ++c) {
        m.vertices.push_back({double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)});
    }
    m.triangles = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                   {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
    return m;
}

/// Unit cube with four private vertices per face (24 positions).
inline scaffold::TriangleMesh unit_cube_split() {
    const auto shared = unit_cube();
    scaffold::TriangleMesh m;
    for (std::size_t f = 0; f < 6; ++f) {
        const auto& t0 = shared.triangles[2 * f];
        const auto& t1 = shared.triangles[2 * f + 1];
        // Face quad: t0 = (a, b, c), t1 = (a, c, d).
        const std::array<std::uint32_t, 4> quad{t0[0], t0[1], t0[2], t1[2]};
        const auto base = static_cast<std::uint32_t>(m.vertices.size());
        for (auto v : quad) {
            m.vertices.push_back(shared.vertices[v]);
        }
        m.triangles.push_back({base, base + 1, base + 2});
        m.triangles.push_back({base, base + 2, base + 3});
    }
    return m;
}

inline scaffold::TriangleMesh tetrahedron() {
    scaffold::TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    return m;
}

/// Latitude/longitude sphere with a duplicated seam column and per-row pole
/// copies, so many positions repeat exactly.
inline scaffold::TriangleMesh uv_sphere(std::size_t rows, std::size_t cols, double radius) {
    scaffold::TriangleMesh m;
    for (std::size_t r = 0; r <= rows; ++r) {
        const double theta = std::numbers::pi * double(r) / double(rows);
        for (std::size_t c = 0; c <= cols; ++c) {
            const double phi = 2.0 * std::numbers::pi * double(c % cols) / double(cols);
            const double s = r == 0 || r == rows ? 0.0 : std::sin(theta);
            const double z = r == 0 ? 1.0 : (r == rows ? -1.0 : std::cos(theta));
            m.vertices.push_back({radius * s * std::cos(phi), radius * s * std::sin(phi), radius * z});
        }
    }
    const auto id = [&](std::size_t r, std::size_t c) { return static_cast<std::uint32_t>(r * (cols + 1) + c); };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (r > 0) {
                m.triangles.push_back({id(r, c), id(r + 1, c), id(r, c + 1)});
            }
            if (r + 1 < rows) {
                m.triangles.push_back({id(r, c + 1), id(r + 1, c), id(r + 1, c + 1)});
            }
        }
    }
    return m;
}

/// max(2r - |x - c|, 0): the level set at r is a sphere of radius r.
inline scaffold::ScalarField3D sphere_field(std::size_t n, double r, const Vec3& c) {
    scaffold::ScalarField3D f({n, n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                const double dx = double(i) - c.x;
                const double dy = double(j) - c.y;
                const double dz = double(k) - c.z;
                f(i, j, k) = float(std::max(0.0, 2.0 * r - std::sqrt(dx * dx + dy * dy + dz * dz)));
            }
        }
    }
    return f;
}

/// Sum of random Gaussian bumps; non-negative and smooth.
inline scaffold::ScalarField3D random_smooth_field(scaffold::Dims d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ux(0.0, double(d.nx - 1));
    std::uniform_real_distribution<double> uy(0.0, double(d.ny - 1));
    std::uniform_real_distribution<double> uz(0.0, double(d.nz - 1));
    std::uniform_real_distribution<double> us(1.0, 4.0);
    std::uniform_real_distribution<double> ua(0.5, 2.0);
    std::uniform_int_distribution<int> ub(1, 6);
    struct Bump {
        Vec3 c;
        double s;
        double a;
    };
    std::vector<Bump> bumps(std::size_t(ub(rng)));
    for (auto& b : bumps) {
        b = {{ux(rng), uy(rng), uz(rng)}, us(rng), ua(rng)};
    }
    scaffold::ScalarField3D f(d);
    for (std::size_t i = 0; i < d.nx; ++i) {
        for (std::size_t j = 0; j < d.ny; ++j) {
            for (std::size_t k = 0; k < d.nz; ++k) {
                double v = 0.0;
                for (const auto& b : bumps) {
                    const double dx = double(i) - b.c.x;
                    const double dy = double(j) - b.c.y;
                    const double dz = double(k) - b.c.z;
                    v += b.a * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * b.s * b.s));
                }
                f(i, j, k) = float(v);
            }
        }
    }
    return f;
}

} // namespace testing_support
