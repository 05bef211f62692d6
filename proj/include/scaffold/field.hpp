// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "vec3.hpp"

namespace scaffold {

struct Dims {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t nz = 0;

    constexpr std::size_t count() const noexcept { return nx * ny * nz; }
    constexpr std::size_t operator[](int axis) const noexcept { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    constexpr std::size_t max() const noexcept { return std::max({nx, ny, nz}); }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

/// Uniform scale plus translation: model = grid * scale + translation.
struct GridTransform {
    double scale = 1.0;
    Vec3 translation;

    Vec3 to_model(const Vec3& grid) const { return grid * scale + translation; }
    Vec3 to_grid(const Vec3& model) const { return (model - translation) / scale; }
};

/// Dense voxel grid of non-negative floats in C order (x slowest, z fastest).
/// Voxel (i, j, k) has its center at grid position (i, j, k).
class ScalarField3D {
public:
    ScalarField3D() = default;

    explicit ScalarField3D(Dims dims, double voxel_size = 1.0, Vec3 origin = {}, float fill = 0.0f)
        : dims_(dims), voxel_size_(voxel_size), origin_(origin), data_(dims.count(), fill) {}

    ScalarField3D(Dims dims, const GridTransform& t) : ScalarField3D(dims, t.scale, t.translation) {}

    const Dims& dims() const noexcept { return dims_; }
    double voxel_size() const noexcept { return voxel_size_; }
    const Vec3& origin() const noexcept { return origin_; }
    GridTransform transform() const { return {voxel_size_, origin_}; }
    void set_transform(const GridTransform& t) {
        voxel_size_ = t.scale;
        origin_ = t.translation;
    }

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return (i * dims_.ny + j) * dims_.nz + k;
    }

    float& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept { return data_[index(i, j, k)]; }
    float operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept { return data_[index(i, j, k)]; }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    bool in_domain(const Vec3& p) const noexcept {
        return p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= double(dims_.nx - 1) &&
               p.y <= double(dims_.ny - 1) && p.z <= double(dims_.nz - 1);
    }

    friend bool operator==(const ScalarField3D&, const ScalarField3D&) = default;

private:
    Dims dims_;
    double voxel_size_ = 1.0;
    Vec3 origin_;
    std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// Grid fitting

struct GridFit {
    GridTransform transform;
    Dims dims;
    /// True when the input points were coincident and a unit box was used.
    bool degenerate_bounds = false;
};

/// Fits an aspect-preserving grid around `points`. The bounding box grows by
/// `margin` times its largest extent on every side; that largest axis then
/// spans exactly `resolution` voxel centers and the shorter axes are centered.
/// Coincident input falls back to a unit box around the point.
inline GridFit fit_transform(std::span<const Vec3> points, std::size_t resolution, double margin) {
    if (points.empty()) {
        throw ValidationError("points", "at least one point is required");
    }
    if (resolution < 8) {
        throw ValidationError("resolution", "must be at least 8, got " + std::to_string(resolution));
    }
    if (!(margin >= 0.0 && margin < 0.5)) {
        throw ValidationError("margin", "must be in [0, 0.5)");
    }
    Vec3 lo = points.front();
    Vec3 hi = points.front();
    for (const auto& p : points) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    GridFit fit;
    double largest = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    if (!(largest > 0.0)) {
        fit.degenerate_bounds = true;
        lo -= Vec3{0.5, 0.5, 0.5};
        hi += Vec3{0.5, 0.5, 0.5};
        largest = 1.0;
    }
    const double pad = margin * largest;
    lo -= Vec3{pad, pad, pad};
    hi += Vec3{pad, pad, pad};
    largest += 2.0 * pad;

    double scale = largest / double(resolution - 1);
    const std::size_t min_dim = 8;
    std::size_t n[3];
    for (int a = 0; a < 3; ++a) {
        const double cells = std::ceil((hi[a] - lo[a]) / scale - 1e-9);
        n[a] = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cells, 0.0)) + 1, min_dim, resolution);
    }
    // Grow the scale by ulps until rounding cannot push a box corner out.
    const auto place = [&] {
        fit.transform.scale = scale;
        for (int a = 0; a < 3; ++a) {
            const double center = 0.5 * (lo[a] + hi[a]);
            fit.transform.translation[a] = center - scale * 0.5 * double(n[a] - 1);
        }
        const Vec3 g0 = fit.transform.to_grid(lo);
        const Vec3 g1 = fit.transform.to_grid(hi);
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            inside = inside && g0[a] >= 0.0 && g1[a] <= double(n[a] - 1);
        }
        return inside;
    };
    while (!place()) {
        scale = std::nextafter(scale, std::numeric_limits<double>::infinity());
    }
    fit.dims = {n[0], n[1], n[2]};
    return fit;
}

// ---------------------------------------------------------------------------
// Sampling and splatting

namespace detail {

struct AxisLerp {
    std::size_t i0;
    std::size_t i1;
    double t;
};

// Caller guarantees 0 <= p <= n - 1.
inline AxisLerp axis_lerp(double p, std::size_t n) noexcept {
    if (n < 2) {
        return {0, 0, 0.0};
    }
    const auto i0 = std::min(static_cast<std::size_t>(static_cast<std::int64_t>(p)), n - 2);
    return {i0, i0 + 1, p - double(i0)};
}

// Splat for an in-domain position, where all 8 corners exist. When `second`
// is non-null the same weights also add `second_amount` there, so one call
// updates two fields of equal dims.
inline void splat_interior(float* first, const Dims& d, const Vec3& pos, double amount, float second_amount,
                           float* second, std::size_t x_begin, std::size_t x_end) noexcept {
    const auto x = axis_lerp(pos.x, d.nx);
    const auto y = axis_lerp(pos.y, d.ny);
    const auto z = axis_lerp(pos.z, d.nz);
    const double wy[2] = {1.0 - y.t, y.t};
    const double wz[2] = {1.0 - z.t, z.t};
    const std::size_t xs[2] = {x.i0, x.i1};
    const double wx[2] = {1.0 - x.t, x.t};
    const std::size_t ys[2] = {y.i0, y.i1};
    const std::size_t zs[2] = {z.i0, z.i1};
    // When an axis has a single voxel, i0 == i1 and t == 0, so the second
    // corner receives weight 0 and is skipped.
    for (int a = 0; a < 2; ++a) {
        if (xs[a] < x_begin || xs[a] >= x_end || wx[a] == 0.0) {
            continue;
        }
        for (int b = 0; b < 2; ++b) {
            const double wab = wx[a] * wy[b];
            const std::size_t row = (xs[a] * d.ny + ys[b]) * d.nz;
            for (int c = 0; c < 2; ++c) {
                const double w = wab * wz[c];
                first[row + zs[c]] += static_cast<float>(amount * w);
                if (second) {
                    second[row + zs[c]] += static_cast<float>(second_amount * w);
                }
            }
        }
    }
}

} // namespace detail

/// Trilinear interpolation between voxel centers. Returns 0 outside
/// [0, n-1] on any axis.
inline double sample_trilinear(const ScalarField3D& field, const Vec3& pos) noexcept {
    if (field.empty() || !field.in_domain(pos)) {
        return 0.0;
    }
    const Dims& d = field.dims();
    const auto x = detail::axis_lerp(pos.x, d.nx);
    const auto y = detail::axis_lerp(pos.y, d.ny);
    const auto z = detail::axis_lerp(pos.z, d.nz);
    const float* base = field.data().data();
    const std::size_t sx = d.ny * d.nz;
    const float* p00 = base + x.i0 * sx + y.i0 * d.nz;
    const float* p01 = base + x.i0 * sx + y.i1 * d.nz;
    const float* p10 = base + x.i1 * sx + y.i0 * d.nz;
    const float* p11 = base + x.i1 * sx + y.i1 * d.nz;
    const double tz = z.t;
    const double c00 = p00[z.i0] + (double(p00[z.i1]) - p00[z.i0]) * tz;
    const double c01 = p01[z.i0] + (double(p01[z.i1]) - p01[z.i0]) * tz;
    const double c10 = p10[z.i0] + (double(p10[z.i1]) - p10[z.i0]) * tz;
    const double c11 = p11[z.i0] + (double(p11[z.i1]) - p11[z.i0]) * tz;
    const double c0 = c00 + (c01 - c00) * y.t;
    const double c1 = c10 + (c11 - c10) * y.t;
    return c0 + (c1 - c0) * x.t;
}

/// sample_trilinear with the bounds and strides hoisted out, for hot loops
/// over one field. Every axis must have at least 2 voxels.
class TrilinearSampler {
public:
    explicit TrilinearSampler(const ScalarField3D& field)
        : data_(field.data().data()), ny_(field.dims().ny), nz_(field.dims().nz),
          sx_(field.dims().ny * field.dims().nz), hi_{double(field.dims().nx - 1), double(field.dims().ny - 1),
                                                      double(field.dims().nz - 1)} {}

    double operator()(const Vec3& p) const noexcept {
        if (!(p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= hi_[0] && p.y <= hi_[1] && p.z <= hi_[2])) {
            return 0.0;
        }
        const auto lerp_axis = [](double v, double hi, std::size_t& i0, double& t) {
            const double f = std::min(double(static_cast<std::int64_t>(v)), hi - 1.0);
            i0 = static_cast<std::size_t>(static_cast<std::int64_t>(f));
            t = v - f;
        };
        std::size_t i, j, k;
        double tx, ty, tz;
        lerp_axis(p.x, hi_[0], i, tx);
        lerp_axis(p.y, hi_[1], j, ty);
        lerp_axis(p.z, hi_[2], k, tz);
        const float* p00 = data_ + i * sx_ + j * nz_ + k;
        const float* p01 = p00 + nz_;
        const float* p10 = p00 + sx_;
        const float* p11 = p10 + nz_;
        const double c00 = p00[0] + (double(p00[1]) - p00[0]) * tz;
        const double c01 = p01[0] + (double(p01[1]) - p01[0]) * tz;
        const double c10 = p10[0] + (double(p10[1]) - p10[0]) * tz;
        const double c11 = p11[0] + (double(p11[1]) - p11[0]) * tz;
        const double c0 = c00 + (c01 - c00) * ty;
        const double c1 = c10 + (c11 - c10) * ty;
        return c0 + (c1 - c0) * tx;
    }

private:
    const float* data_;
    std::size_t ny_;
    std::size_t nz_;
    std::size_t sx_;
    double hi_[3];
};

/// Adjoint of sample_trilinear: spreads `amount` over the 8 surrounding
/// voxels. Corners outside the grid are dropped. Only voxels whose x index
/// lies in [x_begin, x_end) are written, which lets workers own x-slabs.
inline void splat_trilinear(ScalarField3D& field, const Vec3& pos, double amount, std::size_t x_begin = 0,
                            std::size_t x_end = std::numeric_limits<std::size_t>::max()) noexcept {
    if (field.empty() || !(amount != 0.0) || !std::isfinite(pos.x) || !std::isfinite(pos.y) ||
        !std::isfinite(pos.z)) {
        return;
    }
    const Dims& d = field.dims();
    if (field.in_domain(pos)) {
        detail::splat_interior(field.data().data(), d, pos, amount, 1.0f, nullptr, x_begin, x_end);
        return;
    }
    const double fx = std::floor(pos.x);
    const double fy = std::floor(pos.y);
    const double fz = std::floor(pos.z);
    const double t[3] = {pos.x - fx, pos.y - fy, pos.z - fz};
    const double base[3] = {fx, fy, fz};
    auto data = field.data();
    for (int c = 0; c < 8; ++c) {
        double w = amount;
        std::int64_t idx[3];
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            const int bit = (c >> a) & 1;
            w *= bit ? t[a] : 1.0 - t[a];
            const double v = base[a] + bit;
            if (v < 0.0 || v > double(d[a] - 1)) {
                inside = false;
                break;
            }
            idx[a] = static_cast<std::int64_t>(v);
        }
        if (!inside || w == 0.0) {
            continue;
        }
        const auto ix = static_cast<std::size_t>(idx[0]);
        if (ix < x_begin || ix >= x_end) {
            continue;
        }
        data[(ix * d.ny + std::size_t(idx[1])) * d.nz + std::size_t(idx[2])] += static_cast<float>(w);
    }
}

// ---------------------------------------------------------------------------
// Relaxation primitives

namespace detail {

// Per-source scatter weights of the (1/4, 1/2, 1/4) kernel, renormalized at
// the line ends so each source hands out exactly all of its mass.
struct BinomialWeights {
    float self;
    float from_left;  // contribution of source i-1 to target i
    float from_right; // contribution of source i+1 to target i
};

inline BinomialWeights binomial_weights(std::size_t i, std::size_t n) noexcept {
    constexpr float half = 0.5f;
    constexpr float quarter = 0.25f;
    constexpr float third = 1.0f / 3.0f;
    constexpr float two_thirds = 2.0f / 3.0f;
    if (n == 1) {
        return {1.0f, 0.0f, 0.0f};
    }
    BinomialWeights w{};
    w.self = (i == 0 || i == n - 1) ? two_thirds : half;
    if (i > 0) {
        w.from_left = (i - 1 == 0) ? third : quarter;
    }
    if (i + 1 < n) {
        w.from_right = (i + 1 == n - 1) ? third : quarter;
    }
    return w;
}

// Layout [outer][n][inner]; every output row depends only on three input
// rows, so rows may be computed in any order.
inline void diffuse_axis(const float* src, float* dst, std::size_t outer, std::size_t n, std::size_t inner,
                         ThreadPool* pool) {
    const auto body = [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t q = begin; q < end; ++q) {
            const std::size_t o = q / n;
            const std::size_t i = q % n;
            const auto w = binomial_weights(i, n);
            const float* mid = src + (o * n + i) * inner;
            const float* left = i > 0 ? mid - inner : nullptr;
            const float* right = i + 1 < n ? mid + inner : nullptr;
            float* out = dst + (o * n + i) * inner;
            if (left && right) {
                for (std::size_t k = 0; k < inner; ++k) {
                    out[k] = (w.from_left * left[k] + w.self * mid[k]) + w.from_right * right[k];
                }
            } else if (left) {
                for (std::size_t k = 0; k < inner; ++k) {
                    out[k] = w.from_left * left[k] + w.self * mid[k];
                }
            } else if (right) {
                for (std::size_t k = 0; k < inner; ++k) {
                    out[k] = w.self * mid[k] + w.from_right * right[k];
                }
            } else {
                for (std::size_t k = 0; k < inner; ++k) {
                    out[k] = mid[k];
                }
            }
        }
    };
    const std::size_t rows = outer * n;
    if (pool) {
        pool->parallel_for(rows, body);
    } else {
        body(0, rows, 0);
    }
}

inline void diffuse_lines_z(const float* src, float* dst, std::size_t lines, std::size_t n, ThreadPool* pool) {
    const auto body = [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t line = begin; line < end; ++line) {
            const float* a = src + line * n;
            float* out = dst + line * n;
            const auto edge = [&](std::size_t i) {
                const auto w = binomial_weights(i, n);
                float v = w.self * a[i];
                if (i > 0) {
                    v = w.from_left * a[i - 1] + v;
                }
                if (i + 1 < n) {
                    v = v + w.from_right * a[i + 1];
                }
                out[i] = v;
            };
            if (n < 5) {
                for (std::size_t i = 0; i < n; ++i) {
                    edge(i);
                }
                continue;
            }
            edge(0);
            edge(1);
            for (std::size_t i = 2; i + 2 < n; ++i) {
                out[i] = (0.25f * a[i - 1] + 0.5f * a[i]) + 0.25f * a[i + 1];
            }
            edge(n - 2);
            edge(n - 1);
        }
    };
    if (pool) {
        pool->parallel_for(lines, body);
    } else {
        body(0, lines, 0);
    }
}

} // namespace detail

/// One pass of separable (1/4, 1/2, 1/4) blur along each axis. Total mass is
/// conserved up to float rounding, including at the grid boundary.
inline void diffuse_in_place(ScalarField3D& field, std::vector<float>& scratch, ThreadPool* pool = nullptr) {
    if (field.empty()) {
        return;
    }
    const Dims d = field.dims();
    scratch.resize(field.size());
    float* a = field.data().data();
    float* b = scratch.data();
    detail::diffuse_axis(a, b, 1, d.nx, d.ny * d.nz, pool);
    detail::diffuse_axis(b, a, d.nx, d.ny, d.nz, pool);
    detail::diffuse_lines_z(a, b, d.nx * d.ny, d.nz, pool);
    std::copy(b, b + field.size(), a);
}

inline ScalarField3D diffuse(ScalarField3D field, ThreadPool* pool = nullptr) {
    std::vector<float> scratch;
    diffuse_in_place(field, scratch, pool);
    return field;
}

inline void decay_in_place(ScalarField3D& field, double rho, ThreadPool* pool = nullptr) {
    if (!(rho > 0.0 && rho <= 1.0)) {
        throw ValidationError("rho", "decay factor must be in (0, 1]");
    }
    if (rho == 1.0) {
        return;
    }
    const float r = static_cast<float>(rho);
    auto data = field.data();
    const auto body = [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            data[i] *= r;
        }
    };
    if (pool) {
        pool->parallel_for(data.size(), body);
    } else {
        body(0, data.size(), 0);
    }
}

inline ScalarField3D decay(ScalarField3D field, double rho) {
    decay_in_place(field, rho);
    return field;
}

// ---------------------------------------------------------------------------
// Statistics

struct FieldStats {
    double min = 0.0;
    double max = 0.0;
    double total = 0.0;
    std::size_t nonzero_count = 0;
    double p50 = 0.0;
    double p99 = 0.0;
};

/// Nearest-rank percentile: the ceil(p/100 * N)-th smallest value.
/// `values` is reordered.
inline double nearest_rank(std::vector<float>& values, double percentile) {
    if (values.empty()) {
        return 0.0;
    }
    const double n = double(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(std::clamp(percentile, 0.0, 100.0) / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(values.begin(), nth, values.end());
    return *nth;
}

/// Percentile over all voxels, or over the strictly positive ones only.
/// Returns 0 when there is nothing to rank.
inline double field_percentile(const ScalarField3D& field, double percentile, bool nonzero_only) {
    std::vector<float> values;
    values.reserve(nonzero_only ? 0 : field.size());
    for (float v : field.data()) {
        if (!nonzero_only || v > 0.0f) {
            values.push_back(v);
        }
    }
    return nearest_rank(values, percentile);
}

inline FieldStats field_stats(const ScalarField3D& field) {
    FieldStats s;
    if (field.empty()) {
        return s;
    }
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    // Neumaier-compensated sum.
    double sum = 0.0;
    double comp = 0.0;
    for (float f : field.data()) {
        const double v = f;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        s.nonzero_count += v != 0.0;
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    s.total = sum + comp;
    std::vector<float> values(field.data().begin(), field.data().end());
    s.p50 = nearest_rank(values, 50.0);
    s.p99 = nearest_rank(values, 99.0);
    return s;
}

// ---------------------------------------------------------------------------
// Images

enum class Axis { x = 0, y = 1, z = 2 };

/// Writes one axis-aligned slice as a binary PGM (P5, maxval 255). Rows run
/// along the first remaining axis and columns along the second, so a z-slice
/// is nx rows by ny columns. Pixels are value / p99 clamped to [0, 1]; a
/// field whose p99 is zero is normalized by its max instead.
inline void slice_to_image(const ScalarField3D& field, Axis axis, std::size_t index, const std::string& path) {
    const Dims& d = field.dims();
    const int a = static_cast<int>(axis);
    if (index >= d[a]) {
        throw IndexOutOfRange("slice index " + std::to_string(index) + " out of range for axis size " +
                              std::to_string(d[a]));
    }
    const int row_axis = a == 0 ? 1 : 0;
    const int col_axis = a == 2 ? 1 : 2;
    const std::size_t height = d[row_axis];
    const std::size_t width = d[col_axis];

    const auto stats = field_stats(field);
    double scale = stats.p99;
    if (!(scale > 0.0)) {
        scale = stats.max > 0.0 ? stats.max : 1.0;
    }

    std::vector<unsigned char> pixels(width * height);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            std::size_t ijk[3];
            ijk[a] = index;
            ijk[row_axis] = r;
            ijk[col_axis] = c;
            const double v = std::clamp(double(field(ijk[0], ijk[1], ijk[2])) / scale, 0.0, 1.0);
            pixels[r * width + c] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << "P5\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

} // namespace scaffold
