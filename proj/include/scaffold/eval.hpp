// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "field.hpp"
#include "mcpm.hpp"
#include "vec3.hpp"

namespace scaffold {

/// Total length of the Euclidean minimum spanning tree (dense Prim, O(n^2)
/// time, O(n) memory).
inline double mst_length(std::span<const Vec3> points) {
    const std::size_t n = points.size();
    if (n < 2) {
        return 0.0;
    }
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<char> in_tree(n, 0);
    double total = 0.0;
    std::size_t current = 0;
    in_tree[0] = 1;
    for (std::size_t added = 1; added < n; ++added) {
        std::size_t next = n;
        double next_d = std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) {
                continue;
            }
            const double d = distance(points[current], points[v]);
            if (d < best[v]) {
                best[v] = d;
            }
            if (best[v] < next_d) {
                next_d = best[v];
                next = v;
            }
        }
        in_tree[next] = 1;
        total += next_d;
        current = next;
    }
    return total;
}

struct NetworkReport {
    double mst_length = 0.0;           ///< model units
    double network_voxel_volume = 0.0; ///< model units cubed
    std::size_t supra_threshold_voxel_count = 0;
    double connectivity_fraction = 0.0;
    /// volume / (mst_length * voxel_size^2); 0 when the MST has no length.
    double efficiency_ratio = 0.0;
};

/// Voxels with value > 0 and >= threshold.
inline std::size_t supra_threshold_count(const ScalarField3D& field, double threshold) {
    std::size_t count = 0;
    for (float v : field.data()) {
        count += v > 0.0f && double(v) >= threshold;
    }
    return count;
}

inline NetworkReport network_report(const ScalarField3D& trace, const mcpm::FoodSources& food, double threshold,
                                    const GridTransform& transform) {
    if (!(threshold >= 0.0)) {
        throw ValidationError("threshold", "must be >= 0");
    }
    NetworkReport r;
    std::vector<Vec3> model;
    model.reserve(food.size());
    for (const auto& p : food.positions) {
        model.push_back(transform.to_model(p));
    }
    r.mst_length = mst_length(model);
    r.supra_threshold_voxel_count = supra_threshold_count(trace, threshold);
    const double vs = transform.scale;
    r.network_voxel_volume = double(r.supra_threshold_voxel_count) * vs * vs * vs;
    r.connectivity_fraction = mcpm::connectivity(trace, food, threshold);
    r.efficiency_ratio = r.mst_length > 0.0 ? r.network_voxel_volume / (r.mst_length * vs * vs) : 0.0;
    return r;
}

inline std::string report_csv(const NetworkReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "mst_length,volume,voxels,connectivity,efficiency_ratio\n"
        << r.mst_length << ',' << r.network_voxel_volume << ',' << r.supra_threshold_voxel_count << ','
        << r.connectivity_fraction << ',' << r.efficiency_ratio << '\n';
    return out.str();
}

inline std::string report_text(const NetworkReport& r) {
    std::ostringstream out;
    out.precision(10);
    out << "mst_length=" << r.mst_length << '\n'
        << "volume=" << r.network_voxel_volume << '\n'
        << "voxels=" << r.supra_threshold_voxel_count << '\n'
        << "connectivity=" << r.connectivity_fraction << '\n'
        << "efficiency_ratio=" << r.efficiency_ratio << '\n';
    return out.str();
}

} // namespace scaffold
