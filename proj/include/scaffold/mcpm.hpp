// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "field.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "vec3.hpp"

/// Monte Carlo Physarum Machine: agents sense a diffusing deposit field
/// through cone-sampled probes, pick a direction stochastically, move and
/// mark both the deposit field and an undiffused trace field.
namespace scaffold::mcpm {

enum class BoundaryPolicy { respawn, reflect };

inline constexpr std::size_t kMaxSamples = 64;
/// Probability floor added to every probe before exponentiation.
inline constexpr double kProbeFloor = 1e-6;

struct Params {
    std::size_t num_agents = 100'000;
    std::size_t num_steps = 500;
    double sense_distance = 4.0; ///< grid units
    double sense_spread = 30.0;  ///< degrees, half-angle of the probe cone
    double move_distance = 1.0;  ///< grid units
    std::size_t num_samples = 4; ///< candidate directions per step
    double sharpness = 2.0;
    double agent_deposit = 1.0;
    double food_deposit = 10.0;
    double deposit_decay = 0.9;
    double trace_decay = 0.995;
    BoundaryPolicy boundary_policy = BoundaryPolicy::respawn;
    std::uint64_t seed = 1;
};

/// Throws ValidationError naming the first offending field.
inline void validate(const Params& p) {
    if (!(p.sense_distance > 0.0) || !std::isfinite(p.sense_distance)) {
        throw ValidationError("sense_distance", "must be > 0");
    }
    if (!(p.move_distance > 0.0) || !std::isfinite(p.move_distance)) {
        throw ValidationError("move_distance", "must be > 0");
    }
    if (!(p.sense_spread > 0.0 && p.sense_spread <= 180.0)) {
        throw ValidationError("sense_spread", "must be in (0, 180] degrees");
    }
    if (p.num_samples < 1 || p.num_samples > kMaxSamples) {
        throw ValidationError("num_samples", "must be in [1, " + std::to_string(kMaxSamples) + "]");
    }
    if (!(p.sharpness >= 0.0) || !std::isfinite(p.sharpness)) {
        throw ValidationError("sharpness", "must be >= 0");
    }
    if (!(p.agent_deposit >= 0.0) || !std::isfinite(p.agent_deposit)) {
        throw ValidationError("agent_deposit", "must be >= 0");
    }
    if (!(p.food_deposit >= 0.0) || !std::isfinite(p.food_deposit)) {
        throw ValidationError("food_deposit", "must be >= 0");
    }
    if (!(p.deposit_decay > 0.0 && p.deposit_decay < 1.0)) {
        throw ValidationError("deposit_decay", "must be in (0, 1)");
    }
    if (!(p.trace_decay > 0.0 && p.trace_decay < 1.0)) {
        throw ValidationError("trace_decay", "must be in (0, 1)");
    }
}

struct Agent {
    Vec3 position; ///< grid space
    Vec3 heading;  ///< unit length
    /// Stable identity; keys the agent's random streams. Storage order is
    /// free to change.
    std::uint64_t id = 0;
};

/// Steps between spatial re-sorts of the agent array.
inline constexpr std::size_t kSortInterval = 8;

/// Food sources in grid space.
struct FoodSources {
    std::vector<Vec3> positions;
    std::vector<double> weights;

    std::size_t size() const noexcept { return positions.size(); }
    bool empty() const noexcept { return positions.empty(); }
};

/// Maps model-space points into grid space with the given transform.
inline FoodSources food_from_points(const PointCloud& cloud, const GridTransform& transform) {
    FoodSources food;
    food.positions.reserve(cloud.size());
    food.weights.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        food.positions.push_back(transform.to_grid(cloud.points[i]));
        food.weights.push_back(i < cloud.weights.size() ? cloud.weights[i] : 1.0);
    }
    return food;
}

struct SimState {
    ScalarField3D deposit;
    ScalarField3D trace;
    std::vector<Agent> agents;
    std::size_t step = 0;
    Params params;
    FoodSources food;
    /// Box agents are spawned and respawned in (grid space, inclusive).
    Vec3 spawn_lo;
    Vec3 spawn_hi;
    std::vector<float> scratch;
};

// ---------------------------------------------------------------------------
// Stochastic primitives

/// Orthonormal frame around a unit heading (Duff et al. 2017), stable for
/// headings near any axis.
struct ConeFrame {
    Vec3 t1;
    Vec3 t2;
    Vec3 axis;

    explicit ConeFrame(const Vec3& heading) noexcept : axis(heading) {
        const double sign = std::copysign(1.0, heading.z);
        const double a = -1.0 / (sign + heading.z);
        const double b = heading.x * heading.y * a;
        t1 = {1.0 + sign * heading.x * heading.x * a, sign * b, -sign * heading.x};
        t2 = {b, sign + heading.y * heading.y * a, -heading.y};
    }

    /// Uniform direction in the cap cos(angle to axis) >= cos_spread:
    /// cos(theta) uniform in [cos_spread, 1], azimuth uniform.
    Vec3 sample(double cos_spread, KeyedStream& rng) const noexcept {
        const double cos_theta = 1.0 - rng.uniform() * (1.0 - cos_spread);
        const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
        // Uniform azimuth without trig: a uniform point (u, v) in the unit
        // disk has angle psi, and ((u^2 - v^2), 2uv) / r^2 is (cos, sin) of 2 psi.
        double u = 0.0;
        double v = 0.0;
        double r2 = 0.0;
        do {
            u = 2.0 * rng.uniform() - 1.0;
            v = 2.0 * rng.uniform() - 1.0;
            r2 = u * u + v * v;
        } while (r2 > 1.0 || r2 < 1e-12);
        const double cos_phi = (u * u - v * v) / r2;
        const double sin_phi = 2.0 * u * v / r2;
        return (cos_phi * sin_theta) * t1 + (sin_phi * sin_theta) * t2 + cos_theta * axis;
    }
};

/// Uniform direction in the spherical cap of half-angle acos(cos_spread)
/// around `heading`.
inline Vec3 sample_cone_cos(const Vec3& heading, double cos_spread, KeyedStream& rng) noexcept {
    return normalized(ConeFrame(heading).sample(cos_spread, rng));
}

inline Vec3 sample_cone(const Vec3& heading, double spread_degrees, KeyedStream& rng) noexcept {
    return sample_cone_cos(heading, std::cos(spread_degrees * std::numbers::pi / 180.0), rng);
}

inline Vec3 uniform_direction(KeyedStream& rng) noexcept { return sample_cone_cos({0.0, 0.0, 1.0}, -1.0, rng); }

/// Picks i with probability proportional to (probes[i] + 1e-6)^sharpness.
/// Sharpness 0 is uniform.
inline std::size_t select_direction(std::span<const double> probes, double sharpness, KeyedStream& rng) noexcept {
    const std::size_t k = probes.size();
    if (k <= 1) {
        return 0;
    }
    const double u = rng.uniform();
    if (sharpness == 0.0) {
        return std::min(k - 1, static_cast<std::size_t>(u * double(k)));
    }
    // Normalizing by the largest probe keeps high exponents finite without
    // changing the distribution.
    double top = 0.0;
    for (double p : probes) {
        top = std::max(top, p);
    }
    const double denom = top + kProbeFloor;
    std::array<double, kMaxSamples> w;
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = (probes[i] + kProbeFloor) / denom;
        w[i] = sharpness == 1.0 ? r : (sharpness == 2.0 ? r * r : std::pow(r, sharpness));
        sum += w[i];
    }
    double target = u * sum;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (target < w[i]) {
            return i;
        }
        target -= w[i];
    }
    return k - 1;
}

// ---------------------------------------------------------------------------
// Simulation

namespace detail {

inline Vec3 uniform_in_box(const Vec3& lo, const Vec3& hi, KeyedStream& rng) noexcept {
    return {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
}

// Counter 0 seeds the initial ensemble; step s uses counter s + 1.
constexpr std::uint64_t init_counter = 0;

} // namespace detail

/// Agents start uniformly inside the food bounding box grown by
/// 2 * sense_distance (clipped to the grid) with uniform headings.
inline SimState init_state(const Params& params, FoodSources food, Dims dims) {
    validate(params);
    if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2) {
        throw ValidationError("dims", "every grid axis needs at least 2 voxels");
    }
    if (food.empty()) {
        throw EmptyFood("simulation needs at least one food source");
    }
    if (food.weights.size() != food.positions.size()) {
        throw ValidationError("food", "one weight per food position is required");
    }
    ScalarField3D probe(dims);
    for (std::size_t i = 0; i < food.size(); ++i) {
        if (!probe.in_domain(food.positions[i])) {
            throw ValidationError("food", "food source " + std::to_string(i) + " lies outside the grid");
        }
        if (!(food.weights[i] >= 0.0)) {
            throw ValidationError("food", "food weights must be >= 0");
        }
    }

    SimState state;
    state.params = params;
    state.deposit = ScalarField3D(dims);
    state.trace = ScalarField3D(dims);

    Vec3 lo = food.positions.front();
    Vec3 hi = lo;
    for (const auto& p : food.positions) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    const double grow = 2.0 * params.sense_distance;
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max(0.0, lo[a] - grow);
        hi[a] = std::min(double(dims[a] - 1), hi[a] + grow);
    }
    state.spawn_lo = lo;
    state.spawn_hi = hi;
    state.food = std::move(food);

    state.agents.resize(params.num_agents);
    for (std::size_t i = 0; i < params.num_agents; ++i) {
        KeyedStream rng(params.seed, i, detail::init_counter);
        state.agents[i].position = detail::uniform_in_box(lo, hi, rng);
        state.agents[i].heading = uniform_direction(rng);
        state.agents[i].id = i;
    }
    return state;
}

/// Re-injects food_deposit * weight at every food source.
inline void seed_food(SimState& state) {
    const double amount = state.params.food_deposit;
    for (std::size_t i = 0; i < state.food.size(); ++i) {
        splat_trilinear(state.deposit, state.food.positions[i], amount * state.food.weights[i]);
    }
}

/// Orders agents by 4x4x4 voxel block, then id, so agents processed
/// together touch nearby memory. The order is a pure function of positions
/// and ids.
inline void sort_agents(SimState& state) {
    const Dims d = state.deposit.dims();
    const std::uint64_t by = (d.ny + 3) / 4;
    const std::uint64_t bz = (d.nz + 3) / 4;
    const auto block = [&](const Agent& a) {
        const auto bx = static_cast<std::uint64_t>(a.position.x) / 4;
        const auto b1 = static_cast<std::uint64_t>(a.position.y) / 4;
        const auto b2 = static_cast<std::uint64_t>(a.position.z) / 4;
        return (bx * by + b1) * bz + b2;
    };
    std::vector<std::pair<std::uint64_t, std::uint64_t>> keys(state.agents.size());
    for (std::size_t i = 0; i < state.agents.size(); ++i) {
        keys[i] = {block(state.agents[i]), i};
    }
    std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : state.agents[a.second].id < state.agents[b.second].id;
    });
    std::vector<Agent> sorted(state.agents.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        sorted[i] = state.agents[keys[i].second];
    }
    state.agents.swap(sorted);
}

/// Moves every agent once. All probes read the deposit field as it stood
/// before the step; deposits are applied afterwards in storage order, so the
/// result does not depend on the worker count.
inline void propagation_step(SimState& state, ThreadPool* pool = nullptr) {
    const Params& p = state.params;
    const std::uint64_t counter = state.step + 1;
    if (state.step % kSortInterval == 0) {
        sort_agents(state);
    }
    const double cos_spread = std::cos(p.sense_spread * std::numbers::pi / 180.0);
    const Dims dims = state.deposit.dims();
    const Vec3 upper{double(dims.nx - 1), double(dims.ny - 1), double(dims.nz - 1)};
    const std::size_t k = p.num_samples;
    auto& agents = state.agents;
    const ScalarField3D& deposit = state.deposit;
    const TrilinearSampler sense(deposit);

    const auto move = [&](std::size_t begin, std::size_t end, std::size_t) {
        std::array<Vec3, kMaxSamples> dirs;
        std::array<double, kMaxSamples> probes;
        for (std::size_t i = begin; i < end; ++i) {
            Agent& agent = agents[i];
            KeyedStream rng(p.seed, agent.id, counter);
            const ConeFrame frame(agent.heading);
            for (std::size_t s = 0; s < k; ++s) {
                dirs[s] = frame.sample(cos_spread, rng);
                probes[s] = sense(agent.position + dirs[s] * p.sense_distance);
            }
            const std::size_t chosen = select_direction(std::span(probes.data(), k), p.sharpness, rng);
            agent.heading = normalized(dirs[chosen]);
            agent.position += agent.heading * p.move_distance;

            if (p.boundary_policy == BoundaryPolicy::respawn) {
                if (!deposit.in_domain(agent.position)) {
                    agent.position = detail::uniform_in_box(state.spawn_lo, state.spawn_hi, rng);
                    agent.heading = uniform_direction(rng);
                }
            } else {
                for (int a = 0; a < 3; ++a) {
                    double& x = agent.position[a];
                    if (x < 0.0) {
                        x = -x;
                        agent.heading[a] = -agent.heading[a];
                    } else if (x > upper[a]) {
                        x = 2.0 * upper[a] - x;
                        agent.heading[a] = -agent.heading[a];
                    }
                    x = std::clamp(x, 0.0, upper[a]);
                }
            }
        }
    };

    // Each worker owns an x-slab of both fields and walks all agents in
    // index order, so every voxel sees its contributions in the same order.
    const auto deposit_slabs = [&](std::size_t begin, std::size_t end, std::size_t) {
        float* deposit_data = state.deposit.data().data();
        float* trace_data = state.trace.data().data();
        for (const Agent& agent : agents) {
            // Positions are in-domain after the boundary policy.
            ::scaffold::detail::splat_interior(trace_data, dims, agent.position, 1.0,
                                               static_cast<float>(p.agent_deposit), deposit_data, begin, end);
        }
    };

    if (pool) {
        pool->parallel_for(agents.size(), move);
        if (!agents.empty()) {
            pool->parallel_for(dims.nx, deposit_slabs);
        }
    } else {
        move(0, agents.size(), 0);
        deposit_slabs(0, dims.nx, 0);
    }
    ++state.step;
}

/// deposit <- decay(diffuse(deposit)); trace <- decay(trace).
inline void relaxation_step(SimState& state, ThreadPool* pool = nullptr) {
    validate(state.params);
    diffuse_in_place(state.deposit, state.scratch, pool);
    decay_in_place(state.deposit, state.params.deposit_decay, pool);
    decay_in_place(state.trace, state.params.trace_decay, pool);
}

using StepCallback = std::function<void(const SimState&)>;

/// init_state followed by num_steps rounds of seed, propagate, relax.
/// `on_step` runs after every completed round.
inline SimState run(const Params& params, FoodSources food, Dims dims, ThreadPool* pool = nullptr,
                    const StepCallback& on_step = {}) {
    SimState state = init_state(params, std::move(food), dims);
    for (std::size_t s = 0; s < params.num_steps; ++s) {
        seed_food(state);
        propagation_step(state, pool);
        relaxation_step(state, pool);
        if (on_step) {
            on_step(state);
        }
    }
    return state;
}

// ---------------------------------------------------------------------------
// Connectivity

/// Nearest voxel of a grid-space position, clamped into the grid.
inline std::array<std::size_t, 3> nearest_voxel(const Vec3& p, const Dims& dims) noexcept {
    std::array<std::size_t, 3> v{};
    for (int a = 0; a < 3; ++a) {
        const double r = std::round(std::clamp(p[a], 0.0, double(dims[a] - 1)));
        v[std::size_t(a)] = static_cast<std::size_t>(r);
    }
    return v;
}

/// Fraction of food points in the largest 26-connected supra-threshold
/// component that contains food. A voxel is supra-threshold when its value
/// is positive and >= threshold; food voxels always count.
inline double connectivity(const ScalarField3D& trace, const FoodSources& food, double threshold) {
    if (!(threshold >= 0.0)) {
        throw ValidationError("threshold", "must be >= 0");
    }
    if (food.empty() || trace.empty()) {
        return 0.0;
    }
    const Dims& d = trace.dims();
    const auto values = trace.data();
    std::vector<std::uint32_t> food_at(trace.size(), 0);
    std::vector<std::size_t> food_voxel(food.size());
    for (std::size_t f = 0; f < food.size(); ++f) {
        const auto v = nearest_voxel(food.positions[f], d);
        food_voxel[f] = trace.index(v[0], v[1], v[2]);
        ++food_at[food_voxel[f]];
    }
    const auto open = [&](std::size_t idx) {
        const double v = values[idx];
        return food_at[idx] > 0 || (v > 0.0 && v >= threshold);
    };

    std::vector<std::uint8_t> seen(trace.size(), 0);
    std::vector<std::size_t> queue;
    std::size_t best = 0;
    for (std::size_t f = 0; f < food.size(); ++f) {
        if (seen[food_voxel[f]]) {
            continue;
        }
        std::size_t members = 0;
        queue.clear();
        queue.push_back(food_voxel[f]);
        seen[food_voxel[f]] = 1;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const std::size_t idx = queue[head];
            members += food_at[idx];
            const std::size_t i = idx / (d.ny * d.nz);
            const std::size_t j = (idx / d.nz) % d.ny;
            const std::size_t kk = idx % d.nz;
            for (int di = -1; di <= 1; ++di) {
                if ((di < 0 && i == 0) || (di > 0 && i + 1 == d.nx)) continue;
                for (int dj = -1; dj <= 1; ++dj) {
                    if ((dj < 0 && j == 0) || (dj > 0 && j + 1 == d.ny)) continue;
                    for (int dk = -1; dk <= 1; ++dk) {
                        if ((dk < 0 && kk == 0) || (dk > 0 && kk + 1 == d.nz)) continue;
                        const std::size_t n = trace.index(i + std::size_t(di + 1) - 1, j + std::size_t(dj + 1) - 1,
                                                          kk + std::size_t(dk + 1) - 1);
                        if (!seen[n] && open(n)) {
                            seen[n] = 1;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        best = std::max(best, members);
    }
    return double(best) / double(food.size());
}

} // namespace scaffold::mcpm
