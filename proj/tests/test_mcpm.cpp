// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scaffold/mcpm.hpp"
#include "support.hpp"

using namespace scaffold;
using namespace scaffold::mcpm;

namespace {

FoodSources food_at(std::initializer_list<Vec3> pts, double w = 1.0) {
    FoodSources f;
    for (const auto& p : pts) {
        f.positions.push_back(p);
        f.weights.push_back(w);
    }
    return f;
}

Params small_params(std::size_t agents, std::size_t steps) {
    Params p;
    p.num_agents = agents;
    p.num_steps = steps;
    return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

bool same_agents(const SimState& a, const SimState& b) {
    if (a.agents.size() != b.agents.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.agents.size(); ++i) {
        if (!(a.agents[i].position == b.agents[i].position) || !(a.agents[i].heading == b.agents[i].heading) ||
            a.agents[i].id != b.agents[i].id) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST(Params, ValidationNamesField) {
    const auto field_of = [](Params p) -> std::string {
        try {
            validate(p);
        } catch (const ValidationError& e) {
            return e.field();
        }
        return "";
    };
    Params p;
    EXPECT_EQ(field_of(p), "");
    p.deposit_decay = 1.0;
    EXPECT_EQ(field_of(p), "deposit_decay");
    p = {};
    p.trace_decay = 0.0;
    EXPECT_EQ(field_of(p), "trace_decay");
    p = {};
    p.sense_distance = 0.0;
    EXPECT_EQ(field_of(p), "sense_distance");
    p = {};
    p.sense_spread = 181.0;
    EXPECT_EQ(field_of(p), "sense_spread");
    p = {};
    p.num_samples = 0;
    EXPECT_EQ(field_of(p), "num_samples");
    p = {};
    p.move_distance = -1.0;
    EXPECT_EQ(field_of(p), "move_distance");
    p = {};
    p.sharpness = -0.5;
    EXPECT_EQ(field_of(p), "sharpness");
}

TEST(Rng, StreamsAreKeyed) {
    KeyedStream a(1, 2, 3), b(1, 2, 3), c(1, 2, 4), d(1, 3, 3), e(2, 2, 3);
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
    EXPECT_NE(x, d.next_u64());
    EXPECT_NE(x, e.next_u64());
    KeyedStream u(9, 9, 9);
    for (int i = 0; i < 10000; ++i) {
        const double v = u.uniform();
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
}

TEST(InitState, NoAgentsIsValid) {
    const auto s = init_state(small_params(0, 10), food_at({{4, 4, 4}}), {8, 8, 8});
    EXPECT_TRUE(s.agents.empty());
    EXPECT_EQ(testing_support::field_sum(s.deposit), 0.0);
    EXPECT_EQ(testing_support::field_sum(s.trace), 0.0);
}

TEST(InitState, EmptyFoodRejected) {
    EXPECT_THROW(init_state(small_params(10, 1), FoodSources{}, {8, 8, 8}), EmptyFood);
}

TEST(InitState, FoodOutsideGridRejected) {
    EXPECT_THROW(init_state(small_params(10, 1), food_at({{9, 4, 4}}), {8, 8, 8}), ValidationError);
}

TEST(InitState, DeterministicForSeed) {
    const auto a = init_state(small_params(500, 1), food_at({{4, 4, 4}, {10, 12, 3}}), {16, 16, 16});
    const auto b = init_state(small_params(500, 1), food_at({{4, 4, 4}, {10, 12, 3}}), {16, 16, 16});
    EXPECT_TRUE(same_agents(a, b));
}

TEST(InitState, AgentsInsideExpandedFoodBox) {
    const auto s = init_state(small_params(2000, 1), food_at({{10, 10, 10}, {12, 11, 10}}), {64, 64, 64});
    for (const auto& a : s.agents) {
        EXPECT_GE(a.position.x, 2.0);
        EXPECT_LE(a.position.x, 20.0);
        EXPECT_GE(a.position.z, 2.0);
        EXPECT_LE(a.position.z, 18.0);
        EXPECT_NEAR(norm(a.heading), 1.0, 1e-12);
    }
}

TEST(InitState, HeadingsUniformOnSphere) {
    const std::size_t n = 100000;
    const auto s = init_state(small_params(n, 1), food_at({{4, 4, 4}}), {8, 8, 8});
    Vec3 mean;
    for (const auto& a : s.agents) {
        mean += a.heading;
    }
    mean = mean / double(n);
    EXPECT_LT(norm(mean), 0.01);
    const double sigma = std::sqrt(1.0 / 3.0 / double(n));
    EXPECT_LT(std::abs(mean.x), 3.0 * sigma);
    EXPECT_LT(std::abs(mean.y), 3.0 * sigma);
    EXPECT_LT(std::abs(mean.z), 3.0 * sigma);
}

TEST(SampleCone, FullSphereIsUniform) {
    Vec3 mean;
    const int n = 100000;
    std::vector<std::size_t> octants(8, 0);
    for (int i = 0; i < n; ++i) {
        KeyedStream rng(5, std::uint64_t(i), 0);
        const Vec3 d = sample_cone({0, 0, 1}, 180.0, rng);
        ASSERT_NEAR(norm(d), 1.0, 1e-12);
        mean += d;
        ++octants[std::size_t((d.x > 0) | ((d.y > 0) << 1) | ((d.z > 0) << 2))];
    }
    EXPECT_LT(norm(mean / double(n)), 0.01);
    const double p = testing_support::chi_square_p(testing_support::chi_square(octants, std::vector<double>(8, 0.125)), 7);
    EXPECT_GT(p, 0.001);
}

TEST(SampleCone, StaysInCap) {
    std::mt19937_64 g(3);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 20000; ++i) {
        const Vec3 h = i < 4 ? std::array<Vec3, 4>{Vec3{0, 0, 1}, Vec3{0, 0, -1}, Vec3{1, 0, 0}, Vec3{0, -1, 0}}[std::size_t(i)]
                             : normalized({nd(g), nd(g), nd(g)});
        const double spread = 1.0 + double(i % 179);
        KeyedStream rng(1, std::uint64_t(i), 1);
        const Vec3 d = sample_cone(h, spread, rng);
        ASSERT_NEAR(norm(d), 1.0, 1e-12);
        ASSERT_GE(dot(d, h), std::cos(spread * std::numbers::pi / 180.0) - 1e-6);
    }
}

TEST(SampleCone, TinySpreadReturnsHeading) {
    for (const Vec3 h : {Vec3{0, 0, 1}, Vec3{0, 0, -1}, normalized(Vec3{1, -2, 0.5})}) {
        KeyedStream rng(2, 0, 0);
        EXPECT_LT(distance(sample_cone(h, 0.001, rng), h), 1e-4);
    }
}

TEST(SampleCone, CapAngleDistribution) {
    // cos(theta) is uniform on [cos(spread), 1]: check 10 equal bins.
    const double spread = 60.0;
    const double c0 = std::cos(spread * std::numbers::pi / 180.0);
    const Vec3 h = normalized(Vec3{0.3, -0.4, 0.8});
    std::vector<std::size_t> bins(10, 0);
    for (int i = 0; i < 100000; ++i) {
        KeyedStream rng(8, std::uint64_t(i), 2);
        const double c = dot(sample_cone(h, spread, rng), h);
        ++bins[std::min<std::size_t>(9, std::size_t((c - c0) / (1.0 - c0) * 10.0))];
    }
    EXPECT_GT(testing_support::chi_square_p(testing_support::chi_square(bins, std::vector<double>(10, 0.1)), 9), 0.001);
}

TEST(SelectDirection, OneThreeSharpnessOne) {
    const std::vector<double> probes{1.0, 3.0};
    const std::size_t n = 100000;
    std::size_t ones = 0;
    for (std::size_t i = 0; i < n; ++i) {
        KeyedStream rng(11, i, 0);
        ones += select_direction(probes, 1.0, rng);
    }
    // Expected with the probability floor.
    const double p = (3.0 + kProbeFloor) / (4.0 + 2.0 * kProbeFloor);
    const double sigma = std::sqrt(double(n) * p * (1.0 - p));
    EXPECT_LT(std::abs(double(ones) - p * double(n)), 3.0 * sigma);
}

TEST(SelectDirection, ChiSquareAgainstPowerLaw) {
    std::mt19937_64 g(17);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (std::size_t k = 1; k <= 8; ++k) {
        for (const double sharpness : {0.0, 1.0, 2.0, 3.5}) {
            std::vector<double> probes(k);
            for (auto& p : probes) {
                p = u(g);
            }
            probes[0] = 0.0;
            std::vector<double> w(k);
            double sum = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                w[i] = std::pow(probes[i] + 1e-6, sharpness);
                sum += w[i];
            }
            // Merge categories with tiny expectations into their neighbour so
            // the chi-square approximation holds.
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < 100000; ++i) {
                KeyedStream rng(k * 100 + std::uint64_t(sharpness * 10), i, 3);
                ++counts[select_direction(probes, sharpness, rng)];
            }
            std::vector<std::size_t> c2;
            std::vector<double> p2;
            for (std::size_t i = 0; i < k; ++i) {
                const double p = w[i] / sum;
                if (p * 1e5 < 5.0 && !c2.empty()) {
                    c2.back() += counts[i];
                    p2.back() += p;
                } else if (p * 1e5 < 5.0) {
                    c2.push_back(counts[i]);
                    p2.push_back(p);
                } else {
                    c2.push_back(counts[i]);
                    p2.push_back(p);
                }
            }
            if (c2.size() < 2) {
                continue;
            }
            const double pv = testing_support::chi_square_p(testing_support::chi_square(c2, p2), c2.size() - 1);
            EXPECT_GT(pv, 0.001) << "k=" << k << " sharpness=" << sharpness;
        }
    }
}

TEST(SelectDirection, SharpnessZeroAndFlatProbesUniform) {
    for (const auto& probes : {std::vector<double>{5.0, 0.0, 1.0}, std::vector<double>{0.0, 0.0, 0.0}}) {
        const double sharpness = probes[0] == 5.0 ? 0.0 : 2.0;
        std::vector<std::size_t> counts(3, 0);
        for (std::size_t i = 0; i < 60000; ++i) {
            KeyedStream rng(23, i, 0);
            ++counts[select_direction(probes, sharpness, rng)];
        }
        EXPECT_GT(testing_support::chi_square_p(testing_support::chi_square(counts, {1.0 / 3, 1.0 / 3, 1.0 / 3}), 2),
                  0.001);
    }
}

TEST(SeedFood, InjectsFoodDeposit) {
    auto p = small_params(0, 1);
    p.food_deposit = 2.0;
    auto s = init_state(p, food_at({{3.3, 4.1, 2.7}}), {8, 8, 8});
    seed_food(s);
    EXPECT_NEAR(testing_support::field_sum(s.deposit), 2.0, 1e-6);
    auto z = init_state(p, food_at({{3.3, 4.1, 2.7}}, 0.0), {8, 8, 8});
    seed_food(z);
    EXPECT_EQ(testing_support::field_sum(z.deposit), 0.0);
}

TEST(SeedFood, GeometricSeriesWithoutAgents) {
    auto p = small_params(0, 10);
    p.deposit_decay = 0.8;
    FoodSources food;
    for (int c = 0; c < 8; ++c) {
        food.positions.push_back({4.0 + 8.0 * (c & 1), 4.0 + 8.0 * ((c >> 1) & 1), 4.0 + 8.0 * ((c >> 2) & 1)});
        food.weights.push_back(1.0);
    }
    const auto s = run(p, food, {17, 17, 17});
    double series = 0.0;
    for (int k = 1; k <= 10; ++k) {
        series += std::pow(p.deposit_decay, k);
    }
    EXPECT_LT(rel(testing_support::field_sum(s.deposit), 8.0 * p.food_deposit * series), 1e-4);
}

TEST(Propagation, NoAgentsLeavesFieldsAlone) {
    auto s = init_state(small_params(0, 1), food_at({{4, 4, 4}}), {8, 8, 8});
    seed_food(s);
    const auto before = s.deposit;
    propagation_step(s);
    EXPECT_TRUE(s.deposit == before);
    EXPECT_EQ(testing_support::field_sum(s.trace), 0.0);
}

TEST(Propagation, HeadingsUnitAndPositionsInside) {
    for (const auto policy : {BoundaryPolicy::respawn, BoundaryPolicy::reflect}) {
        auto p = small_params(3000, 40);
        p.boundary_policy = policy;
        p.move_distance = 2.5;
        auto s = init_state(p, food_at({{1, 1, 1}, {14, 2, 9}}), {16, 12, 10});
        for (std::size_t step = 0; step < p.num_steps; ++step) {
            seed_food(s);
            propagation_step(s);
            relaxation_step(s);
            for (const auto& a : s.agents) {
                ASSERT_NEAR(norm(a.heading), 1.0, 1e-5);
                ASSERT_TRUE(s.trace.in_domain(a.position));
            }
        }
    }
}

TEST(Propagation, TraceGetsOnePerAgentStep) {
    auto p = small_params(700, 1);
    auto s = init_state(p, food_at({{8, 8, 8}}), {17, 17, 17});
    propagation_step(s);
    EXPECT_LT(rel(testing_support::field_sum(s.trace), 700.0), 1e-5);
    EXPECT_LT(rel(testing_support::field_sum(s.deposit), 700.0 * p.agent_deposit), 1e-5);
}

TEST(Propagation, ForwardBiasOnUniformField) {
    // One agent in a uniform deposit field: candidates lie in the forward
    // cone, so the mean displacement along the heading is positive.
    auto p = small_params(1, 1);
    double along = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        p.seed = std::uint64_t(t);
        auto s = init_state(p, food_at({{16, 16, 16}}), {33, 33, 33});
        s.deposit.fill(1.0f);
        s.agents[0].position = {16, 16, 16};
        const Vec3 h = s.agents[0].heading;
        propagation_step(s);
        along += dot(s.agents[0].position - Vec3{16, 16, 16}, h);
    }
    EXPECT_GT(along / trials, 0.0);
    // Uniform choice among cap samples: E[cos] = (1 + cos 30deg) / 2.
    EXPECT_NEAR(along / trials, 0.5 * (1.0 + std::cos(std::numbers::pi / 6.0)), 0.01);
}

TEST(Propagation, PrefersHighDepositSide) {
    auto p = small_params(1, 1);
    p.sense_spread = 90.0;
    std::size_t high = 0;
    const std::size_t trials = 20000;
    for (std::size_t t = 0; t < trials; ++t) {
        p.seed = t;
        auto s = init_state(p, food_at({{16, 16, 16}}), {33, 33, 33});
        for (std::size_t i = 17; i < 33; ++i) {
            for (std::size_t j = 0; j < 33; ++j) {
                for (std::size_t k = 0; k < 33; ++k) {
                    s.deposit(i, j, k) = 10.0f;
                }
            }
        }
        s.agents[0].position = {16, 16, 16};
        s.agents[0].heading = {0, 1, 0};
        propagation_step(s);
        high += s.agents[0].position.x > 16.0;
    }
    const double frac = double(high) / double(trials);
    const double sigma = std::sqrt(0.25 / double(trials));
    EXPECT_GT(frac, 0.5 + 3.0 * sigma);
}

TEST(Propagation, TwoBlobsConcentrateAlongAxis) {
    auto p = small_params(1000, 50);
    const std::size_t n = 48;
    const double c = 0.5 * double(n - 1);
    FoodSources food;
    for (double x : {8.0, 39.0}) {
        for (int d = 0; d < 7; ++d) {
            const Vec3 off = d == 0 ? Vec3{} : Vec3{double(d == 1) - double(d == 2), double(d == 3) - double(d == 4),
                                                    double(d == 5) - double(d == 6)};
            food.positions.push_back(Vec3{x, c, c} + off);
            food.weights.push_back(1.0);
        }
    }
    const auto s = run(p, food, {n, n, n});
    double inside = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                const double r = std::hypot(double(j) - c, double(k) - c);
                if (r <= 4.0 * p.move_distance) {
                    inside += s.trace(i, j, k);
                }
            }
        }
    }
    EXPECT_GE(inside / testing_support::field_sum(s.trace), 0.5);
}

TEST(Relaxation, ClosedSystemDecays) {
    auto p = small_params(200, 1);
    p.agent_deposit = 0.0;
    p.food_deposit = 0.0;
    auto s = init_state(p, food_at({{5, 5, 5}}), {12, 10, 9});
    std::mt19937_64 g(1);
    std::uniform_real_distribution<float> u(0.0f, 4.0f);
    for (auto& v : s.deposit.data()) {
        v = u(g);
    }
    for (auto& v : s.trace.data()) {
        v = u(g);
    }
    const double m = testing_support::field_sum(s.deposit);
    const double t = testing_support::field_sum(s.trace);
    relaxation_step(s);
    EXPECT_LT(rel(testing_support::field_sum(s.deposit), p.deposit_decay * m), 1e-5);
    EXPECT_LT(rel(testing_support::field_sum(s.trace), p.trace_decay * t), 1e-6);
}

TEST(Relaxation, RejectsUnitDecay) {
    auto s = init_state(small_params(0, 1), food_at({{4, 4, 4}}), {8, 8, 8});
    s.params.deposit_decay = 1.0;
    EXPECT_THROW(relaxation_step(s), ValidationError);
}

TEST(Run, ZeroStepsReturnsInitialState) {
    const auto p = small_params(50, 0);
    const auto food = food_at({{4, 4, 4}});
    const auto a = run(p, food, {8, 8, 8});
    const auto b = init_state(p, food, {8, 8, 8});
    EXPECT_TRUE(same_agents(a, b));
    EXPECT_EQ(a.step, 0u);
    EXPECT_TRUE(a.trace == b.trace);
}

TEST(Run, IdenticalAcrossThreadCounts) {
    for (const auto policy : {BoundaryPolicy::respawn, BoundaryPolicy::reflect}) {
        auto p = small_params(4000, 30);
        p.boundary_policy = policy;
        const auto food = food_at({{3, 3, 3}, {20, 5, 9}, {11, 17, 2}});
        const auto serial = run(p, food, {24, 20, 12});
        for (std::size_t threads : {1u, 2u, 3u, 8u}) {
            ThreadPool pool(threads);
            const auto par = run(p, food, {24, 20, 12}, &pool);
            EXPECT_TRUE(par.trace == serial.trace) << threads;
            EXPECT_TRUE(par.deposit == serial.deposit) << threads;
            EXPECT_TRUE(same_agents(par, serial)) << threads;
        }
    }
}

TEST(Run, SeedChangesResult) {
    auto p = small_params(500, 5);
    const auto food = food_at({{4, 4, 4}});
    const auto a = run(p, food, {10, 10, 10});
    p.seed = 2;
    const auto b = run(p, food, {10, 10, 10});
    EXPECT_FALSE(a.trace == b.trace);
}

TEST(Connectivity, AllZeroTraceFiveFood) {
    ScalarField3D t({10, 10, 10});
    const auto food = food_at({{0, 0, 0}, {3, 3, 3}, {6, 6, 6}, {9, 0, 0}, {0, 9, 9}});
    EXPECT_DOUBLE_EQ(connectivity(t, food, 0.0), 0.2);
    EXPECT_DOUBLE_EQ(connectivity(t, food, 1.0), 0.2);
}

TEST(Connectivity, FullySupraThreshold) {
    ScalarField3D t({10, 10, 10}, 1.0, {}, 2.0f);
    const auto food = food_at({{0, 0, 0}, {3, 3, 3}, {9, 9, 9}});
    EXPECT_DOUBLE_EQ(connectivity(t, food, 1.0), 1.0);
}

TEST(Connectivity, LineJoinsTwoOfThree) {
    ScalarField3D t({12, 12, 12});
    for (std::size_t i = 2; i <= 9; ++i) {
        t(i, 5, 5) = 1.0f;
    }
    const auto food = food_at({{2, 5, 5}, {9, 5, 5}, {5, 10, 1}});
    EXPECT_NEAR(connectivity(t, food, 0.5), 2.0 / 3.0, 1e-15);
    // A diagonal step still connects under 26-connectivity.
    t(5, 5, 5) = 0.0f;
    t(5, 6, 6) = 1.0f;
    EXPECT_NEAR(connectivity(t, food, 0.5), 2.0 / 3.0, 1e-15);
    // Raising the threshold breaks the line.
    EXPECT_NEAR(connectivity(t, food, 2.0), 1.0 / 3.0, 1e-15);
}
