// SPDX-License-Identifier: Apache-2.0
// scaffold: grow Physarum-style transport networks over geometry and mesh
// them into printable STL files.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "scaffold/scaffold.hpp"

namespace {

namespace pl = scaffold::pipeline;

struct Args {
    std::string config;
    std::string input;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
    std::optional<double> iso;
    std::optional<double> iso_percentile;
    scaffold::Axis axis = scaffold::Axis::z;
    std::optional<std::size_t> index;
};

pl::Options to_options(const Args& a) {
    pl::Options o;
    o.seed = a.seed;
    o.threads = a.threads.value_or(scaffold::default_thread_count());
    o.out = a.out;
    if (a.iso) {
        o.iso = scaffold::IsoChoice{scaffold::IsoPolicy::absolute, *a.iso};
    } else if (a.iso_percentile) {
        o.iso = scaffold::IsoChoice{scaffold::IsoPolicy::percentile, *a.iso_percentile};
    }
    o.axis = a.axis;
    o.index = a.index;
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grow transport-network scaffolds over geometry and export watertight STL meshes."};
    app.require_subcommand(1);
    Args args;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", args.seed, "RNG seed, overrides the config");
        cmd->add_option("--threads", args.threads, "Worker threads (default: $SCAFFOLD_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--out", args.out, "Output directory (run/all/eval) or file (mesh/slice)");
        auto* iso = cmd->add_option("--iso", args.iso, "Absolute iso value");
        auto* pct = cmd->add_option("--iso-percentile", args.iso_percentile, "Iso as a percentile of nonzero voxels");
        iso->excludes(pct);
    };

    auto* run = app.add_subcommand("run", "Simulate and write trace/deposit fields");
    auto* all = app.add_subcommand("all", "Simulate, mesh and report in one go");
    auto* eval = app.add_subcommand("eval", "Network report for a finished run");
    for (auto* cmd : {run, all, eval}) {
        cmd->add_option("--config", args.config, "Pipeline config file")->required();
        add_common(cmd);
    }
    eval->add_option("field", args.input, "Trace NPY (default: <output_dir>/trace.npy)");

    auto* mesh = app.add_subcommand("mesh", "Marching Cubes on an NPY field, written as binary STL");
    mesh->add_option("field", args.input, "Field NPY")->required();
    add_common(mesh);

    auto* slice = app.add_subcommand("slice", "Write one axis-aligned slice of an NPY field as PGM");
    slice->add_option("field", args.input, "Field NPY")->required();
    slice->add_option("--axis", args.axis, "Slice axis")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, scaffold::Axis>{
                {"x", scaffold::Axis::x}, {"y", scaffold::Axis::y}, {"z", scaffold::Axis::z}},
            CLI::ignore_case));
    slice->add_option("--index", args.index, "Slice index (default: middle)");
    slice->add_option("--out", args.out, "Output PGM path");

    auto* stats = app.add_subcommand("stats", "Statistics of an NPY field or a mesh file");
    stats->add_option("path", args.input, "NPY field or mesh")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pl::validation_failed;
    }

    const pl::Options opt = to_options(args);
    if (run->parsed()) {
        return pl::cmd_run(args.config, opt, std::cout, std::cerr);
    }
    if (all->parsed()) {
        return pl::cmd_all(args.config, opt, std::cout, std::cerr);
    }
    if (eval->parsed()) {
        return pl::cmd_eval(args.config, args.input, opt, std::cout, std::cerr);
    }
    if (mesh->parsed()) {
        return pl::cmd_mesh(args.input, opt, std::cout, std::cerr);
    }
    if (slice->parsed()) {
        return pl::cmd_slice(args.input, opt, std::cout, std::cerr);
    }
    return pl::cmd_stats(args.input, std::cout, std::cerr);
}
