// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "config.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "field.hpp"
#include "geometry_io.hpp"
#include "mcpm.hpp"
#include "parallel.hpp"
#include "reconstruct.hpp"

/// End-to-end stages behind the command line: ingest geometry, grow the
/// network, mesh the trace field, report on it.
namespace scaffold::pipeline {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, validation_failed = 1, io_failed = 2, not_watertight = 3 };

/// Command-line overrides shared by every subcommand.
struct Options {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::optional<std::string> out;
    std::optional<IsoChoice> iso;
    Axis axis = Axis::z;
    std::optional<std::size_t> index;
};

inline constexpr const char* kTraceFile = "trace.npy";
inline constexpr const char* kDepositFile = "deposit.npy";
inline constexpr const char* kGridFile = "grid.txt";
inline constexpr const char* kLogFile = "run.log";
inline constexpr const char* kMeshFile = "scaffold.stl";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kReportText = "report.txt";

inline void progress(std::ostream& out, const char* stage, std::size_t step, std::size_t total) {
    out << "stage=" << stage << " step=" << step << '/' << total << '\n' << std::flush;
}

/// "trace_000100.npy" for step 100.
inline std::string snapshot_name(std::size_t step, const char* extension = ".npy") {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trace_%06zu", step);
    return std::string(buf) + extension;
}

// ---------------------------------------------------------------------------
// Stages

struct Ingested {
    PointCloud cloud; ///< model space
    GridFit fit;
    mcpm::FoodSources food; ///< grid space
};

inline Ingested ingest(const PipelineConfig& config) {
    Ingested in;
    if (config.input_kind == InputKind::mesh) {
        in.cloud = mesh_to_points(load_mesh(config.input_path), config.dedup_epsilon);
    } else {
        in.cloud = load_points_text(config.input_path);
    }
    if (config.thicken_offset > 0.0) {
        in.cloud = thicken_points(in.cloud, config.thicken_offset);
    }
    in.fit = fit_transform(in.cloud.points, config.resolution, config.margin);
    in.food = mcpm::food_from_points(in.cloud, in.fit.transform);
    return in;
}

/// Applies command-line overrides to a loaded config.
inline PipelineConfig apply(PipelineConfig config, const Options& opt) {
    if (opt.seed) {
        config.params.seed = *opt.seed;
    }
    if (opt.out) {
        config.output_dir = *opt.out;
    }
    if (opt.iso) {
        config.iso = *opt.iso;
    }
    validate(config);
    return config;
}

struct RunResult {
    Ingested input;
    mcpm::SimState state;
};

/// Ingests, simulates and writes trace.npy, deposit.npy, grid.txt, run.log
/// and periodic trace snapshots (NPY plus a mid-z PGM slice) into
/// config.output_dir.
inline RunResult run_stage(const PipelineConfig& config, ThreadPool* pool, std::ostream& out) {
    validate(config);
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    io_detail::write_file((dir / kLogFile).string(), format_run_log(config));

    RunResult r;
    r.input = ingest(config);
    io_detail::write_file((dir / kGridFile).string(), format_grid(r.input.fit.transform, r.input.fit.dims));
    progress(out, "ingest", 1, 1);

    const std::size_t n = config.params.num_steps;
    const std::size_t report_every = std::max<std::size_t>(1, n / 20);
    r.state = mcpm::run(config.params, r.input.food, r.input.fit.dims, pool, [&](const mcpm::SimState& s) {
        if (config.snapshot_interval > 0 && s.step % config.snapshot_interval == 0) {
            write_npy(s.trace, (dir / snapshot_name(s.step)).string());
            slice_to_image(s.trace, Axis::z, s.trace.dims().nz / 2, (dir / snapshot_name(s.step, ".pgm")).string());
        }
        if (s.step % report_every == 0 || s.step == n) {
            progress(out, "simulate", s.step, n);
        }
    });
    if (n == 0) {
        progress(out, "simulate", 0, 0);
    }

    write_npy(r.state.trace, (dir / kTraceFile).string());
    write_npy(r.state.deposit, (dir / kDepositFile).string());
    progress(out, "export", 1, 1);
    return r;
}

/// Resolves an iso choice against a field. Returns 0 when a percentile
/// policy finds no nonzero voxels.
inline double resolve_iso(const ScalarField3D& field, const IsoChoice& iso) {
    if (iso.policy == IsoPolicy::absolute) {
        return iso.value;
    }
    return field_percentile(field, iso.value, true);
}

/// Grid sidecar next to a field file; identity transform when absent.
inline GridTransform transform_for(const std::string& field_path) {
    const fs::path grid = fs::path(field_path).parent_path() / kGridFile;
    if (!fs::exists(grid)) {
        return {};
    }
    return parse_grid(io_detail::read_file(grid.string())).transform;
}

struct MeshResult {
    bool empty = false;
    double iso = 0.0;
    MeshStats stats;
    std::size_t bytes = 0;
};

inline void print_mesh_stats(std::ostream& out, const MeshStats& s) {
    out << "vertices=" << s.vertex_count << " triangles=" << s.triangle_count << " edges=" << s.edge_count
        << " boundary_edges=" << s.boundary_edge_count << " euler=" << s.euler_characteristic
        << " components=" << s.connected_component_count << " area=" << s.surface_area << '\n';
}

/// Meshes `field`, requires a watertight result and writes a binary STL.
/// An empty result writes nothing and is reported, not thrown.
inline MeshResult mesh_stage(const ScalarField3D& field, const IsoChoice& choice, const GridTransform& transform,
                             const std::string& stl_path, std::ostream& out, std::ostream& err) {
    MeshResult r;
    r.iso = resolve_iso(field, choice);
    if (!(r.iso > 0.0)) {
        r.empty = true;
    } else {
        const IsoSurface surface = marching_cubes(field, r.iso, transform);
        r.empty = surface.empty_result;
        if (!r.empty) {
            const WatertightReport check = is_watertight(surface.mesh);
            if (!check.watertight) {
                for (const auto& d : check.diagnostics) {
                    err << "  " << d << '\n';
                }
                throw NotWatertight("mesh is not watertight: " + std::to_string(check.boundary_edges) +
                                    " boundary, " + std::to_string(check.nonmanifold_edges) + " non-manifold, " +
                                    std::to_string(check.misoriented_edges) + " misoriented edges");
            }
            r.stats = mesh_stats(surface.mesh);
            r.bytes = write_stl_binary(surface.mesh, stl_path);
        }
    }
    progress(out, "mesh", 1, 1);
    if (r.empty) {
        err << "warning: no voxel reaches iso " << r.iso << "; no STL written\n";
    } else {
        out << "iso=" << r.iso << '\n';
        print_mesh_stats(out, r.stats);
    }
    return r;
}

/// Network report over a trace field with the food of `config`.
inline NetworkReport eval_stage(const ScalarField3D& trace, const mcpm::FoodSources& food, double threshold,
                                const GridTransform& transform, const fs::path& dir, std::ostream& out) {
    const NetworkReport report = network_report(trace, food, threshold, transform);
    io_detail::write_file((dir / kReportCsv).string(), report_csv(report));
    io_detail::write_file((dir / kReportText).string(), report_text(report));
    progress(out, "eval", 1, 1);
    out << report_csv(report);
    return report;
}

// ---------------------------------------------------------------------------
// Commands

/// Runs `fn` and maps failures onto the exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        err << "error: invalid " << e.what() << '\n';
        return validation_failed;
    } catch (const IndexOutOfRange& e) {
        err << "error: " << e.what() << '\n';
        return validation_failed;
    } catch (const MissingNormals& e) {
        err << "error: " << e.what() << '\n';
        return validation_failed;
    } catch (const EmptyFood& e) {
        err << "error: " << e.what() << '\n';
        return validation_failed;
    } catch (const NotWatertight& e) {
        err << "error: " << e.what() << '\n';
        return not_watertight;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return io_failed;
    }
}

inline int cmd_run(const std::string& config_path, const Options& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const PipelineConfig config = apply(load_config(config_path), opt);
        ThreadPool pool(opt.threads);
        run_stage(config, &pool, out);
        return int(ok);
    });
}

inline int cmd_mesh(const std::string& field_path, const Options& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ScalarField3D field = read_npy(field_path);
        const std::string stl =
            opt.out ? *opt.out : fs::path(field_path).replace_extension(".stl").string();
        mesh_stage(field, opt.iso.value_or(IsoChoice{}), transform_for(field_path), stl, out, err);
        return int(ok);
    });
}

inline int cmd_slice(const std::string& field_path, const Options& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ScalarField3D field = read_npy(field_path);
        const int a = static_cast<int>(opt.axis);
        const std::size_t index = opt.index.value_or(field.dims()[a] / 2);
        const char axis_name = "xyz"[a];
        std::string path = opt.out.value_or("");
        if (path.empty()) {
            fs::path p(field_path);
            p.replace_filename(p.stem().string() + "_" + axis_name + std::to_string(index) + ".pgm");
            path = p.string();
        }
        slice_to_image(field, opt.axis, index, path);
        out << "wrote " << path << '\n';
        return int(ok);
    });
}

/// Field statistics for .npy inputs, mesh statistics for anything else.
inline int cmd_stats(const std::string& path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (io_detail::lower(fs::path(path).extension().string()) == ".npy") {
            const ScalarField3D field = read_npy(path);
            const FieldStats s = field_stats(field);
            out << "total=" << s.total << " nonzero=" << s.nonzero_count << " min=" << s.min << " max=" << s.max
                << " p50=" << s.p50 << " p99=" << s.p99 << '\n';
        } else {
            const TriangleMesh mesh = load_mesh(path);
            print_mesh_stats(out, mesh_stats(mesh));
            out << "watertight=" << (is_watertight(mesh).watertight ? "true" : "false") << '\n';
        }
        return int(ok);
    });
}

/// Reports on the trace of a finished run: output_dir/trace.npy, or the
/// explicit field path when given.
inline int cmd_eval(const std::string& config_path, const std::string& field_path, const Options& opt,
                    std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const PipelineConfig config = apply(load_config(config_path), opt);
        const fs::path dir(config.output_dir);
        const std::string trace_path = field_path.empty() ? (dir / kTraceFile).string() : field_path;
        const ScalarField3D trace = read_npy(trace_path);
        const GridTransform transform = transform_for(trace_path);
        const Ingested input = ingest(config);
        const auto food = mcpm::food_from_points(input.cloud, transform);
        const double threshold = std::max(0.0, resolve_iso(trace, config.iso));
        fs::create_directories(dir);
        eval_stage(trace, food, threshold, transform, dir, out);
        return int(ok);
    });
}

/// run, then mesh the trace with the configured iso policy, then report.
inline int cmd_all(const std::string& config_path, const Options& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const PipelineConfig config = apply(load_config(config_path), opt);
        ThreadPool pool(opt.threads);
        const RunResult run = run_stage(config, &pool, out);
        const fs::path dir(config.output_dir);
        const GridTransform& transform = run.input.fit.transform;
        const MeshResult mesh =
            mesh_stage(run.state.trace, config.iso, transform, (dir / kMeshFile).string(), out, err);
        eval_stage(run.state.trace, run.input.food, std::max(0.0, mesh.iso), transform, dir, out);
        return int(ok);
    });
}

} // namespace scaffold::pipeline
