// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <system_error>

#include "error.hpp"
#include "geometry_io.hpp"
#include "mcpm.hpp"

namespace scaffold {

inline constexpr std::string_view kVersion = "0.1.0";

enum class InputKind { mesh, points };
enum class IsoPolicy { absolute, percentile };

/// Iso threshold choice: a fixed value, or a percentile of the nonzero
/// voxels of the field being meshed.
struct IsoChoice {
    IsoPolicy policy = IsoPolicy::percentile;
    double value = 50.0;
};

struct PipelineConfig {
    std::string input_path;
    InputKind input_kind = InputKind::points;
    double thicken_offset = 0.0; ///< model units; 0 disables thickening
    double dedup_epsilon = 0.0;  ///< model units; 0 keeps every vertex
    std::size_t resolution = 128;
    double margin = 0.1;
    mcpm::Params params;
    IsoChoice iso;
    std::size_t snapshot_interval = 0; ///< steps; 0 disables snapshots
    std::string output_dir = "out";
};

/// Throws ValidationError naming the first offending field.
inline void validate(const PipelineConfig& c) {
    if (c.input_path.empty()) {
        throw ValidationError("input_path", "is required");
    }
    if (c.resolution < 8) {
        throw ValidationError("resolution", "must be >= 8");
    }
    if (!(c.margin >= 0.0 && c.margin < 0.5)) {
        throw ValidationError("margin", "must be in [0, 0.5)");
    }
    if (!(c.thicken_offset >= 0.0) || !std::isfinite(c.thicken_offset)) {
        throw ValidationError("thicken_offset", "must be >= 0");
    }
    if (!(c.dedup_epsilon >= 0.0) || !std::isfinite(c.dedup_epsilon)) {
        throw ValidationError("dedup_epsilon", "must be >= 0");
    }
    if (c.params.num_agents < 1) {
        throw ValidationError("num_agents", "must be >= 1");
    }
    if (c.iso.policy == IsoPolicy::percentile && !(c.iso.value > 0.0 && c.iso.value <= 100.0)) {
        throw ValidationError("iso_value", "percentile must be in (0, 100]");
    }
    if (c.iso.policy == IsoPolicy::absolute && (!(c.iso.value > 0.0) || !std::isfinite(c.iso.value))) {
        throw ValidationError("iso_value", "absolute iso must be > 0");
    }
    if (c.output_dir.empty()) {
        throw ValidationError("output_dir", "must not be empty");
    }
    mcpm::validate(c.params);
}

namespace config_detail {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double to_double(std::string_view key, std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ValidationError(std::string(key), "expected a number, got '" + std::string(text) + "'");
    }
    return v;
}

inline std::uint64_t to_unsigned(std::string_view key, std::string_view text) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ValidationError(std::string(key), "expected a non-negative integer, got '" + std::string(text) + "'");
    }
    return v;
}

} // namespace config_detail

/// Parses "key = value" lines; '#' starts a comment. Later keys override
/// earlier ones. Returns the raw key/value pairs.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    io_detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = io_detail::trim(line);
        if (line.empty()) {
            return;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError("line " + std::to_string(line_no), "expected 'key = value'");
        }
        const auto key = io_detail::trim(line.substr(0, eq));
        const auto value = io_detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError("line " + std::to_string(line_no), "missing key");
        }
        out[std::string(key)] = std::string(value);
    });
    return out;
}

/// Builds a config from key/value text. Relative paths are resolved
/// against `base_dir`, including the default output_dir. Unknown keys are
/// rejected.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
    using config_detail::to_double;
    using config_detail::to_unsigned;
    PipelineConfig c;
    auto& p = c.params;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "input_path") {
            std::filesystem::path path(value);
            if (path.is_relative() && !base_dir.empty()) {
                path = base_dir / path;
            }
            c.input_path = path.lexically_normal().string();
        } else if (key == "input_kind") {
            if (value == "mesh") {
                c.input_kind = InputKind::mesh;
            } else if (value == "points") {
                c.input_kind = InputKind::points;
            } else {
                throw ValidationError(key, "expected 'mesh' or 'points'");
            }
        } else if (key == "thicken_offset") {
            c.thicken_offset = to_double(key, value);
        } else if (key == "dedup_epsilon") {
            c.dedup_epsilon = to_double(key, value);
        } else if (key == "resolution") {
            c.resolution = to_unsigned(key, value);
        } else if (key == "margin") {
            c.margin = to_double(key, value);
        } else if (key == "num_agents") {
            p.num_agents = to_unsigned(key, value);
        } else if (key == "num_steps") {
            p.num_steps = to_unsigned(key, value);
        } else if (key == "sense_distance") {
            p.sense_distance = to_double(key, value);
        } else if (key == "sense_spread") {
            p.sense_spread = to_double(key, value);
        } else if (key == "move_distance") {
            p.move_distance = to_double(key, value);
        } else if (key == "num_samples") {
            p.num_samples = to_unsigned(key, value);
        } else if (key == "sharpness") {
            p.sharpness = to_double(key, value);
        } else if (key == "agent_deposit") {
            p.agent_deposit = to_double(key, value);
        } else if (key == "food_deposit") {
            p.food_deposit = to_double(key, value);
        } else if (key == "deposit_decay") {
            p.deposit_decay = to_double(key, value);
        } else if (key == "trace_decay") {
            p.trace_decay = to_double(key, value);
        } else if (key == "boundary_policy") {
            if (value == "respawn") {
                p.boundary_policy = mcpm::BoundaryPolicy::respawn;
            } else if (value == "reflect") {
                p.boundary_policy = mcpm::BoundaryPolicy::reflect;
            } else {
                throw ValidationError(key, "expected 'respawn' or 'reflect'");
            }
        } else if (key == "seed") {
            p.seed = to_unsigned(key, value);
        } else if (key == "iso_policy") {
            if (value == "percentile") {
                c.iso.policy = IsoPolicy::percentile;
            } else if (value == "absolute") {
                c.iso.policy = IsoPolicy::absolute;
            } else {
                throw ValidationError(key, "expected 'percentile' or 'absolute'");
            }
        } else if (key == "iso_value") {
            c.iso.value = to_double(key, value);
        } else if (key == "snapshot_interval") {
            c.snapshot_interval = to_unsigned(key, value);
        } else if (key == "output_dir") {
            c.output_dir = value;
        } else {
            throw ValidationError(key, "unknown key");
        }
    }
    if (!base_dir.empty() && std::filesystem::path(c.output_dir).is_relative()) {
        c.output_dir = (base_dir / c.output_dir).lexically_normal().string();
    }
    validate(c);
    return c;
}

/// Reads and parses a config file; relative paths resolve against the
/// file's directory.
inline PipelineConfig load_config(const std::string& path) {
    const std::string text = io_detail::read_file(path);
    return parse_config(text, std::filesystem::absolute(path).parent_path());
}

/// Every key with its resolved value, in the same format parse_config
/// reads, so the text replays the run exactly.
inline std::string format_config(const PipelineConfig& c) {
    using config_detail::format_double;
    const auto& p = c.params;
    std::string out;
    const auto line = [&](std::string_view key, const std::string& value) {
        out.append(key).append(" = ").append(value).append("\n");
    };
    line("input_path", std::filesystem::absolute(c.input_path).lexically_normal().string());
    line("input_kind", c.input_kind == InputKind::mesh ? "mesh" : "points");
    line("thicken_offset", format_double(c.thicken_offset));
    line("dedup_epsilon", format_double(c.dedup_epsilon));
    line("resolution", std::to_string(c.resolution));
    line("margin", format_double(c.margin));
    line("num_agents", std::to_string(p.num_agents));
    line("num_steps", std::to_string(p.num_steps));
    line("sense_distance", format_double(p.sense_distance));
    line("sense_spread", format_double(p.sense_spread));
    line("move_distance", format_double(p.move_distance));
    line("num_samples", std::to_string(p.num_samples));
    line("sharpness", format_double(p.sharpness));
    line("agent_deposit", format_double(p.agent_deposit));
    line("food_deposit", format_double(p.food_deposit));
    line("deposit_decay", format_double(p.deposit_decay));
    line("trace_decay", format_double(p.trace_decay));
    line("boundary_policy", p.boundary_policy == mcpm::BoundaryPolicy::respawn ? "respawn" : "reflect");
    line("seed", std::to_string(p.seed));
    line("iso_policy", c.iso.policy == IsoPolicy::percentile ? "percentile" : "absolute");
    line("iso_value", format_double(c.iso.value));
    line("snapshot_interval", std::to_string(c.snapshot_interval));
    line("output_dir", std::filesystem::absolute(c.output_dir).lexically_normal().string());
    return out;
}

/// Reproducibility log: a version header followed by the resolved config.
/// load_config reads it back unchanged.
inline std::string format_run_log(const PipelineConfig& c) {
    return "# scaffold " + std::string(kVersion) + " run log\n" + format_config(c);
}

// ---------------------------------------------------------------------------
// Grid sidecar

/// Writes the grid transform and dimensions next to exported fields so
/// later stages can map grid space back to model space.
inline std::string format_grid(const GridTransform& t, const Dims& d) {
    using config_detail::format_double;
    return "scale = " + format_double(t.scale) + "\ntranslation_x = " + format_double(t.translation.x) +
           "\ntranslation_y = " + format_double(t.translation.y) + "\ntranslation_z = " +
           format_double(t.translation.z) + "\nnx = " + std::to_string(d.nx) + "\nny = " + std::to_string(d.ny) +
           "\nnz = " + std::to_string(d.nz) + "\n";
}

struct GridInfo {
    GridTransform transform;
    Dims dims;
};

inline GridInfo parse_grid(std::string_view text) {
    using config_detail::to_double;
    using config_detail::to_unsigned;
    GridInfo g;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "scale") {
            g.transform.scale = to_double(key, value);
        } else if (key == "translation_x") {
            g.transform.translation.x = to_double(key, value);
        } else if (key == "translation_y") {
            g.transform.translation.y = to_double(key, value);
        } else if (key == "translation_z") {
            g.transform.translation.z = to_double(key, value);
        } else if (key == "nx") {
            g.dims.nx = to_unsigned(key, value);
        } else if (key == "ny") {
            g.dims.ny = to_unsigned(key, value);
        } else if (key == "nz") {
            g.dims.nz = to_unsigned(key, value);
        } else {
            throw ValidationError(key, "unknown key");
        }
    }
    if (!(g.transform.scale > 0.0)) {
        throw ValidationError("scale", "must be > 0");
    }
    return g;
}

} // namespace scaffold
