// diass: additive-synthesis score compiler and sonification front end.
//
// Exit codes: 0 success, 1 usage, 2 invalid input (parse/validation),
// 3 runtime or I/O failure.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diass/errors.hpp"
#include "diass/pipeline.hpp"
#include "diass/psycho.hpp"
#include "diass/render.hpp"
#include "diass/score.hpp"
#include "diass/sonify.hpp"
#include "diass/viz.hpp"

namespace {

constexpr const char* kToolVersion = "1.0.0";

double num_or_usage(const std::string& text, const char* flag) {
    double v{};
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw CLI::ValidationError(std::string(flag) + ": expected a number, got '" + text + "'");
    return v;
}

std::pair<double, double> range_or_usage(const std::string& text, const char* flag) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError(std::string(flag) + ": expected lo:hi, got '" + text + "'");
    return {num_or_usage(text.substr(0, colon), flag), num_or_usage(text.substr(colon + 1), flag)};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw diass::RenderError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw diass::RenderError("read failed for '" + path + "'");
    return ss.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw diass::RenderError("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw diass::RenderError("write failed for '" + path + "'");
}

diass::Score load_score(const std::string& path) { return diass::parse_score(slurp(path)); }

std::size_t partial_count(const diass::Score& score) {
    std::size_t n = 0;
    for (const auto& s : score.sounds) n += s.partials.size();
    return n;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

void run_check(const std::string& path) {
    diass::Score score = diass::expand_macros(load_score(path));
    diass::validate_score(score);
    std::printf("sounds=%zu\npartials=%zu\nok\n", score.sounds.size(), partial_count(score));
}

struct RenderArgs {
    std::string score_path, out_path;
    diass::RenderConfig config;
    bool stats = false;
};

void run_render(const RenderArgs& args) {
    diass::Score score = load_score(args.score_path);
    diass::RenderStats stats;
    diass::SampleBuffer mix = diass::render_score(score, args.config, &stats);
    diass::write_wav(diass::quantize(mix), score.sample_rate, score.channels, args.out_path);
    if (args.stats) {
        std::printf("sounds=%zu\n", stats.sounds);
        std::printf("partials=%zu\n", stats.partials);
        std::printf("anticlip_rounds=%d\n", stats.anticlip_rounds);
        std::printf("final_peak=%.6f\n", stats.final_peak);
        std::printf("prepare_seconds=%.3f\n", stats.prepare_seconds);
        std::printf("synth_seconds=%.3f\n", stats.synth_seconds);
        std::printf("anticlip_seconds=%.3f\n", stats.anticlip_seconds);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diass: additive-synthesis instrument (render, sonify, visualize)"};
    app.require_subcommand(1);
    std::string version = std::string("diass ") + kToolVersion + "\nscore-grammar v" +
                          std::to_string(diass::kScoreGrammarVersion) + "\nequal-loudness-contours v" +
                          std::to_string(diass::LoudnessTable::standard().version);
    app.set_version_flag("--version", version);

    // check
    std::string check_path;
    auto* check = app.add_subcommand("check", "Parse and validate a score, printing its shape");
    check->add_option("score", check_path, "Score file")->required();
    check->callback([&] { run_check(check_path); });

    // render
    RenderArgs render_args;
    auto* render = app.add_subcommand("render", "Render a score to a 16-bit WAV file");
    render->add_option("score", render_args.score_path, "Score file")->required();
    render->add_option("-o,--output", render_args.out_path, "Output WAV path")->required();
    render->add_option("--workers", render_args.config.workers, "Worker threads")
        ->check(CLI::PositiveNumber);
    render->add_option("--headroom", render_args.config.headroom, "Peak ceiling, fraction of full scale")
        ->check(CLI::Range(1e-6, 1.0));
    render->add_option("--anticlip-max-rounds", render_args.config.anticlip_max_rounds,
                       "Rescale iterations before giving up")
        ->check(CLI::PositiveNumber);
    render->add_flag_callback("--no-anticlip", [&] { render_args.config.anticlip = false; },
                              "Skip the anticlip pass (quantizer still clamps)");
    render->add_flag("--stats", render_args.stats, "Print key=value pipeline statistics");
    render->callback([&] { run_render(render_args); });

    // sonify
    auto* sonify = app.add_subcommand("sonify", "Map datasets to score files");
    sonify->require_subcommand(1);

    std::string grid_path, plane_sel = "z=0", time_axis = "x", freq_range = "100:4000",
                sone_range = "1:32", data_range, grid_format = "auto", plane_out;
    diass::MappingConfig plane_cfg;
    auto* plane = sonify->add_subcommand("plane", "Plane scan: grid rows become a frequency ladder");
    plane->add_option("grid", grid_path, "Grid file (CSV x,y[,z],value or raw float32)")->required();
    plane->add_option("-o,--output", plane_out, "Output score path")->required();
    plane->add_option("--plane", plane_sel, "Slice selector for 3-D grids, e.g. z=0");
    plane->add_option("--time-axis", time_axis, "In-plane axis swept in time (x or y)")
        ->check(CLI::IsMember({"x", "y"}));
    plane->add_option("--stride", plane_cfg.stride, "Vertical stride between sounds")
        ->check(CLI::PositiveNumber);
    plane->add_option("--freq", freq_range, "Frequency range lo:hi in Hz");
    plane->add_option("--sones", sone_range, "Loudness range lo:hi in sones");
    plane->add_option("--dur", plane_cfg.scan_duration, "Scan duration, seconds")
        ->check(CLI::PositiveNumber);
    plane->add_option("--rate", plane_cfg.sample_rate, "Sample rate of the emitted score");
    plane->add_option("--range", data_range, "Explicit data normalization range lo:hi");
    plane->add_option("--format", grid_format, "Grid file format")
        ->check(CLI::IsMember({"auto", "csv", "f32"}));
    plane->callback([&] {
        std::tie(plane_cfg.freq_lo, plane_cfg.freq_hi) = range_or_usage(freq_range, "--freq");
        std::tie(plane_cfg.sones_lo, plane_cfg.sones_hi) = range_or_usage(sone_range, "--sones");
        if (!data_range.empty()) plane_cfg.data_range = range_or_usage(data_range, "--range");
        if (plane_sel.size() < 3 || plane_sel[1] != '=' ||
            (plane_sel[0] != 'x' && plane_sel[0] != 'y' && plane_sel[0] != 'z'))
            throw CLI::ValidationError("--plane: expected axis=index, e.g. z=0");
        plane_cfg.plane_axis = plane_sel[0] - 'x';
        plane_cfg.plane_index = static_cast<int>(num_or_usage(plane_sel.substr(2), "--plane"));
        plane_cfg.time_axis = time_axis == "x" ? 0 : 1;
        plane_cfg.mode = diass::MapMode::PlaneScan;
        diass::GridFormat fmt = diass::GridFormat::Csv;
        if (grid_format == "f32" ||
            (grid_format == "auto" && grid_path.size() > 4 &&
             grid_path.compare(grid_path.size() - 4, 4, ".csv") != 0))
            fmt = diass::GridFormat::RawF32;
        std::vector<std::string> warnings;
        diass::Score score = diass::map_plane_scan(diass::load_grid(grid_path, fmt), plane_cfg, &warnings);
        print_warnings(warnings);
        spill(plane_out, diass::serialize_score(score));
        std::printf("sounds=%zu\n", score.sounds.size());
    });

    std::string traj_path, wfreq_range = "100:4000", wsone_range = "1:32", window_out;
    diass::MappingConfig window_cfg;
    auto* window = sonify->add_subcommand("window", "Traveling window over trajectory data");
    window->add_option("trajectory", traj_path, "Trajectory CSV (step,entity,x,y,speed)")->required();
    window->add_option("-o,--output", window_out, "Output score path")->required();
    window->add_option("--width", window_cfg.window_width, "Window width in domain x units")
        ->required()
        ->check(CLI::PositiveNumber);
    window->add_option("--freq", wfreq_range, "Frequency range lo:hi in Hz");
    window->add_option("--sones", wsone_range, "Loudness range lo:hi in sones");
    window->add_option("--dur", window_cfg.scan_duration, "Window traversal duration, seconds")
        ->check(CLI::PositiveNumber);
    window->add_option("--rate", window_cfg.sample_rate, "Sample rate of the emitted score");
    window->callback([&] {
        std::tie(window_cfg.freq_lo, window_cfg.freq_hi) = range_or_usage(wfreq_range, "--freq");
        std::tie(window_cfg.sones_lo, window_cfg.sones_hi) = range_or_usage(wsone_range, "--sones");
        window_cfg.mode = diass::MapMode::TravelingWindow;
        std::vector<std::string> warnings;
        diass::Score score =
            diass::map_traveling_window(diass::load_trajectory(traj_path), window_cfg, &warnings);
        print_warnings(warnings);
        spill(window_out, diass::serialize_score(score));
        std::printf("sounds=%zu\n", score.sounds.size());
    });

    // viz
    std::string viz_score, viz_out = "frames", viz_rep = "spheres", viz_size = "1280x720";
    diass::FrameSpec frame_spec;
    bool no_grid = false;
    auto* viz = app.add_subcommand("viz", "Emit SVG animation frames for a score");
    viz->add_option("score", viz_score, "Score file");
    viz->add_option("-o,--output", viz_out, "Output directory for frames");
    viz->add_option("--rep", viz_rep, "Representation")->check(CLI::IsMember({"spheres", "planes"}));
    viz->add_option("--fps", frame_spec.fps, "Frames per second")->check(CLI::PositiveNumber);
    viz->add_option("--size", viz_size, "Frame size WxH in pixels");
    viz->add_flag("--no-grid", no_grid, "Suppress the octave grid");

    std::string over_score, over_out = "overview.svg";
    auto* overview = viz->add_subcommand("overview", "Emit a single piano-roll overview SVG");
    overview->add_option("score", over_score, "Score file")->required();
    overview->add_option("-o,--output", over_out, "Output SVG path");
    overview->callback([&] { diass::emit_overview(load_score(over_score), over_out); });

    viz->callback([&] {
        if (viz->get_subcommands().empty()) {
            if (viz_score.empty()) throw CLI::RequiredError("score");
            auto x = viz_size.find('x');
            if (x == std::string::npos)
                throw CLI::ValidationError("--size: expected WxH, got '" + viz_size + "'");
            frame_spec.width = static_cast<int>(num_or_usage(viz_size.substr(0, x), "--size"));
            frame_spec.height = static_cast<int>(num_or_usage(viz_size.substr(x + 1), "--size"));
            frame_spec.representation =
                viz_rep == "planes" ? diass::VizRep::Planes : diass::VizRep::Spheres;
            frame_spec.octave_grid = !no_grid;
            std::size_t n = diass::emit_frames(load_score(viz_score), frame_spec, viz_out);
            std::printf("frames=%zu\n", n);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const diass::ParseError& e) {
        std::fprintf(stderr, "error: %s (line %d, column %d)\n", e.what(), e.line(), e.column());
        return 2;
    } catch (const diass::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
