#include "diass/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "diass/errors.hpp"
#include "diass/score.hpp"

namespace diass {
namespace {

constexpr double kMarginPx = 48.0;
constexpr double kMaxSphereRadiusPx = 22.0;
constexpr double kBaseHueDeg = 210.0;   // no reverb
constexpr double kHueShiftDeg = -120.0; // shift at mix = 1

bool has_macros(const Score& score) {
    for (const Sound& s : score.sounds)
        if (!s.macros.empty()) return true;
    return false;
}

// Score-wide frequency bounds over every partial's envelope range.
std::pair<double, double> freq_bounds(const Score& score) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const Sound& s : score.sounds) {
        for (const Partial& p : s.partials) {
            double a = p.freq_env.min_value();
            double b = p.freq_env.max_value();
            if (!any) {
                lo = a;
                hi = b;
                any = true;
            } else {
                lo = std::min(lo, a);
                hi = std::max(hi, b);
            }
        }
    }
    if (!any) return {220.0, 880.0};
    // Degenerate span: pad to one octave either side so the log axis is usable.
    if (hi <= lo * (1.0 + 1e-12)) return {lo / 2.0, lo * 2.0};
    return {lo, hi};
}

double env_at_clamped(const Envelope& env, double u) {
    return eval_envelope(env, std::clamp(u, 0.0, 1.0));
}

// Mean natural value over the span; segment means are exact for both shapes
// (geometric segments integrate to (v1 - v0) / ln(v1/v0)).
double env_mean(const Envelope& env) {
    double acc = 0.0;
    double v0 = env.initial;
    for (const EnvSegment& seg : env.segments) {
        double v1 = seg.target;
        double m;
        if (seg.shape == EnvShape::Exponential && std::abs(v1 - v0) > 1e-15 * std::max(std::abs(v0), std::abs(v1)))
            m = (v1 - v0) / std::log(v1 / v0);
        else
            m = 0.5 * (v0 + v1);
        acc += seg.frac * m;
        v0 = v1;
    }
    return acc * env.scale;
}

struct Axis {
    double lo_log2 = 0.0, hi_log2 = 0.0;
    double top = 0.0, bottom = 0.0;  // pixel band (top < bottom)

    double y_of(double freq) const {
        double w = (std::log2(freq) - lo_log2) / (hi_log2 - lo_log2);
        return bottom - w * (bottom - top);
    }
};

Axis make_axis(const Score& score, double height) {
    auto [lo, hi] = freq_bounds(score);
    Axis ax;
    ax.lo_log2 = std::log2(lo);
    ax.hi_log2 = std::log2(hi);
    ax.top = kMarginPx;
    ax.bottom = height - kMarginPx;
    return ax;
}

std::string fmt(double v) {
    char buf[48];
    if (std::abs(v) < 5e-4) v = 0.0;  // avoid "-0.000"
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string fmt_hue(double h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", h);
    return buf;
}

void append_grid(std::string& svg, const Axis& ax, int width) {
    // One line per semitone; octave boundaries (multiples of 12 semitones
    // from 440 Hz) are drawn heavier.
    double ref = std::log2(440.0);
    long k0 = static_cast<long>(std::ceil((ax.lo_log2 - ref) * 12.0 - 1e-9));
    long k1 = static_cast<long>(std::floor((ax.hi_log2 - ref) * 12.0 + 1e-9));
    for (long k = k0; k <= k1; ++k) {
        double f = std::exp2(ref + static_cast<double>(k) / 12.0);
        double y = ax.y_of(f);
        bool octave = (k % 12) == 0;
        svg += "<line x1=\"0\" y1=\"";
        svg += fmt(y);
        svg += "\" x2=\"";
        svg += std::to_string(width);
        svg += "\" y2=\"";
        svg += fmt(y);
        svg += octave ? "\" stroke=\"#3a3a4a\" stroke-width=\"1.5\"/>\n"
                      : "\" stroke=\"#23232e\" stroke-width=\"0.5\"/>\n";
    }
}

std::string scene_svg(const Scene& scene, const FrameSpec& spec, const Axis& ax) {
    std::string svg;
    svg.reserve(4096 + scene.glyphs.size() * 160);
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"";
    svg += std::to_string(spec.width);
    svg += "\" height=\"";
    svg += std::to_string(spec.height);
    svg += "\" viewBox=\"0 0 ";
    svg += std::to_string(spec.width);
    svg += " ";
    svg += std::to_string(spec.height);
    svg += "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#101018\"/>\n";
    if (spec.octave_grid) append_grid(svg, ax, spec.width);
    for (const SceneGlyph& g : scene.glyphs) {
        std::string fill = "hsl(" + fmt_hue(g.hue) + ",70%,55%)";
        if (scene.representation == VizRep::Spheres) {
            svg += "<circle cx=\"" + fmt(g.x) + "\" cy=\"" + fmt(g.y) + "\" r=\"" + fmt(g.radius) +
                   "\" fill=\"" + fill + "\" fill-opacity=\"0.85\"/>\n";
            if (g.pulse)  // tremolo: concentric dashed ring
                svg += "<circle cx=\"" + fmt(g.x) + "\" cy=\"" + fmt(g.y) + "\" r=\"" +
                       fmt(g.radius * 1.45 + 2.0) + "\" fill=\"none\" stroke=\"" + fill +
                       "\" stroke-width=\"1\" stroke-dasharray=\"3 3\"/>\n";
            if (g.rotate)  // vibrato: radial spoke
                svg += "<line x1=\"" + fmt(g.x) + "\" y1=\"" + fmt(g.y) + "\" x2=\"" +
                       fmt(g.x + (g.radius + 4.0) * 0.7071) + "\" y2=\"" +
                       fmt(g.y - (g.radius + 4.0) * 0.7071) + "\" stroke=\"" + fill +
                       "\" stroke-width=\"1.5\"/>\n";
        } else {
            svg += "<rect x=\"" + fmt(g.x - g.radius) + "\" y=\"" + fmt(g.y - 3.0) + "\" width=\"" +
                   fmt(2.0 * g.radius) + "\" height=\"6\" fill=\"" + fill +
                   "\" fill-opacity=\"0.85\"/>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RenderError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw RenderError("write failed for '" + path.string() + "'");
}

}  // namespace

double score_end(const Score& score) {
    double end = 0.0;
    for (const Sound& s : score.sounds) {
        if (s.partials.empty())
            end = std::max(end, s.start + s.duration);
        else
            end = std::max(end, sound_span(s).second);
    }
    return end;
}

Scene layout_frame(const Score& score, double t, const FrameSpec& spec) {
    const Score* sc = &score;
    Score expanded;
    if (has_macros(score)) {
        expanded = expand_macros(score);
        sc = &expanded;
    }
    double end = score_end(*sc);
    if (!(t >= 0.0) || t > end + 1e-9)
        throw std::domain_error("frame time " + std::to_string(t) + " outside score span [0, " +
                                std::to_string(end) + "]");

    Axis ax = make_axis(*sc, spec.height);
    double x_lo = kMarginPx, x_hi = spec.width - kMarginPx;

    Scene scene;
    scene.t = t;
    scene.representation = spec.representation;
    for (const Sound& s : sc->sounds) {
        auto [s0, s1] = sound_span(s);
        double su = (s1 > s0) ? (t - s0) / (s1 - s0) : 0.0;
        double hue = kBaseHueDeg + (s.reverb ? kHueShiftDeg * s.reverb->mix : 0.0);
        if (spec.representation == VizRep::Spheres) {
            for (std::size_t i = 0; i < s.partials.size(); ++i) {
                const Partial& p = s.partials[i];
                if (!(t >= p.start_time && t < p.start_time + p.duration)) continue;
                double u = (t - p.start_time) / p.duration;
                double amp = env_at_clamped(p.amp_env, u);
                double freq = env_at_clamped(p.freq_env, u);
                SceneGlyph g;
                g.sound_id = s.id;
                g.partial_index = static_cast<int>(i);
                g.x = x_lo + env_at_clamped(s.pan_env, std::clamp(su, 0.0, 1.0)) * (x_hi - x_lo);
                g.y = ax.y_of(freq);
                g.radius = kMaxSphereRadiusPx * std::sqrt(std::clamp(amp, 0.0, 1.0));
                g.hue = hue;
                g.pulse = p.am.has_value();
                g.rotate = p.fm.has_value();
                g.frequency = freq;
                g.amplitude = amp;
                scene.glyphs.push_back(g);
            }
        } else {
            if (s.partials.empty()) continue;
            if (!(t >= s0 && t < s1)) continue;
            const Partial& fund = s.partials.front();
            double up = (t - fund.start_time) / fund.duration;
            double freq = env_at_clamped(fund.freq_env, up);
            double amp_sum = 0.0;
            bool am = false, fm = false;
            for (const Partial& p : s.partials) {
                if (!(t >= p.start_time && t < p.start_time + p.duration)) continue;
                amp_sum += env_at_clamped(p.amp_env, (t - p.start_time) / p.duration);
                am = am || p.am.has_value();
                fm = fm || p.fm.has_value();
            }
            SceneGlyph g;
            g.sound_id = s.id;
            g.partial_index = 0;
            g.x = x_lo + env_at_clamped(s.pan_env, std::clamp(su, 0.0, 1.0)) * (x_hi - x_lo);
            g.y = ax.y_of(freq);
            g.radius = 12.0 + 0.08 * spec.width * std::sqrt(std::min(amp_sum, 1.0));
            g.hue = hue;
            g.pulse = am;
            g.rotate = fm;
            g.frequency = freq;
            g.amplitude = amp_sum;
            scene.glyphs.push_back(g);
        }
    }
    std::sort(scene.glyphs.begin(), scene.glyphs.end(), [](const SceneGlyph& a, const SceneGlyph& b) {
        if (a.sound_id != b.sound_id) return a.sound_id < b.sound_id;
        return a.partial_index < b.partial_index;
    });
    return scene;
}

std::size_t emit_frames(const Score& score, const FrameSpec& spec, const std::string& out_dir) {
    if (!(spec.fps > 0.0)) throw ValidationError("fps must be positive");
    if (spec.width <= 0 || spec.height <= 0) throw ValidationError("frame size must be positive");
    const Score expanded = has_macros(score) ? expand_macros(score) : score;

    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    double duration = score_end(expanded);
    auto count = static_cast<std::size_t>(std::ceil(duration * spec.fps - 1e-9));
    Axis ax = make_axis(expanded, spec.height);

    std::string index;
    for (std::size_t i = 0; i < count; ++i) {
        double t = static_cast<double>(i) / spec.fps;
        Scene scene = layout_frame(expanded, t, spec);
        char name[40];
        std::snprintf(name, sizeof name, "frame_%06zu.svg", i + 1);
        write_text(dir / name, scene_svg(scene, spec, ax));
        char line[80];
        std::snprintf(line, sizeof line, "%s %.6f\n", name, t);
        index += line;
    }
    write_text(dir / "index.txt", index);
    return count;
}

void emit_overview(const Score& score, const std::string& out_path) {
    const Score expanded = has_macros(score) ? expand_macros(score) : score;
    const int width = 1280, height = 720;
    double total = score_end(expanded);
    if (total <= 0.0) total = 1.0;
    Axis ax = make_axis(expanded, height);
    double x_lo = kMarginPx, x_hi = width - kMarginPx;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
           " " + std::to_string(height) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#101018\"/>\n";
    append_grid(svg, ax, width);
    for (const Sound& s : expanded.sounds) {
        double hue = kBaseHueDeg + (s.reverb ? kHueShiftDeg * s.reverb->mix : 0.0);
        std::string fill = "hsl(" + fmt_hue(hue) + ",70%,55%)";
        for (const Partial& p : s.partials) {
            double x0 = x_lo + p.start_time / total * (x_hi - x_lo);
            double x1 = x_lo + (p.start_time + p.duration) / total * (x_hi - x_lo);
            double y = ax.y_of(env_at_clamped(p.freq_env, 0.5));
            double opacity = std::clamp(0.05 + 0.95 * env_mean(p.amp_env), 0.05, 1.0);
            char op[16];
            std::snprintf(op, sizeof op, "%.3f", opacity);
            svg += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y - 1.5) + "\" width=\"" +
                   fmt(std::max(x1 - x0, 0.5)) + "\" height=\"3\" fill=\"" + fill +
                   "\" fill-opacity=\"" + op + "\"/>\n";
        }
    }
    svg += "</svg>\n";
    write_text(std::filesystem::path(out_path), svg);
}

}  // namespace diass
