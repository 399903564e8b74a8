#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diass/model.hpp"

namespace diass {

enum class VizRep { Spheres, Planes };

struct FrameSpec {
    double fps = 10.0;
    int width = 1280;
    int height = 720;
    VizRep representation = VizRep::Spheres;
    bool octave_grid = true;
};

// One circle (spheres mode: a partial) or one horizontal bar (planes mode:
// a sound at its fundamental).
struct SceneGlyph {
    std::uint64_t sound_id = 0;
    int partial_index = 0;
    double x = 0.0;       // pixels, center
    double y = 0.0;
    double radius = 0.0;  // circle radius / bar half-width
    double hue = 210.0;   // degrees; shifts with reverb mix
    bool pulse = false;   // tremolo (AM) present
    bool rotate = false;  // vibrato (FM) present
    double frequency = 0.0;
    double amplitude = 0.0;
};

struct Scene {
    double t = 0.0;
    VizRep representation = VizRep::Spheres;
    std::vector<SceneGlyph> glyphs;  // sorted by (sound id, partial index)
};

// End of the last partial (0 for an empty score).
double score_end(const Score& score);

// Pure scene layout at time t; throws std::domain_error outside
// [0, score_end].  Macro sounds are expanded on the fly.
Scene layout_frame(const Score& score, double t, const FrameSpec& spec);

// frame_000001.svg ... plus index.txt (frame -> timestamp); returns the
// frame count ceil(duration * fps).  Output is byte-deterministic.
std::size_t emit_frames(const Score& score, const FrameSpec& spec, const std::string& out_dir);

// Static piano-roll: time on x, log-frequency on y, one translucent bar per
// partial, opacity proportional to its mean amplitude.
void emit_overview(const Score& score, const std::string& out_path);

}  // namespace diass
