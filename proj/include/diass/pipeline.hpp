#pragma once

#include <cstddef>

#include "diass/anticlip.hpp"
#include "diass/psycho.hpp"
#include "diass/render.hpp"

namespace diass {

struct RenderStats {
    std::size_t sounds = 0;
    std::size_t partials = 0;
    int anticlip_rounds = 0;  // rescale iterations that were needed
    double final_peak = 0.0;
    double prepare_seconds = 0.0;   // macro expansion + lowering + loudness
    double synth_seconds = 0.0;     // all schedule_render calls
    double anticlip_seconds = 0.0;  // detection + rescaling bookkeeping
};

// Full pipeline: expand macros, validate, solve loudness, render in
// parallel, then iterate the anticlip loop until the mix respects the
// headroom (or throw after config.anticlip_max_rounds rescales).
SampleBuffer render_score(const Score& parsed, const RenderConfig& config,
                          RenderStats* stats = nullptr);

}  // namespace diass
