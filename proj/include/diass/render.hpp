#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diass/score.hpp"
#include "diass/synth.hpp"

namespace diass {

struct RenderConfig {
    int workers = 1;
    double headroom = 0.98;        // fraction of full scale the mix must respect
    int anticlip_max_rounds = 10;
    bool anticlip = true;
};

// Rendered extent of one sound in the mix (reverb tail included).
struct SoundSpan {
    std::uint64_t id = 0;
    std::int64_t begin = 0;  // absolute sample index, inclusive
    std::int64_t end = 0;    // exclusive
};

// Render every sound (work unit = whole sound) across config.workers
// threads, dispatching in starting-time order and accumulating into the mix
// in ascending sound-id order.  Bit-identical for any worker count.  The
// returned buffer has score.channels channels and starts at frame 0; an
// empty score gives length 0.  Worker failures abort with the sound id.
SampleBuffer schedule_render(const Score& score, const std::vector<ICard>& cards,
                             const RenderConfig& config,
                             std::vector<SoundSpan>* spans_out = nullptr);

// Round-half-away-from-zero to 16 bits, clamped to [-32768, 32767];
// channels interleaved.
std::vector<std::int16_t> quantize(const SampleBuffer& mix);

// Canonical RIFF/WAVE, PCM 16-bit little-endian.
void write_wav(const std::vector<std::int16_t>& samples, int rate, int channels,
               const std::string& path);

}  // namespace diass
