#pragma once

#include <cstdint>
#include <vector>

#include "diass/render.hpp"

namespace diass {

struct OverflowFrame {
    std::int64_t begin = 0;  // sample range [begin, end)
    std::int64_t end = 0;
    double peak = 0.0;       // largest |sample| in the run, any channel
    std::vector<std::uint64_t> sound_ids;  // sounds active anywhere in the run
};

struct OverflowReport {
    std::vector<OverflowFrame> frames;  // disjoint, ascending
    bool empty() const { return frames.empty(); }
    double worst_peak() const;
};

// Maximal runs of samples with |sample| > headroom (strict), annotated with
// the sounds whose rendered extent intersects the run.
OverflowReport detect_overflow(const SampleBuffer& mix, double headroom,
                               const std::vector<SoundSpan>& spans);

// Multiply the sone targets of every sound implicated in an overflow frame
// by a common ratio rho < 1.  Sounds chained together through shared frames
// form one component and receive one ratio, so their targeted sone ratios
// are preserved exactly; sounds outside all frames are untouched.
Score rescale_sounds(const Score& score, const OverflowReport& report, double headroom);

double buffer_peak(const SampleBuffer& buf);

}  // namespace diass
