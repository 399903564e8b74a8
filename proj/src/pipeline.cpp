#include "diass/pipeline.hpp"

#include <chrono>
#include <string>

#include "diass/errors.hpp"

namespace diass {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

SampleBuffer render_score(const Score& parsed, const RenderConfig& config, RenderStats* stats) {
    RenderStats local;
    RenderStats& st = stats ? *stats : local;

    auto t0 = std::chrono::steady_clock::now();
    Score score = expand_macros(parsed);
    validate_score(score);
    st.sounds = score.sounds.size();
    st.prepare_seconds += seconds_since(t0);

    for (int round = 0;; ++round) {
        t0 = std::chrono::steady_clock::now();
        auto cards = lower_to_icards(score);
        st.partials = cards.size();
        apply_loudness(cards, score);
        st.prepare_seconds += seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        std::vector<SoundSpan> spans;
        SampleBuffer mix = schedule_render(score, cards, config, &spans);
        st.synth_seconds += seconds_since(t0);

        if (!config.anticlip) {
            st.final_peak = buffer_peak(mix);
            return mix;
        }

        t0 = std::chrono::steady_clock::now();
        const OverflowReport report = detect_overflow(mix, config.headroom, spans);
        if (report.empty()) {
            st.anticlip_rounds = round;
            st.final_peak = buffer_peak(mix);
            st.anticlip_seconds += seconds_since(t0);
            return mix;
        }
        if (round >= config.anticlip_max_rounds)
            throw RenderError("anticlip did not converge after " +
                              std::to_string(config.anticlip_max_rounds) +
                              " rounds; residual peak " + std::to_string(report.worst_peak()));
        score = rescale_sounds(score, report, config.headroom);
        st.anticlip_seconds += seconds_since(t0);
    }
}

}  // namespace diass
