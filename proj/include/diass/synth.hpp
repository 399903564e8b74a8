#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "diass/model.hpp"
#include "diass/score.hpp"

namespace diass {

// Double-precision full-scale (+-1.0) audio, positioned on the absolute
// sample grid via start_frame.
struct SampleBuffer {
    int rate = 44100;
    std::int64_t start_frame = 0;
    std::vector<Eigen::ArrayXd> channels;  // 1 (mono) or 2 (L, R), equal length

    Eigen::Index length() const { return channels.empty() ? 0 : channels[0].size(); }
    std::int64_t end_frame() const { return start_frame + length(); }
};

// Versioned deterministic generator ("mt64-u53 v1"): the 53 high bits of an
// std::mt19937_64 draw mapped to [0,1).  The algorithm is fixed by the C++
// standard, so identical seeds give identical sequences on every platform.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    double next_unit() {  // uniform in [0, 1)
        ++draws_;
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }
    double next_signed() { return 2.0 * next_unit() - 1.0; }  // uniform in [-1, 1)
    std::uint64_t draws() const { return draws_; }

private:
    std::mt19937_64 gen_;
    std::uint64_t draws_ = 0;
};

// One partial per Box-style additive synthesis: carrier envelopes, AM/FM
// modulators, random transients; phase accumulated (Kahan-compensated) so
// time-varying frequency stays chirp-free.  Mono, spans the sample indices
// covering [start, start+dur); the card's gain envelope is applied.
SampleBuffer render_partial(const ICard& card, RandomStream& rng, int rate);

// 4-line feedback-delay-network hall.  mix=0 returns the input untouched;
// otherwise the buffer grows by spec.duration of tail.
SampleBuffer apply_reverb(const SampleBuffer& buf, const ReverbSpec& spec);

// Constant-power pan of a mono buffer: left = cos(p*pi/2), right =
// sin(p*pi/2) with p swept over the buffer extent.
SampleBuffer pan(const SampleBuffer& buf, const Envelope& pan_env);

// Sum of the sound's partials (one shared RandomStream consumed in
// partial-index order), then reverb, then pan.  Pure in (cards, seed, rate).
SampleBuffer render_sound(const std::vector<ICard>& cards, std::uint64_t seed, int rate);

}  // namespace diass
