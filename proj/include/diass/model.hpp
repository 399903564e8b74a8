#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diass/envelope.hpp"

namespace diass {

enum class WaveType { Sine, Triangle, Square };

// Slow periodic modulator (tremolo when applied to amplitude, vibrato to frequency).
struct ModulatorSpec {
    WaveType wave = WaveType::Sine;
    double phase = 0.0;  // radians
    Envelope amp_env;    // modulation depth (full-scale units or Hz)
    Envelope freq_env;   // modulation rate, Hz; must stay < 200
};

// Random perturbation bursts drawn from the sound's RandomStream.
struct TransientSpec {
    double max_size = 0.0;  // fraction of the carrier value, <= 0.5
    Envelope shape_env;     // normalized size profile over the partial
    double max_rate = 0.0;  // events per second
    Envelope rate_env;      // normalized rate profile over the partial
};

struct Partial {
    double start_time = 0.0;  // seconds, absolute within the score
    double duration = 0.0;    // seconds, > 0
    double phase = 0.0;       // radians in [0, 2pi)
    Envelope amp_env;         // carrier amplitude, full scale [0,1]
    Envelope freq_env;        // carrier frequency, Hz
    std::optional<ModulatorSpec> am;
    std::optional<ModulatorSpec> fm;
    std::optional<TransientSpec> amp_transient;
    std::optional<TransientSpec> freq_transient;
};

struct ReverbSpec {
    double duration = 0.0;     // seconds of tail appended
    double decay_rate = 1.0;   // 1/seconds, > 0
    double mix = 0.0;          // wet fraction [0,1]; 0 is an exact bypass
    double hall_size = 20.0;   // meters, > 0
    double reflection = 0.7;   // [0,1)
};

// Sound-level shorthand: a fundamental plus harmonics up to Nyquist.
struct HarmonicMacro {
    double fundamental = 0.0;  // Hz
    int max_partials = 0;      // 0 means "auto" (all harmonics below Nyquist)
};

struct Sound {
    std::uint64_t id = 0;
    double start = 0.0;     // declared span; partials and macros live inside it
    double duration = 0.0;
    std::vector<Partial> partials;
    std::vector<HarmonicMacro> macros;  // emptied by expand_macros
    Envelope loudness_env;  // target loudness, scale in sones
    Envelope pan_env;       // 0 = hard left, 1 = hard right
    std::optional<ReverbSpec> reverb;
    std::uint64_t rng_seed = 0;
};

struct Score {
    int sample_rate = 44100;
    int channels = 2;
    double calibration_db = 90.0;  // dB SPL of a full-scale 1000-Hz sine
    std::vector<Sound> sounds;     // sorted ascending by start time
};

// (start, end) = (min partial start, max partial start+duration).
std::pair<double, double> sound_span(const Sound& s);

// Throw ValidationError on any violated model invariant.
void validate_partial(const Partial& p, int sample_rate, const std::string& where);
void validate_sound(const Sound& s, int sample_rate);
void validate_score(const Score& score);

}  // namespace diass
