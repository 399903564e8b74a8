#include "diass/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "diass/errors.hpp"

namespace diass {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kNyquistGuardHz = 1.0;
constexpr double kModRateLimitHz = 200.0;
constexpr double kTimeTol = 1e-9;

bool valid_rate(int rate) {
    return rate == 22050 || rate == 44100 || rate == 48000 || rate == 96000;
}

void validate_modulator(const ModulatorSpec& m, const std::string& where) {
    validate_envelope(m.amp_env, (where + " depth").c_str());
    validate_envelope(m.freq_env, (where + " rate").c_str());
    if (!std::isfinite(m.phase)) throw ValidationError(where + ": non-finite phase");
    if (m.freq_env.max_value() >= kModRateLimitHz)
        throw ValidationError(where + ": modulator rate " + std::to_string(m.freq_env.max_value()) +
                              " Hz reaches the 200 Hz slow-modulation limit");
}

void validate_transient(const TransientSpec& t, const std::string& where) {
    validate_envelope(t.shape_env, (where + " shape").c_str());
    validate_envelope(t.rate_env, (where + " rate").c_str());
    if (!(t.max_size >= 0.0) || !std::isfinite(t.max_size))
        throw ValidationError(where + ": max_size must be finite and >= 0");
    if (t.max_size > 0.5)
        throw ValidationError(where + ": max_size " + std::to_string(t.max_size) +
                              " exceeds 0.5 (transients perturb, never dominate)");
    if (!(t.max_rate >= 0.0) || !std::isfinite(t.max_rate))
        throw ValidationError(where + ": max_rate must be finite and >= 0");
    // Shape and rate envelopes are profiles in [0,1]; max_size / max_rate
    // carry the units, so the profiles must not exceed 1.
    if (t.shape_env.max_value() > 1.0 + 1e-12)
        throw ValidationError(where + ": shape profile exceeds 1");
    if (t.rate_env.max_value() > 1.0 + 1e-12)
        throw ValidationError(where + ": rate profile exceeds 1");
}
}  // namespace

std::pair<double, double> sound_span(const Sound& s) {
    if (s.partials.empty() && s.macros.empty())
        throw ValidationError("sound " + std::to_string(s.id) + " has no partials");
    if (s.partials.empty()) return {s.start, s.start + s.duration};
    double start = s.partials.front().start_time;
    double end = start;
    for (const auto& p : s.partials) {
        start = std::min(start, p.start_time);
        end = std::max(end, p.start_time + p.duration);
    }
    return {start, end};
}

void validate_partial(const Partial& p, int sample_rate, const std::string& where) {
    if (!(p.start_time >= 0.0) || !std::isfinite(p.start_time))
        throw ValidationError(where + ": start time must be finite and >= 0");
    if (!(p.duration > 0.0) || !std::isfinite(p.duration))
        throw ValidationError(where + ": duration must be finite and > 0");
    if (!(p.phase >= 0.0 && p.phase < 2.0 * kPi))
        throw ValidationError(where + ": phase " + std::to_string(p.phase) +
                              " outside [0, 2pi)");
    validate_envelope(p.amp_env, (where + " amplitude").c_str());
    if (p.amp_env.scale > 1.0)
        throw ValidationError(where + ": carrier amplitude scale " +
                              std::to_string(p.amp_env.scale) + " exceeds full scale 1");
    validate_envelope(p.freq_env, (where + " frequency").c_str());
    if (p.am) validate_modulator(*p.am, where + " AM");
    if (p.fm) validate_modulator(*p.fm, where + " FM");
    if (p.amp_transient) validate_transient(*p.amp_transient, where + " amplitude transient");
    if (p.freq_transient) validate_transient(*p.freq_transient, where + " frequency transient");

    // Worst-case instantaneous frequency: carrier extreme, plus full FM
    // excursion, plus the relative transient offset.
    const double nyquist = sample_rate / 2.0;
    const double fm_depth = p.fm ? p.fm->amp_env.max_value() : 0.0;
    const double trans = p.freq_transient ? p.freq_transient->max_size : 0.0;
    const double f_hi = p.freq_env.max_value() * (1.0 + trans) + fm_depth;
    const double f_lo = p.freq_env.min_value() * (1.0 - trans) - fm_depth;
    if (f_hi >= nyquist - kNyquistGuardHz + kTimeTol)
        throw ValidationError(where + ": frequency reaches " + std::to_string(f_hi) +
                              " Hz, exceeds Nyquist " + std::to_string(nyquist) + " Hz at rate " +
                              std::to_string(sample_rate));
    if (!(f_lo > 0.0))
        throw ValidationError(where + ": instantaneous frequency can reach " +
                              std::to_string(f_lo) + " Hz, must stay > 0");
}

void validate_sound(const Sound& s, int sample_rate) {
    const std::string where = "sound " + std::to_string(s.id);
    if (s.partials.empty() && s.macros.empty())
        throw ValidationError(where + ": no partials");
    if (!(s.start >= 0.0) || !std::isfinite(s.start))
        throw ValidationError(where + ": start must be finite and >= 0");
    if (!(s.duration > 0.0) || !std::isfinite(s.duration))
        throw ValidationError(where + ": duration must be finite and > 0");
    validate_envelope(s.loudness_env, (where + " loudness").c_str());
    validate_envelope(s.pan_env, (where + " pan").c_str());
    if (s.pan_env.scale > 1.0)
        throw ValidationError(where + ": pan scale " + std::to_string(s.pan_env.scale) +
                              " exceeds 1 (pan is a [0,1] position)");
    if (s.reverb) {
        const auto& r = *s.reverb;
        if (!(r.duration >= 0.0) || !std::isfinite(r.duration))
            throw ValidationError(where + ": reverb duration must be finite and >= 0");
        if (!(r.decay_rate > 0.0) || !std::isfinite(r.decay_rate))
            throw ValidationError(where + ": reverb decay rate must be > 0");
        if (!(r.mix >= 0.0 && r.mix <= 1.0))
            throw ValidationError(where + ": reverb mix outside [0,1]");
        if (!(r.hall_size > 0.0) || !std::isfinite(r.hall_size))
            throw ValidationError(where + ": hall size must be > 0");
        if (!(r.reflection >= 0.0 && r.reflection < 1.0))
            throw ValidationError(where + ": reflection coefficient outside [0,1)");
    }
    const double nyquist = sample_rate / 2.0;
    for (const auto& m : s.macros) {
        if (!(m.fundamental > 0.0) || !std::isfinite(m.fundamental))
            throw ValidationError(where + ": harmonic fundamental must be > 0");
        if (m.fundamental >= nyquist - kNyquistGuardHz)
            throw ValidationError(where + ": harmonic fundamental " +
                                  std::to_string(m.fundamental) + " Hz exceeds Nyquist " +
                                  std::to_string(nyquist) + " Hz");
        if (m.max_partials < 0) throw ValidationError(where + ": harmonic max must be >= 0");
    }
    for (std::size_t i = 0; i < s.partials.size(); ++i) {
        const auto& p = s.partials[i];
        validate_partial(p, sample_rate, where + " partial " + std::to_string(i));
        if (p.start_time < s.start - kTimeTol ||
            p.start_time + p.duration > s.start + s.duration + kTimeTol)
            throw ValidationError(where + " partial " + std::to_string(i) +
                                  ": lies outside the declared sound span");
    }
}

void validate_score(const Score& score) {
    if (!valid_rate(score.sample_rate))
        throw ValidationError("sample rate " + std::to_string(score.sample_rate) +
                              " not one of 22050/44100/48000/96000");
    if (score.channels != 1 && score.channels != 2)
        throw ValidationError("channels must be 1 or 2");
    if (!std::isfinite(score.calibration_db) || score.calibration_db <= 0.0)
        throw ValidationError("calibration_db must be finite and > 0");
    std::set<std::uint64_t> ids;
    double prev_start = -1.0;
    for (const auto& s : score.sounds) {
        if (!ids.insert(s.id).second)
            throw ValidationError("duplicate sound id " + std::to_string(s.id));
        validate_sound(s, score.sample_rate);
        if (s.start < prev_start - kTimeTol)
            throw ValidationError("sounds not sorted by start time at id " + std::to_string(s.id));
        prev_start = std::max(prev_start, s.start);
    }
}

}  // namespace diass
