#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "diass/model.hpp"

namespace diass {

inline constexpr int kScoreGrammarVersion = 1;

// Flat per-partial record fed to the instrument: self-contained, no lookup
// into Sound needed at render time.
struct ICard {
    std::uint64_t sound_id = 0;
    int partial_index = 0;
    Partial partial;  // absolute start time
    Envelope pan_env;
    std::optional<ReverbSpec> reverb;
    std::uint64_t rng_seed = 0;
    double sound_start = 0.0;  // span of the owning sound, for pan/gain eval
    double sound_end = 0.0;
    // Amplitude scale over the sound span; constant 1 until the loudness
    // solver fills it in.  Generalizes a single scalar so time-varying sone
    // targets interpolate between per-breakpoint solves.
    Envelope gain_env = Envelope::constant(1.0);
};

// Parse the textual score language (grammar version 1).  Throws ParseError
// with line/column on syntax errors and ValidationError on semantic ones
// (frequency above Nyquist, duplicate ids, bad envelopes).
Score parse_score(std::istream& in);
Score parse_score(const std::string& text);

// Canonical text form; parse(serialize(s)) reproduces values bit-exactly
// and serialize(parse(serialize(s))) == serialize(s).
std::string serialize_score(const Score& score);

// Replace every harmonic macro by explicit partials at k*f0 up to
// min(max, floor((rate/2 - 1Hz)/f0)); equal amplitudes normalized to sum 1
// per sound.  Idempotent.
Score expand_macros(const Score& score);

// One ICard per partial, ordered by (sound start, sound id, partial index).
// Requires a macro-free score.
std::vector<ICard> lower_to_icards(const Score& score);

}  // namespace diass
