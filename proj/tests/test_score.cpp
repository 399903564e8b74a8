#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "diass/errors.hpp"
#include "diass/score.hpp"

using namespace diass;

namespace {

const char* kMinimal =
    "diass-score 1\n"
    "rate 44100\n"
    "sound id=1 start=0 dur=1 loudness=sones:4 pan=const:0.5 seed=3\n"
    "  partial f=440 a=1 phase=0\n";

std::string fixture(const char* name) {
    std::ifstream in(std::string(DIASS_FIXTURES_DIR) + "/" + name);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("score: minimal score lowers to one I-card") {
    Score sc = parse_score(kMinimal);
    CHECK(sc.sample_rate == 44100);
    CHECK(sc.channels == 2);
    CHECK(sc.calibration_db == 90.0);
    REQUIRE(sc.sounds.size() == 1);
    auto cards = lower_to_icards(sc);
    REQUIRE(cards.size() == 1);
    CHECK(cards[0].sound_id == 1);
    CHECK(cards[0].partial.freq_env.value_at(0.5) == 440.0);
    CHECK(cards[0].partial.duration == 1.0);  // defaults to the sound span
    CHECK(cards[0].rng_seed == 3);
}

TEST_CASE("score: Nyquist violation is a semantic error") {
    std::string text =
        "diass-score 1\nrate 22050\n"
        "sound id=1 start=0 dur=1 loudness=sones:4 pan=const:0.5 seed=1\n"
        "  partial f=12000 a=1 phase=0\n";
    CHECK_THROWS_AS(parse_score(text), ValidationError);
}

TEST_CASE("score: parse errors carry line and column") {
    try {
        parse_score("diass-score 1\nrate 44100\nsound id=banana\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() > 1);
    }
    CHECK_THROWS_AS(parse_score("diass-score 2\n"), ParseError);  // unknown version
    // unknown attribute
    CHECK_THROWS_AS(
        parse_score("diass-score 1\nsound id=1 start=0 dur=1 loudness=sones:1 pan=const:0.5 "
                    "seed=1 wobble=3\n  partial f=440 a=1 phase=0\n"),
        ParseError);
    // header after first sound
    CHECK_THROWS_AS(parse_score("diass-score 1\nsound id=1 start=0 dur=1 loudness=sones:1 "
                                "pan=const:0.5 seed=1\n  partial f=440 a=1 phase=0\nrate 22050\n"),
                    ParseError);
    // duplicate sound id
    CHECK_THROWS_AS(
        parse_score("diass-score 1\n"
                    "sound id=7 start=0 dur=1 loudness=sones:1 pan=const:0.5 seed=1\n"
                    "  partial f=440 a=1 phase=0\n"
                    "sound id=7 start=0 dur=1 loudness=sones:1 pan=const:0.5 seed=1\n"
                    "  partial f=550 a=1 phase=0\n"),
        ValidationError);
}

TEST_CASE("score: box3 fixture shape") {
    Score sc = parse_score(fixture("box3.score"));
    CHECK(sc.sounds.size() == 55);
    CHECK(sc.sample_rate == 22050);
    std::set<double> starts;
    for (const auto& s : sc.sounds) starts.insert(s.start);
    CHECK(starts == std::set<double>{0.0, 5.5, 11.0, 16.5, 22.2});
}

TEST_CASE("score: macro expansion follows the Nyquist cap rule") {
    auto make = [](double f0, const char* max) {
        return std::string("diass-score 1\nrate 22050\n") +
               "sound id=1 start=0 dur=1 loudness=sones:4 pan=const:0.5 seed=1\n" +
               "  harmonic f0=" + std::to_string(f0) + " max=" + max + "\n";
    };
    Score a = expand_macros(parse_score(make(4000, "auto")));
    REQUIRE(a.sounds[0].partials.size() == 2);  // floor(11024/4000) = 2
    CHECK(a.sounds[0].partials[0].freq_env.value_at(0) == 4000.0);
    CHECK(a.sounds[0].partials[1].freq_env.value_at(0) == 8000.0);
    CHECK(a.sounds[0].macros.empty());

    Score b = expand_macros(parse_score(make(40, "60")));
    CHECK(b.sounds[0].partials.size() == 60);  // Box 3 cluster 4

    CHECK_THROWS_AS(parse_score(make(11025, "auto")), ValidationError);

    // equal amplitudes normalized to sum 1
    double sum = 0.0;
    for (const auto& p : b.sounds[0].partials) {
        CHECK(p.amp_env.is_constant());
        sum += p.amp_env.value_at(0.0);
        CHECK(p.amp_env.value_at(0.0) == b.sounds[0].partials[0].amp_env.value_at(0.0));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    // phases stay inside [0, 2pi) and are not all equal (crest control)
    std::set<double> phases;
    for (const auto& p : b.sounds[0].partials) {
        CHECK(p.phase >= 0.0);
        CHECK(p.phase < 2.0 * 3.14159265358979323846);
        phases.insert(p.phase);
    }
    CHECK(phases.size() > 30);

    // idempotence
    Score c = expand_macros(b);
    CHECK(serialize_score(c) == serialize_score(b));
}

TEST_CASE("score: lowering orders by (start, id, partial index)") {
    std::string text =
        "diass-score 1\n"
        "sound id=5 start=0.5 dur=1 loudness=sones:2 pan=const:0.5 seed=5\n"
        "  partial f=300 a=1 phase=0\n"
        "  partial f=600 a=0.5 phase=0\n"
        "  partial f=900 a=0.25 phase=0\n"
        "sound id=2 start=1 dur=1 loudness=sones:2 pan=const:0.5 seed=2\n"
        "  partial f=500 a=1 phase=0\n";
    Score sc = parse_score(text);
    auto cards = lower_to_icards(sc);
    REQUIRE(cards.size() == 4);
    CHECK(cards[0].sound_id == 5);  // 0.5-s sound first
    CHECK(cards[1].sound_id == 5);
    CHECK(cards[2].sound_id == 5);
    CHECK(cards[3].sound_id == 2);
    for (int i = 0; i < 3; ++i) {
        CHECK(cards[i].partial_index == i);
        CHECK(cards[i].rng_seed == 5);  // one seed per sound
        CHECK(cards[i].sound_start == 0.5);
        CHECK(cards[i].sound_end == 1.5);
    }
}

TEST_CASE("score: serialize/parse round-trip is a fixed point") {
    std::string text =
        "diass-score 1\n"
        "rate 48000\n"
        "channels 2\n"
        "calibration_db 87.5\n"
        "sound id=1 start=0 dur=2.5 loudness=env:2;0.5,31.7,lin;0.5,4,exp pan=env:0.1;1,0.9,lin "
        "seed=99\n"
        "  reverb dur=1.25 decay=2.5 mix=0.3 hall=17.3 refl=0.61\n"
        "  partial f=env:220;0.7,880.5,exp;0.3,440,lin a=env:0;0.25,0.9,lin;0.75,0,lin "
        "phase=1.25 start=0.25 dur=2 "
        "am=sine/0.5/const:0.07/const:5.5 fm=triangle/0/const:11/env:1;1,6,lin "
        "at=0.2/const:1/8/const:1 ft=0.04/env:1;1,0.5,lin/3.5/const:1\n"
        "sound id=2 start=1 dur=1 loudness=sones:3 pan=const:0 seed=4\n"
        "  harmonic f0=123.5 max=auto\n";
    Score sc = parse_score(text);
    std::string canon = serialize_score(sc);
    Score re = parse_score(canon);
    CHECK(serialize_score(re) == canon);

    // values survive exactly, not just textually
    auto c1 = lower_to_icards(expand_macros(sc));
    auto c2 = lower_to_icards(expand_macros(re));
    REQUIRE(c1.size() == c2.size());
    for (std::size_t i = 0; i < c1.size(); ++i) {
        for (double u : {0.0, 0.125, 0.5, 0.875, 1.0}) {
            CHECK(c1[i].partial.freq_env.value_at(u) == c2[i].partial.freq_env.value_at(u));
            CHECK(c1[i].partial.amp_env.value_at(u) == c2[i].partial.amp_env.value_at(u));
        }
        CHECK(c1[i].partial.phase == c2[i].partial.phase);
        CHECK(c1[i].partial.start_time == c2[i].partial.start_time);
    }
}

TEST_CASE("score: expanded envelopes never reach Nyquist") {
    Score sc = expand_macros(parse_score(fixture("box3.score")));
    const double nyquist = sc.sample_rate / 2.0;
    for (const auto& s : sc.sounds)
        for (const auto& p : s.partials)
            for (int i = 0; i <= 1000; ++i)
                CHECK(p.freq_env.value_at(i / 1000.0) < nyquist);
}
