#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "diass/errors.hpp"
#include "diass/viz.hpp"

using namespace diass;

namespace {

Partial tone(double f, double start, double dur, double amp) {
    Partial p;
    p.freq_env = Envelope::constant(f);
    p.amp_env = Envelope::constant(amp);
    p.start_time = start;
    p.duration = dur;
    return p;
}

Sound base_sound(std::uint64_t id, double start, double dur) {
    Sound s;
    s.id = id;
    s.start = start;
    s.duration = dur;
    s.loudness_env = Envelope::constant(4.0);
    s.pan_env = Envelope::constant(0.5);
    s.rng_seed = id;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_substr(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

}  // namespace

TEST_CASE("viz: score end covers partials and unexpanded macros") {
    Score sc;
    CHECK(score_end(sc) == 0.0);
    Sound a = base_sound(1, 0.0, 2.0);
    a.partials.push_back(tone(440, 0.5, 1.0, 1.0));  // ends at 1.5 < sound end
    sc.sounds.push_back(a);
    CHECK(score_end(sc) == 1.5);
    Sound b = base_sound(2, 1.0, 4.0);  // macro-only: spans its declared window
    b.macros.push_back({220.0, 3});
    sc.sounds.push_back(b);
    CHECK(score_end(sc) == 5.0);
}

TEST_CASE("viz: sphere layout puts partials on a log-frequency axis") {
    Score sc;
    Sound s = base_sound(1, 0.0, 2.0);
    s.partials.push_back(tone(220, 0, 2, 1.0));
    s.partials.push_back(tone(440, 0, 2, 0.25));
    s.partials.push_back(tone(880, 0, 2, 1.0));
    sc.sounds.push_back(s);

    FrameSpec spec;
    Scene scene = layout_frame(sc, 1.0, spec);
    REQUIRE(scene.glyphs.size() == 3);
    const auto& g220 = scene.glyphs[0];
    const auto& g440 = scene.glyphs[1];
    const auto& g880 = scene.glyphs[2];
    CHECK(g220.partial_index == 0);  // sorted by (sound, partial)
    CHECK(g440.partial_index == 1);

    // higher pitch sits higher on screen; octaves are equally spaced
    CHECK(g880.y < g440.y);
    CHECK(g440.y < g220.y);
    CHECK(g220.y - g440.y == doctest::Approx(g440.y - g880.y).epsilon(1e-9));

    // radius follows the square root of the instantaneous amplitude
    CHECK(g220.radius == doctest::Approx(22.0).epsilon(1e-12));
    CHECK(g440.radius == doctest::Approx(11.0).epsilon(1e-12));

    // centered pan lands mid-canvas
    CHECK(g220.x == doctest::Approx(640.0).epsilon(1e-12));
    CHECK(g220.hue == 210.0);
    CHECK_FALSE(g220.pulse);
    CHECK_FALSE(g220.rotate);
}

TEST_CASE("viz: glyph count follows the active partial windows") {
    Score sc;
    Sound s = base_sound(1, 0.0, 3.0);
    s.partials.push_back(tone(440, 0.0, 3.0, 1.0));
    s.partials.push_back(tone(660, 1.0, 1.0, 1.0));  // active on [1, 2)
    sc.sounds.push_back(s);
    FrameSpec spec;
    CHECK(layout_frame(sc, 0.5, spec).glyphs.size() == 1);
    CHECK(layout_frame(sc, 1.5, spec).glyphs.size() == 2);
    CHECK(layout_frame(sc, 2.5, spec).glyphs.size() == 1);
    CHECK(layout_frame(sc, 3.0, spec).glyphs.empty());  // end time is exclusive
    CHECK_THROWS_AS(layout_frame(sc, -0.1, spec), std::domain_error);
    CHECK_THROWS_AS(layout_frame(sc, 3.5, spec), std::domain_error);
}

TEST_CASE("viz: reverb shifts hue, modulators set pulse and rotate") {
    Score sc;
    Sound s = base_sound(1, 0.0, 1.0);
    Partial p = tone(440, 0, 1, 1.0);
    p.am = ModulatorSpec{WaveType::Sine, 0.0, Envelope::constant(0.1), Envelope::constant(4.0)};
    p.fm = ModulatorSpec{WaveType::Sine, 0.0, Envelope::constant(5.0), Envelope::constant(5.0)};
    s.partials.push_back(p);
    s.reverb = ReverbSpec{1.0, 3.0, 0.5, 20.0, 0.7};
    sc.sounds.push_back(s);
    Scene scene = layout_frame(sc, 0.5, FrameSpec{});
    REQUIRE(scene.glyphs.size() == 1);
    CHECK(scene.glyphs[0].hue == doctest::Approx(150.0).epsilon(1e-12));  // 210 - 120 * 0.5
    CHECK(scene.glyphs[0].pulse);
    CHECK(scene.glyphs[0].rotate);
}

TEST_CASE("viz: hard pan sticks to the margins") {
    Score sc;
    Sound s = base_sound(1, 0.0, 1.0);
    s.pan_env = Envelope::constant(0.0);
    s.partials.push_back(tone(440, 0, 1, 1.0));
    sc.sounds.push_back(s);
    FrameSpec spec;
    CHECK(layout_frame(sc, 0.5, spec).glyphs[0].x == doctest::Approx(48.0).epsilon(1e-12));
    sc.sounds[0].pan_env = Envelope::constant(1.0);
    CHECK(layout_frame(sc, 0.5, spec).glyphs[0].x == doctest::Approx(1232.0).epsilon(1e-12));
}

TEST_CASE("viz: macro sounds are expanded for display") {
    Score sc;
    sc.sample_rate = 44100;
    Sound s = base_sound(1, 0.0, 1.0);
    s.macros.push_back({220.0, 3});
    sc.sounds.push_back(s);
    Scene scene = layout_frame(sc, 0.5, FrameSpec{});
    CHECK(scene.glyphs.size() == 3);
}

TEST_CASE("viz: plane representation draws one bar per sound") {
    Score sc;
    Sound a = base_sound(1, 0.0, 2.0);
    a.partials.push_back(tone(220, 0, 2, 0.5));
    a.partials.push_back(tone(440, 0, 2, 0.3));
    a.partials.push_back(tone(880, 0, 2, 0.2));
    Sound b = base_sound(2, 0.5, 1.0);
    b.partials.push_back(tone(330, 0.5, 1.0, 0.25));
    sc.sounds.push_back(a);
    sc.sounds.push_back(b);

    FrameSpec spec;
    spec.representation = VizRep::Planes;
    Scene scene = layout_frame(sc, 1.0, spec);
    REQUIRE(scene.glyphs.size() == 2);
    CHECK(scene.glyphs[0].sound_id == 1);
    CHECK(scene.glyphs[1].sound_id == 2);
    // the bar sits at the first partial's frequency
    CHECK(scene.glyphs[0].frequency == 220.0);
    CHECK(scene.glyphs[1].frequency == 330.0);
    // width saturates at the summed amplitude, sqrt-compressed
    CHECK(scene.glyphs[0].radius == doctest::Approx(12.0 + 0.08 * 1280.0).epsilon(1e-9));
    CHECK(scene.glyphs[1].radius ==
          doctest::Approx(12.0 + 0.08 * 1280.0 * 0.5).epsilon(1e-9));
    // outside the sound span the bar disappears
    CHECK(layout_frame(sc, 1.8, spec).glyphs.size() == 1);
}

TEST_CASE("viz: frame emission count, naming and determinism") {
    Score sc;
    Sound s = base_sound(1, 0.0, 5.5);
    s.partials.push_back(tone(440, 0, 5.5, 1.0));
    sc.sounds.push_back(s);

    namespace fs = std::filesystem;
    const fs::path dir = "viz_test_frames";
    fs::remove_all(dir);
    FrameSpec spec;
    CHECK(emit_frames(sc, spec, dir.string()) == 55);  // ceil(5.5 * 10)
    CHECK(fs::exists(dir / "frame_000001.svg"));
    CHECK(fs::exists(dir / "frame_000055.svg"));
    CHECK_FALSE(fs::exists(dir / "frame_000056.svg"));

    std::string index = slurp(dir / "index.txt");
    CHECK(count_substr(index, "\n") == 55);
    CHECK(index.substr(0, 28) == "frame_000001.svg 0.000000\nfr");

    std::string first = slurp(dir / "frame_000007.svg");
    CHECK(first.rfind("<svg", 0) == 0);
    CHECK(first.find("</svg>") != std::string::npos);
    CHECK(first.find("<circle") != std::string::npos);
    CHECK(first.find("<line") != std::string::npos);  // octave grid on by default

    // re-emission is byte-identical
    CHECK(emit_frames(sc, spec, dir.string()) == 55);
    CHECK(slurp(dir / "frame_000007.svg") == first);

    spec.octave_grid = false;
    CHECK(emit_frames(sc, spec, dir.string()) == 55);
    CHECK(slurp(dir / "frame_000007.svg").find("<line") == std::string::npos);

    spec.fps = 0.0;
    CHECK_THROWS_AS(emit_frames(sc, spec, dir.string()), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("viz: empty scores produce no frames but a valid index") {
    namespace fs = std::filesystem;
    const fs::path dir = "viz_test_empty";
    fs::remove_all(dir);
    CHECK(emit_frames(Score{}, FrameSpec{}, dir.string()) == 0);
    CHECK(fs::exists(dir / "index.txt"));
    CHECK(slurp(dir / "index.txt").empty());
    CHECK_FALSE(fs::exists(dir / "frame_000001.svg"));
    fs::remove_all(dir);
}

TEST_CASE("viz: overview draws one translucent bar per partial") {
    Score sc;
    sc.sample_rate = 44100;
    Sound a = base_sound(1, 0.0, 2.0);
    a.partials.push_back(tone(220, 0, 2, 1.0));
    a.partials.push_back(tone(440, 0, 2, 0.5));
    Sound b = base_sound(2, 1.0, 1.5);
    b.macros.push_back({330.0, 4});  // expands to 4 partials
    sc.sounds.push_back(a);
    sc.sounds.push_back(b);

    namespace fs = std::filesystem;
    const fs::path path = "viz_test_overview.svg";
    emit_overview(sc, path.string());
    std::string svg = slurp(path);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count_substr(svg, "<rect x=") == 6);  // 2 explicit + 4 expanded
    CHECK(count_substr(svg, "fill-opacity=") == 6);
    CHECK(svg.find("<line") != std::string::npos);

    // deterministic output
    emit_overview(sc, path.string());
    CHECK(slurp(path) == svg);
    fs::remove(path);
}
