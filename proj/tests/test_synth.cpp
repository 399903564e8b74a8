#include <doctest.h>

#include <cmath>
#include <vector>

#include "diass/errors.hpp"
#include "diass/synth.hpp"

using namespace diass;

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

ICard make_card(double f, double amp, double dur, double phase = 0.0) {
    ICard c;
    c.sound_id = 1;
    c.partial_index = 0;
    c.partial.freq_env = Envelope::constant(f);
    c.partial.amp_env = Envelope::constant(amp);
    c.partial.phase = phase;
    c.partial.start_time = 0.0;
    c.partial.duration = dur;
    c.pan_env = Envelope::constant(0.5);
    c.sound_start = 0.0;
    c.sound_end = dur;
    return c;
}

double max_abs_diff(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    REQUIRE(a.size() == b.size());
    return (a - b).abs().maxCoeff();
}

// test-side compensated sum, mirrors the renderer's accumulator contract
struct Kahan {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

double tri(double theta) {
    double y = theta * (1.0 / kTwoPi);
    y -= std::floor(y);
    if (y < 0.25) return 4.0 * y;
    if (y < 0.75) return 2.0 - 4.0 * y;
    return 4.0 * y - 4.0;
}

double sqr(double theta) {
    double y = theta * (1.0 / kTwoPi);
    y -= std::floor(y);
    return y < 0.5 ? 1.0 : -1.0;
}

}  // namespace

TEST_CASE("synth: constant-frequency oscillator matches the closed form") {
    const int rate = 44100;
    ICard c = make_card(1000.0, 1.0, 1.0, 0.3);
    RandomStream rng(1);
    SampleBuffer buf = render_partial(c, rng, rate);
    REQUIRE(buf.length() == rate);
    CHECK(buf.start_frame == 0);
    double worst = 0.0;
    for (int n = 0; n < rate; ++n) {
        double ref = std::sin(kTwoPi * 1000.0 * n / rate + 0.3);
        worst = std::max(worst, std::abs(buf.channels[0](n) - ref));
    }
    CHECK(worst < 1e-9);

    // zero phase starts at exactly zero
    ICard z = make_card(440.0, 1.0, 0.1, 0.0);
    RandomStream rng2(1);
    CHECK(render_partial(z, rng2, rate).channels[0](0) == 0.0);
}

TEST_CASE("synth: AM/FM renderer matches an independent accumulator") {
    const int rate = 44100;
    const double dur = 0.5;
    ICard c = make_card(440.0, 0.6, dur, 0.2);
    c.partial.am = ModulatorSpec{WaveType::Square, 0.75, Envelope::constant(0.1),
                                 Envelope::constant(3.0)};
    c.partial.fm = ModulatorSpec{WaveType::Triangle, 0.0, Envelope::constant(10.0),
                                 Envelope::constant(6.0)};
    RandomStream rng(1);
    SampleBuffer buf = render_partial(c, rng, rate);

    const double dt = 1.0 / rate;
    Kahan th, th_am, th_fm;
    double worst = 0.0;
    for (Eigen::Index n = 0; n < buf.length(); ++n) {
        double a = 0.6 + 0.1 * sqr(th_am.sum + 0.75);
        double f = 440.0 + 10.0 * tri(th_fm.sum + 0.0);
        CHECK(f >= 430.0);
        CHECK(f <= 450.0);
        double ref = a * std::sin(th.sum + 0.2);
        worst = std::max(worst, std::abs(buf.channels[0](n) - ref));
        th.add(kTwoPi * f * dt);
        th_am.add(kTwoPi * 3.0 * dt);
        th_fm.add(kTwoPi * 6.0 * dt);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("synth: modulated frequency leaving (0, Nyquist) raises") {
    ICard c = make_card(100.0, 1.0, 0.5);
    c.partial.fm = ModulatorSpec{WaveType::Sine, 0.0, Envelope::constant(200.0),
                                 Envelope::constant(5.0)};
    RandomStream rng(1);
    CHECK_THROWS_AS(render_partial(c, rng, 44100), RenderError);
}

TEST_CASE("synth: phase stays continuous across envelope joins") {
    const int rate = 44100;
    ICard c = make_card(440.0, 1.0, 1.0);
    c.partial.freq_env =
        Envelope::from_breakpoints({{0.0, 440.0}, {0.5, 880.0}, {1.0, 440.0}});
    RandomStream rng(1);
    SampleBuffer buf = render_partial(c, rng, rate);
    double bound = kTwoPi * 881.0 / rate + 1e-6;  // derivative bound for a swept sine
    for (Eigen::Index n = 1; n < buf.length(); ++n)
        CHECK(std::abs(buf.channels[0](n) - buf.channels[0](n - 1)) <= bound);
}

TEST_CASE("synth: silent envelope renders exact zeros") {
    ICard c = make_card(440.0, 0.0, 0.25);
    RandomStream rng(1);
    SampleBuffer buf = render_partial(c, rng, 44100);
    CHECK(buf.channels[0].abs().maxCoeff() == 0.0);
}

TEST_CASE("synth: gain envelope scales samples exactly") {
    ICard c = make_card(330.0, 0.8, 0.3, 0.1);
    RandomStream r1(1), r2(1);
    SampleBuffer unit = render_partial(c, r1, 44100);
    c.gain_env = Envelope::constant(0.25);
    SampleBuffer quarter = render_partial(c, r2, 44100);
    CHECK(max_abs_diff(quarter.channels[0], 0.25 * unit.channels[0]) == 0.0);
}

TEST_CASE("synth: transient draws are schedule-free") {
    ICard c = make_card(500.0, 0.5, 0.8);
    c.partial.amp_transient =
        TransientSpec{0.3, Envelope::constant(1.0), 40.0, Envelope::constant(1.0)};
    c.partial.freq_transient =
        TransientSpec{0.05, Envelope::constant(1.0), 15.0, Envelope::constant(0.7)};

    // identical seeds give identical audio
    RandomStream a(42), b(42);
    SampleBuffer ba = render_partial(c, a, 44100);
    SampleBuffer bb = render_partial(c, b, 44100);
    CHECK(max_abs_diff(ba.channels[0], bb.channels[0]) == 0.0);
    CHECK(a.draws() == b.draws());
    CHECK(a.draws() > 0);

    // the stream advance does not depend on the sample rate
    RandomStream lo(42), hi(42);
    render_partial(c, lo, 22050);
    render_partial(c, hi, 96000);
    CHECK(lo.draws() == hi.draws());
    CHECK(lo.draws() == a.draws());

    // transients actually perturb the signal
    ICard plain = make_card(500.0, 0.5, 0.8);
    RandomStream p(42);
    SampleBuffer bp = render_partial(plain, p, 44100);
    CHECK(max_abs_diff(ba.channels[0], bp.channels[0]) > 1e-6);

    // zero rate means no draws and a clean carrier
    ICard quiet = make_card(500.0, 0.5, 0.8);
    quiet.partial.amp_transient =
        TransientSpec{0.3, Envelope::constant(1.0), 0.0, Envelope::constant(1.0)};
    RandomStream q(42);
    SampleBuffer bq = render_partial(quiet, q, 44100);
    CHECK(q.draws() == 0);
    CHECK(max_abs_diff(bq.channels[0], bp.channels[0]) == 0.0);
}

TEST_CASE("synth: reverb bypass, echo timing and tail length") {
    const int rate = 44100;
    SampleBuffer imp;
    imp.rate = rate;
    imp.start_frame = 0;
    imp.channels = {Eigen::ArrayXd::Zero(rate / 4)};
    imp.channels[0](0) = 1.0;

    ReverbSpec off{1.0, 3.0, 0.0, 20.0, 0.7};
    SampleBuffer same = apply_reverb(imp, off);
    CHECK(same.length() == imp.length());
    CHECK(max_abs_diff(same.channels[0], imp.channels[0]) == 0.0);

    ReverbSpec wet{1.0, 3.0, 1.0, 20.0, 0.7};
    SampleBuffer out = apply_reverb(imp, wet);
    CHECK(out.length() == imp.length() + rate);  // llround(1.0 * rate) of tail

    // shortest delay line: rate * hall / 343; first echo carries g0
    auto d0 = static_cast<Eigen::Index>(std::llround(rate * 20.0 / 343.0));
    double g0 = 0.7 * std::exp(-3.0 * static_cast<double>(d0) / rate);
    CHECK(out.channels[0](0) == 1.0);
    for (Eigen::Index n = 1; n < d0; ++n) CHECK(out.channels[0](n) == 0.0);
    CHECK(out.channels[0](d0) == doctest::Approx(g0).epsilon(1e-12));

    // zero reflection: wet equals dry, so any mix returns the input + silence
    ReverbSpec dead{0.5, 3.0, 0.5, 20.0, 0.0};
    SampleBuffer thru = apply_reverb(imp, dead);
    CHECK(max_abs_diff(thru.channels[0].head(imp.length()), imp.channels[0]) == 0.0);
    CHECK(thru.channels[0].tail(thru.length() - imp.length()).abs().maxCoeff() == 0.0);
}

TEST_CASE("synth: constant-power pan") {
    SampleBuffer mono;
    mono.rate = 44100;
    mono.start_frame = 100;
    mono.channels = {Eigen::ArrayXd::Constant(1000, 1.0)};

    SampleBuffer mid = pan(mono, Envelope::constant(0.5));
    REQUIRE(mid.channels.size() == 2);
    CHECK(mid.start_frame == 100);
    CHECK(max_abs_diff(mid.channels[0], mid.channels[1]) < 1e-15);
    CHECK(mid.channels[0](0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

    SampleBuffer left = pan(mono, Envelope::constant(0.0));
    CHECK(left.channels[1].abs().maxCoeff() == 0.0);  // hard left: right is silent
    CHECK(max_abs_diff(left.channels[0], mono.channels[0]) == 0.0);

    // sweep left-to-right: right gain grows, left gain shrinks
    SampleBuffer sweep = pan(mono, Envelope::from_breakpoints({{0.0, 0.0}, {1.0, 1.0}}));
    for (Eigen::Index n = 1; n < sweep.length(); ++n) {
        CHECK(sweep.channels[1](n) >= sweep.channels[1](n - 1) - 1e-15);
        CHECK(sweep.channels[0](n) <= sweep.channels[0](n - 1) + 1e-15);
    }
    // constant power: L^2 + R^2 == 1 everywhere for a unit input
    for (Eigen::Index n = 0; n < sweep.length(); ++n) {
        double p = sweep.channels[0](n) * sweep.channels[0](n) +
                   sweep.channels[1](n) * sweep.channels[1](n);
        CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(pan(mid, Envelope::constant(0.5)), RenderError);  // stereo input
}

TEST_CASE("synth: render_sound composes partial, reverb and pan") {
    const int rate = 44100;
    ICard c = make_card(440.0, 0.7, 0.5, 0.1);
    c.reverb = ReverbSpec{0.3, 2.0, 0.25, 15.0, 0.6};
    c.pan_env = Envelope::constant(0.3);

    SampleBuffer whole = render_sound({c}, 9, rate);
    RandomStream rng(9);
    SampleBuffer manual = pan(apply_reverb(render_partial(c, rng, rate), *c.reverb), c.pan_env);
    REQUIRE(whole.channels.size() == 2);
    CHECK(whole.length() == manual.length());
    CHECK(max_abs_diff(whole.channels[0], manual.channels[0]) == 0.0);
    CHECK(max_abs_diff(whole.channels[1], manual.channels[1]) == 0.0);
}

TEST_CASE("synth: two identical partials double the signal exactly") {
    ICard a = make_card(440.0, 0.3, 0.5, 0.2);
    ICard b = a;
    b.partial_index = 1;
    SampleBuffer solo = render_sound({a}, 5, 44100);
    SampleBuffer duo = render_sound({a, b}, 5, 44100);
    for (int ch = 0; ch < 2; ++ch)
        CHECK(max_abs_diff(duo.channels[ch], 2.0 * solo.channels[ch]) == 0.0);
}

TEST_CASE("synth: render_sound is deterministic and validates its input") {
    ICard c = make_card(440.0, 0.5, 0.25);
    c.partial.amp_transient =
        TransientSpec{0.2, Envelope::constant(1.0), 30.0, Envelope::constant(1.0)};
    SampleBuffer x = render_sound({c}, 123, 44100);
    SampleBuffer y = render_sound({c}, 123, 44100);
    CHECK(max_abs_diff(x.channels[0], y.channels[0]) == 0.0);
    CHECK(max_abs_diff(x.channels[1], y.channels[1]) == 0.0);

    // a different seed moves the transients
    SampleBuffer z = render_sound({c}, 124, 44100);
    CHECK(max_abs_diff(x.channels[0], z.channels[0]) > 0.0);

    CHECK_THROWS_AS(render_sound({}, 1, 44100), ValidationError);
    ICard other = make_card(550.0, 0.5, 0.25);
    other.sound_id = 2;
    CHECK_THROWS_AS(render_sound({c, other}, 1, 44100), ValidationError);
}

TEST_CASE("synth: random stream is pinned to mt64-u53 v1") {
    RandomStream r(0);
    std::mt19937_64 ref(0);
    for (int i = 0; i < 100; ++i) {
        double expect = static_cast<double>(ref() >> 11) * 0x1.0p-53;
        double got = r.next_unit();
        CHECK(got == expect);
        CHECK(got >= 0.0);
        CHECK(got < 1.0);
    }
    CHECK(r.draws() == 100);
}
