#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "diass/envelope.hpp"
#include "diass/errors.hpp"
#include "diass/synth.hpp"

using namespace diass;

namespace {

Envelope ramp01() {
    Envelope e;
    e.initial = 0.0;
    e.scale = 1.0;
    e.segments.push_back({1.0, 1.0, EnvShape::Linear});
    return e;
}

}  // namespace

TEST_CASE("envelope: linear midpoint and endpoints") {
    Envelope e = ramp01();
    CHECK(eval_envelope(e, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(eval_envelope(e, 0.0) == 0.0);
    CHECK(eval_envelope(e, 1.0) == 1.0);

    Envelope f;
    f.initial = 0.25;
    f.scale = 8.0;
    f.segments.push_back({0.5, 0.75, EnvShape::Linear});
    f.segments.push_back({0.5, 0.5, EnvShape::Linear});
    CHECK(eval_envelope(f, 0.0) == f.scale * f.initial);  // left endpoint exact
    CHECK(eval_envelope(f, 0.5) == 8.0 * 0.75);           // breakpoint exact
    CHECK(eval_envelope(f, 1.0) == 8.0 * 0.5);
}

TEST_CASE("envelope: exponential segment matches geometric closed form") {
    Envelope e;
    e.initial = 0.1;
    e.scale = 1.0;
    e.segments.push_back({1.0, 1.0, EnvShape::Exponential});
    CHECK(eval_envelope(e, 0.5) == doctest::Approx(0.1 * std::pow(10.0, 0.5)).epsilon(1e-12));
    CHECK(eval_envelope(e, 0.5) == doctest::Approx(0.31623).epsilon(1e-4));

    // Oracle: dense polyline built by repeated multiplication with the
    // constant per-step ratio, then linear lookup.
    const int n = 200000;
    const double r = std::pow(1.0 / 0.1, 1.0 / n);
    std::vector<double> dense(n + 1);
    dense[0] = 0.1;
    for (int i = 1; i <= n; ++i) dense[i] = dense[i - 1] * r;
    RandomStream rng(7);
    for (int k = 0; k < 500; ++k) {
        double u = rng.next_unit();
        double x = u * n;
        auto i = static_cast<int>(x);
        double ref = dense[i] + (x - i) * (dense[std::min(i + 1, n)] - dense[i]);
        CHECK(eval_envelope(e, u) == doctest::Approx(ref).epsilon(1e-7));
    }
}

TEST_CASE("envelope: u outside [0,1] is a domain error") {
    Envelope e = ramp01();
    CHECK_THROWS_AS(eval_envelope(e, -0.001), std::domain_error);
    CHECK_THROWS_AS(eval_envelope(e, 1.001), std::domain_error);
}

TEST_CASE("envelope: monotone within segments, continuous at joins, bounded") {
    Envelope e;
    e.initial = 0.2;
    e.scale = 3.0;
    e.segments.push_back({0.25, 0.9, EnvShape::Linear});
    e.segments.push_back({0.25, 0.1, EnvShape::Exponential});
    e.segments.push_back({0.5, 0.6, EnvShape::Linear});
    validate_envelope(e, "test");

    double prev = eval_envelope(e, 0.0);
    for (int i = 1; i <= 2500; ++i) {  // rising first segment
        double u = 0.25 * i / 2500.0;
        double v = eval_envelope(e, u);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    for (int i = 1; i <= 2500; ++i) {  // falling exponential segment
        double u = 0.25 + 0.25 * i / 2500.0;
        double v = eval_envelope(e, u);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    // continuity across each join
    for (double b : {0.25, 0.5}) {
        double lo = eval_envelope(e, b - 1e-9);
        double hi = eval_envelope(e, b + 1e-9);
        CHECK(std::abs(hi - lo) < 1e-6 * e.scale);
    }
    RandomStream rng(11);
    for (int i = 0; i < 10000; ++i) {
        double v = eval_envelope(e, rng.next_unit());
        CHECK(v >= 0.0);
        CHECK(v <= e.scale);
    }
}

TEST_CASE("envelope: validation rejects broken invariants") {
    Envelope e = ramp01();
    e.segments[0].frac = 0.9;  // fractions must sum to 1
    CHECK_THROWS_AS(validate_envelope(e, "amp"), ValidationError);

    Envelope f = ramp01();
    f.segments[0].target = 1.5;  // normalized values live in [0,1]
    CHECK_THROWS_AS(validate_envelope(f, "amp"), ValidationError);

    Envelope g = ramp01();
    g.initial = 0.0;
    g.segments[0].shape = EnvShape::Exponential;  // zero endpoint on exp
    CHECK_THROWS_AS(validate_envelope(g, "amp"), ValidationError);

    Envelope h = ramp01();
    h.scale = -1.0;
    CHECK_THROWS_AS(validate_envelope(h, "amp"), ValidationError);
}

TEST_CASE("envelope: constant helper and breakpoint constructor") {
    Envelope c = Envelope::constant(3.5);
    validate_envelope(c, "const");
    CHECK(c.is_constant());
    CHECK(eval_envelope(c, 0.0) == 3.5);
    CHECK(eval_envelope(c, 0.7) == 3.5);
    CHECK(Envelope::constant(0.0).value_at(0.3) == 0.0);

    Envelope b = Envelope::from_breakpoints({{0.0, 2.0}, {0.25, 6.0}, {1.0, 4.0}});
    validate_envelope(b, "bp");
    CHECK(eval_envelope(b, 0.0) == 2.0);
    CHECK(eval_envelope(b, 0.25) == 6.0);
    CHECK(eval_envelope(b, 1.0) == 4.0);
    CHECK(eval_envelope(b, 0.125) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(b.max_value() == 6.0);
    CHECK(b.min_value() == 2.0);
    // power-of-two scale keeps normalize/denormalize exact
    CHECK(b.scale == 8.0);
}

TEST_CASE("envelope: cursor agrees with random-access evaluation") {
    Envelope e;
    e.initial = 0.1;
    e.scale = 2.0;
    e.segments.push_back({0.3, 0.8, EnvShape::Exponential});
    e.segments.push_back({0.2, 0.8, EnvShape::Linear});
    e.segments.push_back({0.5, 0.05, EnvShape::Exponential});
    EnvelopeCursor cur(e);
    for (int i = 0; i <= 4000; ++i) {
        double u = i / 4000.0;
        CHECK(cur.eval(u) == doctest::Approx(eval_envelope(e, u)).epsilon(1e-13));
    }
}

TEST_CASE("envelope: thinning bounds error, keeps endpoints and scale") {
    // 2000-breakpoint jagged line
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i <= 2000; ++i) {
        double u = i / 2000.0;
        pts.emplace_back(u, 5.0 + 3.0 * std::sin(12.0 * u) + 0.5 * std::sin(91.0 * u));
    }
    Envelope dense = Envelope::from_breakpoints(pts);
    Envelope thin = thin_envelope(dense, 512, 1e-3);
    validate_envelope(thin, "thin");
    CHECK(thin.segments.size() <= 512);
    CHECK(thin.scale == dense.scale);
    CHECK(eval_envelope(thin, 0.0) == eval_envelope(dense, 0.0));
    CHECK(eval_envelope(thin, 1.0) == eval_envelope(dense, 1.0));
    double worst = 0.0;
    for (int i = 0; i <= 20000; ++i) {
        double u = i / 20000.0;
        worst = std::max(worst, std::abs(eval_envelope(thin, u) - eval_envelope(dense, u)));
    }
    CHECK(worst <= 1e-3 * dense.scale + 1e-12);

    // under the cap the envelope is untouched
    Envelope small = Envelope::from_breakpoints({{0.0, 1.0}, {0.5, 2.0}, {1.0, 0.5}});
    Envelope same = thin_envelope(small, 512, 1e-3);
    CHECK(same.segments.size() == small.segments.size());
}
