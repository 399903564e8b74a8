// Regenerates the checked-in fixture scores:
//
//   box3.score     five equal-loudness clusters (32-sone analog at 22050 Hz)
//   bench236.score 236-sound / 4939-partial determinism benchmark
//   minimal.score  two-sound smoke fixture
//
// The cluster fixture freezes per-sound sone targets found by a joint solve:
// a common target per cluster, bisected until the cluster's combined
// analyzer loudness is 32 sones.
//
// Usage: gen_fixtures <out_dir>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "diass/envelope.hpp"
#include "diass/model.hpp"
#include "diass/pipeline.hpp"
#include "diass/psycho.hpp"
#include "diass/render.hpp"
#include "diass/score.hpp"
#include "diass/synth.hpp"

using namespace diass;

namespace {

struct Cluster {
    double start, dur;
    std::vector<std::pair<double, int>> f0s;  // (fundamental, cap); 0 = auto
};

// Table layout mirrored by the acceptance suite: per-sound caps chosen so
// the partial totals come out to 754/113/453/60/250 at 22050 Hz.
std::vector<Cluster> box3_clusters() {
    return {
        {0.0,
         5.5,
         {{5000, 0}, {4500, 0}, {4000, 0}, {3000, 0}, {2666, 0}, {2000, 0},
          {1666, 0}, {1333, 0}, {1000, 0}, {750, 0},  {625, 0},  {500, 0},
          {400, 0},  {300, 0},  {200, 0},  {165, 60}, {130, 60}, {90, 60},
          {80, 60},  {70, 60},  {60, 60},  {53, 60},  {46, 60},  {40, 60}}},
        {5.5, 5.5, {{4000, 0}, {1666, 0}, {750, 0}, {300, 0}, {40, 55}}},
        {11.0,
         5.5,
         {{4000, 0}, {3000, 0}, {2666, 0}, {1666, 0}, {1000, 0}, {750, 0}, {500, 0}, {300, 0},
          {200, 0},  {130, 50}, {90, 50},  {60, 50},  {53, 50},  {46, 50}, {40, 50}}},
        {16.5, 5.7, {{40, 60}}},
        {22.2, 5.5, {{4500, 0}, {2000, 0}, {1333, 0}, {1000, 0}, {625, 0}, {400, 0}, {165, 45}, {80, 45}, {70, 45}, {40, 45}}},
    };
}

Score box3_base() {
    Score score;
    score.sample_rate = 22050;
    score.channels = 2;
    score.calibration_db = 90.0;
    std::uint64_t id = 1;
    for (const Cluster& c : box3_clusters()) {
        for (auto [f0, cap] : c.f0s) {
            Sound s;
            s.id = id;
            s.rng_seed = id;
            s.start = c.start;
            s.duration = c.dur;
            s.loudness_env = Envelope::constant(1.0);
            s.pan_env = Envelope::constant(0.5);
            s.macros.push_back({f0, cap});
            score.sounds.push_back(std::move(s));
            ++id;
        }
    }
    return score;
}

// Combined analyzer loudness of sounds [i0, i1) when each is individually
// solved to `tau` sones at time t.
double cluster_loudness(const Score& expanded, std::size_t i0, std::size_t i1, double tau,
                        double t) {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = i0; i < i1; ++i) {
        const Sound& s = expanded.sounds[i];
        double sc = solve_amplitude_scale(s, t, tau, expanded.calibration_db);
        for (const Partial& p : s.partials) {
            double u = (t - p.start_time) / p.duration;
            pairs.emplace_back(eval_envelope(p.freq_env, u),
                               std::min(eval_envelope(p.amp_env, u) * sc, 1.0));
        }
    }
    return sound_loudness(pairs, expanded.calibration_db, LoudnessTable::standard());
}

Score make_box3() {
    Score base = box3_base();
    Score expanded = expand_macros(base);
    const double target = 32.0;

    std::size_t i0 = 0;
    for (const Cluster& c : box3_clusters()) {
        std::size_t i1 = i0 + c.f0s.size();
        double t = c.start + c.dur / 2.0;
        double lo = 0.25, hi = target;
        double tau = hi;
        if (cluster_loudness(expanded, i0, i1, hi, t) > target) {
            for (int it = 0; it < 60; ++it) {
                tau = 0.5 * (lo + hi);
                double got = cluster_loudness(expanded, i0, i1, tau, t);
                if (std::abs(got - target) <= 1e-3 * target) break;
                (got > target ? hi : lo) = tau;
            }
        }
        double got = cluster_loudness(expanded, i0, i1, tau, t);
        std::printf("box3 cluster start=%.1f sounds=%zu tau=%.6f combined=%.4f\n", c.start,
                    i1 - i0, tau, got);
        for (std::size_t i = i0; i < i1; ++i)
            base.sounds[i].loudness_env = Envelope::constant(tau);
        i0 = i1;
    }
    return base;
}

double round_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

Score make_bench236() {
    const int kSounds = 236;
    const int kPartials = 4939;
    const int kEffects = 20;  // explicit 3-partial sounds exercising AM/FM/transients
    RandomStream rng(20260823ULL);

    Score score;
    score.sample_rate = 44100;
    score.channels = 2;
    score.calibration_db = 90.0;

    struct Draft {
        Sound s;
        double f0 = 0.0;
        int cap = 0;
        int max_harm = 0;
    };
    std::vector<Draft> drafts;
    drafts.reserve(kSounds);

    for (int i = 0; i < kSounds; ++i) {
        Draft d;
        Sound& s = d.s;
        s.start = round_ms(rng.next_unit() * 50.0);
        s.duration = round_ms(1.5 + rng.next_unit() * 3.0);
        s.loudness_env = Envelope::constant(round_ms(1.5 + rng.next_unit() * 4.5));
        double pan_pos = round_ms(0.1 + rng.next_unit() * 0.8);
        switch (i % 3) {
            case 0:
                s.pan_env = Envelope::constant(pan_pos);
                break;
            case 1: {
                Envelope e;
                e.initial = 0.2;
                e.scale = 1.0;
                e.segments.push_back({1.0, 0.8, EnvShape::Linear});
                s.pan_env = e;
                break;
            }
            default:
                s.pan_env = Envelope::constant(0.5);
                break;
        }
        if (i % 8 == 3) s.reverb = ReverbSpec{1.0, 3.0, 0.15, 25.0, 0.6};

        if (i < kEffects) {
            double f = 220.0 * std::pow(2.0, 0.25 * (i % 10));
            Envelope amp;
            amp.initial = 0.0;
            amp.scale = 0.5;
            amp.segments.push_back({0.125, 1.0, EnvShape::Linear});
            amp.segments.push_back({0.75, 0.5, EnvShape::Linear});
            amp.segments.push_back({0.125, 0.0, EnvShape::Linear});

            Partial p0;  // tremolo carrier
            p0.start_time = s.start;
            p0.duration = s.duration;
            p0.amp_env = amp;
            p0.freq_env = Envelope::constant(f);
            p0.am = ModulatorSpec{WaveType::Sine, 0.0, Envelope::constant(0.05),
                                  Envelope::constant(5.0)};

            Partial p1;  // vibrato at the fifth
            p1.start_time = s.start;
            p1.duration = s.duration;
            p1.amp_env = amp;
            p1.freq_env = Envelope::constant(f * 1.5);
            p1.fm = ModulatorSpec{WaveType::Triangle, 0.0, Envelope::constant(4.0),
                                  Envelope::constant(4.5)};

            Partial p2;  // noisy upper partial
            p2.start_time = s.start;
            p2.duration = s.duration;
            p2.amp_env = amp;
            p2.freq_env = Envelope::constant(f * 2.0);
            p2.amp_transient =
                TransientSpec{0.2, Envelope::constant(1.0), 12.0, Envelope::constant(1.0)};
            p2.freq_transient =
                TransientSpec{0.03, Envelope::constant(1.0), 9.0, Envelope::constant(1.0)};

            s.partials = {p0, p1, p2};
        } else {
            d.f0 = 55.0 * std::pow(2.0, rng.next_unit() * 5.0);  // 55..1760 Hz
            d.f0 = std::round(d.f0 * 10.0) / 10.0;
            d.max_harm = static_cast<int>((22050.0 - 1.0) / d.f0);
            d.cap = 10 + i % 17;
        }
        drafts.push_back(std::move(d));
    }

    // Nudge macro caps until the partial total is exact.
    auto count_of = [](const Draft& d) {
        return d.f0 > 0.0 ? std::min(d.cap, d.max_harm) : static_cast<int>(d.s.partials.size());
    };
    int total = 0;
    for (const Draft& d : drafts) total += count_of(d);
    while (total != kPartials) {
        bool moved = false;
        for (Draft& d : drafts) {
            if (total == kPartials) break;
            if (d.f0 <= 0.0) continue;
            if (total < kPartials && d.cap < std::min(40, d.max_harm)) {
                ++d.cap;
                ++total;
                moved = true;
            } else if (total > kPartials && d.cap > 2 && d.cap <= d.max_harm) {
                --d.cap;
                --total;
                moved = true;
            }
        }
        if (!moved) {
            std::fprintf(stderr, "bench236: cannot reach %d partials (at %d)\n", kPartials, total);
            std::exit(1);
        }
    }

    for (Draft& d : drafts) {
        if (d.f0 > 0.0) d.s.macros.push_back({d.f0, d.cap});
        score.sounds.push_back(std::move(d.s));
    }
    std::stable_sort(score.sounds.begin(), score.sounds.end(),
                     [](const Sound& a, const Sound& b) { return a.start < b.start; });
    std::uint64_t id = 1;
    for (Sound& s : score.sounds) {
        s.id = id;
        s.rng_seed = id;
        ++id;
    }
    return score;
}

const char* kMinimalScore =
    "diass-score 1\n"
    "rate 44100\n"
    "channels 2\n"
    "calibration_db 90\n"
    "\n"
    "# Two short test tones: an explicit pair of partials, then a harmonic\n"
    "# sound with reverb and a pan sweep.\n"
    "sound id=1 start=0 dur=1.5 loudness=sones:4 pan=const:0.3 seed=7\n"
    "  partial f=440 a=env:0;0.1,1,lin;0.8,0.7,lin;0.1,0,lin phase=0\n"
    "  partial f=880 a=env:0;0.1,0.5,lin;0.8,0.35,lin;0.1,0,lin phase=1.5707963267948966\n"
    "\n"
    "sound id=2 start=1 dur=2 loudness=env:2;0.5,8,lin;0.5,4,lin pan=env:0;1,1,lin seed=11\n"
    "  reverb dur=0.8 decay=3 mix=0.2 hall=25 refl=0.6\n"
    "  harmonic f0=220 max=6\n";

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::fprintf(stderr, "cannot open %s\n", path.string().c_str());
        std::exit(1);
    }
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: gen_fixtures <out_dir>\n");
        return 1;
    }
    std::filesystem::path dir(argv[1]);
    std::filesystem::create_directories(dir);

    write_file(dir / "minimal.score", kMinimalScore);

    Score box3 = make_box3();
    write_file(dir / "box3.score", serialize_score(box3));

    Score bench = make_bench236();
    std::size_t partials = 0;
    for (const Sound& s : expand_macros(bench).sounds) partials += s.partials.size();
    std::printf("bench236 sounds=%zu partials=%zu\n", bench.sounds.size(), partials);
    write_file(dir / "bench236.score", serialize_score(bench));

    // Peak diagnostics with the anticlip pass disabled: the box3 fixture is
    // expected to stay inside full scale on its own.
    for (const char* name : {"box3", "bench236"}) {
        const Score& sc = name[1] == 'o' ? box3 : bench;
        RenderConfig cfg;
        cfg.workers = 4;
        cfg.anticlip = false;
        RenderStats stats;
        SampleBuffer mix = render_score(sc, cfg, &stats);
        double peak = 0.0;
        for (const auto& ch : mix.channels)
            if (ch.size() > 0) peak = std::max(peak, ch.abs().maxCoeff());
        std::printf("%s no-anticlip peak=%.4f sounds=%zu partials=%zu\n", name, peak, stats.sounds,
                    stats.partials);
    }
    return 0;
}
