#include "diass/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diass/errors.hpp"

namespace diass {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kTransientDecaySec = 0.03;  // linear decay span of one event
constexpr double kSpeedOfSound = 343.0;      // m/s, sets hall delay

double wave_value(WaveType w, double theta) {
    switch (w) {
        case WaveType::Sine:
            return std::sin(theta);
        case WaveType::Triangle: {
            double y = theta * (1.0 / kTwoPi);
            y -= std::floor(y);
            if (y < 0.25) return 4.0 * y;
            if (y < 0.75) return 2.0 - 4.0 * y;
            return 4.0 * y - 4.0;
        }
        case WaveType::Square: {
            double y = theta * (1.0 / kTwoPi);
            y -= std::floor(y);
            return y < 0.5 ? 1.0 : -1.0;
        }
    }
    return 0.0;
}

// Compensated phase accumulator: keeps the integrated phase within a few
// ulp of the exact sum so constant-frequency partials match the closed-form
// sine to better than 1e-9.
struct KahanPhase {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

struct TransientEvent {
    double t = 0.0;     // seconds after partial onset
    double size = 0.0;  // signed fractional offset of the carrier
};

// Poisson process at max_rate * rate_env via thinning.  Draw order and
// count depend only on (spec, dur, stream state), never on the sample rate
// or thread scheduling.
std::vector<TransientEvent> draw_events(const TransientSpec& ts, double dur, RandomStream& rng) {
    std::vector<TransientEvent> events;
    const double rate_peak = ts.rate_env.max_value();
    const double lam = ts.max_rate * rate_peak;
    if (!(lam > 0.0)) return events;
    double t = 0.0;
    while (true) {
        t += -std::log1p(-rng.next_unit()) / lam;
        if (t >= dur) break;
        const double u = t / dur;
        if (rng.next_unit() * rate_peak <= ts.rate_env.value_at(u)) {
            const double size = ts.max_size * ts.shape_env.value_at(u) * rng.next_signed();
            if (size != 0.0) events.push_back({t, size});
        }
    }
    return events;
}

// Streaming sum of active transient offsets; t must be non-decreasing.
class TransientTrack {
public:
    explicit TransientTrack(std::vector<TransientEvent> ev) : ev_(std::move(ev)) {}

    bool empty() const { return ev_.empty(); }
    double offset_at(double t) {
        while (first_ < ev_.size() && ev_[first_].t + kTransientDecaySec <= t) ++first_;
        double sum = 0.0;
        for (std::size_t i = first_; i < ev_.size() && ev_[i].t <= t; ++i)
            sum += ev_[i].size * (1.0 - (t - ev_[i].t) / kTransientDecaySec);
        return sum;
    }

private:
    std::vector<TransientEvent> ev_;
    std::size_t first_ = 0;
};

// Sample indices n with start <= n/rate < start+dur.
std::pair<std::int64_t, std::int64_t> frame_range(double start, double dur, int rate) {
    const auto first = static_cast<std::int64_t>(std::ceil(start * rate - 1e-9));
    const auto last = static_cast<std::int64_t>(std::ceil((start + dur) * rate - 1e-9));
    return {first, std::max(first, last)};
}

}  // namespace

SampleBuffer render_partial(const ICard& card, RandomStream& rng, int rate) {
    const Partial& p = card.partial;
    const auto [n0, n1] = frame_range(p.start_time, p.duration, rate);

    // Transient draws happen unconditionally and in a fixed order (amplitude
    // first) so the stream position after this partial is schedule-free.
    TransientTrack amp_track(p.amp_transient ? draw_events(*p.amp_transient, p.duration, rng)
                                             : std::vector<TransientEvent>{});
    TransientTrack freq_track(p.freq_transient ? draw_events(*p.freq_transient, p.duration, rng)
                                               : std::vector<TransientEvent>{});

    SampleBuffer out;
    out.rate = rate;
    out.start_frame = n0;
    out.channels = {Eigen::ArrayXd::Zero(n1 - n0)};
    auto& samples = out.channels[0];

    EnvelopeCursor amp_cur(p.amp_env);
    EnvelopeCursor freq_cur(p.freq_env);
    EnvelopeCursor gain_cur(card.gain_env);
    std::optional<EnvelopeCursor> am_depth, am_rate, fm_depth, fm_rate;
    if (p.am) {
        am_depth.emplace(p.am->amp_env);
        am_rate.emplace(p.am->freq_env);
    }
    if (p.fm) {
        fm_depth.emplace(p.fm->amp_env);
        fm_rate.emplace(p.fm->freq_env);
    }

    const double dt = 1.0 / rate;
    const double nyquist = rate / 2.0;
    const double sound_span = card.sound_end - card.sound_start;
    KahanPhase theta, th_am, th_fm;

    for (std::int64_t n = n0; n < n1; ++n) {
        const double t_abs = static_cast<double>(n) * dt;
        const double t_rel = t_abs - p.start_time;
        const double u = std::clamp(t_rel / p.duration, 0.0, 1.0);

        double a = amp_cur.eval(u);
        if (!amp_track.empty()) a *= 1.0 + amp_track.offset_at(t_rel);
        if (p.am) a += am_depth->eval(u) * wave_value(p.am->wave, th_am.sum + p.am->phase);

        double f = freq_cur.eval(u);
        if (!freq_track.empty()) f *= 1.0 + freq_track.offset_at(t_rel);
        if (p.fm) f += fm_depth->eval(u) * wave_value(p.fm->wave, th_fm.sum + p.fm->phase);
        if (!(f > 0.0 && f < nyquist))
            throw RenderError("sound " + std::to_string(card.sound_id) + " partial " +
                              std::to_string(card.partial_index) +
                              ": instantaneous frequency " + std::to_string(f) +
                              " Hz outside (0, " + std::to_string(nyquist) + ")");

        const double us =
            sound_span > 0.0 ? std::clamp((t_abs - card.sound_start) / sound_span, 0.0, 1.0) : 0.0;
        samples(n - n0) = gain_cur.eval(us) * a * std::sin(theta.sum + p.phase);

        theta.add(kTwoPi * f * dt);
        if (p.am) th_am.add(kTwoPi * am_rate->eval(u) * dt);
        if (p.fm) th_fm.add(kTwoPi * fm_rate->eval(u) * dt);
    }
    return out;
}

SampleBuffer apply_reverb(const SampleBuffer& buf, const ReverbSpec& spec) {
    if (spec.mix <= 0.0) return buf;  // exact bypass

    const int rate = buf.rate;
    const auto tail = static_cast<std::int64_t>(std::llround(spec.duration * rate));
    // Slightly detuned delay-line lengths avoid coincident echoes.
    static constexpr double kLineRatios[4] = {1.0, 1.17, 1.31, 1.47};
    std::int64_t delay[4];
    double gain[4];
    for (int i = 0; i < 4; ++i) {
        delay[i] = std::max<std::int64_t>(
            1, std::llround(rate * spec.hall_size / kSpeedOfSound * kLineRatios[i]));
        gain[i] = spec.reflection *
                  std::exp(-spec.decay_rate * static_cast<double>(delay[i]) / rate);
    }

    SampleBuffer out;
    out.rate = rate;
    out.start_frame = buf.start_frame;
    const Eigen::Index len = buf.length();
    const Eigen::Index total = len + static_cast<Eigen::Index>(tail);
    out.channels.reserve(buf.channels.size());

    for (const auto& x : buf.channels) {
        std::vector<double> line[4];
        std::size_t pos[4] = {0, 0, 0, 0};
        for (int i = 0; i < 4; ++i) line[i].assign(static_cast<std::size_t>(delay[i]), 0.0);

        Eigen::ArrayXd mixed(total);
        for (Eigen::Index n = 0; n < total; ++n) {
            const double xn = n < len ? x(n) : 0.0;
            double fed[4];
            double wet_sum = 0.0;
            for (int i = 0; i < 4; ++i) {
                fed[i] = gain[i] * line[i][pos[i]];
                wet_sum += fed[i];
            }
            const double wet = xn + wet_sum;
            // Householder feedback mix H = I - 0.5 * ones(4,4): orthogonal,
            // so the loop stays stable for any reflection < 1.
            for (int i = 0; i < 4; ++i) {
                line[i][pos[i]] = xn + fed[i] - 0.5 * wet_sum;
                pos[i] = pos[i] + 1 == line[i].size() ? 0 : pos[i] + 1;
            }
            mixed(n) = (1.0 - spec.mix) * xn + spec.mix * wet;
        }
        out.channels.push_back(std::move(mixed));
    }
    return out;
}

SampleBuffer pan(const SampleBuffer& buf, const Envelope& pan_env) {
    if (buf.channels.size() != 1)
        throw RenderError("pan expects a mono buffer, got " +
                          std::to_string(buf.channels.size()) + " channels");
    const auto& x = buf.channels[0];
    const Eigen::Index len = x.size();
    SampleBuffer out;
    out.rate = buf.rate;
    out.start_frame = buf.start_frame;
    out.channels = {Eigen::ArrayXd(len), Eigen::ArrayXd(len)};
    EnvelopeCursor cur(pan_env);
    for (Eigen::Index n = 0; n < len; ++n) {
        const double u = len > 1 ? static_cast<double>(n) / static_cast<double>(len - 1) : 0.0;
        const double angle = cur.eval(u) * kPi * 0.5;
        out.channels[0](n) = std::cos(angle) * x(n);
        out.channels[1](n) = std::sin(angle) * x(n);
    }
    return out;
}

SampleBuffer render_sound(const std::vector<ICard>& cards, std::uint64_t seed, int rate) {
    if (cards.empty()) throw ValidationError("render_sound: no cards");
    std::vector<const ICard*> order;
    order.reserve(cards.size());
    for (const auto& c : cards) {
        if (c.sound_id != cards.front().sound_id)
            throw ValidationError("render_sound: cards from different sounds");
        order.push_back(&c);
    }
    std::sort(order.begin(), order.end(), [](const ICard* a, const ICard* b) {
        return a->partial_index < b->partial_index;
    });

    std::int64_t lo = 0, hi = 0;
    bool first = true;
    for (const ICard* c : order) {
        const auto [a, b] = frame_range(c->partial.start_time, c->partial.duration, rate);
        lo = first ? a : std::min(lo, a);
        hi = first ? b : std::max(hi, b);
        first = false;
    }

    SampleBuffer mono;
    mono.rate = rate;
    mono.start_frame = lo;
    mono.channels = {Eigen::ArrayXd::Zero(hi - lo)};
    RandomStream rng(seed);
    for (const ICard* c : order) {
        const SampleBuffer part = render_partial(*c, rng, rate);
        if (part.length() > 0)
            mono.channels[0].segment(part.start_frame - lo, part.length()) += part.channels[0];
    }

    if (cards.front().reverb) mono = apply_reverb(mono, *cards.front().reverb);
    return pan(mono, cards.front().pan_env);
}

}  // namespace diass
