#include "diass/score.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "diass/errors.hpp"

namespace diass {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kNyquistGuardHz = 1.0;

struct Token {
    int col = 1;  // 1-based
    std::string text;
};

std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        out.push_back({static_cast<int>(start) + 1, line.substr(start, i - start)});
    }
    return out;
}

double parse_num(std::string_view sv, int line, int col) {
    double v{};
    const auto* end = sv.data() + sv.size();
    auto [p, ec] = std::from_chars(sv.data(), end, v);
    if (ec != std::errc{} || p != end || !std::isfinite(v))
        throw ParseError("invalid number '" + std::string(sv) + "'", line, col);
    return v;
}

std::uint64_t parse_uint(std::string_view sv, int line, int col) {
    std::uint64_t v{};
    const auto* end = sv.data() + sv.size();
    auto [p, ec] = std::from_chars(sv.data(), end, v);
    if (ec != std::errc{} || p != end)
        throw ParseError("invalid unsigned integer '" + std::string(sv) + "'", line, col);
    return v;
}

std::vector<std::string_view> split(std::string_view sv, char sep) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = sv.find(sep, pos);
        if (next == std::string_view::npos) {
            parts.push_back(sv.substr(pos));
            break;
        }
        parts.push_back(sv.substr(pos, next - pos));
        pos = next + 1;
    }
    return parts;
}

// Smallest power of two >= m; keeps normalize/denormalize division exact so
// the canonical text form round-trips bit-for-bit.
double pow2_scale(double m) {
    if (m <= 0.0) return 0.0;
    int e = 0;
    const double fr = std::frexp(m, &e);  // m = fr * 2^e, fr in [0.5, 1)
    return fr == 0.5 ? m : std::ldexp(1.0, e);
}

Envelope parse_envelope_value(std::string_view sv, int line, int col, bool allow_sones) {
    const auto starts = [&](std::string_view prefix) {
        return sv.size() > prefix.size() && sv.substr(0, prefix.size()) == prefix;
    };
    if (starts("const:")) return Envelope::constant(parse_num(sv.substr(6), line, col));
    if (starts("sones:")) {
        if (!allow_sones)
            throw ParseError("'sones:' only applies to loudness", line, col);
        return Envelope::constant(parse_num(sv.substr(6), line, col));
    }
    if (!starts("env:")) return Envelope::constant(parse_num(sv, line, col));

    const auto pieces = split(sv.substr(4), ';');
    if (pieces.size() < 2)
        throw ParseError("envelope literal needs an initial value and at least one segment",
                         line, col);
    std::vector<double> naturals;
    naturals.push_back(parse_num(pieces[0], line, col));
    Envelope env;
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        const auto fields = split(pieces[i], ',');
        if (fields.size() != 3)
            throw ParseError("envelope segment must be 'frac,target,lin|exp'", line, col);
        EnvSegment seg;
        seg.frac = parse_num(fields[0], line, col);
        naturals.push_back(parse_num(fields[1], line, col));
        if (fields[2] == "lin")
            seg.shape = EnvShape::Linear;
        else if (fields[2] == "exp")
            seg.shape = EnvShape::Exponential;
        else
            throw ParseError("envelope shape must be 'lin' or 'exp', got '" +
                             std::string(fields[2]) + "'", line, col);
        env.segments.push_back(seg);
    }
    double peak = 0.0;
    for (double v : naturals) {
        if (v < 0.0)
            throw ParseError("negative envelope value " + std::to_string(v), line, col);
        peak = std::max(peak, v);
    }
    env.scale = pow2_scale(peak);
    const double inv = env.scale > 0.0 ? 1.0 / env.scale : 0.0;
    env.initial = naturals[0] * inv;
    for (std::size_t i = 0; i < env.segments.size(); ++i)
        env.segments[i].target = naturals[i + 1] * inv;
    return env;
}

WaveType parse_wave(std::string_view sv, int line, int col) {
    if (sv == "sine") return WaveType::Sine;
    if (sv == "triangle") return WaveType::Triangle;
    if (sv == "square") return WaveType::Square;
    throw ParseError("wave type must be sine|triangle|square, got '" + std::string(sv) + "'",
                     line, col);
}

ModulatorSpec parse_modulator(std::string_view sv, int line, int col) {
    const auto parts = split(sv, '/');
    if (parts.size() != 4)
        throw ParseError("modulator must be 'wave/phase/depth/rate'", line, col);
    ModulatorSpec m;
    m.wave = parse_wave(parts[0], line, col);
    m.phase = parse_num(parts[1], line, col);
    m.amp_env = parse_envelope_value(parts[2], line, col, false);
    m.freq_env = parse_envelope_value(parts[3], line, col, false);
    return m;
}

TransientSpec parse_transient(std::string_view sv, int line, int col) {
    const auto parts = split(sv, '/');
    if (parts.size() != 4)
        throw ParseError("transient must be 'size/shape/rate/rateenv'", line, col);
    TransientSpec t;
    t.max_size = parse_num(parts[0], line, col);
    t.shape_env = parse_envelope_value(parts[1], line, col, false);
    t.max_rate = parse_num(parts[2], line, col);
    t.rate_env = parse_envelope_value(parts[3], line, col, false);
    return t;
}

struct Attr {
    std::string key;
    std::string value;
    int col = 1;
};

std::vector<Attr> parse_attrs(const std::vector<Token>& tokens, std::size_t first, int line) {
    std::vector<Attr> attrs;
    for (std::size_t i = first; i < tokens.size(); ++i) {
        const auto& tok = tokens[i];
        const std::size_t eq = tok.text.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError("expected key=value, got '" + tok.text + "'", line, tok.col);
        attrs.push_back({tok.text.substr(0, eq), tok.text.substr(eq + 1), tok.col});
    }
    return attrs;
}

class AttrReader {
public:
    AttrReader(std::vector<Attr> attrs, int line, std::string ctx)
        : attrs_(std::move(attrs)), used_(attrs_.size(), false), line_(line),
          ctx_(std::move(ctx)) {}

    const Attr* find(const std::string& key) {
        for (std::size_t i = 0; i < attrs_.size(); ++i) {
            if (attrs_[i].key == key) {
                used_[i] = true;
                return &attrs_[i];
            }
        }
        return nullptr;
    }
    const Attr& require(const std::string& key) {
        const Attr* a = find(key);
        if (!a) throw ParseError(ctx_ + " is missing required attribute '" + key + "'", line_, 1);
        return *a;
    }
    double num(const std::string& key, double fallback) {
        const Attr* a = find(key);
        return a ? parse_num(a->value, line_, a->col) : fallback;
    }
    void finish() {
        for (std::size_t i = 0; i < attrs_.size(); ++i)
            if (!used_[i])
                throw ParseError(ctx_ + ": unknown attribute '" + attrs_[i].key + "'", line_,
                                 attrs_[i].col);
    }
    int line() const { return line_; }

private:
    std::vector<Attr> attrs_;
    std::vector<bool> used_;
    int line_;
    std::string ctx_;
};

}  // namespace

Score parse_score(std::istream& in) {
    Score score;
    Sound* current = nullptr;
    bool seen_header = false;
    bool seen_sound = false;
    std::string raw;
    int lineno = 0;

    while (std::getline(in, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const auto tokens = tokenize(raw);
        if (tokens.empty()) continue;
        const auto& kw = tokens[0];

        if (!seen_header) {
            if (kw.text != "diass-score" || tokens.size() != 2)
                throw ParseError("expected 'diass-score 1' header", lineno, kw.col);
            if (tokens[1].text != std::to_string(kScoreGrammarVersion))
                throw ParseError("unsupported score grammar version '" + tokens[1].text + "'",
                                 lineno, tokens[1].col);
            seen_header = true;
            continue;
        }

        if (kw.text == "rate" || kw.text == "channels" || kw.text == "calibration_db") {
            if (seen_sound)
                throw ParseError("'" + kw.text + "' must precede the first sound", lineno, kw.col);
            if (tokens.size() != 2)
                throw ParseError("'" + kw.text + "' takes exactly one value", lineno, kw.col);
            if (kw.text == "rate")
                score.sample_rate = static_cast<int>(parse_uint(tokens[1].text, lineno,
                                                                tokens[1].col));
            else if (kw.text == "channels")
                score.channels = static_cast<int>(parse_uint(tokens[1].text, lineno,
                                                             tokens[1].col));
            else
                score.calibration_db = parse_num(tokens[1].text, lineno, tokens[1].col);
            continue;
        }

        if (kw.text == "sound") {
            seen_sound = true;
            AttrReader r(parse_attrs(tokens, 1, lineno), lineno, "sound");
            Sound s;
            s.id = parse_uint(r.require("id").value, lineno, r.require("id").col);
            s.start = r.num("start", 0.0);
            s.duration = parse_num(r.require("dur").value, lineno, r.require("dur").col);
            const Attr& loud = r.require("loudness");
            s.loudness_env = parse_envelope_value(loud.value, lineno, loud.col, true);
            if (const Attr* p = r.find("pan"))
                s.pan_env = parse_envelope_value(p->value, lineno, p->col, false);
            else
                s.pan_env = Envelope::constant(0.5);
            if (const Attr* sd = r.find("seed"))
                s.rng_seed = parse_uint(sd->value, lineno, sd->col);
            else
                s.rng_seed = s.id;
            r.finish();
            score.sounds.push_back(std::move(s));
            current = &score.sounds.back();
            continue;
        }

        if (kw.text == "reverb" || kw.text == "harmonic" || kw.text == "partial") {
            if (!current)
                throw ParseError("'" + kw.text + "' outside a sound block", lineno, kw.col);
        }

        if (kw.text == "reverb") {
            if (current->reverb)
                throw ParseError("duplicate reverb for sound " + std::to_string(current->id),
                                 lineno, kw.col);
            AttrReader r(parse_attrs(tokens, 1, lineno), lineno, "reverb");
            ReverbSpec rv;
            rv.duration = parse_num(r.require("dur").value, lineno, r.require("dur").col);
            rv.decay_rate = parse_num(r.require("decay").value, lineno, r.require("decay").col);
            rv.mix = parse_num(r.require("mix").value, lineno, r.require("mix").col);
            rv.hall_size = r.num("hall", 20.0);
            rv.reflection = r.num("refl", 0.7);
            r.finish();
            current->reverb = rv;
            continue;
        }

        if (kw.text == "harmonic") {
            AttrReader r(parse_attrs(tokens, 1, lineno), lineno, "harmonic");
            HarmonicMacro m;
            m.fundamental = parse_num(r.require("f0").value, lineno, r.require("f0").col);
            if (const Attr* mx = r.find("max"))
                m.max_partials = mx->value == "auto"
                                     ? 0
                                     : static_cast<int>(parse_uint(mx->value, lineno, mx->col));
            r.finish();
            current->macros.push_back(m);
            continue;
        }

        if (kw.text == "partial") {
            AttrReader r(parse_attrs(tokens, 1, lineno), lineno, "partial");
            Partial p;
            const Attr& f = r.require("f");
            p.freq_env = parse_envelope_value(f.value, lineno, f.col, false);
            const Attr& a = r.require("a");
            p.amp_env = parse_envelope_value(a.value, lineno, a.col, false);
            p.phase = r.num("phase", 0.0);
            const double offset = r.num("start", 0.0);
            p.start_time = current->start + offset;
            p.duration = r.num("dur", current->duration - offset);
            if (const Attr* am = r.find("am")) p.am = parse_modulator(am->value, lineno, am->col);
            if (const Attr* fm = r.find("fm")) p.fm = parse_modulator(fm->value, lineno, fm->col);
            if (const Attr* at = r.find("at"))
                p.amp_transient = parse_transient(at->value, lineno, at->col);
            if (const Attr* ft = r.find("ft"))
                p.freq_transient = parse_transient(ft->value, lineno, ft->col);
            r.finish();
            current->partials.push_back(std::move(p));
            continue;
        }

        throw ParseError("unknown keyword '" + kw.text + "'", lineno, kw.col);
    }
    if (!seen_header) throw ParseError("missing 'diass-score 1' header", 1, 1);

    std::stable_sort(score.sounds.begin(), score.sounds.end(),
                     [](const Sound& a, const Sound& b) {
                         return a.start != b.start ? a.start < b.start : a.id < b.id;
                     });
    validate_score(score);
    return score;
}

Score parse_score(const std::string& text) {
    std::istringstream in(text);
    return parse_score(in);
}

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

std::string fmt_env(const Envelope& e, const char* const_prefix) {
    if (e.is_constant()) return std::string(const_prefix) + fmt(e.scale * e.initial);
    std::string out = "env:" + fmt(e.scale * e.initial);
    for (const auto& seg : e.segments) {
        out += ';';
        out += fmt(seg.frac);
        out += ',';
        out += fmt(e.scale * seg.target);
        out += ',';
        out += seg.shape == EnvShape::Exponential ? "exp" : "lin";
    }
    return out;
}

const char* wave_name(WaveType w) {
    switch (w) {
        case WaveType::Triangle: return "triangle";
        case WaveType::Square: return "square";
        default: return "sine";
    }
}

std::string fmt_modulator(const ModulatorSpec& m) {
    return std::string(wave_name(m.wave)) + "/" + fmt(m.phase) + "/" +
           fmt_env(m.amp_env, "const:") + "/" + fmt_env(m.freq_env, "const:");
}

std::string fmt_transient(const TransientSpec& t) {
    return fmt(t.max_size) + "/" + fmt_env(t.shape_env, "const:") + "/" + fmt(t.max_rate) + "/" +
           fmt_env(t.rate_env, "const:");
}

}  // namespace

std::string serialize_score(const Score& score) {
    std::string out = "diass-score " + std::to_string(kScoreGrammarVersion) + "\n";
    out += "rate " + std::to_string(score.sample_rate) + "\n";
    out += "channels " + std::to_string(score.channels) + "\n";
    out += "calibration_db " + fmt(score.calibration_db) + "\n";
    for (const auto& s : score.sounds) {
        out += "sound id=" + std::to_string(s.id) + " start=" + fmt(s.start) +
               " dur=" + fmt(s.duration) + " loudness=" + fmt_env(s.loudness_env, "sones:") +
               " pan=" + fmt_env(s.pan_env, "const:") + " seed=" + std::to_string(s.rng_seed) +
               "\n";
        if (s.reverb) {
            const auto& r = *s.reverb;
            out += "  reverb dur=" + fmt(r.duration) + " decay=" + fmt(r.decay_rate) +
                   " mix=" + fmt(r.mix) + " hall=" + fmt(r.hall_size) +
                   " refl=" + fmt(r.reflection) + "\n";
        }
        for (const auto& m : s.macros) {
            out += "  harmonic f0=" + fmt(m.fundamental);
            out += m.max_partials > 0 ? " max=" + std::to_string(m.max_partials) : " max=auto";
            out += "\n";
        }
        for (const auto& p : s.partials) {
            out += "  partial f=" + fmt_env(p.freq_env, "const:") +
                   " a=" + fmt_env(p.amp_env, "const:") + " phase=" + fmt(p.phase) +
                   " start=" + fmt(p.start_time - s.start) + " dur=" + fmt(p.duration);
            if (p.am) out += " am=" + fmt_modulator(*p.am);
            if (p.fm) out += " fm=" + fmt_modulator(*p.fm);
            if (p.amp_transient) out += " at=" + fmt_transient(*p.amp_transient);
            if (p.freq_transient) out += " ft=" + fmt_transient(*p.freq_transient);
            out += "\n";
        }
    }
    return out;
}

Score expand_macros(const Score& score) {
    Score out = score;
    for (auto& s : out.sounds) {
        if (s.macros.empty()) continue;
        const double nyquist = out.sample_rate / 2.0;
        std::vector<Partial> emitted;
        for (const auto& m : s.macros) {
            const int cap = static_cast<int>(std::floor((nyquist - kNyquistGuardHz) /
                                                        m.fundamental));
            if (cap < 1)
                throw ValidationError("sound " + std::to_string(s.id) +
                                      ": harmonic fundamental " + std::to_string(m.fundamental) +
                                      " Hz leaves no partial below Nyquist");
            const int n = m.max_partials > 0 ? std::min(m.max_partials, cap) : cap;
            for (int k = 1; k <= n; ++k) {
                Partial p;
                p.start_time = s.start;
                p.duration = s.duration;
                // Schroeder phases keep the crest factor of the harmonic
                // stack bounded; zero phases would pile every partial's
                // peak onto t = 0.
                double ph = std::fmod(-kPi * double(k) * double(k - 1) / double(n), kTwoPi);
                if (ph < 0.0) ph += kTwoPi;
                if (ph >= kTwoPi) ph = 0.0;
                p.phase = ph;
                p.freq_env = Envelope::constant(m.fundamental * k);
                emitted.push_back(std::move(p));
            }
        }
        const double amp = 1.0 / static_cast<double>(emitted.size());
        for (auto& p : emitted) p.amp_env = Envelope::constant(amp);
        s.partials.insert(s.partials.end(), std::make_move_iterator(emitted.begin()),
                          std::make_move_iterator(emitted.end()));
        s.macros.clear();
    }
    return out;
}

std::vector<ICard> lower_to_icards(const Score& score) {
    std::vector<std::size_t> order(score.sounds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::pair<double, double>> spans;
    spans.reserve(score.sounds.size());
    for (const auto& s : score.sounds) {
        if (!s.macros.empty())
            throw ValidationError("sound " + std::to_string(s.id) +
                                  " still carries a macro; run expand_macros first");
        spans.push_back(sound_span(s));
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (spans[a].first != spans[b].first) return spans[a].first < spans[b].first;
        return score.sounds[a].id < score.sounds[b].id;
    });

    std::vector<ICard> cards;
    for (std::size_t idx : order) {
        const Sound& s = score.sounds[idx];
        for (std::size_t i = 0; i < s.partials.size(); ++i) {
            ICard c;
            c.sound_id = s.id;
            c.partial_index = static_cast<int>(i);
            c.partial = s.partials[i];
            c.pan_env = s.pan_env;
            c.reverb = s.reverb;
            c.rng_seed = s.rng_seed;
            c.sound_start = spans[idx].first;
            c.sound_end = spans[idx].second;
            cards.push_back(std::move(c));
        }
    }
    return cards;
}

}  // namespace diass
