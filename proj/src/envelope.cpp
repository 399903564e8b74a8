#include "diass/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "diass/errors.hpp"

namespace diass {

namespace {
constexpr double kFracSumTol = 1e-9;

double interp_segment(double v0, double v1, double w, bool exponential) {
    if (w <= 0.0) return v0;
    if (w >= 1.0) return v1;
    if (exponential) return v0 * std::pow(v1 / v0, w);
    return v0 + (v1 - v0) * w;
}

// Smallest power of two >= m; keeps normalize/denormalize division exact.
double pow2_scale(double m) {
    if (m <= 0.0) return 0.0;
    int e = 0;
    const double fr = std::frexp(m, &e);  // m = fr * 2^e, fr in [0.5, 1)
    return fr == 0.5 ? m : std::ldexp(1.0, e);
}
}  // namespace

Envelope Envelope::constant(double value) {
    Envelope env;
    env.scale = value;
    env.initial = value == 0.0 ? 0.0 : 1.0;
    env.segments = {{1.0, env.initial, EnvShape::Linear}};
    return env;
}

Envelope Envelope::from_breakpoints(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw std::invalid_argument("envelope needs at least two breakpoints");
    double peak = 0.0;
    for (const auto& [u, v] : points) {
        (void)u;
        peak = std::max(peak, std::abs(v));
    }
    Envelope env;
    env.scale = pow2_scale(peak);
    const double inv = env.scale > 0.0 ? 1.0 / env.scale : 0.0;
    env.initial = points.front().second * inv;
    env.segments.reserve(points.size() - 1);
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double frac = points[i].first - points[i - 1].first;
        if (frac <= 0.0) throw std::invalid_argument("envelope breakpoints must ascend");
        env.segments.push_back({frac, points[i].second * inv, EnvShape::Linear});
    }
    return env;
}

double Envelope::value_at(double u) const { return eval_envelope(*this, u); }

std::vector<std::pair<double, double>> Envelope::breakpoints() const {
    std::vector<std::pair<double, double>> out;
    out.reserve(segments.size() + 1);
    out.emplace_back(0.0, initial * scale);
    double c = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        c += segments[i].frac;
        if (i + 1 == segments.size()) c = 1.0;
        out.emplace_back(c, segments[i].target * scale);
    }
    return out;
}

double Envelope::max_value() const {
    double m = initial * scale;
    for (const auto& s : segments) m = std::max(m, s.target * scale);
    return m;
}

double Envelope::min_value() const {
    double m = initial * scale;
    for (const auto& s : segments) m = std::min(m, s.target * scale);
    return m;
}

bool Envelope::is_constant() const {
    for (const auto& s : segments)
        if (s.target != initial) return false;
    return true;
}

double eval_envelope(const Envelope& env, double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw std::domain_error("envelope position " + std::to_string(u) + " outside [0,1]");
    if (env.segments.empty()) return env.scale * env.initial;
    double c0 = 0.0;
    double v0 = env.initial;
    for (std::size_t k = 0; k < env.segments.size(); ++k) {
        const auto& seg = env.segments[k];
        double c1 = c0 + seg.frac;
        if (k + 1 == env.segments.size()) c1 = 1.0;
        if (u <= c1 || k + 1 == env.segments.size()) {
            if (u >= c1) return env.scale * seg.target;  // exact at breakpoints
            if (u <= c0) return env.scale * v0;
            const double w = (u - c0) / (c1 - c0);
            return env.scale * interp_segment(v0, seg.target, w, seg.shape == EnvShape::Exponential);
        }
        c0 = c1;
        v0 = seg.target;
    }
    return env.scale * env.segments.back().target;
}

void validate_envelope(const Envelope& env, const char* what) {
    const std::string name(what);
    if (!(env.scale >= 0.0) || !std::isfinite(env.scale))
        throw ValidationError(name + ": envelope scale must be finite and >= 0");
    if (env.segments.empty()) throw ValidationError(name + ": envelope has no segments");
    auto check_norm = [&](double v, const char* which) {
        if (!(v >= 0.0 && v <= 1.0) || !std::isfinite(v))
            throw ValidationError(name + ": envelope " + which + " value " + std::to_string(v) +
                                  " outside [0,1]");
    };
    check_norm(env.initial, "initial");
    double sum = 0.0;
    double prev = env.initial;
    for (const auto& seg : env.segments) {
        if (!(seg.frac > 0.0) || !std::isfinite(seg.frac))
            throw ValidationError(name + ": envelope segment fraction must be > 0");
        check_norm(seg.target, "target");
        if (seg.shape == EnvShape::Exponential && (prev == 0.0 || seg.target == 0.0))
            throw ValidationError(name + ": exponential segment touches a zero endpoint");
        sum += seg.frac;
        prev = seg.target;
    }
    if (std::abs(sum - 1.0) > kFracSumTol)
        throw ValidationError(name + ": envelope segment fractions sum to " + std::to_string(sum) +
                              ", expected 1");
}

EnvelopeCursor::EnvelopeCursor(const Envelope& env) : env_(&env) { load_segment(0); }

void EnvelopeCursor::load_segment(std::size_t k) {
    seg_ = k;
    c0_ = 0.0;
    double v0 = env_->initial;
    for (std::size_t i = 0; i < k; ++i) {
        c0_ += env_->segments[i].frac;
        v0 = env_->segments[i].target;
    }
    const auto& seg = env_->segments[k];
    c1_ = (k + 1 == env_->segments.size()) ? 1.0 : c0_ + seg.frac;
    v0_ = v0;
    v1_ = seg.target;
    exponential_ = seg.shape == EnvShape::Exponential;
}

double EnvelopeCursor::eval(double u) {
    while (u > c1_ && seg_ + 1 < env_->segments.size()) load_segment(seg_ + 1);
    if (u >= c1_) return env_->scale * v1_;
    if (u <= c0_) return env_->scale * v0_;
    const double w = (u - c0_) / (c1_ - c0_);
    return env_->scale * interp_segment(v0_, v1_, w, exponential_);
}

Envelope thin_envelope(const Envelope& env, std::size_t max_segments, double rel_tol) {
    const auto pts = env.breakpoints();
    if (pts.size() <= max_segments + 1) return env;
    const double tol = rel_tol * std::max(env.scale, 1e-300);

    // Greedy refinement: keep endpoints, repeatedly admit the breakpoint
    // with the largest deviation from the current piecewise-linear fit.
    std::vector<std::size_t> kept = {0, pts.size() - 1};
    auto worst_between = [&](std::size_t a, std::size_t b) -> std::pair<std::size_t, double> {
        std::size_t arg = a;
        double err = -1.0;
        for (std::size_t i = a + 1; i < b; ++i) {
            const double w = (pts[i].first - pts[a].first) / (pts[b].first - pts[a].first);
            const double fit = pts[a].second + (pts[b].second - pts[a].second) * w;
            const double e = std::abs(pts[i].second - fit);
            if (e > err) {
                err = e;
                arg = i;
            }
        }
        return {arg, err};
    };
    while (kept.size() < max_segments + 1) {
        std::size_t best_idx = 0;
        double best_err = -1.0;
        for (std::size_t k = 0; k + 1 < kept.size(); ++k) {
            auto [idx, err] = worst_between(kept[k], kept[k + 1]);
            if (err > best_err) {
                best_err = err;
                best_idx = idx;
            }
        }
        if (best_err <= tol) break;
        kept.insert(std::upper_bound(kept.begin(), kept.end(), best_idx), best_idx);
    }

    std::vector<std::pair<double, double>> reduced;
    reduced.reserve(kept.size());
    for (auto i : kept) reduced.push_back(pts[i]);
    Envelope out = Envelope::from_breakpoints(reduced);
    // Preserve the original scale so thinning never rescales values.
    if (out.scale != env.scale && env.scale > 0.0) {
        const double r = out.scale / env.scale;
        out.initial *= r;
        for (auto& s : out.segments) s.target *= r;
        out.scale = env.scale;
    }
    return out;
}

}  // namespace diass
