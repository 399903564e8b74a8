#include "diass/anticlip.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "diass/errors.hpp"

namespace diass {
namespace {

// Guard inside the reduction ratio: aiming exactly at the headroom would
// approach it asymptotically and never satisfy the strict detector.
constexpr double kRescaleMargin = 0.98;
constexpr double kRescaleGamma = 2.0;  // sone-space exponent; amplitude responds super-linearly

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

double OverflowReport::worst_peak() const {
    double p = 0.0;
    for (const auto& f : frames) p = std::max(p, f.peak);
    return p;
}

double buffer_peak(const SampleBuffer& buf) {
    double p = 0.0;
    for (const auto& ch : buf.channels)
        if (ch.size() > 0) p = std::max(p, ch.abs().maxCoeff());
    return p;
}

OverflowReport detect_overflow(const SampleBuffer& mix, double headroom,
                               const std::vector<SoundSpan>& spans) {
    if (!(headroom > 0.0 && headroom <= 1.0))
        throw ValidationError("headroom must be in (0, 1]");
    OverflowReport report;
    const Eigen::Index len = mix.length();
    const auto sample_peak = [&](Eigen::Index n) {
        double m = 0.0;
        for (const auto& ch : mix.channels) m = std::max(m, std::abs(ch(n)));
        return m;
    };
    Eigen::Index n = 0;
    while (n < len) {
        double m = sample_peak(n);
        if (!(m > headroom)) {
            ++n;
            continue;
        }
        OverflowFrame frame;
        frame.begin = mix.start_frame + n;
        frame.peak = m;
        while (n < len && (m = sample_peak(n)) > headroom) {
            frame.peak = std::max(frame.peak, m);
            ++n;
        }
        frame.end = mix.start_frame + n;
        for (const auto& s : spans)
            if (s.begin < frame.end && s.end > frame.begin) frame.sound_ids.push_back(s.id);
        std::sort(frame.sound_ids.begin(), frame.sound_ids.end());
        report.frames.push_back(std::move(frame));
    }
    return report;
}

Score rescale_sounds(const Score& score, const OverflowReport& report, double headroom) {
    if (report.empty()) return score;

    std::map<std::uint64_t, std::size_t> slot;  // sound id -> union-find slot
    for (const auto& f : report.frames) {
        if (f.sound_ids.empty())
            throw RenderError("overflow frame at sample " + std::to_string(f.begin) +
                              " has no active sounds to rescale");
        for (auto id : f.sound_ids) slot.emplace(id, slot.size());
    }
    UnionFind uf(slot.size());
    for (const auto& f : report.frames)
        for (std::size_t i = 1; i < f.sound_ids.size(); ++i)
            uf.unite(slot[f.sound_ids[i - 1]], slot[f.sound_ids[i]]);

    // One ratio per connected component: the most demanding frame wins.
    std::map<std::size_t, double> rho;
    for (const auto& f : report.frames) {
        const double r = std::pow(kRescaleMargin * headroom / f.peak, 1.0 / kRescaleGamma);
        auto [it, inserted] = rho.emplace(uf.find(slot[f.sound_ids[0]]), r);
        if (!inserted) it->second = std::min(it->second, r);
    }

    Score out = score;
    for (auto& s : out.sounds) {
        const auto it = slot.find(s.id);
        if (it == slot.end()) continue;
        s.loudness_env.scale *= rho[uf.find(it->second)];
    }
    return out;
}

}  // namespace diass
