#include "diass/psycho.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "diass/errors.hpp"

namespace diass {

namespace detail {
extern const char kEqualLoudnessCsv[];
}

namespace {

constexpr double kSolveRelTol = 1e-3;
constexpr int kSolveMaxIter = 80;
constexpr double kActiveEps = 1e-9;  // seconds

double parse_field(std::string_view sv, int lineno) {
    double v{};
    const auto* end = sv.data() + sv.size();
    auto [p, ec] = std::from_chars(sv.data(), end, v);
    if (ec != std::errc{} || p != end)
        throw ValidationError("contour table: bad number '" + std::string(sv) + "' on line " +
                              std::to_string(lineno));
    return v;
}

double rossing(const std::vector<CriticalBand>& bands) {
    double loudest = 0.0;
    double sum = 0.0;
    for (const auto& b : bands) {
        loudest = std::max(loudest, b.band_sones);
        sum += b.band_sones;
    }
    return loudest + 0.3 * (sum - loudest);
}

// Partials audible at absolute time t: (frequency, amplitude) with amp > 0.
std::vector<std::pair<double, double>> partials_at(const Sound& s, double t) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : s.partials) {
        if (t < p.start_time - kActiveEps || t > p.start_time + p.duration + kActiveEps) continue;
        const double u = std::clamp((t - p.start_time) / p.duration, 0.0, 1.0);
        const double amp = p.amp_env.value_at(u);
        if (amp <= 0.0) continue;
        out.emplace_back(p.freq_env.value_at(u), amp);
    }
    return out;
}

}  // namespace

LoudnessTable LoudnessTable::from_csv(std::istream& in) {
    LoudnessTable t;
    std::string line;
    int lineno = 0;
    bool seen_header = false;
    std::map<double, std::map<double, double>> grid;  // phon -> freq -> dB
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string tag = "equal-loudness-contours v";
            const auto pos = line.find(tag);
            if (pos != std::string::npos)
                t.version = std::atoi(line.c_str() + pos + tag.size());
            continue;
        }
        if (!seen_header) {
            if (line != "phon_level,frequency_hz,intensity_db")
                throw ValidationError("contour table: unexpected header '" + line + "'");
            seen_header = true;
            continue;
        }
        std::string_view sv(line);
        const auto c1 = sv.find(',');
        const auto c2 = sv.find(',', c1 + 1);
        if (c1 == std::string_view::npos || c2 == std::string_view::npos)
            throw ValidationError("contour table: malformed row on line " + std::to_string(lineno));
        const double phon = parse_field(sv.substr(0, c1), lineno);
        const double freq = parse_field(sv.substr(c1 + 1, c2 - c1 - 1), lineno);
        const double db = parse_field(sv.substr(c2 + 1), lineno);
        if (!grid[phon].emplace(freq, db).second)
            throw ValidationError("contour table: duplicate cell on line " + std::to_string(lineno));
    }
    if (grid.empty()) throw ValidationError("contour table: no data rows");

    const auto& freqs0 = grid.begin()->second;
    const Eigen::Index np = static_cast<Eigen::Index>(grid.size());
    const Eigen::Index nf = static_cast<Eigen::Index>(freqs0.size());
    t.phon_levels.resize(np);
    t.frequencies.resize(nf);
    t.intensity_db.resize(np, nf);
    Eigen::Index fi = 0;
    for (const auto& [f, db] : freqs0) t.frequencies(fi++) = f;
    Eigen::Index pi = 0;
    for (const auto& [phon, row] : grid) {
        if (static_cast<Eigen::Index>(row.size()) != nf)
            throw ValidationError("contour table: ragged frequency grid at " +
                                  std::to_string(phon) + " phon");
        t.phon_levels(pi) = phon;
        Eigen::Index j = 0;
        for (const auto& [f, db] : row) {
            if (f != t.frequencies(j))
                throw ValidationError("contour table: frequency grids differ across contours");
            t.intensity_db(pi, j++) = db;
        }
        ++pi;
    }

    if (t.frequencies(0) > 25.0 || t.frequencies(nf - 1) < 16000.0)
        throw ValidationError("contour table: frequency span must cover [25, 16000] Hz");
    if (t.phon_levels(0) != 0.0 || t.phon_levels(np - 1) < 120.0)
        throw ValidationError("contour table: phon span must cover [0, 120]");
    for (Eigen::Index j = 0; j < nf; ++j)
        for (Eigen::Index p = 1; p < np; ++p)
            if (t.intensity_db(p, j) <= t.intensity_db(p - 1, j))
                throw ValidationError("contour table: intensities not increasing in phon at " +
                                      std::to_string(t.frequencies(j)) + " Hz");
    Eigen::Index ref = -1;
    for (Eigen::Index j = 0; j < nf; ++j)
        if (t.frequencies(j) == 1000.0) ref = j;
    if (ref < 0) throw ValidationError("contour table: missing the 1000 Hz reference column");
    for (Eigen::Index p = 0; p < np; ++p)
        if (std::abs(t.intensity_db(p, ref) - t.phon_levels(p)) > 1e-6)
            throw ValidationError("contour table: 1000 Hz column must equal the phon level");
    return t;
}

const LoudnessTable& LoudnessTable::standard() {
    static const LoudnessTable table = [] {
        std::istringstream in(detail::kEqualLoudnessCsv);
        return from_csv(in);
    }();
    return table;
}

double pressure_to_db(double delta_p, double ref) {
    if (!(delta_p > 0.0) || !(ref > 0.0))
        throw std::domain_error("pressure_to_db requires positive pressures");
    return 20.0 * std::log10(delta_p / ref);
}

double critical_bandwidth(double f) {
    if (f < 0.0) throw std::domain_error("critical_bandwidth: negative frequency");
    const double r = f / 1000.0;
    return 25.0 + 75.0 * std::pow(1.0 + 1.4 * r * r, 0.69);
}

double phon_to_sone(double lp) {
    if (!std::isfinite(lp)) throw std::domain_error("phon_to_sone: non-finite input");
    return std::exp2((lp - 40.0) / 10.0);
}

double sone_to_phon(double ls) {
    if (!(ls > 0.0)) throw std::domain_error("sone_to_phon requires positive sones");
    return 40.0 + 10.0 * std::log2(ls);
}

double db_to_phon(const LoudnessTable& table, double f, double i) {
    const auto& F = table.frequencies;
    const auto& P = table.phon_levels;
    const Eigen::Index nf = F.size();
    const Eigen::Index np = P.size();
    if (!(f >= F(0) && f <= F(nf - 1)))
        throw std::domain_error("db_to_phon: frequency " + std::to_string(f) +
                                " Hz outside table span");
    Eigen::Index j = 0;
    while (j + 2 < nf && f >= F(j + 1)) ++j;
    const double x = f == F(j) ? 0.0
                               : (std::log(f) - std::log(F(j))) /
                                     (std::log(F(j + 1)) - std::log(F(j)));
    // Intensity column interpolated to f, one entry per contour.
    Eigen::VectorXd col = (1.0 - x) * table.intensity_db.col(j) + x * table.intensity_db.col(j + 1);
    if (i <= col(0)) return P(0);  // below the 0-phon contour
    if (i >= col(np - 1)) {
        const double slope = (P(np - 1) - P(np - 2)) / (col(np - 1) - col(np - 2));
        return P(np - 1) + slope * (i - col(np - 1));
    }
    Eigen::Index k = 0;
    while (k + 2 < np && i >= col(k + 1)) ++k;
    return P(k) + (P(k + 1) - P(k)) * (i - col(k)) / (col(k + 1) - col(k));
}

std::vector<CriticalBand> group_bands(const std::vector<std::pair<double, double>>& partials,
                                      double calibration_db, const LoudnessTable& table) {
    if (partials.empty()) throw std::invalid_argument("group_bands: empty partial list");
    std::vector<int> order(partials.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return partials[a].first < partials[b].first; });

    std::vector<CriticalBand> bands;
    for (int idx : order) {
        const auto [f, amp] = partials[static_cast<std::size_t>(idx)];
        if (!(f > 0.0)) throw std::domain_error("group_bands: frequency must be > 0");
        if (!(amp > 0.0) || amp > 1.0 + 1e-9)
            throw std::domain_error("group_bands: amplitude " + std::to_string(amp) +
                                    " outside (0,1]");
        const double intensity = calibration_db + 20.0 * std::log10(std::min(amp, 1.0));
        if (bands.empty() ||
            std::abs(f - bands.back().center) > 0.5 * critical_bandwidth(bands.back().center)) {
            CriticalBand b;
            b.center = f;
            bands.push_back(b);
        }
        bands.back().members.emplace_back(idx, intensity);
    }
    const double f_lo = table.frequencies(0);
    const double f_hi = table.frequencies(table.frequencies.size() - 1);
    for (auto& b : bands) {
        double power = 0.0;
        for (const auto& [idx, db] : b.members) power += std::pow(10.0, db / 10.0);
        b.band_db = 10.0 * std::log10(power);
        b.band_sones = phon_to_sone(db_to_phon(table, std::clamp(b.center, f_lo, f_hi), b.band_db));
    }
    return bands;
}

double sound_loudness(const std::vector<std::pair<double, double>>& partials,
                      double calibration_db, const LoudnessTable& table) {
    return rossing(group_bands(partials, calibration_db, table));
}

double solve_amplitude_scale(const Sound& sound, double t, double target, double calibration_db,
                             const LoudnessTable& table) {
    if (!(target > 0.0))
        throw ValidationError("sound " + std::to_string(sound.id) +
                              ": loudness target must be > 0 sones");
    const auto fa = partials_at(sound, t);
    if (fa.empty())
        throw ValidationError("sound " + std::to_string(sound.id) + " is silent at t=" +
                              std::to_string(t) + " s; cannot reach " + std::to_string(target) +
                              " sones");
    double max_amp = 0.0;
    for (const auto& [f, a] : fa) max_amp = std::max(max_amp, a);
    const double s_hi = 1.0 / max_amp;
    const auto loudness_at = [&](double s) {
        std::vector<std::pair<double, double>> scaled(fa);
        for (auto& p : scaled) p.second = std::min(p.second * s, 1.0);
        return sound_loudness(scaled, calibration_db, table);
    };

    const double attainable = loudness_at(s_hi);
    if (target > attainable * (1.0 + kSolveRelTol))
        throw ValidationError("sound " + std::to_string(sound.id) + ": target " +
                              std::to_string(target) + " sones unreachable; max attainable is " +
                              std::to_string(attainable) + " sones");
    // Every band contributes at least the 0-phon clamp worth of sones, so
    // arbitrarily small targets are out of reach too.
    const std::size_t nbands = group_bands(fa, calibration_db, table).size();
    const double floor_sones =
        phon_to_sone(0.0) * (1.0 + 0.3 * (static_cast<double>(nbands) - 1.0));
    if (target < floor_sones * (1.0 - kSolveRelTol))
        throw ValidationError("sound " + std::to_string(sound.id) + ": target " +
                              std::to_string(target) + " sones below the attainable floor of " +
                              std::to_string(floor_sones) + " sones");

    double lo = 0.0;
    double hi = s_hi;
    for (int it = 0; it < kSolveMaxIter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double l = loudness_at(mid);
        if (std::abs(l - target) <= kSolveRelTol * target) return mid;
        (l < target ? lo : hi) = mid;
    }
    const double s = 0.5 * (lo + hi);
    if (std::abs(loudness_at(s) - target) <= kSolveRelTol * target) return s;
    throw RenderError("sound " + std::to_string(sound.id) +
                      ": loudness bisection failed to converge to " + std::to_string(target) +
                      " sones");
}

void apply_loudness(std::vector<ICard>& cards, const Score& score, const LoudnessTable& table) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_sound;
    for (std::size_t i = 0; i < cards.size(); ++i) by_sound[cards[i].sound_id].push_back(i);

    for (const Sound& s : score.sounds) {
        const auto it = by_sound.find(s.id);
        if (it == by_sound.end()) continue;
        const auto [t0, t1] = sound_span(s);
        Envelope gain;
        if (s.loudness_env.is_constant()) {
            const double target = s.loudness_env.value_at(0.0);
            // Calibrate at the sound's amplitude peak so the target is met
            // where the sound is loudest.
            double best_u = 0.0;
            double best_sum = -1.0;
            for (int k = 0; k <= 64; ++k) {
                const double u = static_cast<double>(k) / 64.0;
                double sum = 0.0;
                for (const auto& [f, a] : partials_at(s, t0 + (t1 - t0) * u)) sum += a;
                if (sum > best_sum + 1e-12) {
                    best_sum = sum;
                    best_u = u;
                }
            }
            gain = Envelope::constant(
                solve_amplitude_scale(s, t0 + (t1 - t0) * best_u, target, score.calibration_db,
                                      table));
        } else {
            std::vector<std::pair<double, double>> pts;
            for (const auto& [u, sones] : s.loudness_env.breakpoints())
                pts.emplace_back(u, solve_amplitude_scale(s, t0 + (t1 - t0) * u, sones,
                                                          score.calibration_db, table));
            gain = Envelope::from_breakpoints(pts);
        }
        for (std::size_t ci : it->second) cards[ci].gain_env = gain;
    }
}

}  // namespace diass
