#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diass/model.hpp"
#include "diass/score.hpp"

namespace diass {

inline constexpr double kReferencePressure = 2e-5;  // N/m^2, threshold of hearing

// Equal-loudness contour grid: intensity_db(p, f) is the dB SPL needed at
// frequencies(f) to reach phon_levels(p).  Strictly increasing in phon at
// fixed frequency; the 1000-Hz column equals the phon level exactly.
struct LoudnessTable {
    Eigen::VectorXd frequencies;   // ascending Hz, spans at least [25, 16000]
    Eigen::VectorXd phon_levels;   // ascending phons, spans [0, 120]
    Eigen::MatrixXd intensity_db;  // phon_levels.size() x frequencies.size()
    int version = 0;

    static LoudnessTable from_csv(std::istream& in);
    // Table embedded in the binary (versioned CSV shipped under data/).
    static const LoudnessTable& standard();
};

struct CriticalBand {
    double center = 0.0;  // Hz, frequency of the band-opening partial
    std::vector<std::pair<int, double>> members;  // (partial index, intensity dB)
    double band_db = 0.0;
    double band_sones = 0.0;
};

// 20*log10(delta_p / ref); throws std::domain_error on non-positive input.
double pressure_to_db(double delta_p, double ref = kReferencePressure);

// Critical bandwidth 25 + 75*(1 + 1.4*(f/1000)^2)^0.69 Hz.
double critical_bandwidth(double f);

double phon_to_sone(double lp);
double sone_to_phon(double ls);

// Bilinear interpolation in (log f, dB); clamps below the 0-phon contour to
// 0 phon and extrapolates linearly above the top contour.  Throws
// std::domain_error for f outside the table span.
double db_to_phon(const LoudnessTable& table, double f, double i);

// Greedy left-to-right grouping of (frequency, full-scale amplitude) pairs
// into critical bands; intensities power-sum within a band.  Frequencies
// outside the table span are clamped to the span edge for the phon lookup.
std::vector<CriticalBand> group_bands(const std::vector<std::pair<double, double>>& partials,
                                      double calibration_db, const LoudnessTable& table);

// Rossing summation: loudest band + 0.3 * sum of the rest, in sones.
double sound_loudness(const std::vector<std::pair<double, double>>& partials,
                      double calibration_db, const LoudnessTable& table);

// Uniform amplitude scale s so the sound analyzes at `target` sones at time
// t (relative 1e-3); bisection over (0, 1/max_amp].  Throws ValidationError
// when the target is out of reach, reporting the attainable extreme.
double solve_amplitude_scale(const Sound& sound, double t, double target, double calibration_db,
                             const LoudnessTable& table = LoudnessTable::standard());

// Fill every ICard's gain envelope from its sound's loudness envelope:
// constant targets solve once at the sound's amplitude peak, time-varying
// targets solve at each loudness breakpoint with linear interpolation
// between.
void apply_loudness(std::vector<ICard>& cards, const Score& score,
                    const LoudnessTable& table = LoudnessTable::standard());

}  // namespace diass
