#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace diass {

enum class EnvShape { Linear, Exponential };

/// One normalized envelope segment: a fraction of the total span and the
/// value reached at its end.
struct EnvSegment {
    double frac = 1.0;    // share of the span, in (0, 1]
    double target = 0.0;  // normalized end value, in [0, 1]
    EnvShape shape = EnvShape::Linear;
};

/// Normalized piecewise linear/exponential control function.  Values are
/// stored in [0, 1]; `scale` carries the units of the controlled quantity
/// (Hz, sones, full-scale amplitude, ...).  Segment fractions sum to 1.
///
/// Exponential segments interpolate geometrically, v(w) = v0 * (v1/v0)^w,
/// and therefore require nonzero endpoints of the same sign; validation
/// rejects a zero endpoint on an exponential segment.
struct Envelope {
    double initial = 0.0;  // normalized start value, in [0, 1]
    double scale = 1.0;    // >= 0, natural units per normalized unit
    std::vector<EnvSegment> segments;

    /// Flat envelope holding `value` (natural units) over the whole span.
    static Envelope constant(double value);

    /// Build from natural-unit breakpoints at given positions u in [0, 1]
    /// (ascending, first 0, last 1); all-linear segments.  Used by the
    /// sonification mappers.
    static Envelope from_breakpoints(const std::vector<std::pair<double, double>>& points);

    /// Scale times normalized value at relative position u in [0, 1].
    double value_at(double u) const;

    /// Breakpoints as (u, natural value) pairs, including both endpoints.
    std::vector<std::pair<double, double>> breakpoints() const;

    /// Largest natural value over all breakpoints.
    double max_value() const;

    /// Smallest natural value over all breakpoints (segments are monotone,
    /// so breakpoints bound the range).
    double min_value() const;

    bool is_constant() const;
};

/// Spec-level entry point; throws std::domain_error for u outside [0, 1].
double eval_envelope(const Envelope& env, double u);

/// Throws ValidationError when the envelope breaks an invariant; `what`
/// names the offending control in the message.
void validate_envelope(const Envelope& env, const char* what);

/// Sequential evaluator for monotonically non-decreasing u; O(1) amortized
/// per call instead of a breakpoint search.
class EnvelopeCursor {
public:
    explicit EnvelopeCursor(const Envelope& env);
    double eval(double u);

private:
    const Envelope* env_;
    std::size_t seg_ = 0;
    double c0_ = 0.0, c1_ = 1.0;  // current segment bounds in u
    double v0_ = 0.0, v1_ = 0.0;  // normalized endpoint values
    bool exponential_ = false;
    void load_segment(std::size_t k);
};

/// Reduce an envelope to at most `max_segments` by greedy max-error
/// refinement; absolute error is bounded by rel_tol * scale unless the
/// segment cap bites first.  Linear segments only.
Envelope thin_envelope(const Envelope& env, std::size_t max_segments, double rel_tol);

}  // namespace diass
