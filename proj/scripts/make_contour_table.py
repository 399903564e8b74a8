#!/usr/bin/env python3
"""Generate data/equal_loudness_contours_v1.csv.

Equal-loudness contours on a 13 x 30 grid (phon level x frequency),
evaluated from the ISO 226:2003 analytic contour fit at the 29 standard
frequencies, plus a 16 kHz column extended from the 12.5 kHz column with
a fixed +8 dB offset (the fit stops at 12.5 kHz; high-frequency hearing
needs more energy, and a rigid offset keeps the grid monotone in phon).

Contours above 80 phon are extrapolations of the same fit.  Each contour
is rigidly shifted (always < 0.02 dB) so that the 1000 Hz column equals
the phon level exactly, which is the definition of the phon.
"""
import math

FREQS = [20, 25, 31.5, 40, 50, 63, 80, 100, 125, 160, 200, 250, 315, 400,
         500, 630, 800, 1000, 1250, 1600, 2000, 2500, 3150, 4000, 5000,
         6300, 8000, 10000, 12500]

ALPHA = [0.532, 0.506, 0.480, 0.455, 0.432, 0.409, 0.387, 0.367, 0.349,
         0.330, 0.315, 0.301, 0.288, 0.276, 0.267, 0.259, 0.253, 0.250,
         0.246, 0.244, 0.243, 0.243, 0.243, 0.242, 0.242, 0.245, 0.254,
         0.271, 0.301]

L_U = [-31.6, -27.2, -23.0, -19.1, -15.9, -13.0, -10.3, -8.1, -6.2, -4.5,
       -3.1, -2.0, -1.1, -0.4, 0.0, 0.3, 0.5, 0.0, -2.7, -4.1, -1.0, 1.7,
       2.5, 1.2, -2.1, -7.1, -11.2, -10.7, -3.1]

T_F = [78.5, 68.7, 59.5, 51.1, 44.0, 37.5, 31.5, 26.5, 22.1, 17.9, 14.4,
       11.4, 8.6, 6.2, 4.4, 3.0, 2.2, 2.4, 3.5, 1.7, -1.3, -4.2, -6.0,
       -5.4, -1.5, 6.0, 12.6, 13.9, 12.3]

PHONS = list(range(0, 121, 10))
HF_EXTENSION_HZ = 16000.0
HF_EXTENSION_DB = 8.0
REF_HZ = 1000.0


def spl(freq_index: int, phon: float) -> float:
    a, lu, tf = ALPHA[freq_index], L_U[freq_index], T_F[freq_index]
    af = 4.47e-3 * (10.0 ** (0.025 * phon) - 1.15) \
        + (0.4 * 10.0 ** ((tf + lu) / 10.0 - 9.0)) ** a
    return (10.0 / a) * math.log10(af) - lu + 94.0


def main() -> None:
    ref_col = FREQS.index(REF_HZ)
    rows = []
    for phon in PHONS:
        shift = phon - spl(ref_col, phon)
        values = [spl(j, phon) + shift for j in range(len(FREQS))]
        values.append(values[-1] + HF_EXTENSION_DB)
        rows.append((phon, values))

    freqs = FREQS + [HF_EXTENSION_HZ]
    with open("data/equal_loudness_contours_v1.csv", "w") as out:
        out.write("# equal-loudness-contours v1\n")
        out.write("phon_level,frequency_hz,intensity_db\n")
        for phon, values in rows:
            for f, v in zip(freqs, values):
                out.write(f"{phon},{f:g},{v:.4f}\n")


if __name__ == "__main__":
    main()
