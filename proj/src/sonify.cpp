#include "diass/sonify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "diass/errors.hpp"

namespace diass {
namespace {

constexpr std::size_t kMaxEnvSegments = 512;
constexpr double kThinRelTol = 1e-3;
constexpr double kVibratoMaxDepthHz = 25.0;
constexpr double kVibratoRateHz = 6.0;

double parse_num(std::string_view sv, int line) {
    double v{};
    const auto* end = sv.data() + sv.size();
    auto [p, ec] = std::from_chars(sv.data(), end, v);
    if (ec != std::errc{} || p != end)
        throw ParseError("invalid number '" + std::string(sv) + "'", line, 1);
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

Envelope make_env(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) {
        const double v = pts.empty() ? 0.0 : pts.front().second;
        return Envelope::constant(v);
    }
    return thin_envelope(Envelope::from_breakpoints(pts), kMaxEnvSegments, kThinRelTol);
}

void check_freq_range(const MappingConfig& cfg) {
    if (!(cfg.freq_lo > 0.0) || !(cfg.freq_hi > cfg.freq_lo))
        throw ValidationError("frequency range must satisfy 0 < lo < hi");
    if (cfg.freq_hi + kVibratoMaxDepthHz >= cfg.sample_rate / 2.0 - 1.0)
        throw ValidationError("frequency range reaches Nyquist at rate " +
                              std::to_string(cfg.sample_rate));
    if (!(cfg.sones_hi > cfg.sones_lo) || !(cfg.sones_lo > 0.0))
        throw ValidationError("sone range must satisfy 0 < lo < hi");
    if (!(cfg.scan_duration > 0.0)) throw ValidationError("scan duration must be > 0");
}

}  // namespace

double GridData::at(int ix, int iy, int iz) const {
    const int nx = dims[0];
    const int ny = dims.size() > 1 ? dims[1] : 1;
    return values[static_cast<std::size_t>(ix) +
                  static_cast<std::size_t>(nx) *
                      (static_cast<std::size_t>(iy) + static_cast<std::size_t>(ny) * iz)];
}

GridData load_grid(const std::string& path, GridFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RenderError("cannot open grid file '" + path + "'");
    GridData g;

    if (format == GridFormat::RawF32) {
        std::string header;
        if (!std::getline(in, header)) throw ParseError("raw grid: missing header line", 1, 1);
        std::istringstream hs(header);
        int d = 0;
        while (hs >> d) {
            if (d <= 0) throw ParseError("raw grid: non-positive dimension", 1, 1);
            g.dims.push_back(d);
        }
        if (g.dims.size() != 2 && g.dims.size() != 3)
            throw ParseError("raw grid: header must list 2 or 3 dimensions", 1, 1);
        std::size_t count = 1;
        for (int dim : g.dims) count *= static_cast<std::size_t>(dim);
        std::vector<float> raw(count);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
            throw ValidationError("raw grid: expected " + std::to_string(count) +
                                  " float32 values");
        char extra;
        if (in.read(&extra, 1))
            throw ValidationError("raw grid: trailing bytes after " + std::to_string(count) +
                                  " values");
        g.values.assign(raw.begin(), raw.end());
    } else {
        std::string line;
        int lineno = 0;
        struct Cell {
            int coords[3];
            double value;
        };
        std::vector<Cell> cells;
        int ncoords = -1;
        int maxc[3] = {0, 0, 0};
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            const auto f = split(line, ',');
            if (f.size() != 3 && f.size() != 4)
                throw ParseError("grid row must be x,y[,z],value", lineno, 1);
            const int nc = static_cast<int>(f.size()) - 1;
            if (ncoords < 0)
                ncoords = nc;
            else if (nc != ncoords)
                throw ParseError("grid rows mix 2-D and 3-D coordinates", lineno, 1);
            Cell c{{0, 0, 0}, 0.0};
            for (int i = 0; i < nc; ++i) {
                const double v = parse_num(f[static_cast<std::size_t>(i)], lineno);
                c.coords[i] = static_cast<int>(v);
                if (c.coords[i] < 0 || c.coords[i] != v)
                    throw ParseError("grid coordinates must be non-negative integers", lineno, 1);
                maxc[i] = std::max(maxc[i], c.coords[i]);
            }
            c.value = parse_num(f.back(), lineno);
            cells.push_back(c);
        }
        if (cells.empty()) throw ValidationError("grid file '" + path + "' has no data rows");
        for (int i = 0; i < ncoords; ++i) g.dims.push_back(maxc[i] + 1);
        std::size_t count = 1;
        for (int d : g.dims) count *= static_cast<std::size_t>(d);
        g.values.assign(count, std::numeric_limits<double>::quiet_NaN());
        const int nx = g.dims[0];
        const int ny = g.dims.size() > 1 ? g.dims[1] : 1;
        for (const auto& c : cells) {
            auto& slot = g.values[static_cast<std::size_t>(c.coords[0]) +
                                  static_cast<std::size_t>(nx) *
                                      (static_cast<std::size_t>(c.coords[1]) +
                                       static_cast<std::size_t>(ny) * c.coords[2])];
            if (!std::isnan(slot))
                throw ValidationError("grid cell listed twice at x=" +
                                      std::to_string(c.coords[0]));
            slot = c.value;
        }
    }

    for (double v : g.values)
        if (!std::isfinite(v))
            throw ValidationError("grid '" + path + "' has missing or non-finite cells");
    g.axis_labels = g.dims.size() == 3 ? std::vector<std::string>{"x", "y", "z"}
                                       : std::vector<std::string>{"x", "y"};
    return g;
}

TrajectoryData load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RenderError("cannot open trajectory file '" + path + "'");
    TrajectoryData t;
    bool have_domain = false;
    bool seen_header = false;
    std::string line;
    int lineno = 0;
    struct Row {
        int step, entity;
        TrajectoryEntity e;
    };
    std::vector<Row> rows;
    int max_step = -1, max_entity = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string word;
            if (hs >> word && word == "domain") {
                if (!(hs >> t.xmin >> t.xmax >> t.ymin >> t.ymax))
                    throw ParseError("domain comment must list x0 x1 y0 y1", lineno, 1);
                have_domain = true;
            }
            continue;
        }
        if (!seen_header) {
            if (line != "step,entity,x,y,speed")
                throw ParseError("expected header 'step,entity,x,y,speed'", lineno, 1);
            seen_header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 5) throw ParseError("trajectory row must have 5 fields", lineno, 1);
        Row r{};
        r.step = static_cast<int>(parse_num(f[0], lineno));
        r.entity = static_cast<int>(parse_num(f[1], lineno));
        r.e.x = parse_num(f[2], lineno);
        r.e.y = parse_num(f[3], lineno);
        r.e.speed = parse_num(f[4], lineno);
        if (r.step < 0 || r.entity < 0)
            throw ParseError("step and entity must be non-negative", lineno, 1);
        if (r.e.speed < 0.0) throw ParseError("speed must be non-negative", lineno, 1);
        max_step = std::max(max_step, r.step);
        max_entity = std::max(max_entity, r.entity);
        rows.push_back(r);
    }
    if (rows.empty()) throw ValidationError("trajectory '" + path + "' has no data rows");
    t.timesteps = max_step + 1;
    const int nent = max_entity + 1;
    t.steps.assign(static_cast<std::size_t>(t.timesteps),
                   std::vector<TrajectoryEntity>(static_cast<std::size_t>(nent)));
    std::vector<std::vector<bool>> seen(static_cast<std::size_t>(t.timesteps),
                                        std::vector<bool>(static_cast<std::size_t>(nent), false));
    for (const auto& r : rows) {
        if (seen[static_cast<std::size_t>(r.step)][static_cast<std::size_t>(r.entity)])
            throw ValidationError("trajectory repeats step " + std::to_string(r.step) +
                                  " entity " + std::to_string(r.entity));
        seen[static_cast<std::size_t>(r.step)][static_cast<std::size_t>(r.entity)] = true;
        t.steps[static_cast<std::size_t>(r.step)][static_cast<std::size_t>(r.entity)] = r.e;
    }
    for (int s = 0; s < t.timesteps; ++s)
        for (int e = 0; e < nent; ++e)
            if (!seen[static_cast<std::size_t>(s)][static_cast<std::size_t>(e)])
                throw ValidationError("trajectory missing step " + std::to_string(s) +
                                      " entity " + std::to_string(e));
    if (!have_domain) {
        t.xmin = t.xmax = rows.front().e.x;
        t.ymin = t.ymax = rows.front().e.y;
        for (const auto& r : rows) {
            t.xmin = std::min(t.xmin, r.e.x);
            t.xmax = std::max(t.xmax, r.e.x);
            t.ymin = std::min(t.ymin, r.e.y);
            t.ymax = std::max(t.ymax, r.e.y);
        }
    } else {
        for (const auto& r : rows)
            if (r.e.x < t.xmin || r.e.x > t.xmax || r.e.y < t.ymin || r.e.y > t.ymax)
                throw ValidationError("trajectory position outside the declared domain");
    }
    return t;
}

Score map_plane_scan(const GridData& grid, const MappingConfig& cfg,
                     std::vector<std::string>* warnings) {
    check_freq_range(cfg);
    if (cfg.stride < 1) throw ValidationError("stride must be >= 1");
    if (grid.dims.size() != 2 && grid.dims.size() != 3)
        throw ValidationError("plane scan needs a 2-D or 3-D grid");
    if (cfg.time_axis != 0 && cfg.time_axis != 1)
        throw ValidationError("time axis must be 0 (x) or 1 (y)");

    // Reduce to a 2-D plane indexed (time position, vertical position).
    int nt = 0, nv = 0;
    const bool is3d = grid.dims.size() == 3;
    if (is3d) {
        if (cfg.plane_axis != 2) throw ValidationError("3-D grids slice along z only");
        if (cfg.plane_index < 0 || cfg.plane_index >= grid.dims[2])
            throw ValidationError("plane index outside the grid");
    }
    const int nx = grid.dims[0];
    const int ny = grid.dims[1];
    nt = cfg.time_axis == 0 ? nx : ny;
    nv = cfg.time_axis == 0 ? ny : nx;
    if (nv < 2 || nt < 2) throw ValidationError("plane too small to scan");
    const auto cell = [&](int it, int iv) {
        const int ix = cfg.time_axis == 0 ? it : iv;
        const int iy = cfg.time_axis == 0 ? iv : it;
        return grid.at(ix, iy, is3d ? cfg.plane_index : 0);
    };

    double lo = cell(0, 0), hi = cell(0, 0);
    for (int it = 0; it < nt; ++it)
        for (int iv = 0; iv < nv; ++iv) {
            lo = std::min(lo, cell(it, iv));
            hi = std::max(hi, cell(it, iv));
        }
    if (cfg.data_range) {
        lo = cfg.data_range->first;
        hi = cfg.data_range->second;
        if (!(hi > lo)) throw ValidationError("explicit data range must satisfy lo < hi");
    }
    const bool degenerate = !(hi > lo);
    if (degenerate && warnings)
        warnings->push_back("plane data is constant; emitting flat midpoint loudness");

    Score score;
    score.sample_rate = cfg.sample_rate;
    score.channels = cfg.channels;

    std::uint64_t id = 1;
    for (int row = 0; row < nv; row += cfg.stride, ++id) {
        Sound s;
        s.id = id;
        s.rng_seed = id;
        s.start = 0.0;
        s.duration = cfg.scan_duration;
        s.pan_env = Envelope::constant(0.5);

        const double freq =
            cfg.freq_lo + static_cast<double>(row) * (cfg.freq_hi - cfg.freq_lo) /
                              static_cast<double>(nv - 1);
        std::vector<std::pair<double, double>> pts;
        pts.reserve(static_cast<std::size_t>(nt));
        for (int it = 0; it < nt; ++it) {
            const double u = static_cast<double>(it) / static_cast<double>(nt - 1);
            const double norm =
                degenerate ? 0.5 : std::clamp((cell(it, row) - lo) / (hi - lo), 0.0, 1.0);
            pts.emplace_back(u, cfg.sones_lo + norm * (cfg.sones_hi - cfg.sones_lo));
        }
        s.loudness_env = make_env(pts);

        Partial p;
        p.start_time = 0.0;
        p.duration = cfg.scan_duration;
        p.amp_env = Envelope::constant(1.0);
        p.freq_env = Envelope::constant(freq);
        s.partials.push_back(std::move(p));
        score.sounds.push_back(std::move(s));
    }
    validate_score(score);
    return score;
}

Score map_traveling_window(const TrajectoryData& traj, const MappingConfig& cfg,
                           std::vector<std::string>* warnings) {
    check_freq_range(cfg);
    if (!(cfg.window_width > 0.0)) throw ValidationError("window width must be > 0");
    if (traj.timesteps < 2) throw ValidationError("trajectory needs at least 2 steps");
    const double domain_w = traj.xmax - traj.xmin;
    if (!(domain_w > 0.0) || cfg.window_width > domain_w)
        throw ValidationError("window width exceeds the trajectory domain");

    const int nsteps = traj.timesteps;
    const auto nent = traj.steps.front().size();
    const double step_dt = cfg.scan_duration / static_cast<double>(nsteps - 1);
    const double yspan = traj.ymax > traj.ymin ? traj.ymax - traj.ymin : 1.0;

    // Window center sweeps the domain once over the scan duration.
    const double c0 = traj.xmin + cfg.window_width / 2.0;
    const double c1 = traj.xmax - cfg.window_width / 2.0;
    const auto center = [&](int s) {
        return c0 + (c1 - c0) * static_cast<double>(s) / static_cast<double>(nsteps - 1);
    };

    // Global normalization so depths and loudness compare across entities.
    double vmax = 0.0, smin = traj.steps[0][0].speed, smax = smin;
    std::vector<std::vector<double>> vx(static_cast<std::size_t>(nsteps),
                                        std::vector<double>(nent, 0.0));
    for (std::size_t e = 0; e < nent; ++e) {
        for (int s = 0; s < nsteps; ++s) {
            const int sp = std::min(s + 1, nsteps - 1);
            const int sm = std::max(s - 1, 0);
            const double dx = traj.steps[static_cast<std::size_t>(sp)][e].x -
                              traj.steps[static_cast<std::size_t>(sm)][e].x;
            vx[static_cast<std::size_t>(s)][e] = dx / (static_cast<double>(sp - sm) * step_dt);
            vmax = std::max(vmax, std::abs(vx[static_cast<std::size_t>(s)][e]));
            smin = std::min(smin, traj.steps[static_cast<std::size_t>(s)][e].speed);
            smax = std::max(smax, traj.steps[static_cast<std::size_t>(s)][e].speed);
        }
    }

    Score score;
    score.sample_rate = cfg.sample_rate;
    score.channels = cfg.channels;
    std::uint64_t id = 1;

    for (std::size_t e = 0; e < nent; ++e) {
        int s = 0;
        while (s < nsteps) {
            const auto inside = [&](int step) {
                const double x = traj.steps[static_cast<std::size_t>(step)][e].x;
                return std::abs(x - center(step)) <= cfg.window_width / 2.0;
            };
            if (!inside(s)) {
                ++s;
                continue;
            }
            int s1 = s;
            while (s1 + 1 < nsteps && inside(s1 + 1)) ++s1;

            const double t_start = static_cast<double>(s) * step_dt;
            double dur = static_cast<double>(s1 - s) * step_dt;
            if (dur <= 0.0) dur = step_dt / 2.0;  // single-step stay

            Sound snd;
            snd.id = id;
            snd.rng_seed = id;
            snd.start = t_start;
            snd.duration = dur;

            std::vector<std::pair<double, double>> fr, pn, ld, dp;
            const int span_steps = std::max(1, s1 - s);
            for (int k = s; k <= s1; ++k) {
                const double u = static_cast<double>(k - s) / static_cast<double>(span_steps);
                const auto& ent = traj.steps[static_cast<std::size_t>(k)][e];
                fr.emplace_back(u, cfg.freq_lo +
                                       (ent.y - traj.ymin) / yspan * (cfg.freq_hi - cfg.freq_lo));
                pn.emplace_back(u, std::clamp((ent.x - traj.xmin) / domain_w, 0.0, 1.0));
                const double snorm = smax > smin ? (ent.speed - smin) / (smax - smin) : 0.5;
                ld.emplace_back(u, cfg.sones_lo + snorm * (cfg.sones_hi - cfg.sones_lo));
                const double vnorm =
                    vmax > 0.0 ? std::abs(vx[static_cast<std::size_t>(k)][e]) / vmax : 0.0;
                dp.emplace_back(u, vnorm * kVibratoMaxDepthHz);
            }
            snd.loudness_env = make_env(ld);
            snd.pan_env = make_env(pn);

            Partial p;
            p.start_time = t_start;
            p.duration = dur;
            p.amp_env = Envelope::constant(1.0);
            p.freq_env = make_env(fr);
            double depth_peak = 0.0;
            for (const auto& [u, d] : dp) depth_peak = std::max(depth_peak, d);
            if (depth_peak > 0.0) {
                ModulatorSpec fm;
                fm.wave = WaveType::Sine;
                fm.amp_env = make_env(dp);
                fm.freq_env = Envelope::constant(kVibratoRateHz);
                p.fm = fm;
            }
            snd.partials.push_back(std::move(p));
            score.sounds.push_back(std::move(snd));
            ++id;
            s = s1 + 1;
        }
    }

    if (score.sounds.empty()) {
        if (warnings) warnings->push_back("no entity ever enters the window; score is empty");
        return score;
    }
    std::stable_sort(score.sounds.begin(), score.sounds.end(),
                     [](const Sound& a, const Sound& b) {
                         return a.start != b.start ? a.start < b.start : a.id < b.id;
                     });
    validate_score(score);
    return score;
}

}  // namespace diass
