#include "diass/render.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "diass/errors.hpp"

namespace diass {
namespace {

struct SoundJob {
    std::uint64_t id = 0;
    std::uint64_t seed = 0;
    std::int64_t begin = 0;  // predicted rendered extent
    std::int64_t end = 0;
    std::vector<ICard> cards;
};

struct SoundResult {
    SampleBuffer buffer;
    std::exception_ptr error;
};

std::pair<std::int64_t, std::int64_t> partial_frames(const Partial& p, int rate) {
    const auto first = static_cast<std::int64_t>(std::ceil(p.start_time * rate - 1e-9));
    const auto last =
        static_cast<std::int64_t>(std::ceil((p.start_time + p.duration) * rate - 1e-9));
    return {first, std::max(first, last)};
}

}  // namespace

SampleBuffer schedule_render(const Score& score, const std::vector<ICard>& cards,
                             const RenderConfig& config, std::vector<SoundSpan>* spans_out) {
    if (config.workers < 1) throw ValidationError("workers must be >= 1");

    // Group cards per sound; the card list arrives in (start, id) order, so
    // the job list inherits the dispatch (starting-time) order.
    std::vector<SoundJob> jobs;
    for (const auto& c : cards) {
        if (jobs.empty() || jobs.back().id != c.sound_id) {
            SoundJob j;
            j.id = c.sound_id;
            j.seed = c.rng_seed;
            jobs.push_back(std::move(j));
        }
        jobs.back().cards.push_back(c);
    }
    for (auto& j : jobs) {
        bool first = true;
        for (const auto& c : j.cards) {
            const auto [a, b] = partial_frames(c.partial, score.sample_rate);
            j.begin = first ? a : std::min(j.begin, a);
            j.end = first ? b : std::max(j.end, b);
            first = false;
        }
        const auto& rv = j.cards.front().reverb;
        if (rv && rv->mix > 0.0) j.end += std::llround(rv->duration * score.sample_rate);
    }

    const std::size_t njobs = jobs.size();
    std::vector<std::size_t> by_id(njobs);
    for (std::size_t i = 0; i < njobs; ++i) by_id[i] = i;
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return jobs[a].id < jobs[b].id; });

    std::int64_t end_frame = 0;
    for (const auto& j : jobs) end_frame = std::max(end_frame, j.end);
    SampleBuffer mix;
    mix.rate = score.sample_rate;
    mix.start_frame = 0;
    mix.channels = {Eigen::ArrayXd::Zero(end_frame), Eigen::ArrayXd::Zero(end_frame)};

    std::mutex mtx;
    std::condition_variable cv;
    std::map<std::size_t, SoundResult> done;  // job index -> result
    std::size_t next_job = 0;
    std::size_t in_flight = 0;
    bool abort = false;

    auto worker = [&] {
        while (true) {
            std::size_t k;
            {
                std::lock_guard<std::mutex> lock(mtx);
                if (abort || next_job >= njobs) return;
                k = next_job++;
                ++in_flight;
            }
            SoundResult r;
            try {
                r.buffer = render_sound(jobs[k].cards, jobs[k].seed, score.sample_rate);
            } catch (...) {
                r.error = std::current_exception();
            }
            {
                std::lock_guard<std::mutex> lock(mtx);
                if (r.error) abort = true;
                done.emplace(k, std::move(r));
                --in_flight;
            }
            cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(config.workers));
    for (int i = 0; i < config.workers; ++i) pool.emplace_back(worker);

    // Mixer stage: consume results strictly in ascending sound-id order so
    // the floating-point accumulation order never depends on scheduling.
    std::exception_ptr failure;
    std::uint64_t failed_id = 0;
    for (std::size_t idx : by_id) {
        SoundResult r;
        {
            std::unique_lock<std::mutex> lock(mtx);
            cv.wait(lock, [&] { return done.count(idx) != 0 || (abort && in_flight == 0); });
            const auto it = done.find(idx);
            if (it == done.end()) break;  // aborted before this sound was dispatched
            r = std::move(it->second);
            done.erase(it);
        }
        if (r.error) {
            failure = r.error;
            failed_id = jobs[idx].id;
            break;
        }
        const auto& b = r.buffer;
        if (b.start_frame != jobs[idx].begin || b.end_frame() != jobs[idx].end)
            throw RenderError("sound " + std::to_string(jobs[idx].id) +
                              ": rendered extent disagrees with the scheduled span");
        for (int ch = 0; ch < 2; ++ch)
            if (b.length() > 0)
                mix.channels[ch].segment(b.start_frame, b.length()) += b.channels[ch];
    }
    for (auto& t : pool) t.join();
    if (!failure) {
        for (const auto& [k, r] : done)
            if (r.error) {
                failure = r.error;
                failed_id = jobs[k].id;
                break;
            }
    }
    if (failure) {
        try {
            std::rethrow_exception(failure);
        } catch (const std::exception& e) {
            throw RenderError("sound " + std::to_string(failed_id) + " failed: " + e.what());
        }
    }

    if (spans_out) {
        spans_out->clear();
        for (std::size_t idx : by_id) spans_out->push_back({jobs[idx].id, jobs[idx].begin,
                                                            jobs[idx].end});
    }

    if (score.channels == 1) {
        SampleBuffer mono;
        mono.rate = mix.rate;
        mono.start_frame = 0;
        mono.channels = {mix.channels[0] + mix.channels[1]};
        return mono;
    }
    return mix;
}

std::vector<std::int16_t> quantize(const SampleBuffer& mix) {
    const Eigen::Index len = mix.length();
    const auto nch = static_cast<Eigen::Index>(mix.channels.size());
    std::vector<std::int16_t> out(static_cast<std::size_t>(len * nch));
    for (Eigen::Index n = 0; n < len; ++n) {
        for (Eigen::Index ch = 0; ch < nch; ++ch) {
            const long long q = std::llround(mix.channels[ch](n) * 32767.0);
            out[static_cast<std::size_t>(n * nch + ch)] =
                static_cast<std::int16_t>(std::clamp<long long>(q, -32768, 32767));
        }
    }
    return out;
}

namespace {
void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}
}  // namespace

void write_wav(const std::vector<std::int16_t>& samples, int rate, int channels,
               const std::string& path) {
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::string body;
    body.reserve(44 + samples.size() * 2);
    body += "RIFF";
    put_u32(body, 36 + data_bytes);
    body += "WAVEfmt ";
    put_u32(body, 16);  // fmt chunk size
    put_u16(body, 1);   // PCM
    put_u16(body, static_cast<std::uint16_t>(channels));
    put_u32(body, static_cast<std::uint32_t>(rate));
    put_u32(body, static_cast<std::uint32_t>(rate * channels * 2));  // byte rate
    put_u16(body, static_cast<std::uint16_t>(channels * 2));         // block align
    put_u16(body, 16);                                               // bits per sample
    body += "data";
    put_u32(body, data_bytes);
    for (std::int16_t s : samples) put_u16(body, static_cast<std::uint16_t>(s));

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw RenderError("cannot open '" + path + "' for writing");
    const bool ok = std::fwrite(body.data(), 1, body.size(), f) == body.size();
    if (std::fclose(f) != 0 || !ok) throw RenderError("failed writing WAV to '" + path + "'");
}

}  // namespace diass
