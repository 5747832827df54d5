#include "irkey/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "irkey/errors.hpp"

namespace irkey {

namespace {

constexpr double kHysteresis = 0.1;
constexpr double kBlock = 0.1;

template <typename T>
std::vector<double> minmax_scale(std::span<const T> x) {
    std::vector<double> out(x.size(), 0.0);
    if (x.empty()) return out;
    auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return out;
    double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (static_cast<double>(x[i]) - lo) * inv;
    return out;
}

struct PlanCache {
    std::mutex mu;
    std::map<std::size_t, fftw_plan> plans;
    ~PlanCache() {
        for (auto& [n, p] : plans) fftw_destroy_plan(p);
    }
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

// |X_k|^2 for k = 0..n/2 of the zero-padded real input.
std::vector<double> power_spectrum(const std::vector<double>& x, std::size_t n) {
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
    fftw_plan plan;
    {
        auto& cache = plan_cache();
        std::lock_guard lock(cache.mu);
        auto it = cache.plans.find(n);
        if (it == cache.plans.end())
            it = cache.plans.emplace(n, fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE)).first;
        plan = it->second;
    }
    std::fill(in.get(), in.get() + n, 0.0);
    std::copy(x.begin(), x.end(), in.get());
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    std::vector<double> p(n / 2 + 1);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
    return p;
}

std::pair<float, float> range_of(const float* x, std::size_t n) {
    float lo = x[0], hi = x[0];
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
    }
    return {lo, hi};
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::size_t window_samples(double sample_rate) {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(kVarianceWindow * sample_rate)));
}

std::pair<std::size_t, std::size_t> slice_bounds(const IRTrace& tr, double t0, double t1) {
    double fs = 1e6 / static_cast<double>(tr.step_us);
    double base = 1e-6 * static_cast<double>(tr.start_us);
    auto i0 = std::llround(std::ceil((t0 - base) * fs - 1e-9));
    auto i1 = std::llround(std::ceil((t1 - base) * fs - 1e-9));
    auto n = static_cast<long long>(tr.size());
    return {static_cast<std::size_t>(std::clamp<long long>(i0, 0, n)), static_cast<std::size_t>(std::clamp<long long>(i1, 0, n))};
}

}  // namespace

std::array<double, kFeatureCount> FeatureVector::values() const {
    return {start_timestamp, duration, peak_count, trough_count, mean, variance, spectral_mean, psd_total, spectral_entropy};
}

std::vector<double> normalize_amplitude(std::span<const float> segment) { return minmax_scale(segment); }
std::vector<double> normalize_amplitude(std::span<const double> segment) { return minmax_scale(segment); }

std::vector<Segment> segment_normalized(std::span<const double> x, double t0, double sample_rate) {
    std::vector<Segment> out;
    const std::size_t n = x.size();
    if (n == 0) return out;
    const std::size_t w = std::min(window_samples(sample_rate), n);
    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s1[i + 1] = s1[i] + x[i];
        s2[i + 1] = s2[i] + x[i] * x[i];
    }
    const std::size_t half = w / 2;
    auto active = [&](std::size_t i) {
        std::size_t a = i >= half ? i - half : 0;
        std::size_t b = std::min(n, a + w);
        a = b >= w ? b - w : 0;
        double m = static_cast<double>(b - a);
        double mu = (s1[b] - s1[a]) / m;
        return (s2[b] - s2[a]) / m - mu * mu > kVarianceThreshold;
    };
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    while (i < n) {
        if (!active(i)) {
            ++i;
            continue;
        }
        std::size_t b = i;
        while (i < n && active(i)) ++i;
        runs.emplace_back(b, i);
    }
    std::vector<std::pair<std::size_t, std::size_t>> merged;
    for (const auto& r : runs) {
        if (!merged.empty() && r.first - merged.back().second < 2 * w)
            merged.back().second = r.second;
        else
            merged.push_back(r);
    }
    for (const auto& [b, e] : merged)
        out.push_back({b, e, t0 + static_cast<double>(b) / sample_rate, t0 + static_cast<double>(e) / sample_rate});
    return out;
}

std::vector<Segment> segment_informative(const IRTrace& trace) {
    if (trace.volts.empty()) return {};
    auto x = normalize_amplitude(std::span<const float>(trace.volts));
    return segment_normalized(x, trace.timestamp(0), 1e6 / static_cast<double>(trace.step_us));
}

FeatureVector extract_features(std::span<const double> seg, double start, double sample_rate) {
    const std::size_t n = seg.size();
    if (n < 8) throw SegmentTooShort("segment has " + std::to_string(n) + " samples, need 8");
    FeatureVector f;
    f.start_timestamp = start;
    f.duration = static_cast<double>(n) / sample_rate;

    double sum = 0.0;
    for (double v : seg) sum += v;
    f.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : seg) ss += (v - f.mean) * (v - f.mean);
    f.variance = ss / static_cast<double>(n);

    // Excursions above/below the mid level, counted only when bounded on both sides.
    int state = 0;  // 1 high, -1 low, 0 undecided
    bool seen_opposite_before = false;
    int peaks = 0, troughs = 0;
    for (double v : seg) {
        int next = state;
        if (v > 0.5 + kHysteresis) next = 1;
        else if (v < 0.5 - kHysteresis) next = -1;
        if (next != state) {
            if (state != 0 && seen_opposite_before) {
                if (state == 1) ++peaks;
                else ++troughs;
            }
            seen_opposite_before = state != 0;
            state = next;
        }
    }
    f.peak_count = peaks;
    f.trough_count = troughs;

    std::vector<double> centered(seg.begin(), seg.end());
    for (double& v : centered) v -= f.mean;
    const std::size_t nfft = next_pow2(n);
    auto p = power_spectrum(centered, nfft);
    const double df = sample_rate / static_cast<double>(nfft);
    double total = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        total += p[k];
        weighted += static_cast<double>(k) * df * p[k];
    }
    if (total > 0.0) {
        f.spectral_mean = weighted / total;
        f.psd_total = total * df;
        double h = 0.0;
        for (double pk : p) {
            if (pk <= 0.0) continue;
            double q = pk / total;
            h -= q * std::log(q);
        }
        f.spectral_entropy = std::max(0.0, h);
    }
    return f;
}

FeatureMap build_feature_map(const TraceSet& traces, const EventWindow& window) {
    FeatureMap fm;
    fm.window = window;
    fm.rows = traces.rows;
    fm.cols = traces.cols;
    fm.per_sensor.resize(traces.traces.size());
    const double fs = traces.sample_rate();
    for (std::size_t s = 0; s < traces.traces.size(); ++s) {
        const auto& tr = traces.traces[s];
        auto [i0, i1] = slice_bounds(tr, window.start, window.end);
        if (i1 <= i0) continue;
        std::span<const float> raw(tr.volts.data() + i0, i1 - i0);
        auto [lo, hi] = range_of(raw.data(), raw.size());
        if (hi - lo < kRespondingRange) continue;
        auto x = normalize_amplitude(raw);
        double t0 = tr.timestamp(i0);
        auto segs = segment_normalized(x, t0, fs);
        if (segs.empty()) continue;
        std::vector<double> info;
        for (const auto& sg : segs) info.insert(info.end(), x.begin() + static_cast<std::ptrdiff_t>(sg.begin), x.begin() + static_cast<std::ptrdiff_t>(sg.end));
        if (info.size() < 8) continue;
        fm.per_sensor[s] = extract_features(info, segs.front().start - window.start, fs);
    }
    return fm;
}

std::string feature_map_to_json(const FeatureMap& fm) {
    nlohmann::json j;
    j["window"] = {{"start", fm.window.start}, {"end", fm.window.end},
                   {"kind", fm.window.kind == WindowKind::typing ? "typing" : "idle"}};
    auto arr = nlohmann::json::array();
    for (int r = 0; r < fm.rows; ++r)
        for (int c = 0; c < fm.cols; ++c) {
            const auto& f = fm.at(r, c);
            arr.push_back({{"row", r}, {"col", c},
                           {"start_timestamp", f.start_timestamp}, {"duration", f.duration},
                           {"peak_count", f.peak_count}, {"trough_count", f.trough_count},
                           {"mean", f.mean}, {"variance", f.variance},
                           {"spectral_mean", f.spectral_mean}, {"psd_total", f.psd_total},
                           {"spectral_entropy", f.spectral_entropy}});
        }
    j["sensors"] = arr;
    return j.dump(2);
}

double skewness(std::span<const double> v) {
    if (v.size() < 3) return 0.0;
    double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 <= 1e-18 * mean * mean || m2 <= 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

std::vector<Dwell> pooled_dwells(const TraceSet& traces, double t0, double t1) {
    std::vector<Dwell> out;
    for (const auto& tr : traces.traces) {
        auto [i0, i1] = slice_bounds(tr, t0, t1);
        if (i1 <= i0 + 1) continue;
        auto [lo, hi] = range_of(tr.volts.data() + i0, i1 - i0);
        if (hi - lo < kRespondingRange) continue;
        const float thr = 0.5f * (hi + lo);
        std::size_t i = i0;
        while (i < i1) {
            if (tr.volts[i] >= thr) {
                ++i;
                continue;
            }
            std::size_t b = i;
            while (i < i1 && tr.volts[i] < thr) ++i;
            if (b == i0 || i == i1) continue;
            out.push_back({tr.timestamp(b), static_cast<double>(i - b) * 1e-6 * static_cast<double>(tr.step_us)});
        }
    }
    std::sort(out.begin(), out.end(), [](const Dwell& a, const Dwell& b) { return a.start < b.start; });
    return out;
}

double window_skewness(const TraceSet& traces, double t0, double t1) {
    auto dw = pooled_dwells(traces, t0, t1);
    std::vector<double> d;
    d.reserve(dw.size());
    for (const auto& x : dw) d.push_back(x.duration);
    return skewness(d);
}

WindowKind classify_window(const TraceSet& traces, const EventWindow& window) {
    return window_skewness(traces, window.start, window.end) > kSkewThreshold ? WindowKind::typing : WindowKind::idle;
}

std::vector<EventWindow> detect_typing_events(const TraceSet& traces) {
    const double t0 = traces.start();
    const double t1 = traces.end();
    std::vector<EventWindow> out;
    auto dwells = pooled_dwells(traces, t0, t1);
    if (dwells.empty()) {
        out.push_back({t0, t1, WindowKind::idle, t0});
        return out;
    }
    const auto blocks = static_cast<std::size_t>(std::ceil((t1 - t0) / kBlock - 1e-9));
    std::vector<std::vector<const Dwell*>> per_block(blocks);
    for (const auto& d : dwells) {
        auto b = static_cast<std::size_t>(std::floor((d.start - t0) / kBlock));
        if (b < blocks) per_block[b].push_back(&d);
    }
    std::vector<bool> typing(blocks, false);
    for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<double> v;
        for (const auto* d : per_block[b]) v.push_back(d->duration);
        typing[b] = skewness(v) > kSkewThreshold;
    }
    std::vector<double> onsets;
    for (std::size_t b = 0; b < blocks;) {
        if (!typing[b]) {
            ++b;
            continue;
        }
        const Dwell* best = nullptr;
        while (b < blocks && typing[b]) {
            for (const auto* d : per_block[b])
                if (!best || d->duration > best->duration) best = d;
            ++b;
        }
        if (best) onsets.push_back(best->start);
    }

    double cursor = t0;
    auto fill_idle = [&](double until) {
        while (until - cursor > 1e-9) {
            double e = std::min(until, cursor + 1.0);
            out.push_back({cursor, e, WindowKind::idle, cursor});
            cursor = e;
        }
    };
    for (std::size_t k = 0; k < onsets.size(); ++k) {
        double s = std::max(onsets[k] - kTypingLead, cursor);
        double e = std::min(onsets[k] + kTypingTail, t1);
        if (k + 1 < onsets.size()) e = std::min(e, onsets[k + 1]);
        if (e <= s) continue;
        fill_idle(s);
        out.push_back({s, e, WindowKind::typing, onsets[k]});
        cursor = e;
    }
    fill_idle(t1);
    return out;
}

}  // namespace irkey
