#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "irkey/channel.hpp"

namespace irkey {

enum class WindowKind { typing, idle };

struct EventWindow {
    double start = 0.0;
    double end = 0.0;
    WindowKind kind = WindowKind::idle;
    double onset = 0.0;  // press time for typing windows, start for idle ones
};

inline constexpr int kFeatureCount = 9;

struct FeatureVector {
    double start_timestamp = 0.0;
    double duration = 0.0;
    double peak_count = 0.0;
    double trough_count = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double spectral_mean = 0.0;
    double psd_total = 0.0;
    double spectral_entropy = 0.0;

    std::array<double, kFeatureCount> values() const;
    bool is_zero() const { return duration <= 0.0; }
};

struct FeatureMap {
    EventWindow window;
    int rows = 0;
    int cols = 0;
    std::vector<FeatureVector> per_sensor;  // row-major

    const FeatureVector& at(int r, int c) const { return per_sensor[static_cast<std::size_t>(r * cols + c)]; }
};

struct Segment {
    std::size_t begin = 0;  // sample indices, end exclusive
    std::size_t end = 0;
    double start = 0.0;
    double stop = 0.0;
    double duration() const { return stop - start; }
};

inline constexpr double kVarianceThreshold = 0.1;
inline constexpr double kVarianceWindow = 0.005;
inline constexpr double kSkewThreshold = 0.5;
inline constexpr double kRespondingRange = 0.5;

std::vector<double> normalize_amplitude(std::span<const float> segment);
std::vector<double> normalize_amplitude(std::span<const double> segment);

std::vector<Segment> segment_informative(const IRTrace& trace);
// Segmentation of an already normalized slice whose first sample is at t0.
std::vector<Segment> segment_normalized(std::span<const double> x, double t0, double sample_rate);

FeatureVector extract_features(std::span<const double> segment, double start, double sample_rate);
FeatureMap build_feature_map(const TraceSet& traces, const EventWindow& window);
std::string feature_map_to_json(const FeatureMap& fm);

struct Dwell {
    double start;
    double duration;
};

// Fisher skewness; 0 for fewer than 3 values or zero spread.
double skewness(std::span<const double> values);
// Low-state runs of responding sensors within [t0, t1); runs touching the slice edges are dropped.
std::vector<Dwell> pooled_dwells(const TraceSet& traces, double t0, double t1);
double window_skewness(const TraceSet& traces, double t0, double t1);
WindowKind classify_window(const TraceSet& traces, const EventWindow& window);

inline constexpr double kTypingLead = 0.8;
inline constexpr double kTypingTail = 0.2;

std::vector<EventWindow> detect_typing_events(const TraceSet& traces);

}  // namespace irkey
