#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "irkey/features.hpp"

namespace irkey {

// Regression target: grid offset (|d_row|, |d_col|) of a sensor from the keystroke point.
struct TrainingPair {
    FeatureVector features;
    Vec2 coord = Vec2::Zero();
};

struct MlrMapping {
    // Row o holds output o: 6 time-feature weights then 3 frequency-feature weights.
    Eigen::Matrix<double, 2, kFeatureCount> coef = Eigen::Matrix<double, 2, kFeatureCount>::Zero();
    Vec2 intercept = Vec2::Zero();
    double residual = 0.0;  // summed squared error on the training set
    std::size_t samples = 0;

    Eigen::Matrix<double, 1, 6> alpha(int output) const { return coef.block<1, 6>(output, 0); }
    Eigen::Matrix<double, 1, 3> beta(int output) const { return coef.block<1, 3>(output, 6); }
};

inline constexpr std::size_t kMinTrainingPairs = 20;

MlrMapping fit_mapping(std::span<const TrainingPair> training);
Vec2 predict(const MlrMapping& m, const FeatureVector& f);
double training_residual(const MlrMapping& m, std::span<const TrainingPair> training);
std::string mapping_to_json(const MlrMapping& m);
MlrMapping mapping_from_json(const std::string& text);

struct Heatmap {
    EventWindow window;
    int rows = 0;
    int cols = 0;
    std::vector<double> grid;  // row-major, values in [0, 1]

    double at(int r, int c) const { return grid[static_cast<std::size_t>(r * cols + c)]; }
    double& at(int r, int c) { return grid[static_cast<std::size_t>(r * cols + c)]; }
};

inline constexpr double kDefaultRadius = 1.5;
inline constexpr double kSpotThreshold = 0.8;

// Rescales to [0, 1]; an all-zero grid stays zero and a flat non-zero grid becomes all ones.
void normalize_heatmap(Heatmap& h);
Heatmap generate_heatmap(const FeatureMap& fm, const MlrMapping& mapping, double radius = kDefaultRadius);
Heatmap mirror_heatmap(const Heatmap& h);

struct Cell {
    int row;
    int col;
};

struct Spot {
    std::vector<Cell> cells;
    Vec2 center = Vec2::Zero();  // (row, col) of the bounding-box center
    double strength = 0.0;
};

std::vector<Spot> threshold_spots(const Heatmap& h, double tau = kSpotThreshold);

// Spot centers sit on a half-cell lattice, so a half-cell shift is one boundary
// cell crossing the threshold and still counts as static.
inline constexpr double kStaticDisplacement = 0.5;

std::vector<Heatmap> remove_image_retention(const std::vector<Heatmap>& heatmaps, int horizon = 3);
std::vector<Vec2> reconstruct_path(const std::vector<Heatmap>& cleaned);

SpeedClass estimate_typing_speed(std::span<const double> event_times);

struct KeyRun {
    KeyId key;
    int windows = 1;         // typing windows merged into this run
    bool sustained = false;  // a full idle window between them showed the same key
};

std::vector<KeyId> expand_repeats(const std::vector<KeyId>& raw_keys, const std::vector<KeyRun>& runs, SpeedClass speed);

struct KeystrokeHypothesis {
    std::vector<KeyId> raw_keys;
    std::vector<Vec2> path;  // keyboard-plane points of each run
    SpeedClass speed_class = SpeedClass::medium;
    std::vector<KeyId> expanded_keys;
    std::vector<std::vector<KeyId>> key_candidates;  // nearest keys per raw key, best first
    std::vector<double> onsets;
};

std::string hypothesis_to_json(const KeystrokeHypothesis& h);
std::string heatmaps_to_json(const std::vector<Heatmap>& maps);

// Keys ordered by distance from a keyboard-plane point (containing key first).
std::vector<KeyId> nearest_keys(const KeyboardLayout& layout, const Vec2& p, std::size_t k);

// Decodes one heatmap per window (typing and idle, in time order).
KeystrokeHypothesis decode(const std::vector<Heatmap>& heatmaps, const KeyboardLayout& layout,
                           const PlanePose& keyboard_pose, const SensorArrayGeometry& array,
                           ScenarioKind kind = ScenarioKind::direct);

}  // namespace irkey
