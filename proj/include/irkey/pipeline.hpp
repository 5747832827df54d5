#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irkey/inference.hpp"

namespace irkey {

struct Calibration {
    double theta = 0.0;
    CalibrationObservation observation;
    SensorArrayGeometry array;  // pose built from the estimated angle
    PlanePose keyboard;
    KeyboardLayout layout;
    MlrMapping mapping;
    double radius = kDefaultRadius;
};

struct CalibrationOptions {
    int trials_per_key = 1;
    std::uint64_t seed = 7;
};

// Grid coordinates where the axis of a controller resting at keyboard point q meets the array.
Vec2 ray_grid_point(const SimScenario& scenario, const Vec2& q);

std::vector<TrainingPair> collect_training(const SimScenario& scenario, const CalibrationOptions& opt = {});
Calibration calibrate(const SimScenario& scenario, const CalibrationOptions& opt = {});

std::string calibration_to_json(const Calibration& c);
Calibration calibration_from_json(const std::string& text);

struct InferenceResult {
    std::vector<EventWindow> windows;
    std::vector<Heatmap> heatmaps;
    KeystrokeHypothesis hypothesis;
    bool has_keys = false;
};

InferenceResult infer_session(const TraceSet& traces, const Calibration& cal, ScenarioKind kind = ScenarioKind::direct);

}  // namespace irkey
