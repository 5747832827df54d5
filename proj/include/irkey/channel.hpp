#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "irkey/geometry.hpp"

namespace irkey {

enum class ScenarioKind { direct, concealed, reflection, low_visibility };
enum class SpeedClass { fast, medium, slow };
enum class Hand { left, right, both };

std::string_view to_string(ScenarioKind k);
std::string_view to_string(SpeedClass s);
std::string_view to_string(Hand h);
ScenarioKind parse_scenario_kind(std::string_view s);
SpeedClass parse_speed_class(std::string_view s);
Hand parse_hand(std::string_view s);

struct SensorModel {
    double supply_voltage = 5.0;
    double saturation_voltage = 0.1;
    double pull_up = 10e3;
    double base_resistor = 1e3;
    double current_gain = 100.0;
    double base_current = 5e-4;
    double response_frequency = 38000.0;
    double sample_rate = 200000.0;

    void validate() const;
    // Sample spacing in whole microseconds; sample_rate must divide 1e6.
    std::int64_t step_us() const;
};

double sensor_output_voltage(const SensorModel& model, bool ir_present);
// Transistor stage with an explicit base current, clamped to [V_sat, V_cc].
double sensor_output_voltage(const SensorModel& model, double base_current);

inline constexpr double kDefaultEmitterPower = 0.02;
inline constexpr double kDefaultConeHalfAngle = 0.0384;  // ~2.2 degrees
inline constexpr double kMaxCaptureDistance = 5.0;
inline constexpr double kRingFraction = 0.02;

struct ControllerPose {
    Vec3 position = Vec3::Zero();
    Vec3 pointing{0.0, 0.0, -1.0};
    double emitter_power = kDefaultEmitterPower;
    double cone_half_angle = kDefaultConeHalfAngle;
    double wrist_up_down = 0.0;
    double wrist_left_right = 0.0;

    void validate() const;
};

// Exponent k of the cos^k lobe holding 90% of the power inside the half angle.
double lobe_exponent(double cone_half_angle);
// Power reaching a point: main lobe plus a weak broad ring lobe steered by the wrist.
double received_power(const ControllerPose& pose, const Vec3& point);
// Same, seen by a flat receiver facing receiver_normal (cosine acceptance).
double received_power(const ControllerPose& pose, const Vec3& point, const Vec3& receiver_normal);
// Receiver floor: on-axis power of the default emitter just past the capture limit.
double sensitivity_floor();
// Fraction of bursts a sensor captures at the given received power.
double capture_ratio(double power, double floor, double margin);

struct SimScenario {
    SensorArrayGeometry array;  // pose is derived from orientation_angle
    KeyboardLayout layout = build_default_layout();
    double distance = 2.0;
    double orientation_angle = 0.0;
    ScenarioKind kind = ScenarioKind::direct;
    double noise_std = 0.05;
    double movement_jitter_std = 0.003;
    bool dual_controller = false;
    SpeedClass typing_speed_class = SpeedClass::medium;
    std::uint64_t rng_seed = 1;

    SensorModel sensor;
    double emitter_power = kDefaultEmitterPower;
    double cone_half_angle = kDefaultConeHalfAngle;
    double capture_margin = 1.5;  // nepers above the floor for full capture
    double wrist_up_down = 0.0;
    double wrist_left_right = 0.0;
    KeyId left_rest_key = KeyId::S;
    KeyId right_rest_key = KeyId::L;
    bool enforce_range = true;

    SensorArrayGeometry array_geometry() const;
    PlanePose keyboard_pose() const { return keyboard_pose_at(distance); }
    Vec3 keyboard_point(const Vec2& q) const { return keyboard_pose().to_world(q); }
    void validate() const;
};

struct IRTrace {
    int row = 0;
    int col = 0;
    std::int64_t start_us = 0;
    std::int64_t step_us = 5;
    std::vector<float> volts;

    std::size_t size() const { return volts.size(); }
    double timestamp(std::size_t i) const { return 1e-6 * static_cast<double>(start_us + step_us * static_cast<std::int64_t>(i)); }
    std::int64_t timestamp_us(std::size_t i) const { return start_us + step_us * static_cast<std::int64_t>(i); }
};

struct TraceSet {
    int rows = 0;
    int cols = 0;
    double supply_voltage = 5.0;
    double saturation_voltage = 0.1;
    std::vector<IRTrace> traces;  // row-major

    const IRTrace& at(int r, int c) const { return traces[static_cast<std::size_t>(r * cols + c)]; }
    IRTrace& at(int r, int c) { return traces[static_cast<std::size_t>(r * cols + c)]; }
    std::size_t samples() const { return traces.empty() ? 0 : traces.front().size(); }
    std::int64_t start_us() const { return traces.empty() ? 0 : traces.front().start_us; }
    std::int64_t step_us() const { return traces.empty() ? 1 : traces.front().step_us; }
    double sample_rate() const { return 1e6 / static_cast<double>(step_us()); }
    double start() const { return 1e-6 * static_cast<double>(start_us()); }
    double end() const { return start() + static_cast<double>(samples()) / sample_rate(); }
    double duration() const { return end() - start(); }
};

struct TypingScript {
    std::vector<KeyId> keystrokes;
    std::vector<double> per_key_interval;  // interval[i] precedes keystroke i
    Hand active_hand = Hand::right;

    void validate(SpeedClass cls) const;
};

// Interval band used when drawing intervals for a speed class.
std::pair<double, double> interval_band(SpeedClass cls);
TypingScript make_script(const std::vector<KeyId>& keys, SpeedClass cls, std::uint64_t seed,
                         Hand hand = Hand::right);
// One key per character, case-insensitive.
std::vector<KeyId> keys_from_text(std::string_view text);

// NEC-style frame payload.
struct FramePayload {
    std::uint8_t address = 0x00;
    std::uint8_t command = 0x00;
};

struct TapFrames {
    FramePayload press;
    std::optional<FramePayload> sync;  // extra frame sent after the tap
};

inline constexpr double kSyncDelay = 0.35;
inline constexpr double kTailHold = 0.25;

std::uint8_t tap_code(KeyId k);
std::vector<TapFrames> plain_payloads(const TypingScript& script);
// Mark/space durations (seconds, alternating, starting with a mark) of one frame.
std::vector<double> nec_frame_timing(const FramePayload& payload);
double nec_frame_duration(const FramePayload& payload);

struct PressRecord {
    double time = 0.0;
    KeyId key = KeyId::A;
    int controller = 0;  // 0 right, 1 left
    Vec2 keyboard_point = Vec2::Zero();
};

struct SessionResult {
    TraceSet traces;
    std::vector<PressRecord> presses;
    std::vector<double> sync_times;
    bool out_of_range = false;
};

TraceSet simulate_burst(const SimScenario& scenario, const ControllerPose& pose, KeyId target_key,
                        bool is_button_press, double start);
// emit_presses=false gives a pointing-only session (tracking bursts, no frames).
SessionResult simulate_session_full(const SimScenario& scenario, const TypingScript& script,
                                    const std::vector<TapFrames>* payloads = nullptr, bool emit_presses = true);
TraceSet simulate_session(const SimScenario& scenario, const TypingScript& script);

TraceSet apply_scenario_transform(const TraceSet& traces, ScenarioKind kind);
TraceSet mirror_columns(const TraceSet& traces);

// Geometric calibration reading taken by sweeping the controller across the array.
CalibrationObservation simulate_calibration_observation(const SimScenario& scenario);

// Controller pose that sits on the keyboard at q and points back at the array.
ControllerPose controller_at(const SimScenario& scenario, const Vec2& q);

}  // namespace irkey
