#include "irkey/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <boost/math/special_functions/erf.hpp>

#include "irkey/errors.hpp"

namespace irkey {

namespace {

constexpr double kTrackPeriod = 0.010;
constexpr double kTrackMark = 0.001;
constexpr double kTrackPhase[2] = {0.002, 0.007};
constexpr double kSweepPower = 0.25;
constexpr double kHold = 0.05;
constexpr double kSweepMax = 0.15;
constexpr double kFloorDistance = 5.02;
constexpr double kGolden = 0.6180339887498949;
constexpr double kPlastic = 0.7548776662466927;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_double(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

// Standard normal quantiles on a fine stratified grid, clipped at 3 sigma.
const std::vector<float>& normal_table() {
    static const std::vector<float> table = [] {
        constexpr std::size_t n = 1u << 12;
        std::vector<float> t(n);
        for (std::size_t i = 0; i < n; ++i) {
            double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
            double z = std::numbers::sqrt2 * boost::math::erf_inv(2.0 * p - 1.0);
            t[i] = static_cast<float>(std::clamp(z, -3.0, 3.0));
        }
        return t;
    }();
    return table;
}

struct Waypoint {
    double t;
    Vec2 q;
    double power;  // applies from this waypoint to the next
};

struct Track {
    std::vector<Waypoint> pts;

    Vec2 at(double t) const {
        if (t <= pts.front().t) return pts.front().q;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const auto& a = pts[i];
            const auto& b = pts[i + 1];
            if (t < b.t) {
                double span = b.t - a.t;
                double w = span > 0.0 ? (t - a.t) / span : 1.0;
                return a.q + w * (b.q - a.q);
            }
        }
        return pts.back().q;
    }

    double power_at(double t) const {
        double p = pts.front().power;
        for (const auto& w : pts) {
            if (w.t > t) break;
            p = w.power;
        }
        return p;
    }
};

struct Emission {
    double t0;
    double dur;
    ControllerPose pose;
    double scale;
};

std::vector<double> frame_marks(const FramePayload& payload) { return nec_frame_timing(payload); }

void push_frame(std::vector<Emission>& out, double t, const ControllerPose& pose, const FramePayload& payload) {
    auto timing = frame_marks(payload);
    double cursor = t;
    for (std::size_t i = 0; i < timing.size(); ++i) {
        if (i % 2 == 0) out.push_back({cursor, timing[i], pose, 1.0});
        cursor += timing[i];
    }
}

TraceSet render(const SimScenario& sc, const std::vector<Emission>& emissions, double start, double end) {
    const auto geom = sc.array_geometry();
    const auto step = sc.sensor.step_us();
    const double fs = sc.sensor.sample_rate;
    const std::int64_t start_us = std::llround(start * 1e6);
    const auto n = static_cast<std::size_t>(std::max<std::int64_t>(1, std::llround((end - start) * fs)));
    const int count = geom.sensor_count();

    std::vector<std::vector<std::uint8_t>> low(static_cast<std::size_t>(count), std::vector<std::uint8_t>(n, 0));
    std::vector<Vec3> positions;
    positions.reserve(static_cast<std::size_t>(count));
    for (int r = 0; r < geom.rows; ++r)
        for (int c = 0; c < geom.cols; ++c) positions.push_back(geom.position(r, c));

    const double floor = sensitivity_floor();
    const bool noisy = sc.noise_std > 0.0;
    for (std::size_t e = 0; e < emissions.size(); ++e) {
        const auto& em = emissions[e];
        auto i0 = std::llround((em.t0 - start) * fs);
        auto i1 = std::llround((em.t0 + em.dur - start) * fs);
        i0 = std::clamp<long long>(i0, 0, static_cast<long long>(n));
        i1 = std::clamp<long long>(i1, 0, static_cast<long long>(n));
        if (i1 <= i0) continue;
        for (int s = 0; s < count; ++s) {
            double p = capture_ratio(em.scale * received_power(em.pose, positions[static_cast<std::size_t>(s)], geom.pose.normal),
                                     floor, sc.capture_margin);
            if (p <= 0.0) continue;
            double u;
            if (noisy) {
                u = unit_double(splitmix64(sc.rng_seed ^ splitmix64(e * 1315423911ULL + static_cast<std::uint64_t>(s))));
            } else {
                double x = kGolden * static_cast<double>(e) + kPlastic * static_cast<double>(s);
                u = x - std::floor(x);
            }
            if (u < p) std::fill(low[static_cast<std::size_t>(s)].begin() + i0, low[static_cast<std::size_t>(s)].begin() + i1, 1);
        }
    }

    TraceSet ts;
    ts.rows = geom.rows;
    ts.cols = geom.cols;
    ts.supply_voltage = sc.sensor.supply_voltage;
    ts.saturation_voltage = sc.sensor.saturation_voltage;
    ts.traces.resize(static_cast<std::size_t>(count));
    const double hi = sc.sensor.supply_voltage;
    const double lo = sc.sensor.saturation_voltage;
    const double sigma = sc.noise_std;
    const auto mv_min = static_cast<long>(std::ceil((lo - 3.0 * sigma) * 1000.0 - 1e-9));
    const auto mv_max = static_cast<long>(std::floor((hi + 3.0 * sigma) * 1000.0 + 1e-9));
    auto quantize = [&](double v) {
        long mv = std::clamp(std::lround(v * 1000.0), mv_min, mv_max);
        return static_cast<float>(static_cast<double>(mv) / 1000.0);
    };
    // Quantized output for every (level, noise draw) pair.
    const auto& table = normal_table();
    std::vector<float> hi_tab(table.size()), lo_tab(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        hi_tab[i] = quantize(hi + sigma * table[i]);
        lo_tab[i] = quantize(lo + sigma * table[i]);
    }
    const float hi_q = quantize(hi), lo_q = quantize(lo);
    for (int s = 0; s < count; ++s) {
        auto& tr = ts.traces[static_cast<std::size_t>(s)];
        tr.row = s / geom.cols;
        tr.col = s % geom.cols;
        tr.start_us = start_us;
        tr.step_us = step;
        tr.volts.resize(n);
        const auto& mask = low[static_cast<std::size_t>(s)];
        float* out = tr.volts.data();
        if (!noisy) {
            for (std::size_t i = 0; i < n; ++i) out[i] = mask[i] ? lo_q : hi_q;
            continue;
        }
        std::mt19937_64 rng(splitmix64(sc.rng_seed * 0x2545F4914F6CDD1DULL + static_cast<std::uint64_t>(s) + 17));
        std::size_t i = 0;
        for (; i + 5 <= n; i += 5) {
            std::uint64_t bits = rng();
            for (int k = 0; k < 5; ++k) {
                auto idx = static_cast<std::size_t>((bits >> (12 * k)) & 0xFFF);
                out[i + k] = mask[i + k] ? lo_tab[idx] : hi_tab[idx];
            }
        }
        if (i < n) {
            std::uint64_t bits = rng();
            for (int k = 0; i < n; ++i, ++k) {
                auto idx = static_cast<std::size_t>((bits >> (12 * k)) & 0xFFF);
                out[i] = mask[i] ? lo_tab[idx] : hi_tab[idx];
            }
        }
    }
    return ts;
}

void check_range(const SimScenario& sc) {
    if (sc.enforce_range && sc.distance > kMaxCaptureDistance)
        throw OutOfRange("distance beyond capture range: " + std::to_string(sc.distance) + " m");
}

}  // namespace

std::string_view to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::direct: return "direct";
        case ScenarioKind::concealed: return "concealed";
        case ScenarioKind::reflection: return "reflection";
        case ScenarioKind::low_visibility: return "low_visibility";
    }
    return "direct";
}

std::string_view to_string(SpeedClass s) {
    switch (s) {
        case SpeedClass::fast: return "fast";
        case SpeedClass::medium: return "medium";
        case SpeedClass::slow: return "slow";
    }
    return "medium";
}

std::string_view to_string(Hand h) {
    switch (h) {
        case Hand::left: return "left";
        case Hand::right: return "right";
        case Hand::both: return "both";
    }
    return "right";
}

ScenarioKind parse_scenario_kind(std::string_view s) {
    for (auto k : {ScenarioKind::direct, ScenarioKind::concealed, ScenarioKind::reflection, ScenarioKind::low_visibility})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown scenario kind: " + std::string(s));
}

SpeedClass parse_speed_class(std::string_view s) {
    for (auto k : {SpeedClass::fast, SpeedClass::medium, SpeedClass::slow})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown speed class: " + std::string(s));
}

Hand parse_hand(std::string_view s) {
    for (auto k : {Hand::left, Hand::right, Hand::both})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown hand: " + std::string(s));
}

void SensorModel::validate() const {
    if (!(supply_voltage > saturation_voltage) || saturation_voltage < 0.0)
        throw ConfigError("need supply_voltage > saturation_voltage >= 0");
    if (!(pull_up > 0 && base_resistor > 0 && current_gain > 0 && base_current > 0))
        throw ConfigError("electrical values must be positive");
    if (!(response_frequency > 0) || !(response_frequency < sample_rate / 2.0))
        throw ConfigError("response_frequency must be below the Nyquist rate");
    step_us();
}

std::int64_t SensorModel::step_us() const {
    double step = 1e6 / sample_rate;
    auto r = std::llround(step);
    if (r < 1 || std::abs(step - static_cast<double>(r)) > 1e-9)
        throw ConfigError("sample_rate must divide 1 MHz");
    return r;
}

double sensor_output_voltage(const SensorModel& model, bool ir_present) {
    return ir_present ? model.saturation_voltage : model.supply_voltage;
}

double sensor_output_voltage(const SensorModel& model, double base_current) {
    double v = model.supply_voltage - model.current_gain * base_current * model.base_resistor;
    return std::clamp(v, model.saturation_voltage, model.supply_voltage);
}

void ControllerPose::validate() const {
    if (std::abs(pointing.norm() - 1.0) > 1e-9) throw ConfigError("pointing must be a unit vector");
    if (emitter_power < 0.004 || emitter_power > 0.125) throw ConfigError("emitter_power outside [0.004, 0.125] W");
    if (!(cone_half_angle > 0.0 && cone_half_angle < std::numbers::pi / 2)) throw ConfigError("cone_half_angle out of range");
    if (std::abs(wrist_up_down) > std::numbers::pi / 4 + 1e-12) throw ConfigError("wrist up/down outside +-45 deg");
    if (std::abs(wrist_left_right) > std::numbers::pi / 2 + 1e-12) throw ConfigError("wrist left/right outside +-90 deg");
}

double lobe_exponent(double cone_half_angle) {
    return std::log(0.1) / std::log(std::cos(cone_half_angle)) - 1.0;
}

double received_power(const ControllerPose& pose, const Vec3& point) {
    Vec3 d = point - pose.position;
    double dist2 = d.squaredNorm();
    if (dist2 <= 0.0) return 0.0;
    Vec3 dir = d / std::sqrt(dist2);
    double k = lobe_exponent(pose.cone_half_angle);
    double c_main = dir.dot(pose.pointing);
    double main = c_main > 0.0 ? 2.0 * (k + 1.0) * std::pow(c_main, k) : 0.0;
    Eigen::Matrix3d rot = (Eigen::AngleAxisd(pose.wrist_left_right, Vec3::UnitY()) *
                           Eigen::AngleAxisd(pose.wrist_up_down, Vec3::UnitX())).toRotationMatrix();
    // Broad ring around the pointing axis; wrist rotation only dims it.
    double tilt = std::max(0.0, (rot * pose.pointing).dot(pose.pointing));
    double ring = c_main > 0.0 ? 4.0 * c_main * tilt : 0.0;
    double gain = (1.0 - kRingFraction) * main + kRingFraction * ring;
    return pose.emitter_power * gain / (4.0 * std::numbers::pi * dist2);
}

double received_power(const ControllerPose& pose, const Vec3& point, const Vec3& receiver_normal) {
    Vec3 d = pose.position - point;
    double len = d.norm();
    if (len <= 0.0) return 0.0;
    double c = d.dot(receiver_normal) / (len * receiver_normal.norm());
    return c > 0.0 ? c * received_power(pose, point) : 0.0;
}

double sensitivity_floor() {
    static const double floor = [] {
        ControllerPose pose;
        pose.position = Vec3(0.0, 0.0, kFloorDistance);
        return received_power(pose, Vec3::Zero());
    }();
    return floor;
}

double capture_ratio(double power, double floor, double margin) {
    if (!(power >= floor) || floor <= 0.0) return 0.0;
    return std::clamp(std::log(power / floor) / margin, 0.0, 1.0);
}

SensorArrayGeometry SimScenario::array_geometry() const {
    SensorArrayGeometry g = array;
    g.pose = tilted_array_pose(orientation_angle);
    return g;
}

void SimScenario::validate() const {
    array_geometry().validate();
    layout.validate();
    sensor.validate();
    if (!(distance >= 0.5)) throw ConfigError("distance must be at least 0.5 m");
    if (!(std::abs(orientation_angle) < std::numbers::pi / 2)) throw ConfigError("orientation_angle must be below 90 deg");
    if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
    if (movement_jitter_std < 0.0) throw ConfigError("movement_jitter_std must be >= 0");
    if (!(capture_margin > 0.0)) throw ConfigError("capture_margin must be positive");
    ControllerPose p;
    p.emitter_power = emitter_power;
    p.cone_half_angle = cone_half_angle;
    p.wrist_up_down = wrist_up_down;
    p.wrist_left_right = wrist_left_right;
    p.validate();
}

void TypingScript::validate(SpeedClass cls) const {
    if (keystrokes.empty()) throw ConfigError("typing script is empty");
    if (per_key_interval.size() != keystrokes.size()) throw ConfigError("one interval per keystroke required");
    for (double d : per_key_interval) {
        bool ok = false;
        switch (cls) {
            case SpeedClass::fast: ok = d > 0.0 && d < 0.5; break;
            case SpeedClass::medium: ok = d >= 0.5 && d <= 2.0; break;
            case SpeedClass::slow: ok = d > 2.0; break;
        }
        if (!ok) throw ConfigError("interval " + std::to_string(d) + " outside the " + std::string(to_string(cls)) + " band");
    }
}

std::pair<double, double> interval_band(SpeedClass cls) {
    switch (cls) {
        case SpeedClass::fast: return {0.30, 0.45};
        case SpeedClass::medium: return {0.60, 1.80};
        case SpeedClass::slow: return {2.20, 3.00};
    }
    return {0.60, 1.80};
}

TypingScript make_script(const std::vector<KeyId>& keys, SpeedClass cls, std::uint64_t seed, Hand hand) {
    TypingScript s;
    s.keystrokes = keys;
    s.active_hand = hand;
    auto [lo, hi] = interval_band(cls);
    std::mt19937_64 rng(splitmix64(seed ^ 0x5EEDULL));
    for (std::size_t i = 0; i < keys.size(); ++i)
        s.per_key_interval.push_back(lo + (hi - lo) * unit_double(rng()));
    return s;
}

std::vector<KeyId> keys_from_text(std::string_view text) {
    std::vector<KeyId> out;
    for (char c : text) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c == '\n') {
            out.push_back(KeyId::Enter);
            continue;
        }
        auto k = parse_key(std::string_view(&c, 1));
        if (!k) throw ConfigError(std::string("no key for character '") + c + "'");
        out.push_back(*k);
    }
    return out;
}

std::uint8_t tap_code(KeyId k) { return static_cast<std::uint8_t>(0x20 + key_index(k)); }

std::vector<TapFrames> plain_payloads(const TypingScript& script) {
    std::vector<TapFrames> out;
    for (KeyId k : script.keystrokes) out.push_back({FramePayload{0x00, tap_code(k)}, std::nullopt});
    return out;
}

std::vector<double> nec_frame_timing(const FramePayload& payload) {
    std::vector<double> t = {0.009, 0.0045};
    const std::uint8_t bytes[4] = {payload.address, static_cast<std::uint8_t>(~payload.address), payload.command,
                                   static_cast<std::uint8_t>(~payload.command)};
    for (std::uint8_t b : bytes)
        for (int bit = 0; bit < 8; ++bit) {
            t.push_back(0.00056);
            t.push_back(((b >> bit) & 1) ? 0.00169 : 0.00056);
        }
    t.push_back(0.00056);
    return t;
}

double nec_frame_duration(const FramePayload& payload) {
    double s = 0.0;
    for (double d : nec_frame_timing(payload)) s += d;
    return s;
}

ControllerPose controller_at(const SimScenario& scenario, const Vec2& q) {
    ControllerPose p;
    p.position = scenario.keyboard_point(q);
    p.pointing = -scenario.keyboard_pose().normal;
    p.emitter_power = scenario.emitter_power;
    p.cone_half_angle = scenario.cone_half_angle;
    p.wrist_up_down = scenario.wrist_up_down;
    p.wrist_left_right = scenario.wrist_left_right;
    return p;
}

TraceSet simulate_burst(const SimScenario& scenario, const ControllerPose& pose, KeyId target_key,
                        bool is_button_press, double start) {
    if (start < 0.0) throw ConfigError("burst start must be >= 0");
    scenario.layout.rect(target_key);
    check_range(scenario);
    std::vector<Emission> em;
    double dur = kTrackMark;
    if (is_button_press) {
        FramePayload payload{0x00, tap_code(target_key)};
        push_frame(em, start, pose, payload);
        dur = nec_frame_duration(payload);
    } else {
        em.push_back({start, kTrackMark, pose, 1.0});
    }
    return render(scenario, em, start, start + dur + 0.005);
}

SessionResult simulate_session_full(const SimScenario& scenario, const TypingScript& script,
                                    const std::vector<TapFrames>* payloads, bool emit_presses) {
    scenario.validate();
    script.validate(scenario.typing_speed_class);
    check_range(scenario);
    std::vector<TapFrames> plain;
    if (!payloads) {
        plain = plain_payloads(script);
        payloads = &plain;
    }
    if (payloads->size() != script.keystrokes.size()) throw ConfigError("one payload per keystroke required");

    const std::size_t n = script.keystrokes.size();
    std::vector<int> owner(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        switch (script.active_hand) {
            case Hand::right: owner[i] = 0; break;
            case Hand::left: owner[i] = 1; break;
            case Hand::both: owner[i] = scenario.layout.rect(script.keystrokes[i]).center.x() < 0.0 ? 1 : 0; break;
        }
    }
    bool active[2] = {false, false};
    for (int o : owner) active[o] = true;
    if (scenario.dual_controller || script.active_hand == Hand::both) active[0] = active[1] = true;

    std::vector<double> t_press(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += script.per_key_interval[i];
        t_press[i] = acc;
    }

    std::mt19937_64 rng(splitmix64(scenario.rng_seed ^ 0x7A3C11ULL));
    const auto& table = normal_table();
    auto jitter = [&]() -> Vec2 {
        if (scenario.movement_jitter_std <= 0.0) return Vec2::Zero();
        std::uint64_t b = rng();
        return scenario.movement_jitter_std * Vec2(table[b & 0xFFF], table[(b >> 12) & 0xFFF]);
    };

    SessionResult result;
    Track tracks[2];
    const KeyId rest[2] = {scenario.right_rest_key, scenario.left_rest_key};
    for (int c = 0; c < 2; ++c) {
        if (!active[c]) continue;
        KeyId first = rest[c];
        for (std::size_t i = 0; i < n; ++i)
            if (owner[i] == c) {
                first = script.keystrokes[i];
                break;
            }
        tracks[c].pts.push_back({0.0, scenario.layout.rect(first).center + jitter(), 1.0});
    }

    std::optional<KeyId> last_key[2];
    for (std::size_t i = 0; i < n; ++i) {
        int c = owner[i];
        KeyId k = script.keystrokes[i];
        Track& tr = tracks[c];
        Vec2 current = tr.pts.back().q;
        if (last_key[c] && *last_key[c] != k) {
            double gap = script.per_key_interval[i];
            double t_prev = i > 0 ? t_press[i - 1] : 0.0;
            double hold = std::min(kHold, 0.1 * gap);
            double sweep = std::min(kSweepMax, 0.25 * gap);
            Vec2 target = scenario.layout.rect(k).center + jitter();
            tr.pts.push_back({t_prev + hold, current, kSweepPower});
            tr.pts.push_back({t_prev + hold + sweep, target, 1.0});
            current = target;
        }
        last_key[c] = k;
        if (emit_presses) result.presses.push_back({t_press[i], k, c, current});
    }

    struct Frame {
        double t;
        int ctrl;
        FramePayload payload;
    };
    std::vector<Frame> frames;
    if (emit_presses)
        for (std::size_t i = 0; i < n; ++i) frames.push_back({t_press[i], owner[i], (*payloads)[i].press});
    double end = t_press.back() + kTailHold;
    for (std::size_t i = 0; emit_presses && i < n; ++i) {
        const auto& sync = (*payloads)[i].sync;
        if (!sync) continue;
        double ts = t_press[i] + kSyncDelay;
        double len = nec_frame_duration(*sync);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (owner[j] != owner[i]) continue;
            double fe = t_press[j] + nec_frame_duration((*payloads)[j].press);
            if (ts + len > t_press[j] - 0.005 && ts < fe + 0.005) ts = fe + 0.02;
        }
        frames.push_back({ts, owner[i], *sync});
        result.sync_times.push_back(ts);
        end = std::max(end, ts + len + 0.05);
    }
    std::sort(frames.begin(), frames.end(), [](const Frame& a, const Frame& b) { return a.t < b.t; });

    std::vector<Emission> em;
    for (const auto& f : frames) push_frame(em, f.t, controller_at(scenario, tracks[f.ctrl].at(f.t)), f.payload);
    for (int c = 0; c < 2; ++c) {
        if (!active[c]) continue;
        for (double t = kTrackPhase[c]; t + kTrackMark <= end; t += kTrackPeriod) {
            bool blocked = false;
            for (const auto& f : frames) {
                if (f.ctrl != c) continue;
                double fe = f.t + nec_frame_duration(f.payload);
                if (t + kTrackMark > f.t - 0.001 && t < fe + 0.001) {
                    blocked = true;
                    break;
                }
            }
            if (blocked) continue;
            double mid = t + 0.5 * kTrackMark;
            em.push_back({t, kTrackMark, controller_at(scenario, tracks[c].at(mid)), tracks[c].power_at(mid)});
        }
    }
    std::stable_sort(em.begin(), em.end(), [](const Emission& a, const Emission& b) { return a.t0 < b.t0; });
    result.traces = render(scenario, em, 0.0, end);
    return result;
}

TraceSet simulate_session(const SimScenario& scenario, const TypingScript& script) {
    return simulate_session_full(scenario, script).traces;
}

TraceSet mirror_columns(const TraceSet& traces) {
    TraceSet out = traces;
    for (int r = 0; r < traces.rows; ++r)
        for (int c = 0; c < traces.cols; ++c) {
            auto& dst = out.at(r, c);
            dst.volts = traces.at(r, traces.cols - 1 - c).volts;
        }
    return out;
}

TraceSet apply_scenario_transform(const TraceSet& traces, ScenarioKind kind) {
    double a = 1.0;
    TraceSet out;
    switch (kind) {
        case ScenarioKind::direct:
        case ScenarioKind::low_visibility:
            return traces;
        case ScenarioKind::concealed:
            a = 0.9;
            out = traces;
            break;
        case ScenarioKind::reflection:
            a = 0.6;
            out = mirror_columns(traces);
            break;
    }
    const float vcc = static_cast<float>(traces.supply_voltage);
    const float af = static_cast<float>(a);
    for (auto& tr : out.traces)
        for (float& v : tr.volts) v = vcc - af * (vcc - v);
    return out;
}

CalibrationObservation simulate_calibration_observation(const SimScenario& scenario) {
    const auto geom = scenario.array_geometry();
    const int col = (geom.cols - 1) / 2;
    const int row = (geom.rows - 1) / 2;
    Vec3 center = geom.position(row, col);
    Vec3 top = geom.position(row - 1, col);
    Vec3 bottom = geom.position(row + 1, col);
    const PlanePose kb = scenario.keyboard_pose();
    Vec3 emitter = center + kb.normal * kb.normal.dot(kb.anchor - center);
    CalibrationObservation obs;
    obs.f_ir = scenario.sensor.response_frequency;
    obs.n_ir = std::max(1, static_cast<int>(std::lround(0.00056 * obs.f_ir)));
    double diff = (bottom - emitter).norm() - (top - emitter).norm();
    obs.delta_d = obs.n_ir * diff;
    obs.delta_t = diff / 299792458.0;
    return obs;
}

}  // namespace irkey
