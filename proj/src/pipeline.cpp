#include "irkey/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "irkey/errors.hpp"

namespace irkey {

Vec2 ray_grid_point(const SimScenario& scenario, const Vec2& q) {
    const auto array = scenario.array_geometry();
    ControllerPose pose = controller_at(scenario, q);
    const Vec3& n = array.pose.normal;
    double denom = n.dot(pose.pointing);
    if (std::abs(denom) < 1e-12) throw SingularProjection("controller axis parallel to the array");
    double t = n.dot(array.pose.anchor - pose.position) / denom;
    return array.grid_coords(pose.position + t * pose.pointing);
}

// Sessions run with the second controller resting on its key, so tracking-only
// hotspots are part of the training set. Labels are offsets to the nearer aim point.
std::vector<TrainingPair> collect_training(const SimScenario& scenario, const CalibrationOptions& opt) {
    SimScenario sc = scenario;
    sc.kind = ScenarioKind::direct;
    sc.dual_controller = true;
    const Vec2 rest = ray_grid_point(sc, sc.layout.rect(sc.left_rest_key).center);
    std::vector<TrainingPair> pairs;
    std::uint64_t trial = 0;
    for (int t = 0; t < opt.trials_per_key; ++t)
        for (KeyId key : all_keys()) {
            ++trial;
            sc.rng_seed = opt.seed * 1000003ULL + trial;
            auto script = make_script({key}, sc.typing_speed_class, sc.rng_seed);
            auto session = simulate_session_full(sc, script);
            const auto& press = session.presses.front();
            const Vec2 aims[2] = {ray_grid_point(sc, press.keyboard_point), rest};
            for (const auto& w : detect_typing_events(session.traces)) {
                if (w.kind != WindowKind::typing || press.time < w.start || press.time >= w.end) continue;
                auto fm = build_feature_map(session.traces, w);
                for (int r = 0; r < fm.rows; ++r)
                    for (int c = 0; c < fm.cols; ++c) {
                        const auto& f = fm.at(r, c);
                        if (f.is_zero()) continue;
                        Vec2 d(3.0, 3.0);
                        for (const auto& a : aims) {
                            Vec2 o(std::min(3.0, std::abs(r - a.x())), std::min(3.0, std::abs(c - a.y())));
                            if (o.norm() < d.norm()) d = o;
                        }
                        pairs.push_back({f, d});
                    }
            }
        }
    return pairs;
}

Calibration calibrate(const SimScenario& scenario, const CalibrationOptions& opt) {
    Calibration cal;
    cal.observation = simulate_calibration_observation(scenario);
    cal.theta = estimate_orientation_angle(cal.observation, scenario.array.cell_width);
    cal.array = scenario.array;
    cal.array.pose = tilted_array_pose(cal.theta);
    cal.keyboard = scenario.keyboard_pose();
    cal.layout = scenario.layout;
    auto pairs = collect_training(scenario, opt);
    cal.mapping = fit_mapping(pairs);
    return cal;
}

std::string calibration_to_json(const Calibration& c) {
    nlohmann::json j;
    j["theta"] = c.theta;
    j["observation"] = {{"delta_t", c.observation.delta_t}, {"n_ir", c.observation.n_ir},
                        {"f_ir", c.observation.f_ir}, {"delta_d", c.observation.delta_d}};
    j["array"] = {{"rows", c.array.rows}, {"cols", c.array.cols}, {"cell_width", c.array.cell_width},
                  {"normal", {c.array.pose.normal.x(), c.array.pose.normal.y(), c.array.pose.normal.z()}},
                  {"anchor", {c.array.pose.anchor.x(), c.array.pose.anchor.y(), c.array.pose.anchor.z()}}};
    j["keyboard"] = {{"normal", {c.keyboard.normal.x(), c.keyboard.normal.y(), c.keyboard.normal.z()}},
                     {"anchor", {c.keyboard.anchor.x(), c.keyboard.anchor.y(), c.keyboard.anchor.z()}}};
    j["layout"] = nlohmann::json::parse(layout_to_json(c.layout));
    j["mapping"] = nlohmann::json::parse(mapping_to_json(c.mapping));
    j["radius"] = c.radius;
    return j.dump(2);
}

Calibration calibration_from_json(const std::string& text) {
    Calibration c;
    try {
        auto j = nlohmann::json::parse(text);
        auto vec3 = [](const nlohmann::json& a) { return Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()); };
        c.theta = j.at("theta").get<double>();
        const auto& o = j.at("observation");
        c.observation = {o.at("delta_t").get<double>(), o.at("n_ir").get<int>(), o.at("f_ir").get<double>(), o.at("delta_d").get<double>()};
        const auto& a = j.at("array");
        c.array.rows = a.at("rows").get<int>();
        c.array.cols = a.at("cols").get<int>();
        c.array.cell_width = a.at("cell_width").get<double>();
        c.array.pose = PlanePose::make(vec3(a.at("normal")), vec3(a.at("anchor")));
        const auto& k = j.at("keyboard");
        c.keyboard = PlanePose::make(vec3(k.at("normal")), vec3(k.at("anchor")));
        c.layout = layout_from_json(j.at("layout").dump());
        c.mapping = mapping_from_json(j.at("mapping").dump());
        c.radius = j.value("radius", kDefaultRadius);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("calibration json: ") + e.what());
    }
    return c;
}

InferenceResult infer_session(const TraceSet& traces, const Calibration& cal, ScenarioKind kind) {
    InferenceResult res;
    res.windows = detect_typing_events(traces);
    for (const auto& w : res.windows) res.heatmaps.push_back(generate_heatmap(build_feature_map(traces, w), cal.mapping, cal.radius));
    try {
        res.hypothesis = decode(res.heatmaps, cal.layout, cal.keyboard, cal.array, kind);
        res.has_keys = true;
    } catch (const EmptyPath&) {
        res.has_keys = false;
    }
    return res;
}

}  // namespace irkey
