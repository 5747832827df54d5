// Python bindings for the simulation, inference and harness entry points.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "irkey/errors.hpp"
#include "irkey/experiment.hpp"
#include "irkey/trace_io.hpp"

namespace py = pybind11;
using namespace irkey;

namespace {

using Arr3 = std::array<double, 3>;
Vec3 vec(const Arr3& a) { return Vec3(a[0], a[1], a[2]); }

std::vector<std::string> names(const std::vector<KeyId>& keys) {
    std::vector<std::string> out;
    for (KeyId k : keys) out.emplace_back(key_name(k));
    return out;
}

std::vector<KeyId> ids(const std::vector<std::string>& keys) {
    std::vector<KeyId> out;
    for (const auto& s : keys) {
        auto k = parse_key(s);
        if (!k) throw ConfigError("unknown key " + s);
        out.push_back(*k);
    }
    return out;
}

ExperimentConfig make_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
    ExperimentConfig cfg = parse_config(text);
    for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
    cfg.validate();
    return cfg;
}

py::object json_loads(const std::string& s) { return py::module_::import("json").attr("loads")(s); }

const Dictionary& dictionary_for(const std::string& path) {
    static std::map<std::string, Dictionary> cache;
    std::string p = path.empty() ? default_dictionary_path() : path;
    auto it = cache.find(p);
    if (it == cache.end()) it = cache.emplace(p, load_dictionary(p)).first;
    return it->second;
}

py::dict traces_to_py(const TraceSet& ts) {
    py::array_t<float> volts({ts.rows, ts.cols, static_cast<int>(ts.samples())});
    auto v = volts.mutable_unchecked<3>();
    for (int r = 0; r < ts.rows; ++r)
        for (int c = 0; c < ts.cols; ++c) {
            const auto& t = ts.at(r, c);
            for (std::size_t i = 0; i < t.size(); ++i) v(r, c, static_cast<py::ssize_t>(i)) = t.volts[i];
        }
    py::dict d;
    d["volts"] = volts;
    d["start_us"] = ts.start_us();
    d["step_us"] = ts.step_us();
    d["supply_voltage"] = ts.supply_voltage;
    return d;
}

TraceSet traces_from_py(const py::dict& d) {
    auto volts = d["volts"].cast<py::array_t<float, py::array::c_style | py::array::forcecast>>();
    if (volts.ndim() != 3) throw ConfigError("volts must have shape (rows, cols, samples)");
    auto v = volts.unchecked<3>();
    TraceSet ts;
    ts.rows = static_cast<int>(volts.shape(0));
    ts.cols = static_cast<int>(volts.shape(1));
    if (d.contains("supply_voltage")) ts.supply_voltage = d["supply_voltage"].cast<double>();
    for (int r = 0; r < ts.rows; ++r)
        for (int c = 0; c < ts.cols; ++c) {
            IRTrace t;
            t.row = r;
            t.col = c;
            t.start_us = d.contains("start_us") ? d["start_us"].cast<std::int64_t>() : 0;
            t.step_us = d.contains("step_us") ? d["step_us"].cast<std::int64_t>() : 5;
            t.volts.resize(static_cast<std::size_t>(volts.shape(2)));
            for (py::ssize_t i = 0; i < volts.shape(2); ++i) t.volts[static_cast<std::size_t>(i)] = v(r, c, i);
            ts.traces.push_back(std::move(t));
        }
    return ts;
}

}  // namespace

PYBIND11_MODULE(_irkey, m) {
    m.doc() = "Infrared keystroke inference lab";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<SchemaError>(m, "SchemaError", base);
    py::register_exception<DomainError>(m, "DomainError", base);
    py::register_exception<SingularProjection>(m, "SingularProjection", base);
    py::register_exception<NonMonotoneTimestamps>(m, "NonMonotoneTimestamps", base);

    m.def("keys_from_text", [](const std::string& s) { return names(keys_from_text(s)); });
    m.def("keys_to_text", [](const std::vector<std::string>& keys) { return keys_to_text(ids(keys)); });
    m.def("layout", [] {
        py::dict d;
        for (const auto& k : build_default_layout().keys)
            d[py::str(std::string(key_name(k.id)))] = py::make_tuple(k.center.x(), k.center.y(), 2 * k.half_extent.x(), 2 * k.half_extent.y());
        return d;
    }, "Key name to (x, y, width, height) in meters.");

    m.def("estimate_orientation_angle", [](double delta_d, int n_ir, double cell_width) {
        CalibrationObservation o;
        o.delta_d = delta_d;
        o.n_ir = n_ir;
        return estimate_orientation_angle(o, cell_width);
    }, py::arg("delta_d"), py::arg("n_ir"), py::arg("cell_width") = 0.05);
    m.def("orientation_delta_d", &orientation_delta_d, py::arg("theta"), py::arg("cell_width") = 0.05, py::arg("n_ir") = 21);
    m.def("project_point", [](const Arr3& kb_normal, const Arr3& kb_anchor, const Arr3& arr_normal, const Arr3& arr_anchor, const Arr3& p) {
        Vec3 q = project_point(PlanePose::make(vec(kb_normal), vec(kb_anchor)), PlanePose::make(vec(arr_normal), vec(arr_anchor)), vec(p));
        return std::vector<double>{q.x(), q.y(), q.z()};
    });

    m.def("encrypt", [](const std::string& scheme, int tap, int key, int counter) {
        auto [c, st] = encrypt(parse_scheme(scheme), static_cast<std::uint8_t>(tap), {static_cast<std::uint8_t>(key), static_cast<std::uint8_t>(counter)});
        return py::make_tuple(static_cast<int>(c), static_cast<int>(st.counter));
    }, py::arg("scheme"), py::arg("tap"), py::arg("key"), py::arg("counter") = 0, "Returns (cipher, next_counter).");
    m.def("decrypt", [](const std::string& scheme, int cipher, int key, int counter) {
        auto [t, st] = decrypt(parse_scheme(scheme), static_cast<std::uint8_t>(cipher), {static_cast<std::uint8_t>(key), static_cast<std::uint8_t>(counter)});
        return py::make_tuple(static_cast<int>(t), static_cast<int>(st.counter));
    }, py::arg("scheme"), py::arg("cipher"), py::arg("key"), py::arg("counter") = 0);
    m.def("shuffle_layout", [](std::uint64_t seed) {
        py::dict d;
        for (const auto& k : shuffle_layout(build_default_layout(), seed).keys)
            d[py::str(std::string(key_name(k.id)))] = py::make_tuple(k.center.x(), k.center.y());
        return d;
    });

    m.def("keyboard_edit_distance", [](const std::string& a, const std::string& b) { return keyboard_edit_distance(a, b); });
    m.def("looks_like_password", [](const std::string& s, const std::string& dict) {
        return looks_like_password(s, dictionary_for(dict));
    }, py::arg("s"), py::arg("dictionary") = "");
    m.def("correct", [](const std::string& s, std::size_t k, const std::string& dict) {
        std::vector<std::string> out;
        for (const auto& c : correct_local(s, k, dictionary_for(dict)).candidates) out.push_back(c.text);
        return out;
    }, py::arg("s"), py::arg("k") = 3, py::arg("dictionary") = "");

    m.def("simulate", [](const std::string& text, const std::string& config, const std::map<std::string, std::string>& overrides) {
        auto cfg = make_config(config, overrides);
        const SimScenario& sc = cfg.scenario;
        auto script = make_script(keys_from_text(text), sc.typing_speed_class, sc.rng_seed);
        auto payloads = apply_encryption_to_session(script, cfg.defense);
        SimScenario s = sc;
        if (cfg.defense.shuffle) s.layout = shuffle_layout(build_default_layout(), cfg.defense.shuffle_seed);
        auto session = simulate_session_full(s, script, &payloads);
        py::dict d = traces_to_py(apply_scenario_transform(session.traces, s.kind));
        py::list presses;
        for (const auto& p : session.presses) presses.append(py::make_tuple(p.time, std::string(key_name(p.key))));
        d["presses"] = presses;
        return d;
    }, py::arg("text") = "hello", py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{},
       "Simulate typing text; returns volts (rows, cols, samples), start_us, step_us and the press log.");

    m.def("calibrate", [](const std::string& config, const std::map<std::string, std::string>& overrides) {
        auto cfg = make_config(config, overrides);
        SimScenario sc = cfg.scenario;
        sc.kind = ScenarioKind::direct;
        sc.dual_controller = false;
        sc.typing_speed_class = SpeedClass::medium;
        return calibration_to_json(calibrate(sc, {cfg.calibration_trials, cfg.seed}));
    }, py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{},
       "Returns calibration JSON text for infer().");

    m.def("infer", [](const py::dict& traces, const std::string& calibration, const std::string& kind) {
        auto cal = calibration_from_json(calibration);
        auto r = infer_session(traces_from_py(traces), cal, parse_scenario_kind(kind));
        if (!r.has_keys) return py::object(py::none());
        return json_loads(hypothesis_to_json(r.hypothesis));
    }, py::arg("traces"), py::arg("calibration"), py::arg("kind") = "direct");

    m.def("export_traces", [](const py::dict& traces) { return export_traces_string(traces_from_py(traces)); });
    m.def("parse_traces", [](const std::string& text) { return traces_to_py(parse_traces(text)); });

    m.def("run_experiment", [](const std::string& config, const std::map<std::string, std::string>& overrides) {
        return json_loads(report_to_json(run_experiment(make_config(config, overrides))));
    }, py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{});
    m.def("run_sweep", [](const std::string& axis, const std::vector<std::string>& values, const std::string& config,
                          const std::map<std::string, std::string>& overrides) {
        return json_loads(report_to_json(run_sweep(make_config(config, overrides), axis, values)));
    }, py::arg("axis"), py::arg("values"), py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{});
}
