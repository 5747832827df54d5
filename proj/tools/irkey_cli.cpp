// Command-line front end: simulate, infer, calibrate, evaluate, defend, sweep, ingest-check.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irkey/errors.hpp"
#include "irkey/experiment.hpp"
#include "irkey/trace_io.hpp"

using namespace irkey;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << text;
    if (!text.empty() && text.back() != '\n') f << '\n';
}

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", path, "key = value config file");
        app->add_option("-s,--set", overrides, "override a config entry, e.g. scenario.distance=3");
    }

    ExperimentConfig load() const {
        ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
        for (const auto& o : overrides) {
            auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
            set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

std::vector<std::string> split_values(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Infrared keystroke inference lab"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a typing session and write its trace CSV");
    ConfigArgs sim_cfg;
    sim_cfg.attach(sim);
    std::string sim_text = "hello", sim_out, sim_truth;
    sim->add_option("-t,--text", sim_text, "text to type");
    sim->add_option("-o,--out", sim_out, "trace CSV path (stdout when omitted)");
    sim->add_option("--truth", sim_truth, "write press times and keys as JSON");

    // infer
    auto* inf = app.add_subcommand("infer", "decode a trace CSV into a keystroke hypothesis");
    std::string inf_traces, inf_cal, inf_out, inf_kind = "direct", inf_heatmaps;
    inf->add_option("traces", inf_traces, "trace CSV")->required();
    inf->add_option("--calibration", inf_cal, "calibration JSON from the calibrate command")->required();
    inf->add_option("--kind", inf_kind, "scenario kind: direct, concealed, reflection, low_visibility");
    inf->add_option("-o,--out", inf_out, "hypothesis JSON path");
    inf->add_option("--heatmaps", inf_heatmaps, "also write per-window heatmaps");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "run calibration sessions and fit the coordinate mapping");
    ConfigArgs cal_cfg;
    cal_cfg.attach(cal);
    std::string cal_out;
    cal->add_option("-o,--out", cal_out, "calibration JSON path");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "run an experiment and write its report");
    ConfigArgs ev_cfg;
    ev_cfg.attach(ev);
    std::string ev_out, ev_csv;
    ev->add_option("-o,--out", ev_out, "report JSON path");
    ev->add_option("--confusion-csv", ev_csv, "confusion table CSV path");

    // defend
    auto* def = app.add_subcommand("defend", "compare the undefended session with both encryption schemes");
    ConfigArgs def_cfg;
    def_cfg.attach(def);
    std::string def_out;
    def->add_option("-o,--out", def_out, "report JSON path");

    // sweep
    auto* sw = app.add_subcommand("sweep", "run one experiment per value along an axis");
    ConfigArgs sw_cfg;
    sw_cfg.attach(sw);
    std::string sw_axis, sw_values, sw_out;
    sw->add_option("--axis", sw_axis, "distance, angle, cell_width, speed, noise, kind, scheme, dual or a config key")
        ->required();
    sw->add_option("--values", sw_values, "comma separated values")->required();
    sw->add_option("-o,--out", sw_out, "report JSON path");

    // ingest-check
    auto* ic = app.add_subcommand("ingest-check", "validate a trace CSV");
    std::string ic_path;
    ic->add_option("traces", ic_path, "trace CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            ExperimentConfig cfg = sim_cfg.load();
            auto script = make_script(keys_from_text(sim_text), cfg.scenario.typing_speed_class, cfg.scenario.rng_seed);
            SimScenario sc = cfg.scenario;
            if (cfg.defense.shuffle) sc.layout = shuffle_layout(build_default_layout(), cfg.defense.shuffle_seed);
            auto payloads = apply_encryption_to_session(script, cfg.defense);
            auto session = simulate_session_full(sc, script, &payloads);
            auto traces = apply_scenario_transform(session.traces, sc.kind);
            if (sim_out.empty()) export_traces(traces, std::cout);
            else export_traces(traces, sim_out);
            if (!sim_truth.empty()) {
                std::ostringstream j;
                j << "{\"presses\": [";
                for (std::size_t i = 0; i < session.presses.size(); ++i)
                    j << (i ? ", " : "") << "{\"time\": " << session.presses[i].time << ", \"key\": \""
                      << key_name(session.presses[i].key) << "\"}";
                j << "]}\n";
                write_text(sim_truth, j.str());
            }
        } else if (*inf) {
            Calibration c = calibration_from_json(read_file(inf_cal));
            IngestReport rep;
            TraceSet traces = ingest_traces(inf_traces, &rep);
            auto result = infer_session(traces, c, parse_scenario_kind(inf_kind));
            if (!result.has_keys) std::cerr << "no keystrokes decoded\n";
            write_text(inf_out, hypothesis_to_json(result.hypothesis));
            if (!inf_heatmaps.empty()) write_text(inf_heatmaps, heatmaps_to_json(result.heatmaps));
        } else if (*cal) {
            ExperimentConfig cfg = cal_cfg.load();
            SimScenario sc = cfg.scenario;
            sc.kind = ScenarioKind::direct;
            sc.dual_controller = false;
            sc.typing_speed_class = SpeedClass::medium;
            Calibration c = calibrate(sc, {cfg.calibration_trials, cfg.seed});
            write_text(cal_out, calibration_to_json(c));
        } else if (*ev) {
            ExperimentConfig cfg = ev_cfg.load();
            if (!ev_out.empty()) cfg.output = ev_out;
            auto r = run_experiment(cfg);
            if (cfg.output.empty()) write_text("", report_to_json(r));
            if (!ev_csv.empty()) write_text(ev_csv, confusion_to_csv(r));
        } else if (*def) {
            ExperimentConfig cfg = def_cfg.load();
            if (!def_out.empty()) cfg.output = def_out;
            auto r = run_defend(cfg);
            if (cfg.output.empty()) write_text("", report_to_json(r));
        } else if (*sw) {
            ExperimentConfig cfg = sw_cfg.load();
            if (!sw_out.empty()) cfg.output = sw_out;
            auto r = run_sweep(cfg, sw_axis, split_values(sw_values));
            if (cfg.output.empty()) write_text("", report_to_json(r));
        } else if (*ic) {
            IngestReport rep;
            TraceSet t = ingest_traces(ic_path, &rep);
            std::cout << "ok: " << t.rows << "x" << t.cols << " sensors, " << t.samples() << " samples each, step "
                      << t.step_us() << " us, " << rep.rows_read << " rows";
            if (rep.reordered) std::cout << ", reordered";
            std::cout << "\n";
            for (const auto& g : rep.gaps)
                std::cout << "gap: sensor (" << g.row << "," << g.col << ") after " << g.after_us << " us, "
                          << g.missing << " samples held\n";
            if (rep.padded_tail) std::cout << "padded " << rep.padded_tail << " trailing samples\n";
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
