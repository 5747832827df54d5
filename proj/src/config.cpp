#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "irkey/errors.hpp"
#include "irkey/experiment.hpp"

#ifndef IRKEY_DATA_DIR
#define IRKEY_DATA_DIR "data"
#endif

namespace irkey {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc{} || r.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    int base = 10;
    std::string s = v;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        s = s.substr(2);
        base = 16;
    }
    auto r = std::from_chars(s.data(), s.data() + s.size(), out, base);
    if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <class F>
auto wrap(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto num = [](double SimScenario::*field, double scale = 1.0) {
            return [field, scale](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.scenario.*field = to_double(k, v) * scale;
            };
        };
        auto sensor = [](double SensorModel::*field) {
            return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.scenario.sensor.*field = to_double(k, v);
            };
        };
        t["scenario.distance"] = num(&SimScenario::distance);
        t["scenario.orientation_angle_deg"] = num(&SimScenario::orientation_angle, kDeg);
        t["scenario.noise_std"] = num(&SimScenario::noise_std);
        t["scenario.movement_jitter_std"] = num(&SimScenario::movement_jitter_std);
        t["scenario.emitter_power"] = num(&SimScenario::emitter_power);
        t["scenario.cone_half_angle_deg"] = num(&SimScenario::cone_half_angle, kDeg);
        t["scenario.capture_margin"] = num(&SimScenario::capture_margin);
        t["scenario.wrist_up_down_deg"] = num(&SimScenario::wrist_up_down, kDeg);
        t["scenario.wrist_left_right_deg"] = num(&SimScenario::wrist_left_right, kDeg);
        t["scenario.kind"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.kind = wrap(k, [&] { return parse_scenario_kind(v); });
        };
        t["scenario.typing_speed_class"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.typing_speed_class = wrap(k, [&] { return parse_speed_class(v); });
        };
        t["scenario.dual_controller"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.dual_controller = to_bool(k, v);
        };
        t["scenario.enforce_range"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.enforce_range = to_bool(k, v);
        };
        t["scenario.rng_seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.rng_seed = to_u64(k, v);
        };
        t["scenario.left_rest_key"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            auto key = parse_key(v);
            if (!key) throw ConfigError(k + ": unknown key '" + v + "'");
            c.scenario.left_rest_key = *key;
        };
        t["scenario.right_rest_key"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            auto key = parse_key(v);
            if (!key) throw ConfigError(k + ": unknown key '" + v + "'");
            c.scenario.right_rest_key = *key;
        };
        t["array.rows"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.array.rows = static_cast<int>(to_int(k, v));
        };
        t["array.cols"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.array.cols = static_cast<int>(to_int(k, v));
        };
        t["array.cell_width"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.scenario.array.cell_width = to_double(k, v);
        };
        t["sensor.supply_voltage"] = sensor(&SensorModel::supply_voltage);
        t["sensor.saturation_voltage"] = sensor(&SensorModel::saturation_voltage);
        t["sensor.pull_up"] = sensor(&SensorModel::pull_up);
        t["sensor.base_resistor"] = sensor(&SensorModel::base_resistor);
        t["sensor.current_gain"] = sensor(&SensorModel::current_gain);
        t["sensor.base_current"] = sensor(&SensorModel::base_current);
        t["sensor.response_frequency"] = sensor(&SensorModel::response_frequency);
        t["sensor.sample_rate"] = sensor(&SensorModel::sample_rate);

        auto int_field = [](int ExperimentConfig::*field) {
            return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*field = static_cast<int>(to_int(k, v));
            };
        };
        t["experiment.trials_per_key"] = int_field(&ExperimentConfig::trials_per_key);
        t["experiment.words_per_length"] = int_field(&ExperimentConfig::words_per_length);
        t["experiment.min_word_length"] = int_field(&ExperimentConfig::min_word_length);
        t["experiment.max_word_length"] = int_field(&ExperimentConfig::max_word_length);
        t["experiment.calibration_trials"] = int_field(&ExperimentConfig::calibration_trials);
        t["experiment.threads"] = int_field(&ExperimentConfig::threads);
        t["experiment.seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.seed = to_u64(k, v);
        };
        t["experiment.dictionary"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.dictionary = v;
        };
        t["experiment.output"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output = v; };

        t["corrector.backend"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if (v == "local") c.corrector.backend = Backend::local;
            else if (v == "remote") c.corrector.backend = Backend::remote;
            else throw ConfigError(k + ": expected local or remote, got '" + v + "'");
        };
        t["corrector.endpoint"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.corrector.endpoint = v;
        };
        t["corrector.timeout_ms"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.corrector.timeout_ms = to_int(k, v);
        };
        t["corrector.k"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            std::int64_t n = to_int(k, v);
            if (n < 1) throw ConfigError(k + ": must be at least 1");
            c.corrector.k = static_cast<std::size_t>(n);
        };

        t["defense.scheme"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.defense.scheme = wrap(k, [&] { return parse_scheme(v); });
        };
        t["defense.key_seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.defense.key_seed = to_u64(k, v);
        };
        t["defense.shuffle"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.defense.shuffle = to_bool(k, v);
        };
        t["defense.shuffle_seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.defense.shuffle_seed = to_u64(k, v);
        };
        for (const char* m : {"char_t1", "char_t3", "word_t1", "word_t3"}) {
            t[std::string("reference.") + m] = [m](ExperimentConfig& c, const std::string& k, const std::string& v) {
                double x = to_double(k, v);
                if (x < 0.0 || x > 1.0) throw ConfigError(k + ": must lie in [0, 1]");
                c.reference[m] = x;
            };
        }
        return t;
    }();
    return table;
}

}  // namespace

void ExperimentConfig::validate() const {
    scenario.validate();
    if (trials_per_key < 0) throw ConfigError("experiment.trials_per_key must be >= 0");
    if (words_per_length < 0) throw ConfigError("experiment.words_per_length must be >= 0");
    if (min_word_length < 1 || max_word_length < min_word_length)
        throw ConfigError("experiment word lengths must satisfy 1 <= min <= max");
    if (calibration_trials < 1) throw ConfigError("experiment.calibration_trials must be >= 1");
    if (threads < 0) throw ConfigError("experiment.threads must be >= 0");
    if (corrector.k < 1) throw ConfigError("corrector.k must be >= 1");
    if (corrector.timeout_ms <= 0) throw ConfigError("corrector.timeout_ms must be positive");
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, key, value);
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(n, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(n, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ParseError(n, e.what());
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_text(const ExperimentConfig& c) {
    std::ostringstream o;
    o.precision(17);
    const SimScenario& s = c.scenario;
    o << "[scenario]\n"
      << "distance = " << s.distance << "\n"
      << "orientation_angle_deg = " << s.orientation_angle / kDeg << "\n"
      << "kind = " << to_string(s.kind) << "\n"
      << "noise_std = " << s.noise_std << "\n"
      << "movement_jitter_std = " << s.movement_jitter_std << "\n"
      << "dual_controller = " << (s.dual_controller ? "true" : "false") << "\n"
      << "typing_speed_class = " << to_string(s.typing_speed_class) << "\n"
      << "rng_seed = " << s.rng_seed << "\n"
      << "emitter_power = " << s.emitter_power << "\n"
      << "cone_half_angle_deg = " << s.cone_half_angle / kDeg << "\n"
      << "capture_margin = " << s.capture_margin << "\n"
      << "wrist_up_down_deg = " << s.wrist_up_down / kDeg << "\n"
      << "wrist_left_right_deg = " << s.wrist_left_right / kDeg << "\n"
      << "left_rest_key = " << key_name(s.left_rest_key) << "\n"
      << "right_rest_key = " << key_name(s.right_rest_key) << "\n"
      << "enforce_range = " << (s.enforce_range ? "true" : "false") << "\n"
      << "\n[array]\n"
      << "rows = " << s.array.rows << "\n"
      << "cols = " << s.array.cols << "\n"
      << "cell_width = " << s.array.cell_width << "\n"
      << "\n[sensor]\n"
      << "supply_voltage = " << s.sensor.supply_voltage << "\n"
      << "saturation_voltage = " << s.sensor.saturation_voltage << "\n"
      << "pull_up = " << s.sensor.pull_up << "\n"
      << "base_resistor = " << s.sensor.base_resistor << "\n"
      << "current_gain = " << s.sensor.current_gain << "\n"
      << "base_current = " << s.sensor.base_current << "\n"
      << "response_frequency = " << s.sensor.response_frequency << "\n"
      << "sample_rate = " << s.sensor.sample_rate << "\n"
      << "\n[experiment]\n"
      << "trials_per_key = " << c.trials_per_key << "\n"
      << "words_per_length = " << c.words_per_length << "\n"
      << "min_word_length = " << c.min_word_length << "\n"
      << "max_word_length = " << c.max_word_length << "\n"
      << "seed = " << c.seed << "\n"
      << "calibration_trials = " << c.calibration_trials << "\n";
    if (!c.dictionary.empty()) o << "dictionary = " << c.dictionary << "\n";
    o << "threads = " << c.threads << "\n";
    if (!c.output.empty()) o << "output = " << c.output << "\n";
    o << "\n[corrector]\n"
      << "backend = " << (c.corrector.backend == Backend::local ? "local" : "remote") << "\n";
    if (!c.corrector.endpoint.empty()) o << "endpoint = " << c.corrector.endpoint << "\n";
    o << "timeout_ms = " << c.corrector.timeout_ms << "\n"
      << "k = " << c.corrector.k << "\n"
      << "\n[defense]\n"
      << "scheme = " << to_string(c.defense.scheme) << "\n"
      << "key_seed = " << c.defense.key_seed << "\n"
      << "shuffle = " << (c.defense.shuffle ? "true" : "false") << "\n"
      << "shuffle_seed = " << c.defense.shuffle_seed << "\n";
    if (!c.reference.empty()) {
        o << "\n[reference]\n";
        for (const auto& [k, v] : c.reference) o << k << " = " << v << "\n";
    }
    return o.str();
}

std::string default_dictionary_path() {
    if (const char* env = std::getenv("IRKEY_DICTIONARY"); env && *env) return env;
    return std::string(IRKEY_DATA_DIR) + "/words.tsv";
}

}  // namespace irkey
