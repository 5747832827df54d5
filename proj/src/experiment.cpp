#include "irkey/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "irkey/errors.hpp"

namespace irkey {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(splitmix(a) ^ (b * 0xD6E8FEB86659FD93ULL)); }

// Runs f(i) for i in [0, n). The error from the lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t err_idx = n;
    std::exception_ptr err;
    auto body = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < err_idx) {
                    err_idx = i;
                    err = std::current_exception();
                }
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);
}

template <class F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

struct Simulated {
    bool captured = false;
    InferenceResult result;
};

// simulate -> transform -> infer.
Simulated run_session(const SimScenario& sc, const TypingScript& script, const DefenseConfig& defense,
                      const Calibration& cal) {
    Simulated out;
    auto payloads = apply_encryption_to_session(script, defense);
    SessionResult session = stage("simulate", [&] { return simulate_session_full(sc, script, &payloads); });
    TraceSet observed = apply_scenario_transform(session.traces, sc.kind);
    out.result = stage("infer", [&] { return infer_session(observed, cal, sc.kind); });
    for (const auto& w : out.result.windows)
        if (w.kind == WindowKind::typing) out.captured = true;
    return out;
}

int typing_windows(const InferenceResult& r) {
    return static_cast<int>(std::count_if(r.windows.begin(), r.windows.end(),
                                          [](const EventWindow& w) { return w.kind == WindowKind::typing; }));
}

bool out_of_range(const SimScenario& sc) { return sc.enforce_range && sc.distance > kMaxCaptureDistance; }

SimScenario calibration_scenario(const SimScenario& s) {
    SimScenario c = s;
    c.layout = build_default_layout();
    c.kind = ScenarioKind::direct;
    c.dual_controller = false;
    c.typing_speed_class = SpeedClass::medium;
    c.rng_seed = 0;
    return c;
}

std::string calibration_key(const ExperimentConfig& cfg) {
    ExperimentConfig k;
    k.scenario = calibration_scenario(cfg.scenario);
    k.seed = cfg.seed;
    k.calibration_trials = cfg.calibration_trials;
    return config_to_text(k);
}

Calibration make_calibration(const ExperimentConfig& cfg) {
    return stage("calibrate", [&] {
        return calibrate(calibration_scenario(cfg.scenario),
                         {cfg.calibration_trials, mix(cfg.seed, 0xCA11)});
    });
}

std::vector<std::string> sample_words(const Dictionary& dict, const ExperimentConfig& cfg) {
    std::vector<std::string> out;
    std::mt19937_64 rng(mix(cfg.seed, 0x3D5));
    for (int len = cfg.min_word_length; len <= cfg.max_word_length; ++len) {
        std::vector<std::string> pool;
        for (const auto& w : dict.words)
            if (static_cast<int>(w.size()) == len) pool.push_back(w);
        std::size_t take = std::min(pool.size(), static_cast<std::size_t>(cfg.words_per_length));
        for (std::size_t i = 0; i < take; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    }
    return out;
}

struct CharOutcome {
    int events = 0;
    std::optional<KeyId> predicted;
    std::vector<KeyId> top;  // best first
};

struct WordOutcome {
    int events = 0;
    CandidateSet set;
};

ExperimentReport run_with(const ExperimentConfig& cfg, const Calibration* cal_in) {
    auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    ExperimentReport rep;
    rep.config = config_to_text(cfg);
    rep.seed = cfg.seed;

    SimScenario victim = cfg.scenario;
    if (cfg.defense.shuffle) victim.layout = shuffle_layout(build_default_layout(), cfg.defense.shuffle_seed);

    std::vector<std::string> words;
    Dictionary dict;
    if (cfg.words_per_length > 0) {
        dict = stage("dictionary", [&] {
            return load_dictionary(cfg.dictionary.empty() ? default_dictionary_path() : cfg.dictionary);
        });
        words = sample_words(dict, cfg);
    }

    const std::size_t n_char = static_cast<std::size_t>(cfg.trials_per_key) * kKeyCount;
    rep.char_trials = static_cast<int>(n_char);
    rep.word_trials = static_cast<int>(words.size());

    std::vector<CharOutcome> chars(n_char);
    std::vector<WordOutcome> wouts(words.size());

    const bool silent = out_of_range(victim);
    if (silent) {
        rep.notes.push_back("distance exceeds the capture range; zero captured events");
    } else {
        Calibration owned;
        const Calibration* cal = cal_in;
        if (!cal) {
            owned = make_calibration(cfg);
            cal = &owned;
        }
        auto keys = all_keys();
        parallel_for(n_char, cfg.threads, [&](std::size_t i) {
            KeyId key = keys[i % kKeyCount];
            std::uint64_t trial = i / kKeyCount;
            SimScenario sc = victim;
            sc.rng_seed = mix(mix(cfg.seed, 0xC4A2), trial * 1000 + key_index(key));
            auto script = make_script({key}, sc.typing_speed_class, sc.rng_seed);
            auto sim = run_session(sc, script, cfg.defense, *cal);
            CharOutcome& o = chars[i];
            o.events = typing_windows(sim.result);
            if (!sim.result.has_keys) return;
            const auto& h = sim.result.hypothesis;
            o.predicted = h.raw_keys.back();
            o.top.push_back(*o.predicted);
            for (KeyId c : h.key_candidates.back())
                if (o.top.size() < 3 && std::find(o.top.begin(), o.top.end(), c) == o.top.end()) o.top.push_back(c);
        });

        RemoteOptions ropt;
        ropt.endpoint = cfg.corrector.endpoint;
        ropt.timeout = std::chrono::milliseconds(cfg.corrector.timeout_ms);
        parallel_for(words.size(), cfg.threads, [&](std::size_t i) {
            SimScenario sc = victim;
            sc.rng_seed = mix(mix(cfg.seed, 0x3011D), i);
            auto script = make_script(keys_from_text(words[i]), sc.typing_speed_class, sc.rng_seed);
            auto sim = run_session(sc, script, cfg.defense, *cal);
            WordOutcome& o = wouts[i];
            o.events = typing_windows(sim.result);
            std::string text = sim.result.has_keys ? keys_to_text(sim.result.hypothesis.expanded_keys) : std::string();
            if (text.empty()) {
                o.set.query = text;
                return;
            }
            o.set = stage("correct", [&] {
                return cfg.corrector.backend == Backend::remote ? remote_correct(text, cfg.corrector.k, ropt, dict)
                                                                : correct_local(text, cfg.corrector.k, dict);
            });
        });
    }

    int t1 = 0, t3 = 0;
    auto keys = all_keys();
    for (std::size_t i = 0; i < n_char; ++i) {
        KeyId truth = keys[i % kKeyCount];
        const CharOutcome& o = chars[i];
        rep.captured_events += o.events;
        int ti = key_index(truth);
        if (!o.predicted) {
            rep.unassigned[static_cast<std::size_t>(ti)] += 1;
            continue;
        }
        rep.confusion[static_cast<std::size_t>(ti)][static_cast<std::size_t>(key_index(*o.predicted))] += 1;
        if (*o.predicted == truth) ++t1;
        if (std::find(o.top.begin(), o.top.end(), truth) != o.top.end()) ++t3;
    }
    if (n_char > 0) {
        rep.char_t1 = static_cast<double>(t1) / static_cast<double>(n_char);
        rep.char_t3 = static_cast<double>(t3) / static_cast<double>(n_char);
    }
    if (!words.empty()) {
        std::vector<CandidateSet> sets;
        for (const auto& o : wouts) {
            rep.captured_events += o.events;
            sets.push_back(o.set);
        }
        rep.word_t1 = evaluate_accuracy(sets, words, 1);
        rep.word_t3 = evaluate_accuracy(sets, words, 3);
    }
    if (rep.captured_events == 0 && !silent) rep.notes.push_back("zero captured events");
    for (const auto& [metric, value] : cfg.reference) {
        double sim = metric == "char_t1" ? rep.char_t1 : metric == "char_t3" ? rep.char_t3
                   : metric == "word_t1" ? rep.word_t1 : rep.word_t3;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: simulated %.4f vs reference %.4f (gap %+.4f)", metric.c_str(), sim, value,
                      sim - value);
        rep.notes.push_back(buf);
    }
    rep.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

std::string axis_key(const std::string& axis) {
    if (axis == "distance") return "scenario.distance";
    if (axis == "angle") return "scenario.orientation_angle_deg";
    if (axis == "cell_width") return "array.cell_width";
    if (axis == "speed") return "scenario.typing_speed_class";
    if (axis == "noise") return "scenario.noise_std";
    if (axis == "kind") return "scenario.kind";
    if (axis == "scheme") return "defense.scheme";
    if (axis == "dual") return "scenario.dual_controller";
    if (axis.find('.') != std::string::npos) return axis;
    throw ConfigError("unknown sweep axis '" + axis + "'");
}

}  // namespace

double evaluate_accuracy(std::span<const CandidateSet> predictions, std::span<const std::string> truth, std::size_t k) {
    if (predictions.size() != truth.size())
        throw LengthMismatch("predictions and truth differ in length: " + std::to_string(predictions.size()) + " vs " +
                             std::to_string(truth.size()));
    if (k < 1) throw ConfigError("k must be at least 1");
    if (truth.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predictions[i].contains_within(truth[i], k)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    auto rep = run_with(cfg, nullptr);
    if (!cfg.output.empty()) write_report(rep, cfg.output);
    return rep;
}

ExperimentReport run_sweep(const ExperimentConfig& cfg, const std::string& axis, const std::vector<std::string>& values) {
    auto t0 = std::chrono::steady_clock::now();
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    std::string key = axis_key(axis);
    std::vector<ExperimentConfig> configs;
    for (const auto& v : values) {
        ExperimentConfig c = cfg;
        c.output.clear();
        set_config_value(c, key, v);
        c.validate();
        configs.push_back(std::move(c));
    }
    std::map<std::string, Calibration> cache;
    ExperimentReport out;
    SweepSeries series{axis, {}};
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& c = configs[i];
        const Calibration* cal = nullptr;
        if (!out_of_range(c.scenario)) {
            std::string ck = calibration_key(c);
            auto it = cache.find(ck);
            if (it == cache.end()) it = cache.emplace(ck, make_calibration(c)).first;
            cal = &it->second;
        }
        ExperimentReport r = run_with(c, cal);
        series.points.push_back({values[i], r.char_t1, r.char_t3, r.word_t1, r.word_t3});
        if (i == 0) {
            out = std::move(r);
        } else {
            for (const auto& n : r.notes) out.notes.push_back(values[i] + ": " + n);
        }
    }
    out.config = config_to_text(cfg);
    out.series.push_back(std::move(series));
    out.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!cfg.output.empty()) write_report(out, cfg.output);
    return out;
}

ExperimentReport run_defend(const ExperimentConfig& cfg) {
    return run_sweep(cfg, "scheme", {"none", "s1", "s2"});
}

std::string report_to_json(const ExperimentReport& r, bool include_runtime) {
    nlohmann::ordered_json j;
    j["seed"] = r.seed;
    j["config"] = r.config;
    j["char_trials"] = r.char_trials;
    j["word_trials"] = r.word_trials;
    j["captured_events"] = r.captured_events;
    j["char_t1"] = r.char_t1;
    j["char_t3"] = r.char_t3;
    j["word_t1"] = r.word_t1;
    j["word_t3"] = r.word_t3;
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (KeyId k : all_keys()) names.push_back(std::string(key_name(k)));
    j["confusion"]["keys"] = names;
    nlohmann::ordered_json counts = nlohmann::ordered_json::array();
    for (const auto& row : r.confusion) counts.push_back(row);
    j["confusion"]["counts"] = counts;
    j["confusion"]["unassigned"] = r.unassigned;
    nlohmann::ordered_json series = nlohmann::ordered_json::array();
    for (const auto& s : r.series) {
        nlohmann::ordered_json pts = nlohmann::ordered_json::array();
        for (const auto& p : s.points)
            pts.push_back({{"value", p.value}, {"char_t1", p.char_t1}, {"char_t3", p.char_t3},
                           {"word_t1", p.word_t1}, {"word_t3", p.word_t3}});
        series.push_back({{"axis", s.axis}, {"points", pts}});
    }
    j["series"] = series;
    j["notes"] = r.notes;
    if (include_runtime) j["runtime_seconds"] = r.runtime;
    return j.dump(2);
}

std::string confusion_to_csv(const ExperimentReport& r) {
    std::string out = "truth";
    for (KeyId k : all_keys()) out += "," + std::string(key_name(k));
    out += ",unassigned\n";
    auto keys = all_keys();
    for (std::size_t i = 0; i < kKeyCount; ++i) {
        out += std::string(key_name(keys[i]));
        for (int c : r.confusion[i]) out += "," + std::to_string(c);
        out += "," + std::to_string(r.unassigned[i]) + "\n";
    }
    return out;
}

void write_report(const ExperimentReport& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << report_to_json(r) << "\n";
    if (!f) throw Error("write failed: " + path);
}

}  // namespace irkey
