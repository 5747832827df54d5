#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "irkey/corrector.hpp"
#include "irkey/defense.hpp"
#include "irkey/pipeline.hpp"

namespace irkey {

struct CorrectorConfig {
    Backend backend = Backend::local;
    std::string endpoint;
    std::int64_t timeout_ms = 3000;
    std::size_t k = 3;
};

struct ExperimentConfig {
    SimScenario scenario;
    int trials_per_key = 5;
    int words_per_length = 0;  // 0 skips word trials
    int min_word_length = 1;
    int max_word_length = 15;
    std::uint64_t seed = 1;
    int calibration_trials = 1;
    std::string dictionary;  // empty: bundled list
    CorrectorConfig corrector;
    DefenseConfig defense;
    int threads = 0;  // 0: hardware concurrency
    std::string output;
    // Externally measured accuracies (char_t1, char_t3, word_t1, word_t3) to report gaps against.
    std::map<std::string, double> reference;

    void validate() const;
};

// key = value lines; "[section]" prefixes later keys with "section.".
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Applies one dotted key; throws ConfigError on unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string config_to_text(const ExperimentConfig& cfg);

// Path of the bundled word list.
std::string default_dictionary_path();

struct SeriesPoint {
    std::string value;
    double char_t1 = 0.0;
    double char_t3 = 0.0;
    double word_t1 = 0.0;
    double word_t3 = 0.0;
};

struct SweepSeries {
    std::string axis;
    std::vector<SeriesPoint> points;
};

struct ExperimentReport {
    std::string config;  // snapshot as key = value text
    std::array<std::array<int, kKeyCount>, kKeyCount> confusion{};
    std::array<int, kKeyCount> unassigned{};  // trials where no key was decoded
    int char_trials = 0;
    int word_trials = 0;
    int captured_events = 0;
    double char_t1 = 0.0;
    double char_t3 = 0.0;
    double word_t1 = 0.0;
    double word_t3 = 0.0;
    std::vector<SweepSeries> series;
    std::vector<std::string> notes;
    double runtime = 0.0;
    std::uint64_t seed = 0;
};

double evaluate_accuracy(std::span<const CandidateSet> predictions, std::span<const std::string> truth, std::size_t k);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Axis names: distance, angle (degrees), cell_width, speed, noise, kind, scheme.
ExperimentReport run_sweep(const ExperimentConfig& cfg, const std::string& axis, const std::vector<std::string>& values);
// Same config under schemes none, s1 and s2.
ExperimentReport run_defend(const ExperimentConfig& cfg);

std::string report_to_json(const ExperimentReport& r, bool include_runtime = true);
std::string confusion_to_csv(const ExperimentReport& r);
void write_report(const ExperimentReport& r, const std::string& path);

}  // namespace irkey
