#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "irkey/geometry.hpp"

namespace irkey {

struct Dictionary {
    std::vector<std::string> words;  // sorted by rank
    std::vector<int> ranks;

    bool contains(std::string_view w) const;
    std::size_t size() const { return words.size(); }
    void validate() const;
};

Dictionary load_dictionary(const std::string& path);
Dictionary make_dictionary(const std::vector<std::pair<std::string, int>>& entries);

enum class Backend { local, remote };

struct Candidate {
    std::string text;
    double score = 0.0;
};

struct CandidateSet {
    std::string query;
    std::vector<Candidate> candidates;
    Backend backend = Backend::local;

    bool contains_within(std::string_view truth, std::size_t k) const;
};

// Levenshtein distance with unit insert/delete and a 0.5 cost for substituting
// keys adjacent on the QWERTY layout.
double keyboard_edit_distance(std::string_view a, std::string_view b);
bool adjacent_keys(char a, char b);

bool looks_like_password(std::string_view s, const Dictionary& dict);
CandidateSet top_k_candidates(std::string_view s, std::size_t k, const Dictionary& dict);
// Password-like strings come back verbatim as the single candidate.
CandidateSet correct_local(std::string_view s, std::size_t k, const Dictionary& dict);

inline constexpr std::string_view kDefaultPrompt =
    "Check if this keystroke {s} follows a typical password format, otherwise, perform spelling and "
    "grammatical check, and then generate top-3 candidates.";
inline constexpr std::string_view kEndpointEnv = "IRKEY_CORRECTOR_ENDPOINT";

struct RemoteOptions {
    std::string endpoint;  // http://host:port/path; empty falls back to the environment
    std::string prompt_template{kDefaultPrompt};
    std::chrono::milliseconds timeout{3000};
};

std::string render_prompt(std::string_view tmpl, std::string_view s);
// Accepts {"candidates": [...]}, a bare JSON array, or one candidate per line.
std::optional<std::vector<std::string>> parse_remote_reply(const std::string& body);
CandidateSet remote_correct(std::string_view s, std::size_t k, const RemoteOptions& opt, const Dictionary& dict);

// Keys to text: letters lowercase, SHIFT capitalizes the next letter, ENTER is dropped.
std::string keys_to_text(const std::vector<KeyId>& keys);

}  // namespace irkey
