#include "irkey/corrector.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "irkey/errors.hpp"

namespace irkey {

namespace {

constexpr double kAdjacentCost = 0.5;

struct Adjacency {
    std::array<std::array<bool, 26>, 26> adj{};
    Adjacency() {
        auto layout = build_default_layout();
        for (int a = 0; a < 26; ++a)
            for (int b = 0; b < 26; ++b) {
                if (a == b) continue;
                const auto& ra = layout.rect(key_from_index(a));
                const auto& rb = layout.rect(key_from_index(b));
                Vec2 d = (ra.center - rb.center).cwiseAbs();
                // Touching keys, diagonals included.
                adj[a][b] = d.x() <= ra.half_extent.x() + rb.half_extent.x() + 1e-9 &&
                            d.y() <= ra.half_extent.y() + rb.half_extent.y() + 1e-9;
            }
    }
};

const Adjacency& adjacency() {
    static const Adjacency a;
    return a;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

double bounded_distance(std::string_view a, std::string_view b, double cap) {
    if (std::abs(static_cast<double>(a.size()) - static_cast<double>(b.size())) > cap) return cap + 1.0;
    return keyboard_edit_distance(a, b);
}

}  // namespace

bool Dictionary::contains(std::string_view w) const {
    return std::find(words.begin(), words.end(), w) != words.end();
}

void Dictionary::validate() const {
    if (words.empty()) throw EmptyDictionary("dictionary is empty");
    if (ranks.size() != words.size()) throw ConfigError("dictionary ranks misaligned");
    std::unordered_set<int> seen;
    for (int r : ranks)
        if (!seen.insert(r).second) throw ConfigError("duplicate dictionary rank " + std::to_string(r));
}

Dictionary make_dictionary(const std::vector<std::pair<std::string, int>>& entries) {
    auto sorted = entries;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    Dictionary d;
    for (const auto& [w, r] : sorted) {
        d.words.push_back(lower(w));
        d.ranks.push_back(r);
    }
    d.validate();
    return d;
}

Dictionary load_dictionary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dictionary " + path);
    std::vector<std::pair<std::string, int>> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(lineno, "expected word<TAB>rank");
        try {
            entries.emplace_back(line.substr(0, tab), std::stoi(line.substr(tab + 1)));
        } catch (const std::exception&) {
            throw ParseError(lineno, "bad rank");
        }
    }
    if (entries.empty()) throw EmptyDictionary("dictionary file is empty: " + path);
    return make_dictionary(entries);
}

bool CandidateSet::contains_within(std::string_view truth, std::size_t k) const {
    for (std::size_t i = 0; i < std::min(k, candidates.size()); ++i)
        if (candidates[i].text == truth) return true;
    return false;
}

bool adjacent_keys(char a, char b) {
    a = static_cast<char>(std::tolower(static_cast<unsigned char>(a)));
    b = static_cast<char>(std::tolower(static_cast<unsigned char>(b)));
    if (a < 'a' || a > 'z' || b < 'a' || b > 'z') return false;
    return adjacency().adj[a - 'a'][b - 'a'];
}

double keyboard_edit_distance(std::string_view a, std::string_view b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<double>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<double>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            char x = a[i - 1], y = b[j - 1];
            double sub = x == y ? 0.0 : (adjacent_keys(x, y) ? kAdjacentCost : 1.0);
            cur[j] = std::min({prev[j] + 1.0, cur[j - 1] + 1.0, prev[j - 1] + sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

bool looks_like_password(std::string_view s, const Dictionary& dict) {
    bool upper = false, low = false;
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (std::isdigit(u) || (!std::isalpha(u) && !std::isspace(u))) return true;
        upper |= std::isupper(u) != 0;
        low |= std::islower(u) != 0;
    }
    if (!(upper && low)) return false;
    std::string q = lower(s);
    for (const auto& w : dict.words)
        if (bounded_distance(q, w, 1.0) <= 1.0) return false;
    return true;
}

CandidateSet top_k_candidates(std::string_view s, std::size_t k, const Dictionary& dict) {
    if (dict.words.empty()) throw EmptyDictionary("dictionary is empty");
    if (k == 0) throw ConfigError("k must be at least 1");
    std::string q = lower(s);
    struct Scored {
        double d;
        int rank;
        std::size_t idx;
    };
    std::vector<Scored> best;  // kept sorted, size <= k
    auto worse = [](const Scored& a, const Scored& b) { return a.d != b.d ? a.d < b.d : a.rank < b.rank; };
    for (std::size_t i = 0; i < dict.words.size(); ++i) {
        double cap = best.size() < k ? 1e9 : best.back().d;
        double d = bounded_distance(q, dict.words[i], cap);
        if (d > cap) continue;
        Scored sc{d, dict.ranks[i], i};
        if (best.size() == k && !worse(sc, best.back())) continue;
        best.insert(std::upper_bound(best.begin(), best.end(), sc, worse), sc);
        if (best.size() > k) best.pop_back();
    }
    CandidateSet out;
    out.query = std::string(s);
    out.backend = Backend::local;
    for (const auto& b : best) out.candidates.push_back({dict.words[b.idx], -b.d});
    return out;
}

CandidateSet correct_local(std::string_view s, std::size_t k, const Dictionary& dict) {
    if (looks_like_password(s, dict)) {
        CandidateSet out;
        out.query = std::string(s);
        out.candidates.push_back({std::string(s), 0.0});
        return out;
    }
    return top_k_candidates(s, k, dict);
}

std::string render_prompt(std::string_view tmpl, std::string_view s) {
    std::string out(tmpl);
    auto pos = out.find("{s}");
    if (pos != std::string::npos) out.replace(pos, 3, s);
    return out;
}

std::optional<std::vector<std::string>> parse_remote_reply(const std::string& body) {
    std::vector<std::string> out;
    try {
        auto j = nlohmann::json::parse(body);
        const nlohmann::json* arr = nullptr;
        if (j.is_object() && j.contains("candidates")) arr = &j.at("candidates");
        else if (j.is_array()) arr = &j;
        if (!arr || !arr->is_array()) return std::nullopt;
        for (const auto& x : *arr) {
            if (!x.is_string()) return std::nullopt;
            out.push_back(x.get<std::string>());
        }
    } catch (const nlohmann::json::exception&) {
        std::istringstream in(body);
        std::string line;
        while (std::getline(in, line)) {
            auto b = line.find_first_not_of(" \t\r-*0123456789.)");
            if (b == std::string::npos) continue;
            auto e = line.find_last_not_of(" \t\r");
            out.push_back(line.substr(b, e - b + 1));
        }
    }
    if (out.empty()) return std::nullopt;
    return out;
}

CandidateSet remote_correct(std::string_view s, std::size_t k, const RemoteOptions& opt, const Dictionary& dict) {
    if (looks_like_password(s, dict)) return correct_local(s, k, dict);
    std::string endpoint = opt.endpoint;
    if (const char* env = std::getenv(std::string(kEndpointEnv).c_str()); env && *env) endpoint = env;
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (endpoint.empty() || !std::regex_match(endpoint, m, url_re) || m[1].str().rfind("https", 0) == 0)
        return top_k_candidates(s, k, dict);
    std::string path = m[2].matched ? m[2].str() : "/";

    httplib::Client cli(m[1].str());
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opt.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    nlohmann::json req = {{"prompt", render_prompt(opt.prompt_template, s)}};
    auto res = cli.Post(path, req.dump(), "application/json");
    if (!res || res->status != 200) return top_k_candidates(s, k, dict);
    auto parsed = parse_remote_reply(res->body);
    if (!parsed) return top_k_candidates(s, k, dict);

    CandidateSet out;
    out.query = std::string(s);
    out.backend = Backend::remote;
    std::set<std::string> seen;
    for (const auto& c : *parsed) {
        if (out.candidates.size() >= k) break;
        if (!seen.insert(c).second) continue;
        out.candidates.push_back({c, -static_cast<double>(out.candidates.size())});
    }
    return out;
}

std::string keys_to_text(const std::vector<KeyId>& keys) {
    std::string out;
    bool shift = false;
    for (KeyId k : keys) {
        int i = key_index(k);
        if (i < 26) {
            char c = static_cast<char>('a' + i);
            if (shift) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            out.push_back(c);
            shift = false;
            continue;
        }
        switch (k) {
            case KeyId::Shift: shift = true; break;
            case KeyId::Space: out.push_back(' '); break;
            case KeyId::Comma: out.push_back(','); break;
            case KeyId::Dot: out.push_back('.'); break;
            default: break;
        }
    }
    return out;
}

}  // namespace irkey
