#include "irkey/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "irkey/errors.hpp"

namespace irkey {

namespace {

using FeatRow = Eigen::Matrix<double, 1, kFeatureCount>;

FeatRow feature_row(const FeatureVector& f) {
    auto v = f.values();
    FeatRow r;
    for (int j = 0; j < kFeatureCount; ++j) r(j) = v[static_cast<std::size_t>(j)];
    return r;
}

Vec2 spot_point_key(const Spot& s, const SensorArrayGeometry& array, const PlanePose& kb) {
    Vec3 p = array.position(s.center.x(), s.center.y());
    Vec3 q = project_point(kb, array.pose, p);
    return kb.to_plane(q);
}

KeyId key_at(const KeyboardLayout& layout, const Vec2& p) {
    if (auto k = key_for_position(layout, p)) return *k;
    return nearest_keys(layout, p, 1).front();
}

// Cells reachable from the spot through cells at or above floor.
std::vector<Cell> spot_region(const Heatmap& h, const Spot& s, double floor) {
    std::vector<char> seen(h.grid.size(), 0);
    std::vector<Cell> stack(s.cells.begin(), s.cells.end()), out;
    for (const auto& c : s.cells) seen[static_cast<std::size_t>(c.row * h.cols + c.col)] = 1;
    while (!stack.empty()) {
        Cell c = stack.back();
        stack.pop_back();
        out.push_back(c);
        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            int r = c.row + dr[k], cc = c.col + dc[k];
            if (r < 0 || r >= h.rows || cc < 0 || cc >= h.cols) continue;
            auto idx = static_cast<std::size_t>(r * h.cols + cc);
            if (seen[idx] || h.grid[idx] < floor || h.grid[idx] > h.at(c.row, c.col) + 1e-12) continue;
            seen[idx] = 1;
            stack.push_back({r, cc});
        }
    }
    return out;
}

}  // namespace

MlrMapping fit_mapping(std::span<const TrainingPair> training) {
    const auto n = static_cast<Eigen::Index>(training.size());
    if (n == 0) throw RankDeficient("no training pairs");
    Eigen::MatrixXd x(n, kFeatureCount);
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) = feature_row(training[static_cast<std::size_t>(i)].features);
        y.row(i) = training[static_cast<std::size_t>(i)].coord.transpose();
    }
    FeatRow mean = x.colwise().mean();
    FeatRow sd;
    for (int j = 0; j < kFeatureCount; ++j) {
        double s = std::sqrt((x.col(j).array() - mean(j)).square().mean());
        sd(j) = s > 1e-12 * std::max(1.0, std::abs(mean(j))) ? s : 0.0;
    }
    Eigen::MatrixXd z(n, kFeatureCount + 1);
    z.col(0).setOnes();
    for (int j = 0; j < kFeatureCount; ++j) {
        if (sd(j) > 0.0) z.col(j + 1) = ((x.col(j).array() - mean(j)) / sd(j)).matrix();
        else z.col(j + 1).setZero();
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    qr.setThreshold(1e-10);
    if (qr.rank() < kFeatureCount + 1)
        throw RankDeficient("design matrix rank " + std::to_string(qr.rank()) + " < 10");

    std::set<std::pair<double, double>> labels;
    for (const auto& p : training) labels.insert({p.coord.x(), p.coord.y()});
    if (training.size() < kMinTrainingPairs || labels.size() < 4)
        throw InsufficientTraining("need >= 20 pairs spanning >= 4 distinct coordinates");

    Eigen::MatrixXd a = z.transpose() * z;
    Eigen::MatrixXd b = z.transpose() * y;
    Eigen::MatrixXd w = a.ldlt().solve(b);  // (10 x 2)

    MlrMapping m;
    for (int o = 0; o < 2; ++o) {
        double c0 = w(0, o);
        for (int j = 0; j < kFeatureCount; ++j) {
            double cj = sd(j) > 0.0 ? w(j + 1, o) / sd(j) : 0.0;
            m.coef(o, j) = cj;
            c0 -= cj * mean(j);
        }
        m.intercept(o) = c0;
    }
    if (!m.coef.allFinite() || !m.intercept.allFinite()) throw RankDeficient("non-finite coefficients");
    m.samples = training.size();
    m.residual = training_residual(m, training);
    return m;
}

Vec2 predict(const MlrMapping& m, const FeatureVector& f) {
    return m.intercept + m.coef * feature_row(f).transpose();
}

double training_residual(const MlrMapping& m, std::span<const TrainingPair> training) {
    double sse = 0.0;
    for (const auto& p : training) sse += (predict(m, p.features) - p.coord).squaredNorm();
    return sse;
}

std::string mapping_to_json(const MlrMapping& m) {
    nlohmann::json j;
    for (int o = 0; o < 2; ++o) {
        std::vector<double> a(6), b(3);
        for (int k = 0; k < 6; ++k) a[static_cast<std::size_t>(k)] = m.coef(o, k);
        for (int k = 0; k < 3; ++k) b[static_cast<std::size_t>(k)] = m.coef(o, 6 + k);
        j["alpha"].push_back(a);
        j["beta"].push_back(b);
    }
    j["intercepts"] = {m.intercept.x(), m.intercept.y()};
    j["residual"] = m.residual;
    j["samples"] = m.samples;
    return j.dump(2);
}

MlrMapping mapping_from_json(const std::string& text) {
    MlrMapping m;
    try {
        auto j = nlohmann::json::parse(text);
        for (int o = 0; o < 2; ++o) {
            for (int k = 0; k < 6; ++k) m.coef(o, k) = j.at("alpha").at(o).at(k).get<double>();
            for (int k = 0; k < 3; ++k) m.coef(o, 6 + k) = j.at("beta").at(o).at(k).get<double>();
            m.intercept(o) = j.at("intercepts").at(o).get<double>();
        }
        m.residual = j.value("residual", 0.0);
        m.samples = j.value("samples", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mapping json: ") + e.what());
    }
    return m;
}

void normalize_heatmap(Heatmap& h) {
    if (h.grid.empty()) return;
    auto [lo_it, hi_it] = std::minmax_element(h.grid.begin(), h.grid.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi <= 0.0) {
        std::fill(h.grid.begin(), h.grid.end(), 0.0);
        return;
    }
    if (hi - lo <= 0.0) {
        std::fill(h.grid.begin(), h.grid.end(), 1.0);
        return;
    }
    for (double& v : h.grid) v = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

Heatmap generate_heatmap(const FeatureMap& fm, const MlrMapping& mapping, double radius) {
    Heatmap h;
    h.window = fm.window;
    h.rows = fm.rows;
    h.cols = fm.cols;
    h.grid.assign(static_cast<std::size_t>(fm.rows * fm.cols), 0.0);
    for (std::size_t s = 0; s < fm.per_sensor.size(); ++s) {
        const auto& f = fm.per_sensor[s];
        if (f.is_zero()) continue;
        double d = predict(mapping, f).norm();
        h.grid[s] = std::max(1e-9, 1.0 - d / radius);
    }
    normalize_heatmap(h);
    return h;
}

Heatmap mirror_heatmap(const Heatmap& h) {
    Heatmap out = h;
    for (int r = 0; r < h.rows; ++r)
        for (int c = 0; c < h.cols; ++c) out.at(r, c) = h.at(r, h.cols - 1 - c);
    return out;
}

std::vector<Spot> threshold_spots(const Heatmap& h, double tau) {
    std::vector<Spot> spots;
    std::vector<char> seen(h.grid.size(), 0);
    for (int r0 = 0; r0 < h.rows; ++r0)
        for (int c0 = 0; c0 < h.cols; ++c0) {
            auto idx0 = static_cast<std::size_t>(r0 * h.cols + c0);
            if (seen[idx0] || h.grid[idx0] < tau) continue;
            Spot s;
            std::vector<Cell> stack{{r0, c0}};
            seen[idx0] = 1;
            int rmin = r0, rmax = r0, cmin = c0, cmax = c0;
            while (!stack.empty()) {
                Cell c = stack.back();
                stack.pop_back();
                s.cells.push_back(c);
                s.strength = std::max(s.strength, h.at(c.row, c.col));
                rmin = std::min(rmin, c.row);
                rmax = std::max(rmax, c.row);
                cmin = std::min(cmin, c.col);
                cmax = std::max(cmax, c.col);
                const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int r = c.row + dr[k], cc = c.col + dc[k];
                    if (r < 0 || r >= h.rows || cc < 0 || cc >= h.cols) continue;
                    auto idx = static_cast<std::size_t>(r * h.cols + cc);
                    if (seen[idx] || h.grid[idx] < tau) continue;
                    seen[idx] = 1;
                    stack.push_back({r, cc});
                }
            }
            s.center = Vec2(0.5 * (rmin + rmax), 0.5 * (cmin + cmax));
            spots.push_back(std::move(s));
        }
    std::stable_sort(spots.begin(), spots.end(), [](const Spot& a, const Spot& b) { return a.strength > b.strength; });
    return spots;
}

std::vector<Heatmap> remove_image_retention(const std::vector<Heatmap>& heatmaps, int horizon) {
    std::vector<Heatmap> out = heatmaps;
    const int n = static_cast<int>(heatmaps.size());
    const int h = std::clamp(horizon, 1, std::max(1, n));
    if (h < 2) return out;
    std::vector<std::vector<Spot>> top(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto s = threshold_spots(heatmaps[static_cast<std::size_t>(i)]);
        if (s.size() > 2) s.resize(2);
        top[static_cast<std::size_t>(i)] = std::move(s);
    }
    auto is_static = [&](int i, const Spot& s) {
        int b = std::clamp(i - h / 2, 0, n - h);
        for (int j = b; j < b + h; ++j) {
            if (j == i) continue;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& o : top[static_cast<std::size_t>(j)]) best = std::min(best, (o.center - s.center).norm());
            if (!(best <= kStaticDisplacement + 1e-9)) return false;
        }
        return true;
    };
    for (int i = 0; i < n; ++i) {
        const auto& spots = top[static_cast<std::size_t>(i)];
        if (spots.size() < 2) continue;
        bool st0 = is_static(i, spots[0]);
        bool st1 = is_static(i, spots[1]);
        const Spot* drop = nullptr;
        if (st0 && !st1) drop = &spots[0];
        else if (st1 && !st0) drop = &spots[1];
        else if (st0 && st1) drop = &spots[1];
        if (!drop) continue;
        auto& hm = out[static_cast<std::size_t>(i)];
        const Spot* keep = drop == &spots[0] ? &spots[1] : &spots[0];
        auto region = spot_region(heatmaps[static_cast<std::size_t>(i)], *drop, 0.5 * drop->strength);
        for (const auto& c : region) {
            bool in_keep = std::any_of(keep->cells.begin(), keep->cells.end(),
                                       [&](const Cell& k) { return k.row == c.row && k.col == c.col; });
            if (!in_keep) hm.at(c.row, c.col) = 0.0;
        }
        normalize_heatmap(hm);
    }
    return out;
}

std::vector<Vec2> reconstruct_path(const std::vector<Heatmap>& cleaned) {
    std::vector<Vec2> path;
    for (const auto& h : cleaned) {
        auto spots = threshold_spots(h);
        if (!spots.empty()) path.push_back(spots.front().center);
    }
    if (path.empty()) throw EmptyPath("no window has a spot");
    return path;
}

SpeedClass estimate_typing_speed(std::span<const double> event_times) {
    if (event_times.size() < 2) return SpeedClass::medium;
    std::vector<double> t(event_times.begin(), event_times.end());
    std::sort(t.begin(), t.end());
    std::vector<double> d;
    for (std::size_t i = 1; i < t.size(); ++i) d.push_back(t[i] - t[i - 1]);
    std::sort(d.begin(), d.end());
    double med = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    if (med < 0.5) return SpeedClass::fast;
    if (med <= 2.0) return SpeedClass::medium;
    return SpeedClass::slow;
}

std::vector<KeyId> expand_repeats(const std::vector<KeyId>& raw_keys, const std::vector<KeyRun>& runs, SpeedClass speed) {
    std::vector<KeyId> out;
    for (std::size_t i = 0; i < raw_keys.size(); ++i) {
        out.push_back(raw_keys[i]);
        if (speed == SpeedClass::slow && i < runs.size() && runs[i].sustained && runs[i].windows >= 2)
            out.push_back(raw_keys[i]);
    }
    return out;
}

std::vector<KeyId> nearest_keys(const KeyboardLayout& layout, const Vec2& p, std::size_t k) {
    struct Scored {
        double rect, center;
        KeyId id;
    };
    std::vector<Scored> v;
    for (const auto& key : layout.keys) {
        Vec2 d = ((p - key.center).cwiseAbs() - key.half_extent).cwiseMax(0.0);
        v.push_back({d.norm(), (p - key.center).norm(), key.id});
    }
    std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) {
        if (std::abs(a.rect - b.rect) > 1e-12) return a.rect < b.rect;
        if (std::abs(a.center - b.center) > 1e-12) return a.center < b.center;
        return a.id < b.id;
    });
    std::vector<KeyId> out;
    for (std::size_t i = 0; i < std::min(k, v.size()); ++i) out.push_back(v[i].id);
    return out;
}

std::string hypothesis_to_json(const KeystrokeHypothesis& h) {
    auto names = [](const std::vector<KeyId>& keys) {
        auto a = nlohmann::json::array();
        for (KeyId k : keys) a.push_back(key_name(k));
        return a;
    };
    nlohmann::json j;
    j["raw"] = names(h.raw_keys);
    j["expanded"] = names(h.expanded_keys);
    j["path"] = nlohmann::json::array();
    for (const auto& p : h.path) j["path"].push_back({p.x(), p.y()});
    j["speed"] = to_string(h.speed_class);
    j["onsets"] = h.onsets;
    j["candidates"] = nlohmann::json::array();
    for (const auto& c : h.key_candidates) j["candidates"].push_back(names(c));
    return j.dump(2);
}

std::string heatmaps_to_json(const std::vector<Heatmap>& maps) {
    auto arr = nlohmann::json::array();
    for (const auto& h : maps) {
        nlohmann::json g = nlohmann::json::array();
        for (int r = 0; r < h.rows; ++r) {
            std::vector<double> row;
            for (int c = 0; c < h.cols; ++c) row.push_back(h.at(r, c));
            g.push_back(row);
        }
        arr.push_back({{"start", h.window.start}, {"end", h.window.end},
                       {"kind", h.window.kind == WindowKind::typing ? "typing" : "idle"}, {"grid", g}});
    }
    return arr.dump(2);
}

KeystrokeHypothesis decode(const std::vector<Heatmap>& heatmaps, const KeyboardLayout& layout,
                           const PlanePose& keyboard_pose, const SensorArrayGeometry& array, ScenarioKind kind) {
    std::vector<Heatmap> maps;
    maps.reserve(heatmaps.size());
    for (const auto& h : heatmaps) maps.push_back(kind == ScenarioKind::reflection ? mirror_heatmap(h) : h);

    std::vector<std::size_t> typing_idx;
    std::vector<Heatmap> typing;
    for (std::size_t i = 0; i < maps.size(); ++i)
        if (maps[i].window.kind == WindowKind::typing) {
            typing_idx.push_back(i);
            typing.push_back(maps[i]);
        }
    auto cleaned = remove_image_retention(typing, 3);

    struct Entry {
        std::size_t window;
        KeyId key;
        Vec2 point;
        std::vector<KeyId> cands;
        double onset;
    };
    std::vector<Entry> entries;
    for (std::size_t j = 0; j < cleaned.size(); ++j) {
        auto spots = threshold_spots(cleaned[j]);
        if (spots.empty()) continue;
        Vec2 p = spot_point_key(spots.front(), array, keyboard_pose);
        entries.push_back({typing_idx[j], key_at(layout, p), p, nearest_keys(layout, p, 3), cleaned[j].window.onset});
    }
    if (entries.empty()) throw EmptyPath("no typing window has a spot");

    auto idle_key = [&](std::size_t i) -> std::optional<KeyId> {
        auto spots = threshold_spots(maps[i]);
        if (spots.empty()) return std::nullopt;
        return key_at(layout, spot_point_key(spots.front(), array, keyboard_pose));
    };
    auto sustained_between = [&](std::size_t a, std::size_t b, KeyId key) {
        bool full = false;
        for (std::size_t i = a + 1; i < b; ++i) {
            if (maps[i].window.kind != WindowKind::idle) return false;
            auto k = idle_key(i);
            if (k && *k != key) return false;
            if (k && maps[i].window.end - maps[i].window.start >= 1.0 - 1e-6) full = true;
        }
        return full;
    };

    KeystrokeHypothesis hyp;
    std::vector<KeyRun> runs;
    for (std::size_t e = 0; e < entries.size(); ++e) {
        const auto& en = entries[e];
        hyp.onsets.push_back(en.onset);
        if (e > 0 && entries[e - 1].key == en.key && sustained_between(entries[e - 1].window, en.window, en.key)) {
            runs.back().windows += 1;
            runs.back().sustained = true;
            continue;
        }
        runs.push_back({en.key, 1, false});
        hyp.raw_keys.push_back(en.key);
        hyp.path.push_back(en.point);
        hyp.key_candidates.push_back(en.cands);
    }
    hyp.speed_class = estimate_typing_speed(hyp.onsets);
    hyp.expanded_keys = expand_repeats(hyp.raw_keys, runs, hyp.speed_class);
    return hyp;
}

}  // namespace irkey
