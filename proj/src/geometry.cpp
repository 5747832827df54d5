#include "irkey/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "irkey/errors.hpp"

namespace irkey {

namespace {

constexpr std::array<std::string_view, kKeyCount> kNames = {
    "A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M",
    "N", "O", "P", "Q", "R", "S", "T", "U", "V", "W", "X", "Y", "Z",
    "SPACE", "SHIFT", "ENTER", "COMMA", "DOT"};

constexpr double kPitch = 0.055;
constexpr double kKeyHalf = 0.0275;
constexpr double kSingularCos = 1e-6;

}  // namespace

std::string_view key_name(KeyId k) { return kNames[static_cast<std::size_t>(k)]; }

std::optional<KeyId> parse_key(std::string_view name) {
    for (int i = 0; i < kKeyCount; ++i)
        if (kNames[i] == name) return key_from_index(i);
    if (name.size() == 1) {
        char c = name[0];
        if (c >= 'a' && c <= 'z') return key_from_index(c - 'a');
        if (c == ' ') return KeyId::Space;
        if (c == ',') return KeyId::Comma;
        if (c == '.') return KeyId::Dot;
    }
    return std::nullopt;
}

std::array<KeyId, kKeyCount> all_keys() {
    std::array<KeyId, kKeyCount> out{};
    for (int i = 0; i < kKeyCount; ++i) out[i] = key_from_index(i);
    return out;
}

bool KeyRect::contains(const Vec2& p, double tol) const {
    return std::abs(p.x() - center.x()) <= half_extent.x() + tol &&
           std::abs(p.y() - center.y()) <= half_extent.y() + tol;
}

const KeyRect* KeyboardLayout::find(KeyId id) const {
    for (const auto& k : keys)
        if (k.id == id) return &k;
    return nullptr;
}

const KeyRect& KeyboardLayout::rect(KeyId id) const {
    const KeyRect* r = find(id);
    if (!r) throw ConfigError("layout has no key " + std::string(key_name(id)));
    return *r;
}

void KeyboardLayout::validate() const {
    if (keys.size() != kKeyCount) throw ConfigError("layout must have 31 keys");
    std::array<bool, kKeyCount> seen{};
    for (const auto& k : keys) {
        if (seen[key_index(k.id)]) throw ConfigError("duplicate key " + std::string(key_name(k.id)));
        seen[key_index(k.id)] = true;
        if (std::abs(k.center.x()) > half_size.x() || std::abs(k.center.y()) > half_size.y())
            throw ConfigError("key center outside keyboard: " + std::string(key_name(k.id)));
    }
    for (std::size_t i = 0; i < keys.size(); ++i)
        for (std::size_t j = i + 1; j < keys.size(); ++j) {
            Vec2 d = (keys[i].center - keys[j].center).cwiseAbs();
            Vec2 s = keys[i].half_extent + keys[j].half_extent;
            if (d.x() < s.x() - 1e-12 && d.y() < s.y() - 1e-12)
                throw ConfigError("overlapping keys " + std::string(key_name(keys[i].id)) + "/" +
                                  std::string(key_name(keys[j].id)));
        }
    const KeyRect& space = rect(KeyId::Space);
    for (const auto& k : keys)
        if (k.id != KeyId::Space && k.area() >= space.area())
            throw ConfigError("SPACE must be the largest key");
}

KeyboardLayout build_default_layout() {
    using K = KeyId;
    static const std::array<std::array<K, 10>, 3> rows = {{
        {K::Q, K::W, K::E, K::R, K::T, K::Y, K::U, K::I, K::O, K::P},
        {K::A, K::S, K::D, K::F, K::G, K::H, K::J, K::K, K::L, K::Enter},
        {K::Shift, K::Z, K::X, K::C, K::V, K::B, K::N, K::M, K::Comma, K::Dot},
    }};
    KeyboardLayout layout;
    for (int r = 0; r < 3; ++r)
        for (int i = 0; i < 10; ++i) {
            double x = -4.5 * kPitch + i * kPitch;
            double y = 1.5 * kPitch - r * kPitch;
            layout.keys.push_back({rows[r][i], Vec2(x, y), Vec2(kKeyHalf, kKeyHalf)});
        }
    layout.keys.push_back({K::Space, Vec2(0.0, -1.5 * kPitch), Vec2(3.0 * kPitch, kKeyHalf)});
    std::sort(layout.keys.begin(), layout.keys.end(),
              [](const KeyRect& a, const KeyRect& b) { return a.id < b.id; });
    return layout;
}

std::optional<KeyId> key_for_position(const KeyboardLayout& layout, const Vec2& p) {
    const KeyRect* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& k : layout.keys) {
        if (!k.contains(p)) continue;
        double d = (p - k.center).norm();
        if (!best || d < best_d - 1e-12 || (std::abs(d - best_d) <= 1e-12 && k.id < best->id)) {
            best = &k;
            best_d = d;
        }
    }
    if (!best) return std::nullopt;
    return best->id;
}

std::string layout_to_json(const KeyboardLayout& layout) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& k : layout.keys)
        arr.push_back({{"key_id", key_name(k.id)},
                       {"cx", k.center.x()},
                       {"cy", k.center.y()},
                       {"hx", k.half_extent.x()},
                       {"hy", k.half_extent.y()}});
    return arr.dump(2);
}

KeyboardLayout layout_from_json(const std::string& text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("layout json: ") + e.what());
    }
    if (!arr.is_array()) throw ConfigError("layout json must be an array");
    KeyboardLayout layout;
    for (const auto& item : arr) {
        auto id = parse_key(item.at("key_id").get<std::string>());
        if (!id) throw ConfigError("unknown key_id " + item.at("key_id").get<std::string>());
        layout.keys.push_back({*id, Vec2(item.at("cx").get<double>(), item.at("cy").get<double>()),
                               Vec2(item.at("hx").get<double>(), item.at("hy").get<double>())});
    }
    layout.validate();
    return layout;
}

PlanePose PlanePose::make(const Vec3& n, const Vec3& anchor) {
    double len = n.norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw DomainError("plane normal must be non-zero");
    return PlanePose{n / len, anchor};
}

Vec3 PlanePose::axis_u() const {
    Vec3 u = Vec3::UnitX() - Vec3::UnitX().dot(normal) * normal;
    if (u.norm() < 1e-9) u = Vec3::UnitY() - Vec3::UnitY().dot(normal) * normal;
    return u.normalized();
}

Vec3 PlanePose::axis_v() const { return normal.cross(axis_u()); }

Vec3 PlanePose::to_world(const Vec2& q) const { return anchor + q.x() * axis_u() + q.y() * axis_v(); }

Vec2 PlanePose::to_plane(const Vec3& p) const {
    Vec3 d = p - anchor;
    return Vec2(d.dot(axis_u()), d.dot(axis_v()));
}

Vec3 SensorArrayGeometry::position(double row, double col) const {
    double x = (col - 0.5 * (cols - 1)) * cell_width;
    double y = (0.5 * (rows - 1) - row) * cell_width;
    return pose.to_world(Vec2(x, y));
}

Vec2 SensorArrayGeometry::grid_coords(const Vec3& p) const {
    Vec2 q = pose.to_plane(p);
    return Vec2(0.5 * (rows - 1) - q.y() / cell_width, q.x() / cell_width + 0.5 * (cols - 1));
}

void SensorArrayGeometry::validate() const {
    if (rows < 2 || cols < 2) throw ConfigError("sensor array needs at least 2x2 sensors");
    if (!(cell_width > 0.0)) throw ConfigError("cell_width must be positive");
    if (std::abs(pose.normal.norm() - 1.0) > 1e-12) throw ConfigError("array normal must be unit length");
}

double estimate_orientation_angle(const CalibrationObservation& obs, double cell_width) {
    if (!(cell_width > 0.0)) throw DomainError("cell_width must be positive");
    if (obs.n_ir < 1) throw DomainError("n_ir must be at least 1");
    double denom = 2.0 * cell_width * obs.n_ir;
    double s = obs.delta_d / denom;
    if (!std::isfinite(s) || std::abs(s) > 1.0) throw DomainError("|delta_d| exceeds 2*l*n_ir");
    return std::asin(s);
}

double orientation_delta_d(double theta, double cell_width, int n_ir) {
    return 2.0 * cell_width * n_ir * std::sin(theta);
}

double angle_between_planes(const PlanePose& a, const PlanePose& b) {
    double c = std::abs(a.normal.dot(b.normal)) / (a.normal.norm() * b.normal.norm());
    return std::acos(std::clamp(c, 0.0, 1.0));
}

Vec3 project_point(const PlanePose& keyboard, const PlanePose& array, const Vec3& p_ir) {
    const Vec3& n = keyboard.normal;
    double cosang = std::abs(n.dot(array.normal)) / (n.norm() * array.normal.norm());
    if (cosang < kSingularCos) throw SingularProjection("keyboard and array planes are perpendicular");
    double g = n.dot(keyboard.anchor - p_ir) / n.squaredNorm();
    Vec3 out = p_ir + g * n;
    // One correction step keeps the plane residual at rounding level for far anchors.
    out += (n.dot(keyboard.anchor - out) / n.squaredNorm()) * n;
    return out;
}

PlanePose tilted_array_pose(double theta, const Vec3& anchor) {
    return PlanePose::make(Vec3(0.0, -std::sin(theta), std::cos(theta)), anchor);
}

PlanePose keyboard_pose_at(double distance) {
    return PlanePose{Vec3(0.0, 0.0, 1.0), Vec3(0.0, 0.0, distance)};
}

}  // namespace irkey
