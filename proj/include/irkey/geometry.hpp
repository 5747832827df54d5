#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace irkey {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Canonical key order; also the boundary tie-break order.
enum class KeyId : std::uint8_t {
    A, B, C, D, E, F, G, H, I, J, K, L, M,
    N, O, P, Q, R, S, T, U, V, W, X, Y, Z,
    Space, Shift, Enter, Comma, Dot
};

inline constexpr int kKeyCount = 31;

std::string_view key_name(KeyId k);
std::optional<KeyId> parse_key(std::string_view name);
inline int key_index(KeyId k) { return static_cast<int>(k); }
inline KeyId key_from_index(int i) { return static_cast<KeyId>(i); }
std::array<KeyId, kKeyCount> all_keys();

struct KeyRect {
    KeyId id;
    Vec2 center;
    Vec2 half_extent;

    double area() const { return 4.0 * half_extent.x() * half_extent.y(); }
    bool contains(const Vec2& p, double tol = 1e-12) const;
};

struct KeyboardLayout {
    std::vector<KeyRect> keys;
    Vec2 half_size{0.30, 0.12};  // keyboard bounding rectangle, centered at the origin

    const KeyRect& rect(KeyId id) const;
    const KeyRect* find(KeyId id) const;
    // Throws ConfigError on a broken invariant.
    void validate() const;
};

KeyboardLayout build_default_layout();

// Returns the key whose rectangle contains p. Points on shared edges go to the
// nearest center, then to the lowest canonical id.
std::optional<KeyId> key_for_position(const KeyboardLayout& layout, const Vec2& p);

std::string layout_to_json(const KeyboardLayout& layout);
KeyboardLayout layout_from_json(const std::string& text);

struct PlanePose {
    Vec3 normal{0.0, 0.0, 1.0};
    Vec3 anchor{0.0, 0.0, 0.0};

    // Normalizes n. Throws DomainError for a zero normal.
    static PlanePose make(const Vec3& n, const Vec3& anchor);

    // In-plane orthonormal basis: u follows world x where possible, v = n x u.
    Vec3 axis_u() const;
    Vec3 axis_v() const;
    Vec3 to_world(const Vec2& q) const;
    Vec2 to_plane(const Vec3& p) const;
    double residual(const Vec3& p) const { return normal.dot(p - anchor); }
};

struct SensorArrayGeometry {
    int rows = 4;
    int cols = 10;
    double cell_width = 0.05;
    PlanePose pose;

    // Fractional grid coordinates are allowed; (0,0) is the top-left sensor.
    Vec3 position(double row, double col) const;
    // Inverse of position() for a point on the array plane.
    Vec2 grid_coords(const Vec3& p) const;
    int sensor_count() const { return rows * cols; }
    void validate() const;
};

struct CalibrationObservation {
    double delta_t = 0.0;
    int n_ir = 1;
    double f_ir = 38000.0;
    double delta_d = 0.0;
};

double estimate_orientation_angle(const CalibrationObservation& obs, double cell_width);
// Forward model used by calibration: path-length difference produced by angle theta.
double orientation_delta_d(double theta, double cell_width, int n_ir);
double angle_between_planes(const PlanePose& a, const PlanePose& b);

// Moves p along the keyboard normal onto the keyboard plane.
Vec3 project_point(const PlanePose& keyboard, const PlanePose& array, const Vec3& p_ir);

// Array plane tilted by theta about the world x axis, passing through anchor.
PlanePose tilted_array_pose(double theta, const Vec3& anchor = Vec3::Zero());
// Keyboard plane facing the array at the given distance.
PlanePose keyboard_pose_at(double distance);

}  // namespace irkey
