#ifndef PATCHFORGE_GEOMETRY_HPP
#define PATCHFORGE_GEOMETRY_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace patchforge {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Point2 operator+(const Point2 &o) const noexcept { return {x + o.x, y + o.y}; }
    constexpr Point2 operator-(const Point2 &o) const noexcept { return {x - o.x, y - o.y}; }
    constexpr Point2 operator*(double s) const noexcept { return {x * s, y * s}; }
    constexpr Point2 operator/(double s) const noexcept { return {x / s, y / s}; }
    constexpr Point2 &operator+=(const Point2 &o) noexcept { x += o.x; y += o.y; return *this; }
    constexpr Point2 &operator-=(const Point2 &o) noexcept { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Point2 &) const noexcept = default;

    double norm() const noexcept { return std::hypot(x, y); }
    constexpr double norm2() const noexcept { return x * x + y * y; }
    bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y); }
};

constexpr Point2 operator*(double s, const Point2 &p) noexcept { return p * s; }

inline double distance(const Point2 &a, const Point2 &b) noexcept { return (a - b).norm(); }

/// Axis-aligned region O that confines every anchor. Bounds are inclusive.
struct OuterBorder {
    double x_l = 0.0;
    double x_r = 0.0;
    double y_d = 0.0;
    double y_u = 0.0;

    bool valid() const noexcept { return x_l < x_r && y_d < y_u; }
    bool contains(const Point2 &p) const noexcept {
        return p.x >= x_l && p.x <= x_r && p.y >= y_d && p.y <= y_u;
    }
    double width() const noexcept { return x_r - x_l; }
    double height() const noexcept { return y_u - y_d; }
    Point2 center() const noexcept { return {(x_l + x_r) / 2, (y_d + y_u) / 2}; }

    /// Box scaled about its own center.
    OuterBorder scaled(double factor) const noexcept {
        const Point2 c = center();
        const double hw = width() * factor / 2, hh = height() * factor / 2;
        return {c.x - hw, c.x + hw, c.y - hh, c.y + hh};
    }

    bool operator==(const OuterBorder &) const noexcept = default;
};

/// Line through `origin` with direction angle in [0, 2π). The line function is the
/// left normal form -sin(a)(x - ox) + cos(a)(y - oy), already unit-normalized.
struct RayLine {
    Point2 origin;
    double angle = 0.0;
    double cos_a = 1.0;
    double sin_a = 0.0;

    static RayLine make(Point2 origin, double angle) {
        constexpr double two_pi = 2 * std::numbers::pi;
        angle = std::fmod(angle, two_pi);
        if (angle < 0) angle += two_pi;
        if (angle >= two_pi) angle = 0.0;
        return {origin, angle, std::cos(angle), std::sin(angle)};
    }

    double signed_distance(const Point2 &p) const noexcept {
        return -sin_a * (p.x - origin.x) + cos_a * (p.y - origin.y);
    }
};

/// The fan of n rays around one patch center and the derived sector regions B_j.
/// Sector j lies between rays[j] and rays[(j+1) % n].
struct AnchorLayout {
    Point2 center;
    double radius_r = 0.0;
    double inner_radius = 0.0;
    std::size_t n = 0;
    std::vector<Point2> equal_points;
    std::vector<RayLine> rays;
    std::vector<Point2> initial_anchors;
    OuterBorder outer;
};

/// Throws InvalidLayout unless the configuration admits a feasible initial circle.
inline void check_layout_parameters(const Point2 &center, double radius_r, double inner_radius,
                                    std::size_t n, const OuterBorder &outer) {
    std::ostringstream why;
    if (n < 3) {
        why << "anchor count " << n << " < 3";
    } else if (!center.finite() || !(radius_r > 0)) {
        why << "radius must be positive and center finite";
    } else if (!(inner_radius >= 0) ||
               !(inner_radius < radius_r * std::cos(std::numbers::pi / static_cast<double>(n)))) {
        why << "inner radius " << inner_radius << " must lie in [0, r*cos(pi/n))";
    } else if (!outer.valid()) {
        why << "outer border is empty";
    } else if (center.x - radius_r < outer.x_l || center.x + radius_r > outer.x_r ||
               center.y - radius_r < outer.y_d || center.y + radius_r > outer.y_u) {
        why << "circle of radius " << radius_r << " about (" << center.x << ", " << center.y
            << ") leaves the outer border";
    } else {
        return;
    }
    throw InvalidLayout(why.str());
}

/// True when a layout can be built at `center`; the non-throwing twin of check_layout_parameters.
inline bool layout_fits(const Point2 &center, double radius_r, const OuterBorder &outer) noexcept {
    return center.finite() && center.x - radius_r >= outer.x_l && center.x + radius_r <= outer.x_r &&
           center.y - radius_r >= outer.y_d && center.y + radius_r <= outer.y_u;
}

inline AnchorLayout build_anchor_layout(Point2 center, double radius_r, double inner_radius,
                                        std::size_t n, const OuterBorder &outer,
                                        double first_angle = 0.0) {
    check_layout_parameters(center, radius_r, inner_radius, n, outer);
    AnchorLayout layout{center, radius_r, inner_radius, n, {}, {}, {}, outer};
    layout.equal_points.reserve(n);
    layout.rays.reserve(n);
    layout.initial_anchors.reserve(n);
    const double step = 2 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        const RayLine ray = RayLine::make(center, first_angle + step * static_cast<double>(j));
        layout.rays.push_back(ray);
        layout.equal_points.push_back(center + Point2{ray.cos_a, ray.sin_a} * radius_r);
    }
    for (std::size_t j = 0; j < n; ++j)
        layout.initial_anchors.push_back((layout.equal_points[j] + layout.equal_points[(j + 1) % n]) / 2);
    return layout;
}

/// Signed distances (L_j, R_j) from p to the two rays bounding sector j.
inline std::pair<double, double> directed_distances(const Point2 &p, const AnchorLayout &layout,
                                                    std::size_t j) {
    return {layout.rays[j].signed_distance(p), layout.rays[(j + 1) % layout.n].signed_distance(p)};
}

/// Strict sector membership. The bare product L*R < 0 also holds in the vertically
/// opposite wedge; orienting both signs keeps exactly one sector per point.
inline bool in_sector(const Point2 &p, const AnchorLayout &layout, std::size_t j) {
    const auto [l, r] = directed_distances(p, layout, j);
    return l > 0 && r < 0;
}

/// rho_j: inside sector j, strictly outside the inner circle, inside the outer border.
inline bool is_feasible(const Point2 &p, const AnchorLayout &layout, std::size_t j) {
    return in_sector(p, layout, j) && distance(p, layout.center) > layout.inner_radius &&
           layout.outer.contains(p);
}

} // namespace patchforge

#endif
