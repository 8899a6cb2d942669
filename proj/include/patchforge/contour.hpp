#ifndef PATCHFORGE_CONTOUR_HPP
#define PATCHFORGE_CONTOUR_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace patchforge {

/// Ordered sample points. A closed polyline does not repeat its first point; the
/// closing edge from back() to front() is implicit.
struct Polyline {
    std::vector<Point2> points;
    bool closed = false;

    std::size_t size() const noexcept { return points.size(); }
};

inline constexpr std::size_t default_samples_per_segment = 32;
inline constexpr double min_knot_increment = 1e-12;

namespace detail {

// Centripetal knot increment |b - a|^0.5, clamped away from zero.
inline double knot_increment(const Point2 &a, const Point2 &b) {
    const double dt = std::sqrt((b - a).norm());
    return dt < min_knot_increment ? min_knot_increment : dt;
}

} // namespace detail

/// Samples the centripetal Catmull-Rom segment between p1 and p2 with the
/// Barry-Goldman pyramid. The outer lerps are written as offsets from p1 / p2 so a
/// near-coincident outer control does not cancel catastrophically.
inline Polyline ccrs_segment(const Point2 &p0, const Point2 &p1, const Point2 &p2, const Point2 &p3,
                             std::size_t samples) {
    if (samples < 2) throw DegenerateSegment("a segment needs at least 2 samples");
    if (p1 == p2) throw DegenerateSegment("segment endpoints coincide");

    const double t0 = 0.0;
    const double t1 = t0 + detail::knot_increment(p0, p1);
    const double t2 = t1 + detail::knot_increment(p1, p2);
    const double t3 = t2 + detail::knot_increment(p2, p3);

    const Point2 slope01 = (p1 - p0) / (t1 - t0);
    const Point2 slope12 = (p2 - p1) / (t2 - t1);
    const Point2 slope23 = (p3 - p2) / (t3 - t2);

    Polyline out;
    out.points.reserve(samples);
    out.points.push_back(p1);
    const double span = t2 - t1;
    for (std::size_t s = 1; s + 1 < samples; ++s) {
        const double t = t1 + span * static_cast<double>(s) / static_cast<double>(samples - 1);
        const Point2 a1 = p1 + slope01 * (t - t1);
        const Point2 a2 = p1 + slope12 * (t - t1);
        const Point2 a3 = p2 + slope23 * (t - t2);
        const Point2 b1 = (a1 * (t2 - t) + a2 * (t - t0)) / (t2 - t0);
        const Point2 b2 = (a2 * (t3 - t) + a3 * (t - t1)) / (t3 - t1);
        out.points.push_back((b1 * (t2 - t) + b2 * (t - t1)) / span);
    }
    out.points.push_back(p2);
    return out;
}

/// Closed contour through all anchors; segment i runs from anchors[i] to anchors[i+1]
/// with controls i-1 .. i+2 taken cyclically. Holds n * (samples - 1) points.
inline Polyline assemble_contour(std::span<const Point2> anchors,
                                 std::size_t samples_per_segment = default_samples_per_segment) {
    const std::size_t n = anchors.size();
    if (n < 3) throw DegenerateSegment("a closed contour needs at least 3 anchors");
    Polyline contour;
    contour.closed = true;
    contour.points.reserve(n * (samples_per_segment - 1));
    for (std::size_t i = 0; i < n; ++i) {
        const Polyline seg = ccrs_segment(anchors[(i + n - 1) % n], anchors[i], anchors[(i + 1) % n],
                                          anchors[(i + 2) % n], samples_per_segment);
        contour.points.insert(contour.points.end(), seg.points.begin(), seg.points.end() - 1);
    }
    return contour;
}

} // namespace patchforge

#endif
