#ifndef PATCHFORGE_ABLATION_HPP
#define PATCHFORGE_ABLATION_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "genome.hpp"
#include "raster.hpp"

namespace patchforge {

enum class BasicShape { optimized, circle, square, rect12, rect21, triangle };

inline BasicShape parse_basic_shape(const std::string &s) {
    if (s == "optimized") return BasicShape::optimized;
    if (s == "circle") return BasicShape::circle;
    if (s == "square") return BasicShape::square;
    if (s == "rect12") return BasicShape::rect12;
    if (s == "rect21") return BasicShape::rect21;
    if (s == "triangle") return BasicShape::triangle;
    throw ParseError("shape must be optimized, circle, square, rect12, rect21 or triangle");
}

inline const char *to_string(BasicShape s) noexcept {
    switch (s) {
    case BasicShape::optimized: return "optimized";
    case BasicShape::circle: return "circle";
    case BasicShape::square: return "square";
    case BasicShape::rect12: return "rect12";
    case BasicShape::rect21: return "rect21";
    case BasicShape::triangle: return "triangle";
    }
    return "?";
}

/// Closed outline of `shape` with geometric area `area`, centered on `c`.
/// rect12 is one wide by two tall; the triangle is equilateral, apex up, centroid at c.
inline Polyline basic_shape_outline(BasicShape shape, Point2 c, double area) {
    Polyline p{{}, true};
    auto rect = [&](double w, double h) {
        p.points = {{c.x - w / 2, c.y - h / 2}, {c.x + w / 2, c.y - h / 2}, {c.x + w / 2, c.y + h / 2}, {c.x - w / 2, c.y + h / 2}};
    };
    switch (shape) {
    case BasicShape::circle: {
        const double rad = std::sqrt(area / std::numbers::pi);
        constexpr int segments = 256;
        for (int k = 0; k < segments; ++k) {
            const double t = 2 * std::numbers::pi * k / segments;
            p.points.push_back({c.x + rad * std::cos(t), c.y + rad * std::sin(t)});
        }
        break;
    }
    case BasicShape::square: rect(std::sqrt(area), std::sqrt(area)); break;
    case BasicShape::rect12: rect(std::sqrt(area / 2), 2 * std::sqrt(area / 2)); break;
    case BasicShape::rect21: rect(2 * std::sqrt(area / 2), std::sqrt(area / 2)); break;
    case BasicShape::triangle: {
        const double side = std::sqrt(4 * area / std::sqrt(3.0));
        const double h = side * std::sqrt(3.0) / 2;
        // image y grows downward, so the apex has the smaller y
        p.points = {{c.x, c.y - 2 * h / 3}, {c.x + side / 2, c.y + h / 3}, {c.x - side / 2, c.y + h / 3}};
        break;
    }
    case BasicShape::optimized: throw InvalidConfig("optimized is not a basic shape");
    }
    return p;
}

inline Mask basic_shape_mask(BasicShape shape, std::span<const Point2> centers, std::span<const double> areas,
                             std::size_t height, std::size_t width, const OuterBorder &outer) {
    Mask out(height, width);
    for (std::size_t k = 0; k < centers.size(); ++k) {
        if (areas[k] <= 0) continue;
        const Mask m = fill_contour(basic_shape_outline(shape, centers[k], areas[k]), height, width, outer);
        auto dst = out.bits();
        const auto src = m.bits();
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] |= src[p];
    }
    return out;
}

struct BasicShapeResult {
    Mask mask;
    std::vector<double> scales;   // per-block factor on the block's optimized area
    std::vector<Point2> offsets;  // per-block sub-pixel center offset
    std::size_t target_pixels = 0;
};

/// Basic shapes at the genome's block centers, one per block, sized until the
/// union's pixel count is within 1% of the optimized mask's. A common factor on
/// the optimized per-block areas is bisected first; when pixel quantization keeps
/// that from landing within 1%, each block's factor is then chosen on its own
/// within 0.7..1.3 of the common one, also trying half-pixel center offsets so a
/// symmetric outline does not gain two pixel rows at once. Returns the closest
/// match found.
inline BasicShapeResult area_matched_shape(BasicShape shape, const PatchGenome &genome, const ShapeParams &params,
                                           std::size_t height, std::size_t width, const OuterBorder &outer) {
    std::vector<Point2> centers;
    std::vector<double> base;
    Mask optimized(height, width);
    for (const auto &block : genome.patches) {
        const Mask m = block_mask(block, params, height, width, outer);
        centers.push_back(block.center);
        base.push_back(static_cast<double>(m.count()));
        auto dst = optimized.bits();
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] |= m.bits()[p];
    }
    BasicShapeResult best;
    best.target_pixels = optimized.count();
    if (best.target_pixels == 0) {
        best.mask = Mask(height, width);
        best.scales.assign(base.size(), 0.0);
        best.offsets.assign(base.size(), Point2{});
        return best;
    }
    const double target = static_cast<double>(best.target_pixels);
    const double tolerance = 0.01 * target;
    const std::vector<Point2> no_offsets(base.size());
    auto render = [&](const std::vector<double> &scales, const std::vector<Point2> &offsets) {
        std::vector<double> areas(base);
        std::vector<Point2> at(centers);
        for (std::size_t k = 0; k < areas.size(); ++k) {
            areas[k] *= scales[k];
            at[k] += offsets[k];
        }
        return basic_shape_mask(shape, at, areas, height, width, outer);
    };
    double best_err = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<double> &scales, const std::vector<Point2> &offsets) {
        Mask m = render(scales, offsets);
        const double count = static_cast<double>(m.count());
        const double err = std::abs(count - target);
        if (err < best_err) {
            best_err = err;
            best.mask = std::move(m);
            best.scales = scales;
            best.offsets = offsets;
        }
        return count;
    };

    double lo = 0.0, hi = 1.0;
    while (static_cast<double>(render(std::vector<double>(base.size(), hi), no_offsets).count()) < target && hi < 1e4)
        hi *= 2;
    for (int it = 0; it < 60 && best_err > tolerance; ++it) {
        const double mid = (lo + hi) / 2;
        (consider(std::vector<double>(base.size(), mid), no_offsets) < target ? lo : hi) = mid;
    }

    if (best_err <= tolerance) return best;

    // Every pixel count each block reaches alone, then the combination whose sum is
    // nearest the target (subset-sum over counts), checked on the real union.
    struct Option {
        double scale;
        Point2 offset;
    };
    const Point2 half_shifts[] = {{0, 0}, {0.5, 0}, {0, 0.5}, {0.5, 0.5}};
    constexpr int steps = 120;
    const std::size_t blocks = base.size(), cap = height * width;
    std::vector<std::map<std::size_t, Option>> options(blocks);
    for (std::size_t k = 0; k < blocks; ++k)
        for (const Point2 &shift : half_shifts)
            for (int i = 0; i <= steps; ++i) {
                const double scale = best.scales[k] * (0.7 + 0.6 * i / steps);
                const Point2 c[] = {centers[k] + shift};
                const double a[] = {base[k] * scale};
                options[k].try_emplace(basic_shape_mask(shape, c, a, height, width, outer).count(), Option{scale, shift});
            }
    std::vector<std::vector<long>> choice(blocks, std::vector<long>(cap + 1, -1));
    std::vector<char> reach(cap + 1, 0);
    reach[0] = 1;
    for (std::size_t k = 0; k < blocks; ++k) {
        std::vector<char> next(cap + 1, 0);
        for (std::size_t sum = 0; sum <= cap; ++sum) {
            if (!reach[sum]) continue;
            for (const auto &[count, opt] : options[k]) {
                if (sum + count > cap || next[sum + count]) continue;
                next[sum + count] = 1;
                choice[k][sum + count] = static_cast<long>(count);
            }
        }
        reach = std::move(next);
    }
    std::size_t pick = 0;
    double pick_err = std::numeric_limits<double>::infinity();
    for (std::size_t sum = 0; sum <= cap; ++sum)
        if (reach[sum] && std::abs(static_cast<double>(sum) - target) < pick_err) {
            pick_err = std::abs(static_cast<double>(sum) - target);
            pick = sum;
        }
    if (std::isfinite(pick_err)) {
        std::vector<double> scales(blocks);
        std::vector<Point2> offsets(blocks);
        for (std::size_t k = blocks; k-- > 0;) {
            const auto count = static_cast<std::size_t>(choice[k][pick]);
            scales[k] = options[k].at(count).scale;
            offsets[k] = options[k].at(count).offset;
            pick -= count;
        }
        consider(scales, offsets);
    }
    return best;
}

} // namespace patchforge

#endif
