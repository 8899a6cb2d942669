#ifndef PATCHFORGE_GENOME_HPP
#define PATCHFORGE_GENOME_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "contour.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "raster.hpp"

namespace patchforge {

/// Geometry shared by every patch block of a run.
struct ShapeParams {
    double radius_r = 15.0;
    double inner_radius = 4.5;
    std::size_t n = 8;
    std::size_t samples_per_segment = default_samples_per_segment;
    double first_angle = 0.0;

    static ShapeParams with_radius(double r, std::size_t n = 8) { return {r, 0.3 * r, n}; }
};

/// One patch: a center plus n anchors stored as offsets from that center, so moving
/// the center moves the whole patch rigidly.
struct PatchBlock {
    Point2 center;
    std::vector<Point2> anchors;

    Point2 anchor(std::size_t j) const noexcept { return center + anchors[j]; }
    std::vector<Point2> absolute_anchors() const {
        std::vector<Point2> out;
        out.reserve(anchors.size());
        for (const auto &a : anchors) out.push_back(center + a);
        return out;
    }
    bool operator==(const PatchBlock &) const = default;
};

struct PatchGenome {
    std::vector<PatchBlock> patches;
    bool include_position = false;

    bool operator==(const PatchGenome &) const = default;
};

inline AnchorLayout layout_for(const PatchBlock &block, const ShapeParams &shape, const OuterBorder &outer) {
    return build_anchor_layout(block.center, shape.radius_r, shape.inner_radius, shape.n, outer, shape.first_angle);
}

/// All rho_j == 1 for every block, and every block center admits a layout.
inline bool is_feasible(const PatchGenome &genome, const ShapeParams &shape, const OuterBorder &outer) {
    for (const auto &block : genome.patches) {
        if (block.anchors.size() != shape.n || !layout_fits(block.center, shape.radius_r, outer)) return false;
        const AnchorLayout layout = layout_for(block, shape, outer);
        for (std::size_t j = 0; j < shape.n; ++j)
            if (!is_feasible(block.anchor(j), layout, j)) return false;
    }
    return true;
}

/// The initial circles: every block's anchors at its layout's midpoints.
inline PatchGenome circle_genome(std::span<const Point2> centers, const ShapeParams &shape, const OuterBorder &outer,
                                 bool include_position) {
    PatchGenome g{{}, include_position};
    for (const auto &c : centers) {
        const AnchorLayout layout =
            build_anchor_layout(c, shape.radius_r, shape.inner_radius, shape.n, outer, shape.first_angle);
        PatchBlock block{c, {}};
        for (const auto &p : layout.initial_anchors) block.anchors.push_back(p - c);
        g.patches.push_back(std::move(block));
    }
    return g;
}

inline Mask block_mask(const PatchBlock &block, const ShapeParams &shape, std::size_t height, std::size_t width,
                       const OuterBorder &outer) {
    const auto anchors = block.absolute_anchors();
    return fill_contour(assemble_contour(anchors, shape.samples_per_segment), height, width, outer);
}

/// Anchors -> spline contour -> even-odd fill clipped to the border, unioned over blocks.
inline Mask genome_to_mask(const PatchGenome &genome, const ShapeParams &shape, std::size_t height, std::size_t width,
                           const OuterBorder &outer) {
    Mask out(height, width);
    for (const auto &block : genome.patches) {
        const Mask m = block_mask(block, shape, height, width, outer);
        auto dst = out.bits();
        const auto src = m.bits();
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] |= src[p];
    }
    return out;
}

inline void to_json(nlohmann::json &j, const PatchGenome &g) {
    j = nlohmann::json::object();
    auto &patches = j["patches"] = nlohmann::json::array();
    for (const auto &b : g.patches) {
        nlohmann::json anchors = nlohmann::json::array();
        for (const auto &a : b.anchors) anchors.push_back({a.x, a.y});
        patches.push_back({{"center", {b.center.x, b.center.y}}, {"anchors", std::move(anchors)}});
    }
    j["include_position"] = g.include_position;
}

inline void from_json(const nlohmann::json &j, PatchGenome &g) {
    try {
        g.patches.clear();
        for (const auto &p : j.at("patches")) {
            PatchBlock b;
            b.center = {p.at("center").at(0).get<double>(), p.at("center").at(1).get<double>()};
            for (const auto &a : p.at("anchors")) b.anchors.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
            g.patches.push_back(std::move(b));
        }
        g.include_position = j.value("include_position", false);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("genome JSON: ") + e.what());
    }
}

} // namespace patchforge

#endif
