#ifndef PATCHFORGE_FITNESS_HPP
#define PATCHFORGE_FITNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "genome.hpp"
#include "homography.hpp"
#include "oracle.hpp"
#include "raster.hpp"

namespace patchforge {

inline constexpr double default_lambda = 2.0;
inline constexpr double default_thre = 0.7;

/// An extra camera angle: its own image pair and covers, plus the map taking the
/// frontal mask into this view.
struct AngledView {
    std::string name;
    Image x_vis;
    Image x_inf;
    Image cover_vis;
    Image cover_inf;
    Homography h;
    double clean_score_vis = 0.0;
    double clean_score_inf = 0.0;
    std::size_t keypoint_inliers = 0; // 0 when h was given explicitly
};

struct Scenario {
    std::string name;
    Image x_vis;
    Image x_inf;
    Image cover_vis;
    Image cover_inf;
    OuterBorder outer;
    double clean_score_vis = 0.0;
    double clean_score_inf = 0.0;
    std::vector<AngledView> views;
    double thre = default_thre;
    std::vector<Point2> patch_centers;

    std::size_t height() const noexcept { return x_vis.height(); }
    std::size_t width() const noexcept { return x_vis.width(); }
};

/// Validates shapes; throws ShapeMismatch.
inline void check_shapes(const Scenario &s) {
    auto check = [](const Image &x, const Image &x_inf, const Image &cv, const Image &ci, const std::string &what) {
        if (!x.same_shape(cv) || !x_inf.same_shape(ci) || x.height() != x_inf.height() || x.width() != x_inf.width())
            throw ShapeMismatch(what + ": image/cover shapes are inconsistent");
    };
    check(s.x_vis, s.x_inf, s.cover_vis, s.cover_inf, "frontal view");
    for (const auto &v : s.views) {
        check(v.x_vis, v.x_inf, v.cover_vis, v.cover_inf, "view " + v.name);
        if (v.x_vis.height() != s.height() || v.x_vis.width() != s.width())
            throw ShapeMismatch("view " + v.name + ": must share the frontal image size");
    }
}

/// Queries every clean image once and stores the results.
inline void cache_clean_scores(Scenario &s, const OracleBank &oracles) {
    s.clean_score_vis = checked_score(oracles.for_view(0).score(s.x_vis, Modality::visible));
    s.clean_score_inf = checked_score(oracles.for_view(0).score(s.x_inf, Modality::infrared));
    for (std::size_t v = 0; v < s.views.size(); ++v) {
        auto &view = s.views[v];
        view.clean_score_vis = checked_score(oracles.for_view(v + 1).score(view.x_vis, Modality::visible));
        view.clean_score_inf = checked_score(oracles.for_view(v + 1).score(view.x_inf, Modality::infrared));
    }
}

/// Every cached clean score must exceed thre, otherwise progress is undefined.
inline void check_not_degenerate(const Scenario &s, double thre, bool with_views) {
    auto check = [&](double clean, const std::string &what) {
        if (!(clean > thre))
            throw DegenerateScenario(what + " clean score " + std::to_string(clean) + " does not exceed thre " +
                                     std::to_string(thre));
    };
    check(s.clean_score_vis, s.name + " visible");
    check(s.clean_score_inf, s.name + " infrared");
    if (with_views)
        for (const auto &v : s.views) {
            check(v.clean_score_vis, s.name + "/" + v.name + " visible");
            check(v.clean_score_inf, s.name + "/" + v.name + " infrared");
        }
}

/// Normalized progress of one modality toward thre; 1 exactly at the threshold.
inline double dis(double clean_score, double adv_score, double thre) {
    if (!(clean_score > thre)) throw DegenerateScenario("clean score must exceed thre");
    return (clean_score - adv_score) / (clean_score - thre);
}

enum class FitnessMode { score_aware, direct_sum };

inline FitnessMode parse_fitness_mode(const std::string &s) {
    if (s == "score-aware") return FitnessMode::score_aware;
    if (s == "direct-sum") return FitnessMode::direct_sum;
    throw ParseError("fitness must be score-aware or direct-sum");
}

inline const char *to_string(FitnessMode m) noexcept {
    return m == FitnessMode::score_aware ? "score-aware" : "direct-sum";
}

struct FitnessParams {
    double lambda = default_lambda;
    double thre = default_thre;
    bool multi_angle = false;
    FitnessMode mode = FitnessMode::score_aware;
};

/// One (view, modality) measurement. View 0 is frontal.
struct DisEntry {
    std::size_t view = 0;
    Modality modality = Modality::visible;
    double adv_score = 0.0;
    double dis = 0.0;
};

struct FitnessReport {
    std::vector<DisEntry> entries;   // the set D
    double d_min = 0.0;
    double j = 1.0;                  // exp(lambda * d_min)
    double dis_sum = 0.0;
    FitnessMode mode = FitnessMode::score_aware;

    /// The value survivor selection compares.
    double objective() const noexcept { return mode == FitnessMode::score_aware ? j : dis_sum; }
};

/// Folds a set D into a report.
inline FitnessReport make_report(std::vector<DisEntry> entries, double lambda, FitnessMode mode) {
    FitnessReport r;
    r.entries = std::move(entries);
    r.mode = mode;
    r.d_min = std::numeric_limits<double>::infinity();
    for (const auto &e : r.entries) {
        r.d_min = std::min(r.d_min, e.dis);
        r.dis_sum += e.dis;
    }
    if (r.entries.empty()) r.d_min = 0.0;
    r.j = std::exp(lambda * r.d_min);
    return r;
}

/// Scores one mask against the frontal pair and, when multi_angle is set, against
/// every view after warping the mask into it.
inline FitnessReport evaluate_mask(const Mask &mask, const Scenario &s, const OracleBank &oracles,
                                   const FitnessParams &params) {
    std::vector<DisEntry> d;
    d.reserve(2 + (params.multi_angle ? 2 * s.views.size() : 0));
    auto measure = [&](std::size_t view, const Image &x, const Image &cover, const Mask &m, Modality mod, double clean) {
        const double adv = checked_score(oracles.for_view(view).score(apply_patch(x, cover, m), mod));
        d.push_back({view, mod, adv, dis(clean, adv, params.thre)});
    };
    measure(0, s.x_vis, s.cover_vis, mask, Modality::visible, s.clean_score_vis);
    measure(0, s.x_inf, s.cover_inf, mask, Modality::infrared, s.clean_score_inf);
    if (params.multi_angle) {
        for (std::size_t v = 0; v < s.views.size(); ++v) {
            const auto &view = s.views[v];
            const Mask warped = warp_mask(mask, view.h);
            measure(v + 1, view.x_vis, view.cover_vis, warped, Modality::visible, view.clean_score_vis);
            measure(v + 1, view.x_inf, view.cover_inf, warped, Modality::infrared, view.clean_score_inf);
        }
    }
    return make_report(std::move(d), params.lambda, params.mode);
}

inline FitnessReport evaluate(const PatchGenome &genome, const ShapeParams &shape, const Scenario &s,
                              const OracleBank &oracles, const FitnessParams &params) {
    return evaluate_mask(genome_to_mask(genome, shape, s.height(), s.width(), s.outer), s, oracles, params);
}

/// Every evaluated adversarial score strictly below thre.
inline bool is_success(const FitnessReport &report, double thre) {
    if (report.entries.empty()) return false;
    return std::all_of(report.entries.begin(), report.entries.end(),
                       [thre](const DisEntry &e) { return e.adv_score < thre; });
}

inline bool is_success(const FitnessReport &report, const Scenario &s) { return is_success(report, s.thre); }

} // namespace patchforge

#endif
