#ifndef PATCHFORGE_ORACLE_HPP
#define PATCHFORGE_ORACLE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "errors.hpp"
#include "geometry.hpp"
#include "raster.hpp"

namespace patchforge {

enum class Modality { visible, infrared };

inline constexpr std::string_view to_string(Modality m) noexcept {
    return m == Modality::visible ? "visible" : "infrared";
}

inline Modality parse_modality(std::string_view s) {
    if (s == "visible") return Modality::visible;
    if (s == "infrared") return Modality::infrared;
    throw ParseError("unknown modality '" + std::string(s) + "'");
}

/// Black-box detector: image in, person confidence in [0, 1] out.
class Detector {
public:
    virtual ~Detector() = default;
    virtual double score(const Image &image, Modality modality) = 0;
};

/// Enforces the score contract on whatever a backend produced.
inline double checked_score(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw MalformedResponse("detector score " + std::to_string(s) + " outside [0, 1]");
    return s;
}

/// Part-weighted stand-in for a real detector. The body box is cut into a
/// rows x cols grid; every cell carries one weight per modality.
struct SyntheticDetectorSpec {
    OuterBorder body_box;
    std::size_t grid_rows = 1;
    std::size_t grid_cols = 1;
    std::vector<double> weights_visible;
    std::vector<double> weights_infrared;
    double base_score = 0.9;
    double change_threshold = 0.1;

    const std::vector<double> &weights(Modality m) const noexcept {
        return m == Modality::visible ? weights_visible : weights_infrared;
    }

    void validate() const {
        const std::size_t cells = grid_rows * grid_cols;
        if (!body_box.valid() || cells == 0) throw ParseError("synthetic detector: empty body box or grid");
        for (const auto *w : {&weights_visible, &weights_infrared}) {
            if (w->size() != cells) throw ParseError("synthetic detector: weight count != grid cells");
            if (std::any_of(w->begin(), w->end(), [](double v) { return !(v >= 0); }))
                throw ParseError("synthetic detector: negative weight");
            if (std::abs(std::accumulate(w->begin(), w->end(), 0.0) - 1.0) > 1e-9)
                throw ParseError("synthetic detector: weights must sum to 1");
        }
        if (!(base_score > 0 && base_score <= 1)) throw ParseError("synthetic detector: base score outside (0, 1]");
        if (!(change_threshold > 0 && change_threshold < 1))
            throw ParseError("synthetic detector: change threshold outside (0, 1)");
    }
};

inline void to_json(nlohmann::json &j, const OuterBorder &o) {
    j = {{"x_l", o.x_l}, {"x_r", o.x_r}, {"y_d", o.y_d}, {"y_u", o.y_u}};
}

inline void from_json(const nlohmann::json &j, OuterBorder &o) {
    o = {j.at("x_l").get<double>(), j.at("x_r").get<double>(), j.at("y_d").get<double>(), j.at("y_u").get<double>()};
    if (!o.valid()) throw ParseError("border needs x_l < x_r and y_d < y_u");
}

inline void to_json(nlohmann::json &j, const SyntheticDetectorSpec &s) {
    j = {{"body_box", s.body_box},
         {"grid", {s.grid_rows, s.grid_cols}},
         {"weights_visible", s.weights_visible},
         {"weights_infrared", s.weights_infrared},
         {"base_score", s.base_score},
         {"change_threshold", s.change_threshold}};
}

inline void from_json(const nlohmann::json &j, SyntheticDetectorSpec &s) {
    s.body_box = j.at("body_box").get<OuterBorder>();
    s.grid_rows = j.at("grid").at(0).get<std::size_t>();
    s.grid_cols = j.at("grid").at(1).get<std::size_t>();
    s.weights_visible = j.at("weights_visible").get<std::vector<double>>();
    s.weights_infrared = j.at("weights_infrared").get<std::vector<double>>();
    s.base_score = j.value("base_score", 0.9);
    s.change_threshold = j.value("change_threshold", 0.1);
    s.validate();
}

/// Pure, thread-safe synthetic detector bound to one clean image pair.
///   score = s0 * sum_g w_g * v_g,  v_g = share of cell pixels whose channel-max
///   difference from the clean image is <= tau.
class SyntheticDetector final : public Detector {
public:
    SyntheticDetector(SyntheticDetectorSpec spec, Image clean_visible, Image clean_infrared)
        : spec_(std::move(spec)), clean_vis_(std::move(clean_visible)), clean_inf_(std::move(clean_infrared)) {
        spec_.validate();
        if (clean_vis_.height() != clean_inf_.height() || clean_vis_.width() != clean_inf_.width())
            throw ShapeMismatch("visible and infrared clean images differ in size");
        index_cells();
    }

    const SyntheticDetectorSpec &spec() const noexcept { return spec_; }

    double score(const Image &image, Modality modality) override {
        return synthetic_score(image, modality, spec_.weights(modality));
    }

    /// Same visibility vector, caller-supplied weights.
    double synthetic_score(const Image &candidate, Modality modality, const std::vector<double> &weights) const {
        const auto v = visibility(candidate, modality);
        double s = 0.0;
        for (std::size_t g = 0; g < v.size(); ++g) s += weights[g] * v[g];
        return std::clamp(spec_.base_score * s, 0.0, 1.0);
    }

    /// v_g for every cell; cells without pixels count as fully visible.
    std::vector<double> visibility(const Image &candidate, Modality modality) const {
        const Image &clean = modality == Modality::visible ? clean_vis_ : clean_inf_;
        if (!candidate.same_shape(clean)) throw ShapeMismatch("candidate image does not match the clean image");
        const std::size_t c = clean.channels();
        const auto cand = candidate.values();
        const auto ref = clean.values();
        const double tau = spec_.change_threshold;
        std::vector<std::size_t> unchanged(cell_pixels_.size(), 0);
        for (const auto &[pixel, cell] : pixels_) {
            double diff = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch)
                diff = std::max(diff, std::abs(cand[pixel * c + ch] - ref[pixel * c + ch]));
            if (diff <= tau) ++unchanged[cell];
        }
        std::vector<double> v(cell_pixels_.size(), 1.0);
        for (std::size_t g = 0; g < v.size(); ++g)
            if (cell_pixels_[g] > 0) v[g] = static_cast<double>(unchanged[g]) / static_cast<double>(cell_pixels_[g]);
        return v;
    }

    /// Cell of the pixel at (row, col), or -1 outside the body box.
    std::ptrdiff_t cell_of(std::size_t row, std::size_t col) const noexcept {
        const double x = static_cast<double>(col) + 0.5, y = static_cast<double>(row) + 0.5;
        const auto &b = spec_.body_box;
        if (x < b.x_l || x >= b.x_r || y < b.y_d || y >= b.y_u) return -1;
        auto gc = static_cast<std::size_t>((x - b.x_l) / b.width() * static_cast<double>(spec_.grid_cols));
        auto gr = static_cast<std::size_t>((y - b.y_d) / b.height() * static_cast<double>(spec_.grid_rows));
        gc = std::min(gc, spec_.grid_cols - 1);
        gr = std::min(gr, spec_.grid_rows - 1);
        return static_cast<std::ptrdiff_t>(gr * spec_.grid_cols + gc);
    }

private:
    void index_cells() {
        cell_pixels_.assign(spec_.grid_rows * spec_.grid_cols, 0);
        for (std::size_t r = 0; r < clean_vis_.height(); ++r)
            for (std::size_t c = 0; c < clean_vis_.width(); ++c) {
                const auto g = cell_of(r, c);
                if (g < 0) continue;
                pixels_.push_back({r * clean_vis_.width() + c, static_cast<std::size_t>(g)});
                ++cell_pixels_[static_cast<std::size_t>(g)];
            }
    }

    struct PixelCell {
        std::size_t pixel;
        std::size_t cell;
    };

    SyntheticDetectorSpec spec_;
    Image clean_vis_;
    Image clean_inf_;
    std::vector<PixelCell> pixels_;
    std::vector<std::size_t> cell_pixels_;
};

/// Ignores the image entirely. Useful as an unattackable oracle.
class ConstantDetector final : public Detector {
public:
    ConstantDetector(double visible, double infrared) : visible_(visible), infrared_(infrared) {}
    double score(const Image &, Modality m) override { return m == Modality::visible ? visible_ : infrared_; }

private:
    double visible_;
    double infrared_;
};

/// Decorator counting queries per modality.
class CountingDetector final : public Detector {
public:
    explicit CountingDetector(std::shared_ptr<Detector> inner) : inner_(std::move(inner)) {}

    double score(const Image &image, Modality m) override {
        (m == Modality::visible ? visible_ : infrared_).fetch_add(1, std::memory_order_relaxed);
        return inner_->score(image, m);
    }

    std::size_t count(Modality m) const noexcept {
        return (m == Modality::visible ? visible_ : infrared_).load(std::memory_order_relaxed);
    }
    std::size_t total() const noexcept { return count(Modality::visible) + count(Modality::infrared); }

private:
    std::shared_ptr<Detector> inner_;
    std::atomic<std::size_t> visible_{0};
    std::atomic<std::size_t> infrared_{0};
};

/// One detector per view (index 0 is the frontal view), or one shared detector
/// for every view.
class OracleBank {
public:
    OracleBank() = default;
    explicit OracleBank(std::shared_ptr<Detector> shared) { detectors_.push_back(std::move(shared)); }
    explicit OracleBank(std::vector<std::shared_ptr<Detector>> per_view) : detectors_(std::move(per_view)) {}

    Detector &for_view(std::size_t view) const {
        if (detectors_.empty()) throw OracleUnavailable("no detector configured");
        if (detectors_.size() == 1) return *detectors_.front();
        if (view >= detectors_.size()) throw OracleUnavailable("no detector for view " + std::to_string(view));
        return *detectors_[view];
    }

    std::size_t size() const noexcept { return detectors_.size(); }
    const std::vector<std::shared_ptr<Detector>> &detectors() const noexcept { return detectors_; }

private:
    std::vector<std::shared_ptr<Detector>> detectors_;
};

} // namespace patchforge

#endif
