#ifndef PATCHFORGE_RASTER_HPP
#define PATCHFORGE_RASTER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contour.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "homography.hpp"

namespace patchforge {

/// Binary h x w grid, row-major; 1 marks patch pixels.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t height, std::size_t width) : height_(height), width_(width), bits_(height * width, 0) {}

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    bool empty() const noexcept { return bits_.empty(); }

    std::uint8_t operator()(std::size_t row, std::size_t col) const noexcept { return bits_[row * width_ + col]; }
    void set(std::size_t row, std::size_t col, bool v) noexcept { bits_[row * width_ + col] = v ? 1 : 0; }

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<std::uint8_t> bits() noexcept { return bits_; }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    bool same_shape(const Mask &o) const noexcept { return height_ == o.height_ && width_ == o.width_; }
    bool operator==(const Mask &) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Interleaved h x w x c image with samples in [0, 1].
class Image {
public:
    Image() = default;
    Image(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels), values_(height * width * channels, fill) {
        if (channels != 1 && channels != 3) throw ShapeMismatch("images have 1 or 3 channels");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return height_ * width_; }

    double operator()(std::size_t row, std::size_t col, std::size_t ch = 0) const noexcept {
        return values_[(row * width_ + col) * channels_ + ch];
    }
    double &at(std::size_t row, std::size_t col, std::size_t ch = 0) noexcept {
        return values_[(row * width_ + col) * channels_ + ch];
    }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    bool same_shape(const Image &o) const noexcept {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }
    bool same_grid(const Mask &m) const noexcept { return height_ == m.height() && width_ == m.width(); }
    bool operator==(const Image &) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 1;
    std::vector<double> values_;
};

/// Even-odd scanline fill sampled at pixel centers (col + 0.5, row + 0.5), clipped
/// to the outer border. Crossings use the classic half-open edge rule.
inline Mask fill_contour(const Polyline &contour, std::size_t height, std::size_t width, const OuterBorder &outer) {
    Mask mask(height, width);
    const auto &v = contour.points;
    const std::size_t n = v.size();
    if (n < 3) return mask;

    double ymin = v[0].y, ymax = v[0].y;
    for (const auto &p : v) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const auto clamp_row = [&](double y) {
        return static_cast<std::ptrdiff_t>(std::clamp(y, 0.0, static_cast<double>(height)));
    };
    const std::ptrdiff_t row_lo = std::max<std::ptrdiff_t>(0, clamp_row(std::floor(ymin - 0.5)) - 1);
    const std::ptrdiff_t row_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(height) - 1,
                                                           clamp_row(std::ceil(ymax)) + 1);

    std::vector<double> xs;
    for (std::ptrdiff_t row = row_lo; row <= row_hi; ++row) {
        const double y = static_cast<double>(row) + 0.5;
        if (y < outer.y_d || y > outer.y_u) continue;
        xs.clear();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Point2 &a = v[i], &b = v[j];
            if ((a.y > y) != (b.y > y)) xs.push_back((b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x);
        }
        std::sort(xs.begin(), xs.end());
        // A center x is inside iff an odd number of crossings lie strictly right of it,
        // i.e. x in [xs[2k], xs[2k+1]).
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const double lo = std::max(xs[k], outer.x_l);
            const double hi = xs[k + 1];
            auto col = static_cast<std::ptrdiff_t>(std::max(0.0, std::floor(lo - 0.5) - 1));
            while (col < static_cast<std::ptrdiff_t>(width) && static_cast<double>(col) + 0.5 < lo) ++col;
            for (; col < static_cast<std::ptrdiff_t>(width); ++col) {
                const double cx = static_cast<double>(col) + 0.5;
                if (!(cx < hi) || cx > outer.x_r) break;
                mask.set(static_cast<std::size_t>(row), static_cast<std::size_t>(col), true);
            }
        }
    }
    return mask;
}

/// x * (1 - M) + cover * M, channel-wise.
inline Image apply_patch(const Image &x, const Image &cover, const Mask &m) {
    if (!x.same_shape(cover) || !x.same_grid(m)) throw ShapeMismatch("image, cover and mask shapes differ");
    Image out = x;
    const std::size_t c = x.channels();
    const auto bits = m.bits();
    auto dst = out.values();
    const auto src = cover.values();
    for (std::size_t p = 0; p < bits.size(); ++p) {
        if (!bits[p]) continue;
        for (std::size_t ch = 0; ch < c; ++ch) dst[p * c + ch] = src[p * c + ch];
    }
    return out;
}

inline Mask union_masks(std::span<const Mask> masks) {
    if (masks.empty()) return {};
    Mask out = masks[0];
    for (std::size_t i = 1; i < masks.size(); ++i) {
        if (!masks[i].same_shape(out)) throw ShapeMismatch("mask shapes differ");
        auto dst = out.bits();
        const auto src = masks[i].bits();
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] |= src[p];
    }
    return out;
}

/// Inverse-mapped nearest-neighbor warp onto a grid of the same size.
inline Mask warp_mask(const Mask &m, const Homography &h) {
    const Homography inv = h.inverse();
    Mask out(m.height(), m.width());
    const auto &a = inv.matrix();
    const auto w = static_cast<double>(m.width()), ht = static_cast<double>(m.height());
    for (std::size_t row = 0; row < m.height(); ++row) {
        const double y = static_cast<double>(row) + 0.5;
        for (std::size_t col = 0; col < m.width(); ++col) {
            const double x = static_cast<double>(col) + 0.5;
            const double den = a[2][0] * x + a[2][1] * y + a[2][2];
            if (std::abs(den) < 1e-12) continue;
            const double sx = (a[0][0] * x + a[0][1] * y + a[0][2]) / den;
            const double sy = (a[1][0] * x + a[1][1] * y + a[1][2]) / den;
            if (!(sx >= 0 && sx < w && sy >= 0 && sy < ht)) continue;
            if (m(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx))) out.set(row, col, true);
        }
    }
    return out;
}

} // namespace patchforge

#endif
