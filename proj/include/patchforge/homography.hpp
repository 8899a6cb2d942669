#ifndef PATCHFORGE_HOMOGRAPHY_HPP
#define PATCHFORGE_HOMOGRAPHY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "geometry.hpp"
#include "random.hpp"

namespace patchforge {

/// 3x3 projective transform, row-major. Kept with m[2][2] == 1 whenever that entry
/// is not vanishingly small.
class Homography {
public:
    using Matrix = std::array<std::array<double, 3>, 3>;

    Homography() : m_{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}} {}

    explicit Homography(const Matrix &m) : m_(m) {
        if (!std::isfinite(det()) || std::abs(det()) <= 1e-12)
            throw SingularHomography("homography determinant is ~0");
        normalize();
    }

    static Homography identity() { return {}; }
    static Homography translation(double dx, double dy) {
        return Homography(Matrix{{{1, 0, dx}, {0, 1, dy}, {0, 0, 1}}});
    }
    static Homography scaling(double s) { return Homography(Matrix{{{s, 0, 0}, {0, s, 0}, {0, 0, 1}}}); }

    const Matrix &matrix() const noexcept { return m_; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return m_[r][c]; }

    double det() const noexcept {
        const auto &a = m_;
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
               a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    }

    Homography inverse() const {
        const double d = det();
        if (std::abs(d) <= 1e-12) throw SingularHomography("homography is not invertible");
        const auto &a = m_;
        Matrix inv{};
        inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / d;
        inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d;
        inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d;
        inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / d;
        inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d;
        inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d;
        inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / d;
        inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / d;
        inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d;
        return Homography(inv);
    }

    Homography operator*(const Homography &o) const {
        Matrix r{};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                for (std::size_t k = 0; k < 3; ++k) r[i][j] += m_[i][k] * o.m_[k][j];
        return Homography(r);
    }

private:
    void normalize() {
        const double s = m_[2][2];
        if (std::abs(s) > 1e-9)
            for (auto &row : m_)
                for (auto &v : row) v /= s;
    }

    Matrix m_;
};

/// Euclidean image of p under h (the T(H p) dehomogenization).
inline Point2 project(const Homography &h, const Point2 &p) {
    const double w = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
    if (std::abs(w) < 1e-12) throw PointAtInfinity("point maps to infinity");
    return {(h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2)) / w, (h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2)) / w};
}

struct PointPair {
    Point2 src;
    Point2 dst;
};

/// Sum of squared back-projection distances over `pairs`.
inline double backprojection_cost(const Homography &h, std::span<const PointPair> pairs) {
    double cost = 0.0;
    for (const auto &pp : pairs) cost += (pp.dst - project(h, pp.src)).norm2();
    return cost;
}

inline double inlier_rms(const Homography &h, std::span<const PointPair> pairs) {
    if (pairs.empty()) return 0.0;
    return std::sqrt(backprojection_cost(h, pairs) / static_cast<double>(pairs.size()));
}

namespace detail {

struct Similarity2 {
    double scale = 1.0;
    Point2 shift;   // applied after scaling: q = scale * p + shift
};

// Hartley conditioning: centroid to the origin, RMS distance sqrt(2).
inline Similarity2 conditioning(std::span<const Point2> pts) {
    Point2 c;
    for (const auto &p : pts) c += p;
    c = c / static_cast<double>(pts.size());
    double ms = 0.0;
    for (const auto &p : pts) ms += (p - c).norm2();
    const double rms = std::sqrt(ms / static_cast<double>(pts.size()));
    if (!(rms > 1e-12)) throw DegenerateConfiguration("all points coincide");
    const double s = std::sqrt(2.0) / rms;
    return {s, c * -s};
}

inline double triangle_area2(const Point2 &a, const Point2 &b, const Point2 &c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// True if some three of the four points are (numerically) collinear.
inline bool has_collinear_triple(const std::array<Point2, 4> &p) {
    double scale = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) scale = std::max(scale, (p[i] - p[j]).norm2());
    const double tol = 1e-9 * std::max(scale, 1e-300);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j)
            for (std::size_t k = j + 1; k < 4; ++k)
                if (std::abs(triangle_area2(p[i], p[j], p[k])) <= tol) return true;
    return false;
}

} // namespace detail

/// Normalized DLT over >= 4 correspondences.
inline Homography estimate_dlt(std::span<const PointPair> pairs) {
    const std::size_t n = pairs.size();
    if (n < 4) throw DegenerateConfiguration("homography needs at least 4 point pairs");
    if (n == 4) {
        std::array<Point2, 4> s, d;
        for (std::size_t i = 0; i < 4; ++i) {
            s[i] = pairs[i].src;
            d[i] = pairs[i].dst;
        }
        if (detail::has_collinear_triple(s) || detail::has_collinear_triple(d))
            throw DegenerateConfiguration("three of four points are collinear");
    }

    std::vector<Point2> src(n), dst(n);
    for (std::size_t i = 0; i < n; ++i) {
        src[i] = pairs[i].src;
        dst[i] = pairs[i].dst;
    }
    const auto ts = detail::conditioning(src);
    const auto td = detail::conditioning(dst);

    Eigen::MatrixXd a(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 p = src[i] * ts.scale + ts.shift;
        const Point2 q = dst[i] * td.scale + td.shift;
        const auto r = static_cast<Eigen::Index>(2 * i);
        a.row(r) << -p.x, -p.y, -1, 0, 0, 0, q.x * p.x, q.x * p.y, q.x;
        a.row(r + 1) << 0, 0, 0, -p.x, -p.y, -1, q.y * p.x, q.y * p.y, q.y;
    }

    Eigen::Matrix<double, 9, 1> h;
    Eigen::Matrix<double, 9, 1> sv;
    if (n == 4) {
        // 8x9: pad to square so the full V is available.
        Eigen::Matrix<double, 9, 9> sq = Eigen::Matrix<double, 9, 9>::Zero();
        sq.topRows(8) = a;
        Eigen::JacobiSVD<Eigen::Matrix<double, 9, 9>> svd(sq, Eigen::ComputeFullV);
        h = svd.matrixV().col(8);
        sv = svd.singularValues();
    } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
        h = svd.matrixV().col(8);
        sv = svd.singularValues();
    }
    // A second (near-)null direction means the correspondences do not pin H down.
    if (sv(7) <= 1e-10 * sv(0)) throw DegenerateConfiguration("point configuration is degenerate");

    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Eigen::Matrix3d tsrc, tdst_inv;
    tsrc << ts.scale, 0, ts.shift.x, 0, ts.scale, ts.shift.y, 0, 0, 1;
    tdst_inv << 1 / td.scale, 0, -td.shift.x / td.scale, 0, 1 / td.scale, -td.shift.y / td.scale, 0, 0, 1;
    const Eigen::Matrix3d full = tdst_inv * hn * tsrc;

    Homography::Matrix m{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[r][c] = full(r, c);
    try {
        return Homography(m);
    } catch (const SingularHomography &) {
        throw DegenerateConfiguration("estimated homography is singular");
    }
}

struct RansacResult {
    Homography h;
    std::vector<bool> inlier_mask;
    std::size_t inlier_count = 0;
};

inline constexpr double default_ransac_threshold = 3.0;
inline constexpr std::size_t default_ransac_iterations = 1000;

namespace detail {

struct Consensus {
    std::size_t count = 0;
    double rms = std::numeric_limits<double>::infinity();
    std::vector<bool> mask;
};

inline Consensus consensus(const Homography &h, std::span<const PointPair> pairs, double thre) {
    Consensus c;
    c.mask.assign(pairs.size(), false);
    double sq = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double err;
        try {
            err = (pairs[i].dst - project(h, pairs[i].src)).norm();
        } catch (const PointAtInfinity &) {
            continue;
        }
        if (err <= thre) {
            c.mask[i] = true;
            ++c.count;
            sq += err * err;
        }
    }
    if (c.count > 0) c.rms = std::sqrt(sq / static_cast<double>(c.count));
    return c;
}

} // namespace detail

/// RANSAC over minimal 4-pair samples; best model by inlier count, ties by lower
/// inlier RMS, then re-estimated on its whole inlier set.
inline RansacResult ransac_estimate(std::span<const PointPair> pairs,
                                    double ransac_threshold = default_ransac_threshold,
                                    std::size_t iterations = default_ransac_iterations,
                                    std::uint64_t rng_seed = 0) {
    if (pairs.size() < 4) throw DegenerateConfiguration("RANSAC needs at least 4 point pairs");
    if (!(ransac_threshold > 0)) throw DegenerateConfiguration("RANSAC threshold must be positive");

    Rng rng(rng_seed);
    detail::Consensus best;
    std::optional<Homography> best_h;
    std::array<PointPair, 4> sample;
    for (std::size_t it = 0; it < iterations; ++it) {
        const auto idx = sample_distinct(rng, pairs.size(), 4);
        for (std::size_t k = 0; k < 4; ++k) sample[k] = pairs[idx[k]];
        Homography h;
        try {
            h = estimate_dlt(sample);
        } catch (const DegenerateConfiguration &) {
            continue;
        }
        auto c = detail::consensus(h, pairs, ransac_threshold);
        if (c.count > best.count || (c.count == best.count && c.count > 0 && c.rms < best.rms)) {
            best = std::move(c);
            best_h = h;
        }
    }
    if (!best_h || best.count < 4)
        throw InsufficientInliers("best RANSAC consensus has " + std::to_string(best.count) + " inliers");

    std::vector<PointPair> inliers;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (best.mask[i]) inliers.push_back(pairs[i]);
    Homography final_h = *best_h;
    try {
        final_h = estimate_dlt(inliers);
    } catch (const DegenerateConfiguration &) {
        // keep the minimal-sample model
    }
    auto final_c = detail::consensus(final_h, pairs, ransac_threshold);
    if (final_c.count < best.count) {
        final_h = *best_h;
        final_c = std::move(best);
    }
    return {final_h, std::move(final_c.mask), final_c.count};
}

namespace detail {

/// Solves the Gauss-Newton normal equations (J^T J) delta = -J^T r.
inline Eigen::VectorXd gauss_newton_step(const Eigen::MatrixXd &jac, const Eigen::VectorXd &residual) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * residual;
    return jtj.ldlt().solve(-jtr);
}

// Residuals r = [dst - T(H src)] stacked as (x, y) and their Jacobian w.r.t. the
// 8 free entries h11..h32 (h33 == 1).
inline void residuals_and_jacobian(const Eigen::Matrix<double, 8, 1> &p, std::span<const PointPair> pairs,
                                   Eigen::VectorXd &r, Eigen::MatrixXd &jac) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    r.resize(2 * n);
    jac.setZero(2 * n, 8);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = pairs[static_cast<std::size_t>(i)].src.x, y = pairs[static_cast<std::size_t>(i)].src.y;
        const double u = p(0) * x + p(1) * y + p(2);
        const double v = p(3) * x + p(4) * y + p(5);
        const double w = p(6) * x + p(7) * y + 1.0;
        const double px = u / w, py = v / w;
        r(2 * i) = pairs[static_cast<std::size_t>(i)].dst.x - px;
        r(2 * i + 1) = pairs[static_cast<std::size_t>(i)].dst.y - py;
        // d r = -d(proj)
        jac(2 * i, 0) = -x / w;
        jac(2 * i, 1) = -y / w;
        jac(2 * i, 2) = -1 / w;
        jac(2 * i, 6) = px * x / w;
        jac(2 * i, 7) = px * y / w;
        jac(2 * i + 1, 3) = -x / w;
        jac(2 * i + 1, 4) = -y / w;
        jac(2 * i + 1, 5) = -1 / w;
        jac(2 * i + 1, 6) = py * x / w;
        jac(2 * i + 1, 7) = py * y / w;
    }
}

} // namespace detail

/// Gauss-Newton refinement of the back-projection cost with halving line search.
/// Never returns a model with higher cost than the input.
inline Homography refine(const Homography &h, std::span<const PointPair> inliers,
                         std::size_t max_iterations = 100, double rel_tolerance = 1e-10) {
    if (inliers.size() < 4) throw DegenerateConfiguration("refinement needs at least 4 inliers");
    if (std::abs(h(2, 2)) <= 1e-9) return h;

    auto to_homography = [](const Eigen::Matrix<double, 8, 1> &p) {
        return Homography(Homography::Matrix{{{p(0), p(1), p(2)}, {p(3), p(4), p(5)}, {p(6), p(7), 1.0}}});
    };
    auto safe_cost = [&](const Eigen::Matrix<double, 8, 1> &p) {
        try {
            return backprojection_cost(to_homography(p), inliers);
        } catch (const Error &) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::Matrix<double, 8, 1> p;
    p << h(0, 0), h(0, 1), h(0, 2), h(1, 0), h(1, 1), h(1, 2), h(2, 0), h(2, 1);
    double cost = safe_cost(p);
    if (!std::isfinite(cost)) return h;

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    for (std::size_t it = 0; it < max_iterations && cost > 0.0; ++it) {
        detail::residuals_and_jacobian(p, inliers, r, jac);
        const Eigen::VectorXd delta = detail::gauss_newton_step(jac, r);
        if (!delta.allFinite()) break;
        double step = 1.0;
        bool improved = false;
        Eigen::Matrix<double, 8, 1> trial;
        double trial_cost = cost;
        for (int halving = 0; halving <= 20; ++halving, step *= 0.5) {
            trial = p + step * delta;
            trial_cost = safe_cost(trial);
            if (trial_cost < cost) {
                improved = true;
                break;
            }
        }
        if (!improved) break;
        const double rel = (cost - trial_cost) / cost;
        p = trial;
        cost = trial_cost;
        if (rel < rel_tolerance) break;
    }
    return to_homography(p);
}

} // namespace patchforge

#endif
