#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "patchforge/contour.hpp"
#include "patchforge/genome.hpp"
#include "patchforge/image_io.hpp"
#include "patchforge/random.hpp"
#include "patchforge/raster.hpp"

using namespace patchforge;

namespace {

// W. Randolph Franklin's point-in-polygon test, evaluated per pixel center.
bool pnpoly(const std::vector<Point2> &v, double x, double y) {
    bool c = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++)
        if (((v[i].y > y) != (v[j].y > y)) && (x < (v[j].x - v[i].x) * (y - v[i].y) / (v[j].y - v[i].y) + v[i].x))
            c = !c;
    return c;
}

Mask brute_force_fill(const Polyline &p, std::size_t h, std::size_t w, const OuterBorder &o) {
    Mask m(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const Point2 q{c + 0.5, r + 0.5};
            m.set(r, c, o.contains(q) && pnpoly(p.points, q.x, q.y));
        }
    return m;
}

Polyline square(double x0, double y0, double x1, double y1) { return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, true}; }

Mask square_mask(std::size_t h, std::size_t w, std::size_t r0, std::size_t c0, std::size_t side) {
    Mask m(h, w);
    for (std::size_t r = r0; r < r0 + side; ++r)
        for (std::size_t c = c0; c < c0 + side; ++c) m.set(r, c, true);
    return m;
}

Image random_image(Rng &rng, std::size_t h, std::size_t w, std::size_t ch) {
    Image img(h, w, ch);
    for (auto &v : img.values()) v = uniform01(rng);
    return img;
}

} // namespace

TEST(FillContour, AxisAlignedSquareIs900Pixels) {
    const OuterBorder all{0, 64, 0, 64};
    const Mask m = fill_contour(square(10, 10, 40, 40), 64, 64, all);
    EXPECT_EQ(m.count(), 900u);
    EXPECT_TRUE(m(10, 10));
    EXPECT_TRUE(m(39, 39));
    EXPECT_FALSE(m(40, 39));
    EXPECT_FALSE(m(9, 10));
    EXPECT_EQ(m, brute_force_fill(square(10, 10, 40, 40), 64, 64, all));
}

TEST(FillContour, OutsideBorderIsEmpty) {
    EXPECT_EQ(fill_contour(square(10, 10, 40, 40), 64, 64, {45, 60, 45, 60}).count(), 0u);
    EXPECT_EQ(fill_contour(square(-50, -50, -10, -10), 64, 64, {0, 64, 0, 64}).count(), 0u);
}

TEST(FillContour, LargeCircleMatchesBruteForce) {
    const auto l = build_anchor_layout({100, 100}, 50, 15, 8, {0, 200, 0, 200});
    const auto c = assemble_contour(l.initial_anchors, 32);
    const Mask m = fill_contour(c, 200, 200, l.outer);
    EXPECT_EQ(m, brute_force_fill(c, 200, 200, l.outer));
    EXPECT_GT(m.count(), 6000u);
}

TEST(FillContour, RandomFeasibleContoursMatchBruteForce) {
    Rng rng(31);
    std::size_t mismatched = 0, total = 0;
    for (int t = 0; t < 100; ++t) {
        const OuterBorder o{uniform_real(rng, 5, 20), uniform_real(rng, 60, 75), uniform_real(rng, 5, 20),
                            uniform_real(rng, 60, 75)};
        const auto l = build_anchor_layout({40 + uniform_real(rng, -3, 3), 40 + uniform_real(rng, -3, 3)}, 15, 4.5,
                                           8, o, uniform_real(rng, 0, 1));
        std::vector<Point2> a;
        for (std::size_t j = 0; j < 8; ++j) {
            Point2 p;
            do {
                p = l.center + Point2{uniform_real(rng, -40, 40), uniform_real(rng, -40, 40)};
            } while (!is_feasible(p, l, j));
            a.push_back(p);
        }
        const auto c = assemble_contour(a, 32);
        const Mask m = fill_contour(c, 80, 80, o);
        const Mask ref = brute_force_fill(c, 80, 80, o);
        for (std::size_t p = 0; p < m.bits().size(); ++p) mismatched += m.bits()[p] != ref.bits()[p];
        total += m.bits().size();
    }
    EXPECT_EQ(mismatched, 0u) << "of " << total;
}

TEST(FillContour, ClippedToBorder) {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        std::vector<Point2> pts;
        for (int k = 0; k < 12; ++k) pts.push_back({uniform_real(rng, -10, 70), uniform_real(rng, -10, 70)});
        const OuterBorder o{uniform_real(rng, 0, 20), uniform_real(rng, 40, 60), uniform_real(rng, 0, 20),
                            uniform_real(rng, 40, 60)};
        const Polyline poly{pts, true};
        const Mask m = fill_contour(poly, 64, 64, o);
        for (std::size_t r = 0; r < 64; ++r)
            for (std::size_t c = 0; c < 64; ++c)
                if (m(r, c)) {
                    ASSERT_TRUE(o.contains({c + 0.5, r + 0.5}));
                }
        EXPECT_EQ(m, brute_force_fill(poly, 64, 64, o)); // self-intersecting: even-odd
    }
}

TEST(ApplyPatch, IdentityAndFullReplacement) {
    Rng rng(1);
    const Image x = random_image(rng, 20, 30, 3), cover = random_image(rng, 20, 30, 3);
    Mask none(20, 30), all(20, 30);
    for (auto &b : all.bits()) b = 1;
    EXPECT_EQ(apply_patch(x, cover, none), x);
    EXPECT_EQ(apply_patch(x, cover, all), cover);
}

TEST(ApplyPatch, SinglePixel) {
    Rng rng(2);
    const Image x = random_image(rng, 10, 10, 3), cover = random_image(rng, 10, 10, 3);
    Mask m(10, 10);
    m.set(4, 7, true);
    const Image out = apply_patch(x, cover, m);
    std::size_t diff = 0;
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c) {
            bool d = false;
            for (std::size_t ch = 0; ch < 3; ++ch) d |= out(r, c, ch) != x(r, c, ch);
            diff += d;
        }
    EXPECT_EQ(diff, 1u);
    for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(out(4, 7, ch), cover(4, 7, ch));
}

TEST(ApplyPatch, RangeIdempotenceAndReconstruction) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const Image x = random_image(rng, 16, 12, 1), cover = random_image(rng, 16, 12, 1);
        Mask m(16, 12), inv(16, 12);
        for (std::size_t p = 0; p < m.bits().size(); ++p) {
            m.bits()[p] = uniform01(rng) < 0.4;
            inv.bits()[p] = !m.bits()[p];
        }
        const Image once = apply_patch(x, cover, m);
        for (double v : once.values()) ASSERT_TRUE(v >= 0 && v <= 1);
        EXPECT_EQ(apply_patch(once, cover, m), once);
        EXPECT_EQ(apply_patch(once, x, m), x);
        EXPECT_EQ(apply_patch(apply_patch(x, cover, m), x, m), x);
        EXPECT_EQ(apply_patch(x, cover, inv), apply_patch(cover, x, m));
    }
}

TEST(ApplyPatch, ShapeMismatch) {
    const Image x(10, 10, 3), c1(10, 10, 1), c2(10, 11, 3);
    EXPECT_THROW(apply_patch(x, c1, Mask(10, 10)), ShapeMismatch);
    EXPECT_THROW(apply_patch(x, c2, Mask(10, 10)), ShapeMismatch);
    EXPECT_THROW(apply_patch(x, x, Mask(9, 10)), ShapeMismatch);
}

TEST(UnionMasks, IdentityIdempotenceDisjoint) {
    const Mask a = square_mask(100, 100, 5, 5, 30), b = square_mask(100, 100, 50, 50, 30), z(100, 100);
    EXPECT_EQ(union_masks(std::vector<Mask>{a, z}), a);
    EXPECT_EQ(union_masks(std::vector<Mask>{a, a}), a);
    EXPECT_EQ(union_masks(std::vector<Mask>{a, b}).count(), 1800u);
    EXPECT_THROW(union_masks(std::vector<Mask>{a, Mask(10, 10)}), ShapeMismatch);
}

TEST(WarpMask, Identity) {
    const Mask m = fill_contour(square(3.2, 4.7, 20.1, 17.9), 24, 24, {0, 24, 0, 24});
    EXPECT_EQ(warp_mask(m, Homography::identity()), m);
}

TEST(WarpMask, IntegerTranslation) {
    Rng rng(6);
    Mask m(40, 50);
    for (auto &b : m.bits()) b = uniform01(rng) < 0.3;
    const Mask w = warp_mask(m, Homography::translation(5, -3));
    for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t c = 0; c < 50; ++c) {
            const long sr = static_cast<long>(r) + 3, sc = static_cast<long>(c) - 5;
            const bool expected = sr >= 0 && sr < 40 && sc >= 0 && sc < 50 && m(sr, sc);
            ASSERT_EQ(w(r, c) != 0, expected) << r << "," << c;
        }
}

TEST(WarpMask, DoublingScaleQuadruplesArea) {
    const Mask m = square_mask(400, 400, 50, 50, 100);
    const Mask w = warp_mask(m, Homography::scaling(2.0));
    const double ratio = static_cast<double>(w.count()) / static_cast<double>(m.count());
    EXPECT_NEAR(ratio, 4.0, 0.2);
}

TEST(WarpMask, SingularRejected) {
    EXPECT_THROW(Homography(Homography::Matrix{{{1, 2, 0}, {2, 4, 0}, {0, 0, 1}}}), SingularHomography);
}

TEST(Netpbm, MaskRoundTripAndHeader) {
    const auto dir = std::filesystem::temp_directory_path() / "pf_raster_test";
    std::filesystem::create_directories(dir);
    const Mask m = square_mask(7, 9, 1, 2, 4);
    write_mask(dir / "m.pgm", m);
    EXPECT_EQ(read_mask(dir / "m.pgm"), m);
    std::ifstream in(dir / "m.pgm", std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(all.substr(0, 11), "P5\n9 7\n255\n");
    EXPECT_EQ(all.size(), 11u + 63u);
    EXPECT_EQ(static_cast<unsigned char>(all[11 + 1 * 9 + 2]), 255);
}

TEST(Netpbm, ImageRoundTripIsBitExact) {
    const auto dir = std::filesystem::temp_directory_path() / "pf_raster_test";
    std::filesystem::create_directories(dir);
    Rng rng(8);
    for (std::size_t ch : {1u, 3u}) {
        Image img(13, 17, ch);
        for (auto &v : img.values()) v = from_byte(static_cast<std::uint8_t>(uniform_index(rng, 256)));
        write_image(dir / "i.pnm", img);
        EXPECT_EQ(read_image(dir / "i.pnm"), img);
    }
}

TEST(Netpbm, CommentsAndErrors) {
    const auto dir = std::filesystem::temp_directory_path() / "pf_raster_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "c.pgm", std::ios::binary);
        out << "P5\n# a comment\n2 1\n255\n" << '\x00' << '\xff';
    }
    const Image img = read_image(dir / "c.pgm");
    EXPECT_EQ(img(0, 0), 0.0);
    EXPECT_EQ(img(0, 1), 1.0);
    {
        std::ofstream out(dir / "t.pgm", std::ios::binary);
        out << "P5\n4 4\n255\n" << "abc";
    }
    EXPECT_THROW(read_image(dir / "t.pgm"), ParseError);
    EXPECT_THROW(read_image(dir / "missing.pgm"), ParseError);
}
