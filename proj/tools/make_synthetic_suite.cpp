// Generates the bundled synthetic scenario suite: paired visible/infrared scenes,
// part-weighted detector specs, and two angled views per scene.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "patchforge/patchforge.hpp"

namespace pf = patchforge;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t width = 96;
constexpr std::size_t height = 144;
constexpr std::size_t grid_rows = 4;
constexpr std::size_t grid_cols = 3;

struct Scene {
    pf::OuterBorder body;
    pf::Image x_vis, x_inf, cover_vis, cover_inf;
    pf::SyntheticDetectorSpec spec;
};

std::vector<double> normalized(std::vector<double> w) {
    double s = 0;
    for (double v : w) s += v;
    for (double &v : w) v /= s;
    return w;
}

double jitter(pf::Rng &rng, double a) { return pf::uniform_real(rng, -a, a); }

Scene make_scene(pf::Rng &rng) {
    Scene sc;
    const double bx = 16 + jitter(rng, 2), by = 8 + jitter(rng, 2);
    sc.body = {bx, bx + 64 + jitter(rng, 2), by, by + 128 + jitter(rng, 2)};

    // Per-cell clothing colour and surface temperature. A few cells sit close to
    // the cover in one modality, so covering them only helps the other modality.
    const std::size_t cells = grid_rows * grid_cols;
    const double cover_rgb[3] = {0.45, 0.45, 0.45};
    const double cover_temp = 0.2;
    std::vector<std::array<double, 3>> colour(cells);
    std::vector<double> temp(cells);
    for (std::size_t g = 0; g < cells; ++g) {
        for (auto &c : colour[g]) c = pf::uniform_real(rng, 0.0, 1.0);
        temp[g] = pf::uniform_real(rng, 0.65, 0.95);
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const auto g = pf::uniform_index(rng, cells);
        for (std::size_t ch = 0; ch < 3; ++ch) colour[g][ch] = cover_rgb[ch] + jitter(rng, 0.05);
    }
    for (std::size_t k = 0; k < 3; ++k) temp[pf::uniform_index(rng, cells)] = cover_temp + jitter(rng, 0.05);

    std::vector<double> wv(cells), wi(cells);
    for (std::size_t r = 0; r < grid_rows; ++r)
        for (std::size_t c = 0; c < grid_cols; ++c) {
            const std::size_t g = r * grid_cols + c;
            const bool edge = c == 0 || c + 1 == grid_cols || r == 0;
            const bool torso = c == 1 && (r == 1 || r == 2);
            wv[g] = (edge ? 3.0 : 1.0) * pf::uniform_real(rng, 0.3, 1.7);
            wi[g] = (torso ? 4.0 : 1.0) * pf::uniform_real(rng, 0.3, 1.7);
        }
    sc.spec.body_box = sc.body;
    sc.spec.grid_rows = grid_rows;
    sc.spec.grid_cols = grid_cols;
    sc.spec.weights_visible = normalized(wv);
    sc.spec.weights_infrared = normalized(wi);

    const double bg_rgb[3] = {pf::uniform_real(rng, 0.5, 0.9), pf::uniform_real(rng, 0.5, 0.9),
                              pf::uniform_real(rng, 0.4, 0.8)};
    const double bg_temp = pf::uniform_real(rng, 0.35, 0.5);
    sc.x_vis = pf::Image(height, width, 3);
    sc.x_inf = pf::Image(height, width, 1);
    sc.cover_vis = pf::Image(height, width, 3);
    sc.cover_inf = pf::Image(height, width, 1, cover_temp);
    for (std::size_t row = 0; row < height; ++row)
        for (std::size_t col = 0; col < width; ++col) {
            const double x = col + 0.5, y = row + 0.5;
            const bool body = x >= sc.body.x_l && x < sc.body.x_r && y >= sc.body.y_d && y < sc.body.y_u;
            std::size_t g = 0;
            if (body) {
                const auto gc = std::min<std::size_t>(grid_cols - 1, static_cast<std::size_t>((x - sc.body.x_l) / sc.body.width() * grid_cols));
                const auto gr = std::min<std::size_t>(grid_rows - 1, static_cast<std::size_t>((y - sc.body.y_d) / sc.body.height() * grid_rows));
                g = gr * grid_cols + gc;
            }
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double base = body ? colour[g][ch] : bg_rgb[ch];
                sc.x_vis.at(row, col, ch) = std::clamp(base + jitter(rng, 0.02), 0.0, 1.0);
                sc.cover_vis.at(row, col, ch) = cover_rgb[ch];
            }
            sc.x_inf.at(row, col) = std::clamp((body ? temp[g] : bg_temp) + jitter(rng, 0.02), 0.0, 1.0);
        }
    return sc;
}

pf::Image warp_image(const pf::Image &src, const pf::Homography &h, const pf::Image &fill) {
    const pf::Homography inv = h.inverse();
    pf::Image out = fill;
    for (std::size_t row = 0; row < src.height(); ++row)
        for (std::size_t col = 0; col < src.width(); ++col) {
            const pf::Point2 s = pf::project(inv, {col + 0.5, row + 0.5});
            const double fx = std::floor(s.x), fy = std::floor(s.y);
            if (fx < 0 || fy < 0 || fx >= static_cast<double>(src.width()) || fy >= static_cast<double>(src.height())) continue;
            for (std::size_t ch = 0; ch < src.channels(); ++ch)
                out.at(row, col, ch) = src(static_cast<std::size_t>(fy), static_cast<std::size_t>(fx), ch);
        }
    return out;
}

/// A turn of the body about its vertical axis: horizontal foreshortening, a
/// little shear and a weak perspective term, all about the body centre.
pf::Homography view_homography(const pf::OuterBorder &body, double side, pf::Rng &rng) {
    const pf::Point2 c = body.center();
    const double sx = 0.85 + jitter(rng, 0.05);
    const double shear = side * (0.08 + jitter(rng, 0.03));
    const double persp = side * (4e-4 + jitter(rng, 1e-4));
    const pf::Homography core(pf::Homography::Matrix{{{sx, shear, 0}, {0, 1, 0}, {persp, 0, 1}}});
    return pf::Homography::translation(c.x, c.y) * core * pf::Homography::translation(-c.x, -c.y);
}

pf::OuterBorder warped_box(const pf::OuterBorder &b, const pf::Homography &h) {
    double xl = 1e9, xr = -1e9, yd = 1e9, yu = -1e9;
    for (const pf::Point2 p : {pf::Point2{b.x_l, b.y_d}, {b.x_r, b.y_d}, {b.x_l, b.y_u}, {b.x_r, b.y_u}}) {
        const auto q = pf::project(h, p);
        xl = std::min(xl, q.x), xr = std::max(xr, q.x), yd = std::min(yd, q.y), yu = std::max(yu, q.y);
    }
    return {xl, xr, yd, yu};
}

nlohmann::json write_view(const fs::path &dir, const std::string &name, const Scene &sc, const pf::Homography &h,
                          bool as_keypoints, const std::string &cover_prefix, pf::Rng &rng) {
    const pf::Image bg_vis(height, width, 3, 0.7), bg_inf(height, width, 1, 0.4);
    const pf::Image vis = warp_image(sc.x_vis, h, bg_vis);
    const pf::Image inf = warp_image(sc.x_inf, h, bg_inf);
    pf::write_image(dir / (name + "_x_vis.ppm"), vis);
    pf::write_image(dir / (name + "_x_inf.pgm"), inf);

    pf::SyntheticDetectorSpec spec = sc.spec;
    spec.body_box = warped_box(sc.body, h);
    for (auto *w : {&spec.weights_visible, &spec.weights_infrared}) {
        for (double &v : *w) v *= pf::uniform_real(rng, 0.5, 1.5);
        *w = normalized(*w);
    }
    pf::write_json_file(dir / (name + "_detector.json"), spec);

    nlohmann::json v{{"name", name},
                     {"x_vis", name + "_x_vis.ppm"},
                     {"x_inf", name + "_x_inf.pgm"},
                     {"cover_vis", cover_prefix + "cover_vis.ppm"},
                     {"cover_inf", cover_prefix + "cover_inf.pgm"},
                     {"synthetic", name + "_detector.json"}};
    if (!as_keypoints) {
        v["homography"] = pf::homography_to_json(h);
        return v;
    }
    // 33 body keypoints with small localisation noise; every fifth is a gross mismatch.
    std::vector<pf::PointPair> pairs;
    for (std::size_t k = 0; k < 33; ++k) {
        const pf::Point2 s{pf::uniform_real(rng, sc.body.x_l, sc.body.x_r), pf::uniform_real(rng, sc.body.y_d, sc.body.y_u)};
        pf::Point2 t = pf::project(h, s) + pf::Point2{jitter(rng, 0.3), jitter(rng, 0.3)};
        if (k % 5 == 4) t = {pf::uniform_real(rng, 0, width), pf::uniform_real(rng, 0, height)};
        pairs.push_back({s, t});
    }
    v["keypoint_pairs"] = pf::keypoint_pairs_to_json(pairs);
    return v;
}

/// Writes one scenario; cover images are shared through ../covers/ (the suite)
/// or stored alongside the manifest (a stand-alone scenario).
void write_scenario(const fs::path &dir, const std::string &name, const Scene &sc, bool with_views,
                    bool left_keypoints, pf::Rng &rng) {
    fs::create_directories(dir);
    pf::write_image(dir / "x_vis.ppm", sc.x_vis);
    pf::write_image(dir / "x_inf.pgm", sc.x_inf);
    const std::string cover_prefix = with_views ? "../covers/" : "";
    pf::write_image(dir / (cover_prefix + "cover_vis.ppm"), sc.cover_vis);
    pf::write_image(dir / (cover_prefix + "cover_inf.pgm"), sc.cover_inf);
    pf::write_json_file(dir / "detector.json", sc.spec);

    const pf::OuterBorder outer = sc.body.scaled(pf::default_border_scale);
    const pf::Point2 c = outer.center();
    const double dy = outer.height() / 4;
    nlohmann::json centers = nlohmann::json::array();
    for (double sy : {-1.0, 1.0}) {
        const double x = std::clamp(c.x + jitter(rng, 4), outer.x_l + 15.5, outer.x_r - 15.5);
        centers.push_back({x, c.y + sy * dy + jitter(rng, 4)});
    }

    nlohmann::json views = nlohmann::json::array();
    if (with_views) {
        views.push_back(write_view(dir, "left", sc, view_homography(sc.body, -1, rng), left_keypoints, cover_prefix, rng));
        views.push_back(write_view(dir, "right", sc, view_homography(sc.body, 1, rng), false, cover_prefix, rng));
    }

    nlohmann::json manifest{{"name", name},
                            {"x_vis", "x_vis.ppm"},
                            {"x_inf", "x_inf.pgm"},
                            {"cover_vis", cover_prefix + "cover_vis.ppm"},
                            {"cover_inf", cover_prefix + "cover_inf.pgm"},
                            {"body_box", sc.body},
                            {"border_scale", pf::default_border_scale},
                            {"thre", pf::default_thre},
                            {"patch_centers", centers},
                            {"oracle", {{"synthetic", "detector.json"}}},
                            {"views", views}};
    pf::write_json_file(dir / "manifest.json", manifest);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Generate the synthetic scenario suite"};
    std::string out = "data/synthetic";
    std::size_t count = 20;
    std::uint64_t seed = 2024;
    app.add_option("--out", out, "output directory");
    app.add_option("--count", count, "number of scenarios");
    app.add_option("--seed", seed, "generator seed");
    std::string front_basic;
    app.add_option("--front-basic", front_basic, "also write a single frontal scenario into this directory");
    CLI11_PARSE(app, argc, argv);

    pf::Rng rng(seed);
    const fs::path root(out);
    const fs::path covers = root / "covers";
    fs::create_directories(covers);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string name = "scene_" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        write_scenario(root / name, name, make_scene(rng), true, i % 2 == 1, rng);
    }
    if (!front_basic.empty()) write_scenario(front_basic, "front-basic", make_scene(rng), false, false, rng);
    std::cout << "wrote " << count << " scenarios to " << out << '\n';
}
