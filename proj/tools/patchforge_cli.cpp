// patchforge: evolve cross-modal adversarial patch shapes against a detector oracle.
//
// Exit codes: 0 success, 1 input/usage error, 2 estimation failure,
// 3 attack exhausted, 4 oracle unavailable.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "patchforge/patchforge.hpp"

namespace pf = patchforge;
namespace fs = std::filesystem;

namespace {

enum Exit : int { exit_ok = 0, exit_input = 1, exit_estimation = 2, exit_exhausted = 3, exit_oracle = 4 };

struct Common {
    pf::DEConfig de;
    std::string fitness = "score-aware";
    std::string shape = "optimized";
    std::optional<double> thre;
    std::string oracle;
    double border_scale = pf::default_border_scale;
    double timeout = pf::default_oracle_timeout;
    std::string out = "patchforge_out";
};

void add_run_flags(CLI::App &cmd, Common &c) {
    c.de.rng_seed = 7;
    cmd.add_option("--seed", c.de.rng_seed, "random seed (batches add the scenario index)")->capture_default_str();
    cmd.add_option("--lambda", c.de.lambda, "fitness weight factor")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--beta", c.de.beta, "differential weight")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--cr", c.de.crossover_rate, "crossover rate")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--pop", c.de.population_q, "population size")->capture_default_str();
    cmd.add_option("--gens", c.de.max_generations_t, "maximum generations")->capture_default_str();
    cmd.add_option("--radius", c.de.radius_r, "initial circle radius r in pixels")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--inner-radius", c.de.inner_radius, "inner circle radius (default 0.3 r)");
    cmd.add_option("--anchors", c.de.n, "anchor points per patch")->capture_default_str();
    cmd.add_option("--patches", c.de.patch_count_k, "patch count K")->capture_default_str();
    cmd.add_option("--thre", c.thre, "detection threshold (default: the manifest's, else 0.7)");
    cmd.add_flag("--position", c.de.include_position, "optimize patch positions as well");
    cmd.add_flag("--multi-angle", c.de.multi_angle, "include every angled view in the fitness");
    cmd.add_option("--fitness", c.fitness, "score-aware or direct-sum")
        ->capture_default_str()
        ->check(CLI::IsMember({"score-aware", "direct-sum"}));
    cmd.add_option("--shape", c.shape, "optimized, circle, square, rect12, rect21 or triangle")
        ->capture_default_str()
        ->check(CLI::IsMember({"optimized", "circle", "square", "rect12", "rect21", "triangle"}));
    cmd.add_option("--oracle", c.oracle, "external detector endpoint, tcp:HOST:PORT or exec:COMMAND");
    cmd.add_option("--border-scale", c.border_scale, "scale from body box to outer border")->capture_default_str();
    cmd.add_option("--timeout", c.timeout, "external oracle timeout in seconds")->capture_default_str();
    cmd.add_option("--eval-threads", c.de.eval_threads, "concurrent fitness evaluations")->capture_default_str();
    cmd.add_option("--out", c.out, "output directory")->capture_default_str();
}

pf::RunOptions run_options(const Common &c, bool inner_radius_given) {
    pf::RunOptions o;
    o.de = c.de;
    if (!inner_radius_given) o.de.inner_radius = 0.3 * o.de.radius_r;
    o.de.fitness_mode = pf::parse_fitness_mode(c.fitness);
    o.shape = pf::parse_basic_shape(c.shape);
    return o;
}

pf::LoadOptions load_options(const Common &c) {
    pf::LoadOptions o;
    o.oracle_override = c.oracle;
    o.border_scale = c.border_scale;
    o.thre = c.thre;
    o.oracle_timeout = c.timeout;
    return o;
}

void print_run(const pf::ScenarioRun &run, const std::string &name) {
    std::cout << name << ": " << (run.success ? "success" : "exhausted") << " at generation "
              << run.attack.stop_generation << ", j=" << run.report.j << ", d_min=" << run.report.d_min
              << ", queries=" << run.attack.oracle_queries << ", mask pixels=" << run.mask.count() << '\n';
}

int cmd_attack(const std::string &manifest, const Common &c, bool inner_given) {
    const auto loaded = pf::load_scenario(manifest, load_options(c));
    const auto run = pf::run_scenario(loaded, run_options(c, inner_given));
    pf::write_run_artifacts(c.out, run, loaded);
    print_run(run, loaded.scenario.name);
    return run.success ? exit_ok : exit_exhausted;
}

std::vector<fs::path> find_manifests(const fs::path &dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) throw pf::ParseError(dir.string() + " is not a directory");
    if (fs::exists(dir / "manifest.json")) out.push_back(dir / "manifest.json");
    for (const auto &e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path() / "manifest.json");
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_batch(const std::string &dir, const Common &c, bool inner_given, std::size_t jobs) {
    const auto manifests = find_manifests(dir);
    if (manifests.empty()) throw pf::EmptyBatch("no manifest.json found under " + dir);
    const pf::RunOptions base = run_options(c, inner_given);
    const pf::LoadOptions lopts = load_options(c);

    pf::BatchReport report;
    report.scenarios.resize(manifests.size());
    std::vector<std::optional<bool>> all_views(manifests.size());
    std::vector<std::exception_ptr> errors(manifests.size());
    std::atomic<std::size_t> next{0};
    std::mutex print;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < manifests.size();) {
            try {
                const auto loaded = pf::load_scenario(manifests[i], lopts);
                pf::RunOptions o = base;
                o.de.rng_seed = base.de.rng_seed + i;
                const auto run = pf::run_scenario(loaded, o);
                pf::write_run_artifacts(fs::path(c.out) / loaded.scenario.name, run, loaded);
                report.scenarios[i] = {loaded.scenario.name, manifests[i].string(), o.de.rng_seed, run.success,
                                       run.attack.stop_generation, run.report.j, run.report.d_min,
                                       run.attack.oracle_queries};
                all_views[i] = run.all_views_success;
                std::lock_guard lock(print);
                print_run(run, loaded.scenario.name);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::max<std::size_t>(1, jobs); ++t) pool.emplace_back(worker);
    }
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);

    report.asr = pf::compute_asr(std::span<const pf::ScenarioSummary>(report.scenarios));
    nlohmann::json j = report;
    std::size_t with_views = 0, views_ok = 0;
    for (std::size_t i = 0; i < all_views.size(); ++i) {
        j["scenarios"][i]["all_views_success"] = all_views[i] ? nlohmann::json(*all_views[i]) : nlohmann::json(nullptr);
        if (all_views[i]) {
            ++with_views;
            views_ok += *all_views[i] ? 1 : 0;
        }
    }
    j["all_views_asr"] = with_views ? nlohmann::json(static_cast<double>(views_ok) / static_cast<double>(with_views))
                                    : nlohmann::json(nullptr);
    nlohmann::json config = base.de;
    config["shape"] = c.shape;
    config["base_seed"] = base.de.rng_seed;
    config.erase("seed");
    config.erase("initial_centers");
    config.erase("thre");
    j["config"] = config;
    fs::create_directories(c.out);
    pf::write_json_file(fs::path(c.out) / "batch_report.json", j);
    std::cout << "ASR " << report.asr << " (" << manifests.size() << " scenarios)\n";
    return exit_ok;
}

struct RasterizeArgs {
    std::string genome;
    std::string manifest;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> outer;
    double radius = 15.0;
    std::optional<double> inner_radius;
    std::size_t anchors = 8;
    std::size_t samples = pf::default_samples_per_segment;
    std::string out = "mask.pgm";
    std::optional<double> mm_per_pixel;
    double print_dpi = 300.0;
};

int cmd_rasterize(const RasterizeArgs &a, double border_scale) {
    const auto genome = pf::read_json_file(a.genome).get<pf::PatchGenome>();
    std::size_t h = a.height, w = a.width;
    pf::OuterBorder outer;
    if (!a.manifest.empty()) {
        const auto m = pf::read_json_file(a.manifest);
        const fs::path base = fs::path(a.manifest).parent_path();
        const auto img = pf::read_image(base / m.at("x_vis").get<std::string>());
        h = img.height();
        w = img.width();
        outer = m.contains("outer") ? m.at("outer").get<pf::OuterBorder>()
                                    : m.at("body_box").get<pf::OuterBorder>().scaled(m.value("border_scale", border_scale));
    }
    if (!a.outer.empty()) {
        if (a.outer.size() != 4) throw pf::ParseError("--outer takes x_l x_r y_d y_u");
        outer = {a.outer[0], a.outer[1], a.outer[2], a.outer[3]};
    }
    if (h == 0 || w == 0) throw pf::ParseError("image size unknown: pass --manifest or --width and --height");
    if (!outer.valid()) outer = {0, static_cast<double>(w), 0, static_cast<double>(h)};

    pf::ShapeParams shape{a.radius, a.inner_radius.value_or(0.3 * a.radius), a.anchors, a.samples, 0.0};
    if (!pf::is_feasible(genome, shape, outer)) throw pf::InfeasibleGenome("genome violates its feasible regions");
    const pf::Mask mask = pf::genome_to_mask(genome, shape, h, w, outer);
    pf::write_mask(a.out, mask);
    std::cout << "wrote " << a.out << " (" << mask.count() << " pixels)\n";
    if (a.mm_per_pixel) {
        const double factor = *a.mm_per_pixel * a.print_dpi / 25.4;
        const auto k = static_cast<std::size_t>(std::max(1.0, std::round(factor)));
        const fs::path p(a.out);
        const fs::path tpl = p.parent_path() / (p.stem().string() + "_print.pgm");
        pf::write_mask(tpl, pf::upscale_mask(mask, k));
        std::cout << "wrote " << tpl.string() << " (print template, " << k << "x at " << a.print_dpi << " dpi)\n";
    }
    return exit_ok;
}

int cmd_estimate_h(const std::string &path, double thre, std::size_t iters, std::uint64_t seed) {
    const auto j = pf::read_json_file(path);
    const auto pairs = pf::keypoint_pairs_from_json(j.is_object() ? j.at("keypoint_pairs") : j);
    if (pairs.size() < 4) throw pf::ParseError("need at least 4 keypoint pairs, got " + std::to_string(pairs.size()));
    const auto r = pf::ransac_estimate(pairs, thre, iters, seed);
    std::vector<pf::PointPair> inliers;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (r.inlier_mask[i]) inliers.push_back(pairs[i]);
    const pf::Homography h = pf::refine(r.h, inliers);
    nlohmann::json out{{"homography", pf::homography_to_json(h)},
                       {"inliers", r.inlier_count},
                       {"total", pairs.size()},
                       {"inlier_rms", pf::inlier_rms(h, inliers)},
                       {"inlier_mask", r.inlier_mask}};
    std::cout << out.dump(2) << '\n';
    return exit_ok;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Evolve cross-modal adversarial patch shapes against a detector oracle"};
    app.require_subcommand(1);

    Common attack_c, batch_c;
    std::string manifest, batch_dir;
    auto *attack = app.add_subcommand("attack", "run one attack on a scenario manifest");
    attack->add_option("manifest", manifest, "scenario manifest.json")->required();
    add_run_flags(*attack, attack_c);

    std::size_t jobs = 1;
    auto *batch = app.add_subcommand("batch", "attack every scenario under a directory and report ASR");
    batch->add_option("dir", batch_dir, "directory holding */manifest.json")->required();
    batch->add_option("--jobs", jobs, "scenarios run in parallel")->capture_default_str();
    add_run_flags(*batch, batch_c);

    RasterizeArgs ra;
    double ra_border = pf::default_border_scale;
    auto *raster = app.add_subcommand("rasterize", "turn a genome JSON into a PGM mask");
    raster->add_option("genome", ra.genome, "genome JSON")->required();
    raster->add_option("--manifest", ra.manifest, "take image size and outer border from a manifest");
    raster->add_option("--width", ra.width, "image width");
    raster->add_option("--height", ra.height, "image height");
    raster->add_option("--outer", ra.outer, "outer border x_l x_r y_d y_u")->expected(4);
    raster->add_option("--border-scale", ra_border, "scale from body box to outer border")->capture_default_str();
    raster->add_option("--radius", ra.radius, "initial circle radius r")->capture_default_str();
    raster->add_option("--inner-radius", ra.inner_radius, "inner circle radius (default 0.3 r)");
    raster->add_option("--anchors", ra.anchors, "anchor points per patch")->capture_default_str();
    raster->add_option("--samples", ra.samples, "spline samples per segment")->capture_default_str();
    raster->add_option("--out", ra.out, "output PGM")->capture_default_str();
    raster->add_option("--mm-per-pixel", ra.mm_per_pixel, "physical size of one mask pixel; emits a print template");
    raster->add_option("--print-dpi", ra.print_dpi, "printer resolution for the template")->capture_default_str();

    std::string kp_path;
    double ransac_thre = pf::default_ransac_threshold;
    std::size_t ransac_iters = pf::default_ransac_iterations;
    std::uint64_t ransac_seed = 0;
    auto *est = app.add_subcommand("estimate-h", "estimate a homography from keypoint pairs");
    est->add_option("keypoints", kp_path, "JSON list of [sx, sy, tx, ty] or {\"keypoint_pairs\": [...]}")->required();
    est->add_option("--ransac-thre", ransac_thre, "inlier threshold in pixels")->capture_default_str();
    est->add_option("--iters", ransac_iters, "RANSAC iterations")->capture_default_str();
    est->add_option("--seed", ransac_seed, "RANSAC seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return exit_input;
    }

    try {
        if (*attack) return cmd_attack(manifest, attack_c, attack->count("--inner-radius") > 0);
        if (*batch) return cmd_batch(batch_dir, batch_c, batch->count("--inner-radius") > 0, jobs);
        if (*raster) return cmd_rasterize(ra, ra_border);
        if (*est) return cmd_estimate_h(kp_path, ransac_thre, ransac_iters, ransac_seed);
    } catch (const pf::InsufficientInliers &e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return exit_estimation;
    } catch (const pf::DegenerateConfiguration &e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return exit_estimation;
    } catch (const pf::OracleUnavailable &e) {
        std::cerr << "oracle unavailable: " << e.what() << '\n';
        return exit_oracle;
    } catch (const pf::MalformedResponse &e) {
        std::cerr << "oracle unavailable: malformed response: " << e.what() << '\n';
        return exit_oracle;
    } catch (const pf::ParseError &e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return exit_input;
    } catch (const pf::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const nlohmann::json::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    }
    return exit_input;
}
