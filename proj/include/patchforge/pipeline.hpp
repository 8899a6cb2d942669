#ifndef PATCHFORGE_PIPELINE_HPP
#define PATCHFORGE_PIPELINE_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ablation.hpp"
#include "evolve.hpp"
#include "image_io.hpp"
#include "scenario_io.hpp"

namespace patchforge {

inline void to_json(nlohmann::json &j, const DEConfig &c) {
    nlohmann::json centers = nlohmann::json::array();
    for (const auto &p : c.initial_centers) centers.push_back({p.x, p.y});
    j = {{"population", c.population_q},
         {"generations", c.max_generations_t},
         {"beta", c.beta},
         {"crossover_rate", c.crossover_rate},
         {"lambda", c.lambda},
         {"thre", c.thre},
         {"anchors", c.n},
         {"radius", c.radius_r},
         {"inner_radius", c.inner_radius},
         {"patches", c.patch_count_k},
         {"initial_centers", std::move(centers)},
         {"position", c.include_position},
         {"multi_angle", c.multi_angle},
         {"seed", c.rng_seed},
         {"fitness", to_string(c.fitness_mode)},
         {"samples_per_segment", c.samples_per_segment},
         {"eval_threads", c.eval_threads}};
}

/// K centers stacked vertically through the middle of the border, used when a
/// manifest names none.
inline std::vector<Point2> default_patch_centers(const OuterBorder &outer, std::size_t k) {
    std::vector<Point2> out;
    const double step = outer.height() / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i)
        out.push_back({outer.center().x, outer.y_d + (static_cast<double>(i) + 0.5) * step});
    return out;
}

struct RunOptions {
    DEConfig de;                       // initial_centers may be left empty
    BasicShape shape = BasicShape::optimized;
};

struct ScenarioRun {
    DEConfig config;                   // as actually used
    BasicShape shape = BasicShape::optimized;
    AttackResult attack;
    Mask mask;                         // the optimized or the area-matched basic mask
    FitnessReport report;              // of `mask`
    bool success = false;
    /// Success on the frontal view and every angled view; empty without views.
    std::optional<bool> all_views_success;
    std::vector<AdversarialImage> adversarial;
};

/// Takes thre from the scenario and, unless given, the initial centers: the
/// manifest's when it names exactly K of them, otherwise the default stack.
inline DEConfig resolve_config(const Scenario &s, DEConfig de) {
    de.thre = s.thre;
    if (de.initial_centers.empty())
        de.initial_centers = s.patch_centers.size() == de.patch_count_k ? s.patch_centers
                                                                        : default_patch_centers(s.outer, de.patch_count_k);
    return de;
}

inline ScenarioRun run_scenario(const LoadedScenario &loaded, const RunOptions &opts) {
    const Scenario &s = loaded.scenario;
    ScenarioRun run;
    run.config = resolve_config(s, opts.de);
    run.shape = opts.shape;
    run.attack = run_attack(s, run.config, loaded.oracles);
    const FitnessParams params = run.config.fitness();
    if (opts.shape == BasicShape::optimized) {
        run.mask = run.attack.best_mask;
        run.report = run.attack.best_report;
        run.adversarial = run.attack.adversarial;
    } else {
        run.mask = area_matched_shape(opts.shape, run.attack.best_genome, run.config.shape(), s.height(), s.width(),
                                      s.outer)
                       .mask;
        run.report = evaluate_mask(run.mask, s, loaded.oracles, params);
        run.adversarial = compose_adversarial(run.mask, s, run.config.multi_angle);
    }
    run.success = is_success(run.report, s.thre);
    if (run.config.multi_angle) {
        if (!s.views.empty()) run.all_views_success = run.success;
    } else if (!s.views.empty()) {
        FitnessParams all = params;
        all.multi_angle = true;
        run.all_views_success = is_success(evaluate_mask(run.mask, s, loaded.oracles, all), s.thre);
    }
    return run;
}

inline nlohmann::json run_to_json(const ScenarioRun &run, const LoadedScenario &loaded) {
    nlohmann::json j = result_to_json(run.attack);
    j["scenario"] = loaded.scenario.name;
    j["manifest"] = loaded.manifest_path.string();
    j["shape"] = to_string(run.shape);
    j["final_success"] = run.success;
    j["final_report"] = run.report;
    j["final_mask_pixels"] = run.mask.count();
    j["all_views_success"] = run.all_views_success ? nlohmann::json(*run.all_views_success) : nlohmann::json(nullptr);
    return j;
}

inline std::string history_csv(const AttackResult &r) {
    std::string out = "generation,best_j,best_dmin,queries\n";
    char line[128];
    for (const auto &h : r.history) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%zu\n", h.generation, h.best_j, h.best_dmin, h.queries);
        out += line;
    }
    return out;
}

/// Writes the mask, adversarial images, genome, result, history and resolved
/// configuration of one run into `dir`.
inline nlohmann::json write_run_artifacts(const std::filesystem::path &dir, const ScenarioRun &run,
                                          const LoadedScenario &loaded) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json artifacts;
    write_mask(dir / "mask.pgm", run.mask);
    artifacts["mask"] = "mask.pgm";
    for (const auto &adv : run.adversarial) {
        const std::string file = "adv_" + adv.view + "_" + std::string(to_string(adv.modality)) +
                                 (adv.image.channels() == 3 ? ".ppm" : ".pgm");
        write_image(dir / file, adv.image);
        artifacts["adversarial"].push_back(file);
    }
    write_json_file(dir / "genome.json", run.attack.best_genome);
    artifacts["genome"] = "genome.json";
    {
        std::ofstream csv(dir / "history.csv");
        csv << history_csv(run.attack);
    }
    artifacts["history"] = "history.csv";
    nlohmann::json config = run.config;
    config["shape"] = to_string(run.shape);
    config["oracle"] = loaded.oracle_description;
    config["manifest"] = loaded.manifest_path.string();
    config["view_count"] = loaded.scenario.views.size();
    write_json_file(dir / "config.json", config);
    artifacts["config"] = "config.json";

    nlohmann::json result = run_to_json(run, loaded);
    result["artifacts"] = artifacts;
    write_json_file(dir / "result.json", result);
    return result;
}

} // namespace patchforge

#endif
