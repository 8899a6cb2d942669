#ifndef PATCHFORGE_EVOLVE_HPP
#define PATCHFORGE_EVOLVE_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "fitness.hpp"
#include "genome.hpp"
#include "random.hpp"

namespace patchforge {

struct DEConfig {
    std::size_t population_q = 30;
    std::size_t max_generations_t = 200;
    double beta = 0.6;
    double crossover_rate = 0.9;
    double lambda = default_lambda;
    double thre = default_thre;
    std::size_t n = 8;
    double radius_r = 15.0;
    double inner_radius = 4.5;
    std::size_t patch_count_k = 2;
    std::vector<Point2> initial_centers;
    bool include_position = false;
    bool multi_angle = false;
    std::uint64_t rng_seed = 0;
    FitnessMode fitness_mode = FitnessMode::score_aware;
    std::size_t samples_per_segment = default_samples_per_segment;
    std::size_t eval_threads = 1;

    ShapeParams shape() const { return {radius_r, inner_radius, n, samples_per_segment, 0.0}; }
    FitnessParams fitness() const { return {lambda, thre, multi_angle, fitness_mode}; }

    void validate() const {
        if (population_q < 1) throw InvalidConfig("population must be >= 1");
        if (!(beta > 0)) throw InvalidConfig("beta must be positive");
        if (!(crossover_rate >= 0 && crossover_rate <= 1)) throw InvalidConfig("crossover rate must lie in [0, 1]");
        if (!(lambda > 0)) throw InvalidConfig("lambda must be positive");
        if (initial_centers.size() != patch_count_k)
            throw InvalidConfig("need exactly " + std::to_string(patch_count_k) + " initial centers, got " +
                                std::to_string(initial_centers.size()));
    }
};

/// Image rectangle used by the clip step of the mutation.
struct ImageBounds {
    double width = 0.0;
    double height = 0.0;

    Point2 clamp(const Point2 &p) const noexcept { return {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height)}; }
};

// ---------------------------------------------------------------------------
// Genome <-> flat coordinate vector: centers first (position mode), then anchors.

inline std::vector<double> flatten(const PatchGenome &g) {
    std::vector<double> v;
    if (g.include_position)
        for (const auto &b : g.patches) {
            v.push_back(b.center.x);
            v.push_back(b.center.y);
        }
    for (const auto &b : g.patches)
        for (const auto &a : b.anchors) {
            v.push_back(a.x);
            v.push_back(a.y);
        }
    return v;
}

/// Inverse of flatten; `like` supplies block/anchor counts and the fixed centers.
inline PatchGenome unflatten(std::span<const double> v, const PatchGenome &like) {
    PatchGenome g = like;
    std::size_t k = 0;
    if (g.include_position)
        for (auto &b : g.patches) {
            b.center = {v[k], v[k + 1]};
            k += 2;
        }
    for (auto &b : g.patches)
        for (auto &a : b.anchors) {
            a = {v[k], v[k + 1]};
            k += 2;
        }
    return g;
}

// ---------------------------------------------------------------------------

/// Individual 0 is the pure circle genome; the rest get every anchor drawn
/// uniformly from (sector j) x (disk of radius r), and in position mode a center
/// jittered by up to r/2 per axis.
inline std::vector<PatchGenome> init_population(const DEConfig &config, const OuterBorder &outer, Rng &rng) {
    config.validate();
    const ShapeParams shape = config.shape();
    const PatchGenome circle = circle_genome(config.initial_centers, shape, outer, config.include_position);
    std::vector<PatchGenome> pop;
    pop.reserve(config.population_q);
    pop.push_back(circle);
    const double r = config.radius_r;
    for (std::size_t i = 1; i < config.population_q; ++i) {
        PatchGenome g = circle;
        for (auto &block : g.patches) {
            if (config.include_position) {
                for (int attempt = 0; attempt < 100; ++attempt) {
                    const Point2 c = block.center + Point2{uniform_real(rng, -r / 2, r / 2), uniform_real(rng, -r / 2, r / 2)};
                    if (layout_fits(c, r, outer)) {
                        block.center = c;
                        break;
                    }
                }
            }
            const AnchorLayout layout = layout_for(block, shape, outer);
            for (std::size_t j = 0; j < shape.n; ++j) {
                block.anchors[j] = layout.initial_anchors[j] - block.center;
                for (int attempt = 0; attempt < 100; ++attempt) {
                    const Point2 off{uniform_real(rng, -r, r), uniform_real(rng, -r, r)};
                    if (off.norm2() <= r * r && is_feasible(block.center + off, layout, j)) {
                        block.anchors[j] = off;
                        break;
                    }
                }
            }
        }
        pop.push_back(std::move(g));
    }
    return pop;
}

/// DE/rand/1/bin: donor = clip(S_g3 + beta (S_g1 - S_g2)) with g1, g2, g3 distinct
/// and != target, then binomial crossover with one coordinate forced from the donor.
inline PatchGenome mutate_crossover(std::span<const PatchGenome> population, std::size_t target,
                                    const DEConfig &config, const ImageBounds &bounds, Rng &rng) {
    const std::size_t q = population.size();
    if (q < 4) throw InvalidConfig("mutation needs a population of at least 4");
    std::size_t pick[3];
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t c;
        do {
            c = uniform_index(rng, q);
        } while (c == target || std::find(pick, pick + k, c) != pick + k);
        pick[k] = c;
    }

    const auto x1 = flatten(population[pick[0]]);
    const auto x2 = flatten(population[pick[1]]);
    const auto x3 = flatten(population[pick[2]]);
    std::vector<double> donor(x3.size());
    for (std::size_t d = 0; d < donor.size(); ++d) donor[d] = x3[d] + config.beta * (x1[d] - x2[d]);

    // clip: centers to the image, anchors so that their absolute position stays in it.
    PatchGenome dg = unflatten(donor, population[target]);
    for (auto &b : dg.patches) {
        if (dg.include_position) b.center = bounds.clamp(b.center);
        for (auto &a : b.anchors) a = bounds.clamp(b.center + a) - b.center;
    }
    donor = flatten(dg);

    auto trial = flatten(population[target]);
    const std::size_t forced = uniform_index(rng, trial.size());
    for (std::size_t d = 0; d < trial.size(); ++d)
        if (d == forced || uniform01(rng) < config.crossover_rate) trial[d] = donor[d];
    return unflatten(trial, population[target]);
}

/// Gene-wise repair toward a feasible parent: an invalid center reverts to the
/// parent's, then each infeasible anchor reverts to the parent's offset. If a
/// reverted anchor is still outside the border under the new center, the whole
/// block reverts.
inline PatchGenome enforce_feasibility(PatchGenome candidate, const PatchGenome &parent, const ShapeParams &shape,
                                       const OuterBorder &outer) {
    for (std::size_t b = 0; b < candidate.patches.size(); ++b) {
        auto &block = candidate.patches[b];
        const auto &pblock = parent.patches[b];
        if (!layout_fits(block.center, shape.radius_r, outer)) block.center = pblock.center;
        const AnchorLayout layout = layout_for(block, shape, outer);
        bool intact = true;
        for (std::size_t j = 0; j < shape.n && intact; ++j) {
            if (is_feasible(block.anchor(j), layout, j)) continue;
            block.anchors[j] = pblock.anchors[j];
            intact = is_feasible(block.anchor(j), layout, j);
        }
        if (!intact) block = pblock;
    }
    return candidate;
}

/// True when the child replaces the parent; ties keep the parent.
inline bool select_child(const FitnessReport &parent, const FitnessReport &child) {
    return child.objective() > parent.objective();
}

struct GenerationRecord {
    std::size_t generation = 0;
    double best_objective = 0.0; // what selection compares: j, or the dis sum
    double best_j = 0.0;
    double best_dmin = 0.0;
    std::size_t queries = 0;     // cumulative oracle queries
};

struct AdversarialImage {
    std::string view;   // "frontal" or the view's name
    Modality modality = Modality::visible;
    Image image;
};

/// Multiplier on Q giving the oracle calls of one population evaluation.
inline std::size_t queries_per_individual(const Scenario &s, bool multi_angle) noexcept {
    return 2 * (1 + (multi_angle ? s.views.size() : 0));
}

struct AttackResult {
    bool success = false;
    std::size_t stop_generation = 0;
    PatchGenome best_genome;
    FitnessReport best_report;
    std::vector<GenerationRecord> history;
    std::size_t oracle_queries = 0;
    Mask best_mask;
    std::vector<AdversarialImage> adversarial;
};

/// Optional hooks into the generation loop.
struct RunObserver {
    /// Called with every population after feasibility enforcement (generation 0 = initial).
    std::function<void(std::size_t generation, std::span<const PatchGenome>)> on_population;
};

namespace detail {

inline std::vector<FitnessReport> evaluate_all(std::span<const PatchGenome> genomes, const ShapeParams &shape,
                                               const Scenario &s, const OracleBank &oracles,
                                               const FitnessParams &params, std::size_t threads) {
    std::vector<FitnessReport> out(genomes.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < genomes.size(); i += stride) out[i] = evaluate(genomes[i], shape, s, oracles, params);
    };
    if (threads <= 1 || genomes.size() < 2) {
        work(0, 1);
        return out;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                work(t, threads);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    pool.clear();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace detail

/// Adversarial images for every evaluated view/modality under `mask`.
inline std::vector<AdversarialImage> compose_adversarial(const Mask &mask, const Scenario &s, bool with_views) {
    std::vector<AdversarialImage> out;
    out.push_back({"frontal", Modality::visible, apply_patch(s.x_vis, s.cover_vis, mask)});
    out.push_back({"frontal", Modality::infrared, apply_patch(s.x_inf, s.cover_inf, mask)});
    if (with_views)
        for (const auto &v : s.views) {
            const Mask warped = warp_mask(mask, v.h);
            out.push_back({v.name, Modality::visible, apply_patch(v.x_vis, v.cover_vis, warped)});
            out.push_back({v.name, Modality::infrared, apply_patch(v.x_inf, v.cover_inf, warped)});
        }
    return out;
}

/// The full attack loop: evaluate, sort, early-stop on success, breed, repair,
/// evaluate children, keep the better of each parent/child pair.
inline AttackResult run_attack(const Scenario &scenario, const DEConfig &config, const OracleBank &oracles,
                               const RunObserver &observer = {}) {
    config.validate();
    if (config.max_generations_t > 0 && config.population_q < 4)
        throw InvalidConfig("population must be >= 4 to evolve");
    check_not_degenerate(scenario, config.thre, config.multi_angle);

    const ShapeParams shape = config.shape();
    const FitnessParams fparams = config.fitness();
    const ImageBounds bounds{static_cast<double>(scenario.width()), static_cast<double>(scenario.height())};
    const std::size_t per_eval = queries_per_individual(scenario, config.multi_angle);

    Rng rng(config.rng_seed);
    std::vector<PatchGenome> pop = init_population(config, scenario.outer, rng);
    if (observer.on_population) observer.on_population(0, pop);
    std::vector<FitnessReport> reports =
        detail::evaluate_all(pop, shape, scenario, oracles, fparams, config.eval_threads);

    AttackResult result;
    result.oracle_queries = pop.size() * per_eval;

    auto sort_population = [&] {
        std::vector<std::size_t> order(pop.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return reports[a].objective() > reports[b].objective();
        });
        std::vector<PatchGenome> p;
        std::vector<FitnessReport> r;
        p.reserve(pop.size());
        r.reserve(pop.size());
        for (auto i : order) {
            p.push_back(std::move(pop[i]));
            r.push_back(std::move(reports[i]));
        }
        pop = std::move(p);
        reports = std::move(r);
    };
    auto record = [&](std::size_t generation) {
        result.history.push_back(
            {generation, reports[0].objective(), reports[0].j, reports[0].d_min, result.oracle_queries});
    };

    std::size_t generation = 0;
    bool stopped_early = false;
    for (; generation < config.max_generations_t; ++generation) {
        sort_population();
        record(generation);
        if (is_success(reports[0], config.thre)) {
            stopped_early = true;
            break;
        }
        std::vector<PatchGenome> children;
        children.reserve(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i)
            children.push_back(
                enforce_feasibility(mutate_crossover(pop, i, config, bounds, rng), pop[i], shape, scenario.outer));
        const auto child_reports =
            detail::evaluate_all(children, shape, scenario, oracles, fparams, config.eval_threads);
        result.oracle_queries += children.size() * per_eval;
        for (std::size_t i = 0; i < pop.size(); ++i)
            if (select_child(reports[i], child_reports[i])) {
                pop[i] = std::move(children[i]);
                reports[i] = child_reports[i];
            }
        if (observer.on_population) observer.on_population(generation + 1, pop);
    }
    if (!stopped_early) {
        sort_population();
        record(generation);
    }

    result.stop_generation = generation;
    result.best_genome = pop[0];
    result.best_report = reports[0];
    result.success = is_success(reports[0], config.thre);
    result.best_mask = genome_to_mask(result.best_genome, shape, scenario.height(), scenario.width(), scenario.outer);
    result.adversarial = compose_adversarial(result.best_mask, scenario, config.multi_angle);
    return result;
}

} // namespace patchforge

#endif
