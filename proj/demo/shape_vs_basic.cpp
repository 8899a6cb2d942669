// Runs the attack on one scenario and scores the area-matched basic shapes
// against the same oracle.
//
//   shape_vs_basic [manifest.json] [seed]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "patchforge/patchforge.hpp"

namespace pf = patchforge;

int main(int argc, char **argv) {
    const std::string manifest = argc > 1 ? argv[1] : PATCHFORGE_DEMO_MANIFEST;
    pf::RunOptions opts;
    opts.de.rng_seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;

    try {
        const auto loaded = pf::load_scenario(manifest);
        const pf::Scenario &s = loaded.scenario;
        const auto run = pf::run_scenario(loaded, opts);

        std::printf("%s: clean %.3f / %.3f, thre %.2f\n", s.name.c_str(), s.clean_score_vis, s.clean_score_inf, s.thre);
        for (const auto &h : run.attack.history)
            std::printf("  gen %3zu  j %8.4f  d_min %7.4f  queries %6zu\n", h.generation, h.best_j, h.best_dmin, h.queries);
        std::printf("optimized  %-9s pixels %5zu  d_min %.3f\n", run.success ? "success" : "exhausted", run.mask.count(),
                    run.report.d_min);

        for (auto shape : {pf::BasicShape::circle, pf::BasicShape::square, pf::BasicShape::rect12,
                           pf::BasicShape::rect21, pf::BasicShape::triangle}) {
            const auto basic = pf::area_matched_shape(shape, run.attack.best_genome, run.config.shape(), s.height(),
                                                      s.width(), s.outer);
            const auto rep = pf::evaluate_mask(basic.mask, s, loaded.oracles, run.config.fitness());
            std::printf("%-10s %-9s pixels %5zu  d_min %.3f\n", pf::to_string(shape),
                        pf::is_success(rep, s.thre) ? "success" : "fails", basic.mask.count(), rep.d_min);
        }
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
