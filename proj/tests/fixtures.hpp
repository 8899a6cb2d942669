#ifndef PATCHFORGE_TEST_FIXTURES_HPP
#define PATCHFORGE_TEST_FIXTURES_HPP

#include <memory>
#include <vector>

#include "patchforge/patchforge.hpp"

namespace patchforge::testing {

/// Flat 60x60 scene whose body box is a 2x2 grid; covers differ from the body by
/// more than the change threshold everywhere.
inline Scenario flat_scenario(std::size_t size = 60) {
    Scenario s;
    s.name = "flat";
    s.x_vis = Image(size, size, 3, 0.6);
    s.x_inf = Image(size, size, 1, 0.9);
    s.cover_vis = Image(size, size, 3, 0.1);
    s.cover_inf = Image(size, size, 1, 0.2);
    const double m = static_cast<double>(size) / 6;
    s.outer = {m, size - m, m, size - m};
    return s;
}

inline SyntheticDetectorSpec grid_spec(const OuterBorder &box, std::vector<double> vis, std::vector<double> inf,
                                       std::size_t rows = 2, std::size_t cols = 2) {
    SyntheticDetectorSpec spec;
    spec.body_box = box;
    spec.grid_rows = rows;
    spec.grid_cols = cols;
    spec.weights_visible = std::move(vis);
    spec.weights_infrared = std::move(inf);
    spec.base_score = 0.9;
    spec.change_threshold = 0.1;
    return spec;
}

/// Scenario plus a synthetic oracle with clean scores cached.
struct Bundle {
    Scenario scenario;
    OracleBank oracles;
};

inline Bundle synthetic_bundle(std::vector<double> vis = {0.4, 0.1, 0.4, 0.1},
                               std::vector<double> inf = {0.1, 0.4, 0.1, 0.4}) {
    Bundle b{flat_scenario(), {}};
    b.oracles = OracleBank(std::make_shared<SyntheticDetector>(grid_spec(b.scenario.outer, vis, inf),
                                                               b.scenario.x_vis, b.scenario.x_inf));
    cache_clean_scores(b.scenario, b.oracles);
    return b;
}

inline DEConfig small_config(const Scenario &s, std::uint64_t seed = 1) {
    DEConfig c;
    c.population_q = 12;
    c.max_generations_t = 30;
    c.radius_r = 7;
    c.inner_radius = 2.1;
    c.patch_count_k = 2;
    const Point2 mid = s.outer.center();
    c.initial_centers = {{mid.x - 9, mid.y - 9}, {mid.x + 9, mid.y + 9}};
    c.rng_seed = seed;
    return c;
}

} // namespace patchforge::testing

#endif
