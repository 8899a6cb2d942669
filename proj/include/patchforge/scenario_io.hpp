#ifndef PATCHFORGE_SCENARIO_IO_HPP
#define PATCHFORGE_SCENARIO_IO_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "errors.hpp"
#include "evolve.hpp"
#include "external_oracle.hpp"
#include "fitness.hpp"
#include "homography.hpp"
#include "image_io.hpp"
#include "oracle.hpp"

namespace patchforge {

namespace fs = std::filesystem;

inline constexpr double default_border_scale = 0.9;
inline constexpr const char *oracle_env_var = "PATCHFORGE_ORACLE";

inline nlohmann::json homography_to_json(const Homography &h) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &r : h.matrix()) rows.push_back({r[0], r[1], r[2]});
    return rows;
}

inline Homography homography_from_json(const nlohmann::json &j) {
    try {
        Homography::Matrix m{};
        if (j.size() != 3) throw ParseError("homography must have 3 rows");
        for (std::size_t r = 0; r < 3; ++r) {
            if (j.at(r).size() != 3) throw ParseError("homography rows must have 3 entries");
            for (std::size_t c = 0; c < 3; ++c) m[r][c] = j.at(r).at(c).get<double>();
        }
        return Homography(m);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("homography: ") + e.what());
    }
}

/// Keypoint pairs as [[sx, sy, tx, ty], ...].
inline std::vector<PointPair> keypoint_pairs_from_json(const nlohmann::json &j) {
    try {
        std::vector<PointPair> out;
        for (const auto &row : j) {
            if (row.size() != 4) throw ParseError("keypoint pairs must be [sx, sy, tx, ty]");
            PointPair p{{row.at(0).get<double>(), row.at(1).get<double>()},
                        {row.at(2).get<double>(), row.at(3).get<double>()}};
            if (!p.src.finite() || !p.dst.finite()) throw ParseError("keypoint coordinates must be finite");
            out.push_back(p);
        }
        return out;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("keypoint pairs: ") + e.what());
    }
}

inline nlohmann::json keypoint_pairs_to_json(std::span<const PointPair> pairs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto &p : pairs) out.push_back({p.src.x, p.src.y, p.dst.x, p.dst.y});
    return out;
}

inline nlohmann::json read_json_file(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline void write_json_file(const fs::path &path, const nlohmann::json &j) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline SyntheticDetectorSpec read_detector_spec(const fs::path &path) {
    try {
        return read_json_file(path).get<SyntheticDetectorSpec>();
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

struct LoadOptions {
    /// External endpoint overriding the manifest's oracle. When empty the
    /// PATCHFORGE_ORACLE environment variable is consulted.
    std::string oracle_override;
    double border_scale = default_border_scale;
    std::optional<double> thre;           // overrides the manifest's thre
    double ransac_threshold = default_ransac_threshold;
    std::size_t ransac_iterations = default_ransac_iterations;
    std::uint64_t ransac_seed = 0;
    double oracle_timeout = default_oracle_timeout;
    /// Query clean scores and reject degenerate scenarios.
    bool score_clean = true;
};

struct LoadedScenario {
    Scenario scenario;
    OracleBank oracles;
    fs::path manifest_path;
    std::string oracle_description;   // "synthetic:<path>" or the external endpoint
};

namespace detail {

inline Image load_image_at(const fs::path &base, const nlohmann::json &j, const char *key) {
    if (!j.contains(key)) throw ParseError(std::string("manifest is missing '") + key + "'");
    return read_image(base / j.at(key).get<std::string>());
}

inline std::string resolve_oracle(const LoadOptions &opts) {
    if (!opts.oracle_override.empty()) return opts.oracle_override;
    if (const char *env = std::getenv(oracle_env_var); env && *env) return env;
    return {};
}

} // namespace detail

/// Loads a manifest; image paths are relative to the manifest's directory.
inline LoadedScenario load_scenario(const fs::path &manifest_path, const LoadOptions &opts = {}) {
    const nlohmann::json m = read_json_file(manifest_path);
    const fs::path base = manifest_path.parent_path();
    LoadedScenario out;
    out.manifest_path = manifest_path;
    Scenario &s = out.scenario;
    try {
        s.name = m.value("name", manifest_path.parent_path().filename().string());
        s.x_vis = detail::load_image_at(base, m, "x_vis");
        s.x_inf = detail::load_image_at(base, m, "x_inf");
        s.cover_vis = detail::load_image_at(base, m, "cover_vis");
        s.cover_inf = detail::load_image_at(base, m, "cover_inf");

        if (m.contains("outer")) {
            s.outer = m.at("outer").get<OuterBorder>();
        } else if (m.contains("body_box")) {
            s.outer = m.at("body_box").get<OuterBorder>().scaled(m.value("border_scale", opts.border_scale));
        } else {
            throw ParseError("manifest needs 'outer' or 'body_box'");
        }
        if (!s.outer.valid()) throw ParseError("outer border must satisfy x_l < x_r and y_d < y_u");
        s.thre = opts.thre.value_or(m.value("thre", default_thre));
        for (const auto &c : m.value("patch_centers", nlohmann::json::array()))
            s.patch_centers.push_back({c.at(0).get<double>(), c.at(1).get<double>()});

        for (const auto &vj : m.value("views", nlohmann::json::array())) {
            AngledView v;
            v.name = vj.at("name").get<std::string>();
            v.x_vis = detail::load_image_at(base, vj, "x_vis");
            v.x_inf = detail::load_image_at(base, vj, "x_inf");
            v.cover_vis = detail::load_image_at(base, vj, "cover_vis");
            v.cover_inf = detail::load_image_at(base, vj, "cover_inf");
            if (vj.contains("homography")) {
                v.h = homography_from_json(vj.at("homography"));
            } else if (vj.contains("keypoint_pairs")) {
                const auto pairs = keypoint_pairs_from_json(vj.at("keypoint_pairs"));
                if (pairs.size() < 4) throw InsufficientInliers("view " + v.name + " has fewer than 4 keypoint pairs");
                const auto r = ransac_estimate(pairs, opts.ransac_threshold, opts.ransac_iterations, opts.ransac_seed);
                std::vector<PointPair> inliers;
                for (std::size_t i = 0; i < pairs.size(); ++i)
                    if (r.inlier_mask[i]) inliers.push_back(pairs[i]);
                v.h = refine(r.h, inliers);
                v.keypoint_inliers = r.inlier_count;
            } else {
                throw ParseError("view " + v.name + " needs 'homography' or 'keypoint_pairs'");
            }
            s.views.push_back(std::move(v));
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    check_shapes(s);

    const std::string external = detail::resolve_oracle(opts);
    if (!external.empty()) {
        out.oracles = OracleBank(std::make_shared<ExternalDetector>(external, opts.oracle_timeout));
        out.oracle_description = external;
    } else {
        const nlohmann::json oj = m.value("oracle", nlohmann::json::object());
        if (oj.contains("external")) {
            const auto endpoint = oj.at("external").get<std::string>();
            out.oracles = OracleBank(std::make_shared<ExternalDetector>(endpoint, opts.oracle_timeout));
            out.oracle_description = endpoint;
        } else if (oj.contains("synthetic")) {
            const fs::path spec_path = base / oj.at("synthetic").get<std::string>();
            const SyntheticDetectorSpec spec = read_detector_spec(spec_path);
            std::vector<std::shared_ptr<Detector>> bank;
            bank.push_back(std::make_shared<SyntheticDetector>(spec, s.x_vis, s.x_inf));
            const auto views = m.value("views", nlohmann::json::array());
            for (std::size_t v = 0; v < s.views.size(); ++v) {
                SyntheticDetectorSpec vspec = spec;
                if (views[v].contains("synthetic")) vspec = read_detector_spec(base / views[v].at("synthetic").get<std::string>());
                bank.push_back(std::make_shared<SyntheticDetector>(vspec, s.views[v].x_vis, s.views[v].x_inf));
            }
            out.oracles = OracleBank(std::move(bank));
            out.oracle_description = "synthetic:" + spec_path.string();
        } else {
            throw ParseError("manifest selects no oracle and " + std::string(oracle_env_var) + " is unset");
        }
    }

    if (opts.score_clean) {
        cache_clean_scores(s, out.oracles);
        check_not_degenerate(s, s.thre, true);
    }
    return out;
}

/// Writes images and a manifest with explicit homographies into `dir`. The
/// optional oracle entry is copied verbatim.
inline fs::path save_scenario(const Scenario &s, const fs::path &dir, const nlohmann::json &oracle = {}) {
    fs::create_directories(dir);
    auto ext = [](const Image &img) { return img.channels() == 3 ? ".ppm" : ".pgm"; };
    auto put = [&](nlohmann::json &j, const char *key, const Image &img, const std::string &stem) {
        const std::string file = stem + ext(img);
        write_image(dir / file, img);
        j[key] = file;
    };
    nlohmann::json m;
    m["name"] = s.name;
    put(m, "x_vis", s.x_vis, "x_vis");
    put(m, "x_inf", s.x_inf, "x_inf");
    put(m, "cover_vis", s.cover_vis, "cover_vis");
    put(m, "cover_inf", s.cover_inf, "cover_inf");
    m["outer"] = s.outer;
    m["thre"] = s.thre;
    m["patch_centers"] = nlohmann::json::array();
    for (const auto &c : s.patch_centers) m["patch_centers"].push_back({c.x, c.y});
    m["views"] = nlohmann::json::array();
    for (const auto &v : s.views) {
        nlohmann::json vj;
        vj["name"] = v.name;
        put(vj, "x_vis", v.x_vis, v.name + "_x_vis");
        put(vj, "x_inf", v.x_inf, v.name + "_x_inf");
        put(vj, "cover_vis", v.cover_vis, v.name + "_cover_vis");
        put(vj, "cover_inf", v.cover_inf, v.name + "_cover_inf");
        vj["homography"] = homography_to_json(v.h);
        m["views"].push_back(std::move(vj));
    }
    if (!oracle.is_null()) m["oracle"] = oracle;
    const fs::path manifest = dir / "manifest.json";
    write_json_file(manifest, m);
    return manifest;
}

// ---------------------------------------------------------------------------
// Batch metrics

struct ScenarioSummary {
    std::string name;
    std::string manifest;
    std::uint64_t seed = 0;
    bool success = false;
    std::size_t stop_generation = 0;
    double best_j = 0.0;
    double best_dmin = 0.0;
    std::size_t oracle_queries = 0;
};

struct BatchReport {
    std::vector<ScenarioSummary> scenarios;
    double asr = 0.0;
};

inline double compute_asr(std::span<const AttackResult> results) {
    if (results.empty()) throw EmptyBatch("ASR of an empty batch is undefined");
    std::size_t hits = 0;
    for (const auto &r : results) hits += r.success ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

inline double compute_asr(std::span<const ScenarioSummary> summaries) {
    if (summaries.empty()) throw EmptyBatch("ASR of an empty batch is undefined");
    std::size_t hits = 0;
    for (const auto &s : summaries) hits += s.success ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(summaries.size());
}

inline void to_json(nlohmann::json &j, const ScenarioSummary &s) {
    j = {{"name", s.name},
         {"manifest", s.manifest},
         {"seed", s.seed},
         {"success", s.success},
         {"stop_generation", s.stop_generation},
         {"best_j", s.best_j},
         {"best_dmin", s.best_dmin},
         {"oracle_queries", s.oracle_queries}};
}

inline void to_json(nlohmann::json &j, const BatchReport &b) {
    j = {{"scenarios", b.scenarios}, {"asr", b.asr}, {"total", b.scenarios.size()}};
}

// ---------------------------------------------------------------------------
// Result serialization

inline void to_json(nlohmann::json &j, const FitnessReport &r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto &e : r.entries)
        entries.push_back({{"view", e.view}, {"modality", to_string(e.modality)}, {"adv_score", e.adv_score}, {"dis", e.dis}});
    j = {{"entries", std::move(entries)},
         {"d_min", r.d_min},
         {"j", r.j},
         {"dis_sum", r.dis_sum},
         {"mode", to_string(r.mode)}};
}

inline nlohmann::json result_to_json(const AttackResult &r) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto &h : r.history)
        history.push_back({{"generation", h.generation},
                           {"best_objective", h.best_objective},
                           {"best_j", h.best_j},
                           {"best_dmin", h.best_dmin},
                           {"queries", h.queries}});
    return {{"success", r.success},
            {"stop_generation", r.stop_generation},
            {"best_genome", r.best_genome},
            {"best_report", r.best_report},
            {"history", std::move(history)},
            {"oracle_queries", r.oracle_queries},
            {"mask_pixels", r.best_mask.count()}};
}

} // namespace patchforge

#endif
