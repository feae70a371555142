#include "ktm/bench.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "ktm/io.hpp"
#include "ktm/matcher.hpp"
#include "ktm/rng.hpp"

namespace ktm::bench {

namespace {

using Json = nlohmann::json;

Vec3 uniform_in(std::mt19937_64 &rng, const Vec3 &lo, const Vec3 &hi) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
        p[a] = std::uniform_real_distribution<double>(lo[a], hi[a])(rng);
    }
    return p;
}

Vec3 random_direction(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        Vec3 v(n(rng), n(rng), n(rng));
        const double norm = v.norm();
        if (norm > 1e-12) return v / norm;
    }
}

std::vector<double> random_unit(std::mt19937_64 &rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        std::vector<double> f(dim);
        double sq = 0.0;
        for (auto &x : f) {
            x = n(rng);
            sq += x * x;
        }
        if (sq > 1e-24) {
            const double inv = 1.0 / std::sqrt(sq);
            for (auto &x : f) x *= inv;
            return f;
        }
    }
}

SimilarityTransform random_transform(std::mt19937_64 &rng,
                                     const TransformRange &range) {
    const Vec3 axis = random_direction(rng);
    const double angle =
            std::uniform_real_distribution<double>(0.0, range.max_rotation)(rng);
    const Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    const Vec3 t = uniform_in(rng, range.translation_min, range.translation_max);
    const double s = range.scale_min == range.scale_max
                             ? range.scale_min
                             : std::uniform_real_distribution<double>(
                                       range.scale_min, range.scale_max)(rng);
    return {r, t, s};
}

double mean(const std::vector<double> &v) {
    return v.empty() ? 0.0
                     : std::accumulate(v.begin(), v.end(), 0.0) /
                               static_cast<double>(v.size());
}

std::optional<double> mean_opt(const std::vector<double> &v) {
    if (v.empty()) return std::nullopt;
    return mean(v);
}

Json opt_json(const std::optional<double> &v) {
    return v ? Json(*v) : Json(nullptr);
}

std::string now_iso8601() {
    const std::time_t t = std::chrono::system_clock::to_time_t(
            std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

}  // namespace

std::size_t SceneSpec::occluded_count() const {
    return static_cast<std::size_t>(
            std::floor(occlusion_fraction * static_cast<double>(template_k) +
                       1e-9));
}

void SceneSpec::validate() const {
    auto fail = [](const std::string &what) { throw SpecError(what); };
    if (template_k < 3) fail("template_k must be at least 3");
    if (template_k > KnowledgeTemplate::kMaxCoarseKeypoints) {
        fail("template_k exceeds " +
             std::to_string(KnowledgeTemplate::kMaxCoarseKeypoints));
    }
    if (feature_dim == 0) fail("feature_dim must be positive");
    if (!(position_noise_sigma >= 0.0) || !std::isfinite(position_noise_sigma))
        fail("position_noise_sigma must be finite and non-negative");
    if (!(feature_noise_sigma >= 0.0) || !std::isfinite(feature_noise_sigma))
        fail("feature_noise_sigma must be finite and non-negative");
    if (!(occlusion_fraction >= 0.0 && occlusion_fraction < 1.0))
        fail("occlusion_fraction must be in [0, 1)");
    if (template_k - occluded_count() < 3)
        fail("fewer than three keypoints would remain visible");
    if (!(object_extent > 0.0)) fail("object_extent must be positive");
    if (!(min_keypoint_separation >= 0.0))
        fail("min_keypoint_separation must be non-negative");
    if (!(distractor_clearance >= 0.0))
        fail("distractor_clearance must be non-negative");
    for (const auto &group : ambiguity_groups) {
        for (auto k : group) {
            if (k >= template_k) {
                fail("ambiguity group index " + std::to_string(k) +
                     " out of range");
            }
        }
    }
    if (!deformation.empty() && deformation.size() != template_k)
        fail("deformation must have one entry per keypoint");
    for (const auto &d : deformation) {
        if (!d.allFinite()) fail("deformation must be finite");
    }
    const auto &r = transform_range;
    if (!(r.max_rotation >= 0.0) || !(r.scale_min > 0.0) ||
        !(r.scale_min <= r.scale_max) ||
        !(r.translation_min.array() <= r.translation_max.array()).all())
        fail("invalid transform range");
    try {
        workspace.validate();
    } catch (const Error &e) {
        fail(std::string("workspace: ") + e.what());
    }
}

SceneInstance generate_scene(const SceneSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.rng_seed);
    const std::size_t k_count = spec.template_k;
    const std::size_t dim = spec.feature_dim;

    // Keypoint layout by rejection sampling; retried as a whole if it comes
    // out collinear (practically never).
    const double h = spec.object_extent / 2.0;
    std::vector<Vec3> layout;
    for (int attempt = 0;; ++attempt) {
        if (attempt == 100) throw SpecError("cannot place template keypoints");
        layout.clear();
        for (std::size_t k = 0; k < k_count; ++k) {
            bool placed = false;
            for (int trial = 0; trial < 2000 && !placed; ++trial) {
                const Vec3 p = uniform_in(rng, Vec3::Constant(-h),
                                          Vec3::Constant(h));
                placed = std::all_of(layout.begin(), layout.end(),
                                     [&](const Vec3 &q) {
                                         return (p - q).norm() >=
                                                spec.min_keypoint_separation;
                                     });
                if (placed) layout.push_back(p);
            }
            if (!placed) {
                throw SpecError(
                        "cannot place keypoints with the requested separation");
            }
        }
        if (!is_collinear(layout)) break;
    }

    std::vector<std::vector<double>> features;
    features.reserve(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        features.push_back(random_unit(rng, dim));
    }
    for (const auto &group : spec.ambiguity_groups) {
        if (group.empty()) continue;
        for (auto k : group) features[k] = features[group.front()];
    }

    const SimilarityTransform truth =
            spec.transform ? *spec.transform
                           : random_transform(rng, spec.transform_range);

    std::vector<Vec3> true_positions(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        true_positions[k] = truth.apply(layout[k]);
        if (!spec.deformation.empty()) true_positions[k] += spec.deformation[k];
    }

    std::vector<std::size_t> order(k_count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> visible(k_count, true);
    for (std::size_t i = 0; i < spec.occluded_count(); ++i) {
        visible[order[i]] = false;
    }

    std::vector<Vec3> positions, colors;
    std::vector<double> cloud_features;
    std::vector<std::optional<std::size_t>> cloud_index(k_count);
    std::normal_distribution<double> pos_noise(0.0, 1.0);
    std::normal_distribution<double> feat_noise(0.0, 1.0);
    const double feat_sigma =
            spec.feature_noise_sigma / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t k = 0; k < k_count; ++k) {
        if (!visible[k]) continue;
        Vec3 p = true_positions[k];
        if (spec.position_noise_sigma > 0.0) {
            for (int a = 0; a < 3; ++a) {
                p[a] += spec.position_noise_sigma * pos_noise(rng);
            }
        }
        std::vector<double> f = features[k];
        if (feat_sigma > 0.0) {
            double sq = 0.0;
            for (auto &x : f) {
                x += feat_sigma * feat_noise(rng);
                sq += x * x;
            }
            const double inv = 1.0 / std::sqrt(sq);
            for (auto &x : f) x *= inv;
        }
        cloud_index[k] = positions.size();
        positions.push_back(p);
        colors.push_back(Vec3(unit(rng), unit(rng), unit(rng)));
        cloud_features.insert(cloud_features.end(), f.begin(), f.end());
    }
    for (std::size_t i = 0; i < spec.distractor_count; ++i) {
        Vec3 p = uniform_in(rng, spec.workspace.min, spec.workspace.max);
        for (int trial = 0; spec.distractor_clearance > 0.0; ++trial) {
            const bool clear = std::all_of(
                    true_positions.begin(), true_positions.end(),
                    [&](const Vec3 &q) {
                        return (p - q).norm() >= spec.distractor_clearance;
                    });
            if (clear) break;
            if (trial == 10000) {
                throw SpecError("workspace too small for distractor_clearance");
            }
            p = uniform_in(rng, spec.workspace.min, spec.workspace.max);
        }
        positions.push_back(p);
        colors.push_back(Vec3(unit(rng), unit(rng), unit(rng)));
        const auto f = random_unit(rng, dim);
        cloud_features.insert(cloud_features.end(), f.begin(), f.end());
    }

    std::vector<Keypoint> keypoints(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        keypoints[k] = Keypoint{features[k], layout[k]};
    }
    Metadata meta{{"source", "synthetic"},
                  {"rng_seed", std::to_string(spec.rng_seed)}};

    return SceneInstance{
            KnowledgeTemplate(dim, std::move(keypoints), "synthetic",
                              std::move(meta)),
            SemanticPointCloud(dim, std::move(positions), std::move(colors),
                               std::move(cloud_features), true),
            std::move(true_positions),
            std::move(visible),
            std::move(cloud_index),
            truth};
}

const char *to_string(Variant v) {
    switch (v) {
        case Variant::top1: return "top1";
        case Variant::coarse: return "coarse";
        case Variant::full: return "full";
    }
    return "?";
}

Variant variant_from_string(std::string_view name) {
    if (name == "top1") return Variant::top1;
    if (name == "coarse") return Variant::coarse;
    if (name == "full") return Variant::full;
    throw ValidationError("unknown variant '" + std::string(name) +
                          "' (expected top1, coarse or full)");
}

VariantMetrics score_positions(const SceneInstance &instance,
                               Variant variant,
                               const std::vector<Vec3> &positions,
                               double matched_threshold) {
    const std::size_t k_count = instance.true_positions.size();
    if (positions.size() != k_count) {
        throw DimensionError("predicted keypoint count", positions.size(),
                             k_count);
    }
    VariantMetrics m;
    m.variant = variant;
    m.ok = true;
    m.keypoint_errors.resize(k_count);
    std::vector<double> vis, occ;
    std::size_t matched = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
        const double e = (positions[k] - instance.true_positions[k]).norm();
        m.keypoint_errors[k] = e;
        matched += e < matched_threshold;
        (instance.visible[k] ? vis : occ).push_back(e);
    }
    m.average_error = mean(m.keypoint_errors);
    m.matched_rate = static_cast<double>(matched) / static_cast<double>(k_count);
    m.visible_error = mean_opt(vis);
    m.occluded_error = mean_opt(occ);
    return m;
}

std::vector<VariantMetrics> evaluate(const SceneInstance &instance,
                                     const std::vector<Variant> &variants,
                                     const MatchParams &params,
                                     double matched_threshold,
                                     Execution exec) {
    const auto &tmpl = instance.tmpl;
    const auto &truth = instance.true_transform;
    std::vector<VariantMetrics> out;

    // The coarse stage is shared by the coarse and full variants.
    std::optional<CoarseMatch> coarse;
    std::string coarse_error;
    auto ensure_coarse = [&]() -> bool {
        if (coarse) return true;
        if (!coarse_error.empty()) return false;
        try {
            coarse = coarse_match(tmpl, instance.cloud, params, exec);
            return true;
        } catch (const Error &e) {
            coarse_error = e.what();
            return false;
        }
    };
    auto failed = [](Variant v, std::string why) {
        VariantMetrics m;
        m.variant = v;
        m.ok = false;
        m.error = std::move(why);
        return m;
    };
    auto with_transform = [&](VariantMetrics m, const SimilarityTransform &t) {
        m.rotation_error = rotation_error(t.rotation(), truth.rotation());
        m.translation_error = (t.translation() - truth.translation()).norm();
        m.scale_error = std::abs(t.scale() - truth.scale());
        return m;
    };

    for (const auto v : variants) {
        switch (v) {
            case Variant::top1: {
                try {
                    const auto r = top1_match(tmpl, instance.cloud, params, exec);
                    std::vector<Vec3> pos;
                    for (const auto &kp : r.keypoints) pos.push_back(kp.position);
                    out.push_back(score_positions(instance, v, pos,
                                                  matched_threshold));
                } catch (const Error &e) {
                    out.push_back(failed(v, e.what()));
                }
                break;
            }
            case Variant::coarse: {
                if (!ensure_coarse()) {
                    out.push_back(failed(v, coarse_error));
                    break;
                }
                std::vector<Vec3> pos;
                for (std::size_t k = 0; k < tmpl.size(); ++k) {
                    pos.push_back(coarse->transform.apply(tmpl.position(k)));
                }
                out.push_back(with_transform(
                        score_positions(instance, v, pos, matched_threshold),
                        coarse->transform));
                break;
            }
            case Variant::full: {
                if (!ensure_coarse()) {
                    out.push_back(failed(v, coarse_error));
                    break;
                }
                try {
                    const auto r = fine_match(tmpl, instance.cloud,
                                              coarse->transform,
                                              coarse->correspondences, params);
                    std::vector<Vec3> pos;
                    for (const auto &kp : r.keypoints) pos.push_back(kp.position);
                    out.push_back(with_transform(
                            score_positions(instance, v, pos, matched_threshold),
                            r.transform));
                } catch (const Error &e) {
                    out.push_back(failed(v, e.what()));
                }
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Presets and config files

std::vector<std::string> preset_names() {
    return {"ablation", "deformation", "clutter", "occlusion", "noiseless"};
}

SuiteConfig preset_config(std::string_view name) {
    SuiteConfig c;
    c.preset = std::string(name);
    c.output = "bench_" + c.preset + ".json";
    if (name == "ablation") {
        // Noise, occlusion and repeated parts, where per-keypoint top-1
        // matching gets confused.
        c.scenes = 100;
        c.scene.template_k = 10;
        c.scene.distractor_count = 100;
        c.scene.position_noise_sigma = 0.002;
        c.scene.feature_noise_sigma = 0.1;
        c.scene.occlusion_fraction = 0.2;
        c.scene.ambiguity_groups = {{0, 1, 2}, {3, 4, 5}, {6, 7}};
        c.variants = {Variant::top1, Variant::coarse, Variant::full};
    } else if (name == "deformation") {
        c.scenes = 100;
        c.scene.template_k = 10;
        c.scene.distractor_count = 100;
        c.deformation_fraction = 0.3;
        c.deformation_max = 0.03;
        c.params.delta_p = 0.05;
        c.variants = {Variant::coarse, Variant::full};
    } else if (name == "clutter") {
        c.scenes = 200;
        c.scene.template_k = 10;
        c.scene.distractor_count = 500;
        c.variants = {Variant::top1, Variant::full};
    } else if (name == "occlusion") {
        c.scenes = 100;
        c.scene.template_k = 10;
        c.scene.occlusion_fraction = 0.4;
        // Occluded keypoints are inferred only when nothing lies within
        // delta_p of their anchor: keep keypoints and distractors apart.
        c.scene.object_extent = 0.25;
        c.scene.min_keypoint_separation = 0.07;
        c.scene.distractor_clearance = 0.06;
        c.variants = {Variant::top1, Variant::coarse, Variant::full};
    } else if (name == "noiseless") {
        c.scenes = 20;
        c.variants = {Variant::top1, Variant::coarse, Variant::full};
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'", 0);
    }
    return c;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

double parse_double(const std::string &v, std::size_t line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception &) {
        throw ConfigError("expected a number, got '" + v + "'", line);
    }
}

std::uint64_t parse_uint(const std::string &v, std::size_t line) {
    try {
        std::size_t used = 0;
        if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
        const auto u = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception &) {
        throw ConfigError("expected a non-negative integer, got '" + v + "'",
                          line);
    }
}

std::vector<double> parse_list(const std::string &v, std::size_t n,
                               std::size_t line) {
    const auto parts = split(v, ',');
    if (parts.size() != n) {
        throw ConfigError("expected " + std::to_string(n) +
                                  " comma-separated numbers",
                          line);
    }
    std::vector<double> out;
    for (const auto &p : parts) out.push_back(parse_double(p, line));
    return out;
}

void apply_key(SuiteConfig &c, const std::string &key, const std::string &v,
               std::size_t line) {
    auto &s = c.scene;
    auto &p = c.params;
    auto size = [&] { return static_cast<std::size_t>(parse_uint(v, line)); };
    auto num = [&] { return parse_double(v, line); };

    if (key == "scenes") c.scenes = size();
    else if (key == "seed") c.seed = parse_uint(v, line);
    else if (key == "template_k") s.template_k = size();
    else if (key == "distractors") s.distractor_count = size();
    else if (key == "feature_dim") s.feature_dim = size();
    else if (key == "position_noise") s.position_noise_sigma = num();
    else if (key == "feature_noise") s.feature_noise_sigma = num();
    else if (key == "occlusion") s.occlusion_fraction = num();
    else if (key == "object_extent") s.object_extent = num();
    else if (key == "min_separation") s.min_keypoint_separation = num();
    else if (key == "distractor_clearance") s.distractor_clearance = num();
    else if (key == "rotation_max_deg")
        s.transform_range.max_rotation = num() * 3.14159265358979323846 / 180.0;
    else if (key == "translation_range") {
        const auto l = parse_list(v, 6, line);
        s.transform_range.translation_min = Vec3(l[0], l[1], l[2]);
        s.transform_range.translation_max = Vec3(l[3], l[4], l[5]);
    } else if (key == "scale_range") {
        const auto l = parse_list(v, 2, line);
        s.transform_range.scale_min = l[0];
        s.transform_range.scale_max = l[1];
    } else if (key == "workspace") {
        const auto l = parse_list(v, 6, line);
        s.workspace = Workspace{Vec3(l[0], l[1], l[2]), Vec3(l[3], l[4], l[5])};
    } else if (key == "ambiguity_groups") {
        s.ambiguity_groups.clear();
        if (!v.empty() && v != "none") {
            for (const auto &g : split(v, ';')) {
                std::vector<std::size_t> group;
                for (const auto &i : split(g, ',')) {
                    group.push_back(static_cast<std::size_t>(parse_uint(i, line)));
                }
                s.ambiguity_groups.push_back(std::move(group));
            }
        }
    } else if (key == "deformation_fraction") c.deformation_fraction = num();
    else if (key == "deformation_max") c.deformation_max = num();
    else if (key == "variants") {
        c.variants.clear();
        for (const auto &name : split(v, ',')) {
            try {
                c.variants.push_back(variant_from_string(name));
            } catch (const ValidationError &e) {
                throw ConfigError(e.what(), line);
            }
        }
    } else if (key == "beta") p.beta = num();
    else if (key == "delta_f") p.delta_f = num();
    else if (key == "delta_p") p.delta_p = num();
    else if (key == "ransac_iterations") p.ransac_iterations = size();
    else if (key == "inlier_radius") p.ransac_inlier_radius = num();
    else if (key == "candidate_cap") p.candidate_cap = size();
    else if (key == "scale_bounds") {
        const auto l = parse_list(v, 2, line);
        p.scale_min = l[0];
        p.scale_max = l[1];
    } else if (key == "match_seed") p.rng_seed = parse_uint(v, line);
    else if (key == "matched_threshold") c.matched_threshold = num();
    else if (key == "output") c.output = v;
    else throw ConfigError("unknown key '" + key + "'", line);
}

void validate_config(const SuiteConfig &c, std::size_t line) {
    try {
        if (c.scenes == 0) throw ValidationError("scenes must be positive");
        if (c.variants.empty()) throw ValidationError("no variants selected");
        if (!(c.matched_threshold > 0.0))
            throw ValidationError("matched_threshold must be positive");
        if (!(c.deformation_fraction >= 0.0 && c.deformation_fraction <= 1.0))
            throw ValidationError("deformation_fraction must be in [0, 1]");
        if (!(c.deformation_max >= 0.0))
            throw ValidationError("deformation_max must be non-negative");
        c.params.validate();
        c.scene.validate();
    } catch (const ConfigError &) {
        throw;
    } catch (const Error &e) {
        throw ConfigError(e.what(), line);
    }
}

}  // namespace

SuiteConfig parse_config(std::string_view text) {
    struct Entry {
        std::string key, value;
        std::size_t line;
    };
    std::vector<Entry> entries;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) {
            raw.erase(hash);
        }
        const std::string t = trim(raw);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value'", line);
        }
        Entry e{trim(t.substr(0, eq)), trim(t.substr(eq + 1)), line};
        if (e.key.empty()) throw ConfigError("missing key", line);
        for (const auto &prev : entries) {
            if (prev.key == e.key) {
                throw ConfigError("duplicate key '" + e.key + "'", line);
            }
        }
        entries.push_back(std::move(e));
    }

    SuiteConfig config;
    for (const auto &e : entries) {
        if (e.key == "preset") {
            try {
                config = preset_config(e.value);
            } catch (const ConfigError &err) {
                throw ConfigError(err.what(), e.line);
            }
        }
    }
    std::size_t last = 0;
    for (const auto &e : entries) {
        if (e.key != "preset") apply_key(config, e.key, e.value, e.line);
        last = e.line;
    }
    validate_config(config, last);
    return config;
}

SceneSpec scene_spec_for(const SuiteConfig &config, std::size_t scene) {
    SceneSpec spec = config.scene;
    spec.rng_seed = stream_seed(config.seed, scene);
    if (config.deformation_max > 0.0 && config.deformation_fraction > 0.0) {
        // Separate stream so the deformation does not shift the scene draw.
        std::mt19937_64 rng(stream_seed(spec.rng_seed, 1));
        const std::size_t k_count = spec.template_k;
        const auto moved = static_cast<std::size_t>(std::floor(
                config.deformation_fraction * static_cast<double>(k_count) +
                1e-9));
        std::vector<std::size_t> order(k_count);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        spec.deformation.assign(k_count, Vec3::Zero());
        for (std::size_t i = 0; i < moved; ++i) {
            // Magnitude in (0, max].
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            spec.deformation[order[i]] =
                    random_direction(rng) * config.deformation_max * (1.0 - u);
        }
    }
    return spec;
}

MatchParams match_params_for(const SuiteConfig &config, std::size_t scene) {
    MatchParams p = config.params;
    p.rng_seed = stream_seed(config.params.rng_seed, scene);
    return p;
}

std::vector<VariantSummary> summarize(const SuiteConfig &config,
                                      const std::vector<SceneRow> &rows) {
    std::vector<VariantSummary> out;
    for (const auto v : config.variants) {
        VariantSummary s;
        s.variant = v;
        std::vector<double> avg, vis, occ, rot, trans, scale;
        double matched = 0.0, total = 0.0;
        for (const auto &row : rows) {
            const auto &m = row.metrics;
            if (m.variant != v) continue;
            ++s.scenes;
            const double k = static_cast<double>(config.scene.template_k);
            total += k;
            if (!m.ok) {
                ++s.failures;
                continue;
            }
            matched += m.matched_rate * k;
            avg.push_back(m.average_error);
            if (m.visible_error) vis.push_back(*m.visible_error);
            if (m.occluded_error) occ.push_back(*m.occluded_error);
            if (m.rotation_error) rot.push_back(*m.rotation_error);
            if (m.translation_error) trans.push_back(*m.translation_error);
            if (m.scale_error) scale.push_back(*m.scale_error);
        }
        s.average_error = mean(avg);
        s.matched_rate = total > 0.0 ? matched / total : 0.0;
        s.visible_error = mean_opt(vis);
        s.occluded_error = mean_opt(occ);
        s.rotation_error = mean_opt(rot);
        s.translation_error = mean_opt(trans);
        s.scale_error = mean_opt(scale);
        out.push_back(s);
    }
    return out;
}

BenchReport run_suite(const SuiteConfig &config, Execution exec) {
    validate_config(config, 0);
    const std::size_t nv = config.variants.size();
    std::vector<SceneRow> rows(config.scenes * nv);
    // Scenes run in parallel; matching inside a scene stays serial to avoid
    // nested teams.
    parallel_for(
            config.scenes,
            [&](std::size_t i) {
                const SceneSpec spec = scene_spec_for(config, i);
                std::vector<VariantMetrics> metrics;
                try {
                    const auto instance = generate_scene(spec);
                    metrics = evaluate(instance, config.variants,
                                       match_params_for(config, i),
                                       config.matched_threshold,
                                       Execution::serial);
                } catch (const Error &e) {
                    for (const auto v : config.variants) {
                        VariantMetrics m;
                        m.variant = v;
                        m.error = e.what();
                        metrics.push_back(m);
                    }
                }
                for (std::size_t j = 0; j < nv; ++j) {
                    rows[i * nv + j] = SceneRow{i, spec.rng_seed, metrics[j]};
                }
            },
            exec);
    BenchReport report;
    report.config = config;
    report.rows = std::move(rows);
    report.summary = summarize(config, report.rows);
    report.generated_at = now_iso8601();
    return report;
}

Json config_to_json(const SuiteConfig &c) {
    const auto &s = c.scene;
    Json groups = Json::array();
    for (const auto &g : s.ambiguity_groups) groups.push_back(g);
    Json variants = Json::array();
    for (auto v : c.variants) variants.push_back(to_string(v));
    const auto vec = [](const Vec3 &v) { return Json{v.x(), v.y(), v.z()}; };
    return Json{
            {"preset", c.preset},
            {"scenes", c.scenes},
            {"seed", c.seed},
            {"template_k", s.template_k},
            {"distractors", s.distractor_count},
            {"feature_dim", s.feature_dim},
            {"position_noise", s.position_noise_sigma},
            {"feature_noise", s.feature_noise_sigma},
            {"occlusion", s.occlusion_fraction},
            {"ambiguity_groups", groups},
            {"object_extent", s.object_extent},
            {"min_separation", s.min_keypoint_separation},
            {"distractor_clearance", s.distractor_clearance},
            {"rotation_max", s.transform_range.max_rotation},
            {"translation_min", vec(s.transform_range.translation_min)},
            {"translation_max", vec(s.transform_range.translation_max)},
            {"scale_range",
             {s.transform_range.scale_min, s.transform_range.scale_max}},
            {"workspace_min", vec(s.workspace.min)},
            {"workspace_max", vec(s.workspace.max)},
            {"deformation_fraction", c.deformation_fraction},
            {"deformation_max", c.deformation_max},
            {"variants", variants},
            {"params", io::params_to_json(c.params)},
            {"matched_threshold", c.matched_threshold},
    };
}

Json report_to_json(const BenchReport &report) {
    Json variants = Json::object();
    for (const auto &s : report.summary) {
        variants[to_string(s.variant)] = Json{
                {"scenes", s.scenes},
                {"failures", s.failures},
                {"average_error", s.average_error},
                {"matched_rate", s.matched_rate},
                {"visible_error", opt_json(s.visible_error)},
                {"occluded_error", opt_json(s.occluded_error)},
                {"rotation_error", opt_json(s.rotation_error)},
                {"translation_error", opt_json(s.translation_error)},
                {"scale_error", opt_json(s.scale_error)},
        };
    }
    Json scenes = Json::array();
    const std::size_t nv = report.config.variants.size();
    for (std::size_t i = 0; i + nv <= report.rows.size(); i += nv) {
        Json per = Json::object();
        for (std::size_t j = 0; j < nv; ++j) {
            const auto &m = report.rows[i + j].metrics;
            Json entry{{"ok", m.ok}};
            if (m.ok) {
                entry["average_error"] = m.average_error;
                entry["matched_rate"] = m.matched_rate;
                entry["keypoint_errors"] = m.keypoint_errors;
                entry["rotation_error"] = opt_json(m.rotation_error);
                entry["translation_error"] = opt_json(m.translation_error);
                entry["scale_error"] = opt_json(m.scale_error);
            } else {
                entry["error"] = m.error;
            }
            per[to_string(m.variant)] = entry;
        }
        scenes.push_back(Json{{"scene", report.rows[i].scene},
                              {"seed", report.rows[i].seed},
                              {"variants", per}});
    }
    return Json{{"generated_at", report.generated_at},
                {"preset", report.config.preset},
                {"config", config_to_json(report.config)},
                {"variants", variants},
                {"scenes", scenes}};
}

std::string summary_table(const BenchReport &report) {
    std::ostringstream out;
    out << "preset: " << report.config.preset
        << "  scenes: " << report.config.scenes
        << "  seed: " << report.config.seed << "\n";
    out << std::left << std::setw(8) << "variant" << std::right
        << std::setw(12) << "avg_err_m" << std::setw(10) << "matched"
        << std::setw(12) << "visible_m" << std::setw(12) << "occluded_m"
        << std::setw(10) << "rot_deg" << std::setw(10) << "failed" << "\n";
    auto cell = [&](const std::optional<double> &v, int width, double scale) {
        if (v) {
            out << std::setw(width) << std::fixed << std::setprecision(4)
                << *v * scale;
        } else {
            out << std::setw(width) << "-";
        }
    };
    for (const auto &s : report.summary) {
        out << std::left << std::setw(8) << to_string(s.variant) << std::right;
        cell(s.average_error, 12, 1.0);
        cell(s.matched_rate, 10, 1.0);
        cell(s.visible_error, 12, 1.0);
        cell(s.occluded_error, 12, 1.0);
        cell(s.rotation_error, 10, 180.0 / 3.14159265358979323846);
        out << std::setw(10) << s.failures << "\n";
    }
    return out.str();
}

std::vector<CheckOutcome> check_report(const Json &report,
                                       const CheckThresholds &thresholds) {
    std::vector<CheckOutcome> out;
    if (!report.is_object() || !report.contains("variants") ||
        !report.contains("scenes")) {
        throw FormatError("not a bench report", "");
    }
    const auto &variants = report["variants"];
    auto fmt = [](double v) {
        std::ostringstream s;
        s << std::setprecision(6) << v;
        return s.str();
    };
    if (variants.contains("top1") && variants.contains("full")) {
        const double e_top1 = variants["top1"]["average_error"].get<double>();
        const double e_full = variants["full"]["average_error"].get<double>();
        const double r_top1 = variants["top1"]["matched_rate"].get<double>();
        const double r_full = variants["full"]["matched_rate"].get<double>();
        out.push_back({"full_error_not_above_top1", e_full <= e_top1,
                       fmt(e_full) + " vs " + fmt(e_top1)});
        out.push_back({"full_matched_rate_not_below_top1", r_full >= r_top1,
                       fmt(r_full) + " vs " + fmt(r_top1)});
        if (thresholds.min_matched_rate_gap) {
            const double gap = *thresholds.min_matched_rate_gap;
            out.push_back({"matched_rate_gap",
                           r_full > 0.0 && r_full >= gap * r_top1,
                           "ratio " + (r_top1 > 0.0 ? fmt(r_full / r_top1)
                                                    : std::string("inf")) +
                                   ", required " + fmt(gap)});
        }
    }
    const bool deformed =
            report.contains("config") &&
            report["config"].value("deformation_max", 0.0) > 0.0 &&
            report["config"].value("deformation_fraction", 0.0) > 0.0;
    if (deformed && variants.contains("coarse") && variants.contains("full")) {
        std::size_t wins = 0, total = 0;
        for (const auto &scene : report["scenes"]) {
            const auto &per = scene["variants"];
            ++total;
            if (per["coarse"]["ok"].get<bool>() && per["full"]["ok"].get<bool>() &&
                per["full"]["average_error"].get<double>() <
                        per["coarse"]["average_error"].get<double>()) {
                ++wins;
            }
        }
        const double frac =
                total ? static_cast<double>(wins) / static_cast<double>(total)
                      : 0.0;
        out.push_back({"full_beats_coarse_per_scene",
                       total > 0 && frac >= thresholds.min_fine_win_fraction,
                       std::to_string(wins) + "/" + std::to_string(total) +
                               " scenes, required fraction " +
                               fmt(thresholds.min_fine_win_fraction)});
    }
    return out;
}

}  // namespace ktm::bench
