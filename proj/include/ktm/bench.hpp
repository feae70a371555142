#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ktm/core.hpp"
#include "ktm/parallel.hpp"
#include "ktm/projection.hpp"

namespace ktm::bench {

/// Ranges for drawing a random ground-truth similarity.
struct TransformRange {
    double max_rotation = 3.14159265358979323846;  // radians, about a random axis
    Vec3 translation_min = Vec3(-0.15, -0.15, 0.10);
    Vec3 translation_max = Vec3(0.15, 0.15, 0.30);
    double scale_min = 0.8;
    double scale_max = 1.25;
};

/// Synthetic scene recipe. Template keypoints are drawn in a cube of side
/// `object_extent` around the origin, at least `min_keypoint_separation`
/// apart, with random unit features. The scene holds the transformed
/// keypoints (minus occluded ones) followed by distractors.
struct SceneSpec {
    std::size_t template_k = 10;
    std::size_t distractor_count = 100;
    std::size_t feature_dim = 384;
    std::optional<SimilarityTransform> transform;  // random when unset
    TransformRange transform_range;
    double position_noise_sigma = 0.0;  // meters, per axis
    /// Expected norm of the feature perturbation added before
    /// renormalization (per-component sigma is this / sqrt(feature_dim)).
    double feature_noise_sigma = 0.0;
    double occlusion_fraction = 0.0;
    /// Keypoint index sets whose members share one feature vector.
    std::vector<std::vector<std::size_t>> ambiguity_groups;
    /// Per-keypoint displacement applied after the similarity; empty for none.
    std::vector<Vec3> deformation;
    double object_extent = 0.15;
    double min_keypoint_separation = 0.04;
    /// Distractors are kept at least this far from every true keypoint
    /// position (0: anywhere in the workspace).
    double distractor_clearance = 0.0;
    Workspace workspace{Vec3(-0.4, -0.4, -0.1), Vec3(0.4, 0.4, 0.5)};
    std::uint64_t rng_seed = 0;

    /// Throws SpecError.
    void validate() const;
    std::size_t occluded_count() const;
};

struct SceneInstance {
    KnowledgeTemplate tmpl;
    SemanticPointCloud cloud;
    std::vector<Vec3> true_positions;  // per keypoint, occluded ones included
    std::vector<bool> visible;
    /// Cloud index of each visible keypoint's point.
    std::vector<std::optional<std::size_t>> cloud_index;
    SimilarityTransform true_transform;
};

SceneInstance generate_scene(const SceneSpec &spec);

/// Matching variants compared by the harness. `coarse` reports every
/// keypoint at the transformed template position (the pose-only estimate
/// the fine stage starts from).
enum class Variant { top1, coarse, full };

const char *to_string(Variant v);
Variant variant_from_string(std::string_view name);

struct VariantMetrics {
    Variant variant = Variant::full;
    bool ok = false;
    std::string error;
    std::vector<double> keypoint_errors;
    double average_error = 0.0;
    double matched_rate = 0.0;
    std::optional<double> visible_error;
    std::optional<double> occluded_error;
    std::optional<double> rotation_error;
    std::optional<double> translation_error;
    std::optional<double> scale_error;
};

/// Runs each variant; a variant that throws yields ok = false rather than
/// propagating.
std::vector<VariantMetrics> evaluate(const SceneInstance &instance,
                                     const std::vector<Variant> &variants,
                                     const MatchParams &params,
                                     double matched_threshold,
                                     Execution exec = Execution::parallel);

/// Metrics from predicted positions alone; pure in its inputs.
VariantMetrics score_positions(const SceneInstance &instance,
                               Variant variant,
                               const std::vector<Vec3> &positions,
                               double matched_threshold);

struct SuiteConfig {
    std::string preset = "custom";
    std::size_t scenes = 100;
    std::uint64_t seed = 1;
    SceneSpec scene;
    /// Fraction of keypoints displaced per scene, each by a random direction
    /// and a magnitude drawn uniformly from (0, deformation_max].
    double deformation_fraction = 0.0;
    double deformation_max = 0.0;
    std::vector<Variant> variants{Variant::top1, Variant::coarse, Variant::full};
    MatchParams params;
    double matched_threshold = 0.03;
    std::string output = "bench_report.json";
};

/// Names accepted by preset_config: ablation, deformation, clutter,
/// occlusion, noiseless.
std::vector<std::string> preset_names();
SuiteConfig preset_config(std::string_view name);

/// `key = value` lines, `#` comments. A `preset` line seeds the defaults and
/// later keys override it, regardless of order. Throws ConfigError with the
/// line number.
SuiteConfig parse_config(std::string_view text);

/// Per-scene spec as run_suite builds it (seed, deformation field).
SceneSpec scene_spec_for(const SuiteConfig &config, std::size_t scene);
MatchParams match_params_for(const SuiteConfig &config, std::size_t scene);

struct SceneRow {
    std::size_t scene = 0;
    std::uint64_t seed = 0;
    VariantMetrics metrics;
};

/// Aggregates: average errors over scenes where the variant succeeded;
/// matched_rate over all keypoints of all scenes, counting a failed scene's
/// keypoints as unmatched.
struct VariantSummary {
    Variant variant = Variant::full;
    std::size_t scenes = 0;
    std::size_t failures = 0;
    double average_error = 0.0;
    double matched_rate = 0.0;
    std::optional<double> visible_error;
    std::optional<double> occluded_error;
    std::optional<double> rotation_error;
    std::optional<double> translation_error;
    std::optional<double> scale_error;
};

struct BenchReport {
    SuiteConfig config;
    std::vector<SceneRow> rows;  // scene-major, variants in config order
    std::vector<VariantSummary> summary;
    std::string generated_at;
};

BenchReport run_suite(const SuiteConfig &config,
                      Execution exec = Execution::parallel);

std::vector<VariantSummary> summarize(const SuiteConfig &config,
                                      const std::vector<SceneRow> &rows);

nlohmann::json config_to_json(const SuiteConfig &config);
nlohmann::json report_to_json(const BenchReport &report);
std::string summary_table(const BenchReport &report);

struct CheckOutcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CheckThresholds {
    /// Required ratio of full to top-1 matched rate; unchecked when unset.
    std::optional<double> min_matched_rate_gap;
    /// Required fraction of scenes where full beats coarse on average error.
    double min_fine_win_fraction = 0.95;
};

/// Checks on a serialized report: full vs top-1 ordering (average_error <=,
/// matched_rate >=) when both ran, the optional matched-rate gap, and
/// per-scene full vs coarse wins on deformation suites.
std::vector<CheckOutcome> check_report(const nlohmann::json &report,
                                       const CheckThresholds &thresholds = {});

}  // namespace ktm::bench
