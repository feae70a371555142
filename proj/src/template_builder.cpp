#include "ktm/template_builder.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "ktm/kernels.hpp"

namespace ktm {

namespace {

constexpr std::size_t kMinAdvisedKeypoints = 3;
constexpr std::size_t kMaxAdvisedKeypoints = 20;
constexpr double kDuplicateFeatureDistance = 0.05;
constexpr double kNearCollinearRatio = 1e-3;

void reject_collinear(const KnowledgeTemplate &tmpl) {
    if (tmpl.size() >= 3 && tmpl.is_collinear()) {
        throw DegenerateGeometryError(
                "template keypoints are collinear; coarse matching cannot "
                "fix a rotation from them");
    }
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

void FpsWeights::validate() const {
    if (!(position >= 0.0) || !(color >= 0.0) || !(feature >= 0.0)) {
        throw ValidationError("FPS weights must be nonnegative");
    }
    if (!(position + color + feature > 0.0)) {
        throw ValidationError("FPS weights must not all be zero");
    }
}

std::size_t centroid_nearest_index(const SemanticPointCloud &cloud) {
    if (cloud.empty()) throw EmptyCloudError("cloud is empty");
    Vec3 centroid = Vec3::Zero();
    for (const auto &p : cloud.positions()) centroid += p;
    centroid /= static_cast<double>(cloud.size());
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double d = (cloud.position(i) - centroid).squaredNorm();
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

double bounding_diagonal(const SemanticPointCloud &cloud) {
    if (cloud.empty()) return 1.0;
    Vec3 lo = cloud.position(0), hi = cloud.position(0);
    for (const auto &p : cloud.positions()) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double diagonal = (hi - lo).norm();
    return diagonal > 0.0 ? diagonal : 1.0;
}

KnowledgeTemplate fps_sample(const SemanticPointCloud &cloud,
                             std::size_t k,
                             const FpsWeights &weights,
                             std::optional<std::size_t> seed_index,
                             const std::string &category_label,
                             Execution exec) {
    weights.validate();
    if (cloud.empty()) throw EmptyCloudError("cannot sample from an empty cloud");
    if (k == 0) throw ValidationError("k must be positive");
    if (k > cloud.size()) {
        throw InsufficientPointsError("requested " + std::to_string(k) +
                                      " keypoints from a cloud of " +
                                      std::to_string(cloud.size()));
    }
    const std::size_t first = seed_index ? *seed_index
                                         : centroid_nearest_index(cloud);
    if (first >= cloud.size()) {
        throw IndexError("seed index " + std::to_string(first) +
                                 " out of range",
                         0);
    }
    const kernels::JointMetric metric(cloud, bounding_diagonal(cloud),
                                      weights.position, weights.color,
                                      weights.feature);
    const auto order = kernels::farthest_point_order(metric, k, first, exec);

    std::vector<Keypoint> keypoints;
    keypoints.reserve(order.size());
    for (std::size_t i : order) {
        const auto f = cloud.feature(i);
        keypoints.push_back({std::vector<double>(f.begin(), f.end()),
                             cloud.position(i)});
    }
    Metadata meta{{"sampling", "fps"},
                  {"k", std::to_string(k)},
                  {"seed_index", std::to_string(first)},
                  {"weights", format_double(weights.position) + "," +
                                      format_double(weights.color) + "," +
                                      format_double(weights.feature)}};
    KnowledgeTemplate tmpl(cloud.feature_dim(), std::move(keypoints),
                           category_label, std::move(meta));
    reject_collinear(tmpl);
    return tmpl;
}

KnowledgeTemplate build_from_annotations(
        const SemanticPointCloud &cloud,
        const std::vector<Annotation> &annotations,
        const std::string &category_label,
        const std::vector<PixelCoord> *pixel_map) {
    if (pixel_map && pixel_map->size() != cloud.size()) {
        throw DimensionError("pixel map length differs from cloud size",
                             pixel_map->size(), cloud.size());
    }
    std::vector<std::size_t> indices;
    indices.reserve(annotations.size());
    for (std::size_t entry = 0; entry < annotations.size(); ++entry) {
        const auto &a = annotations[entry];
        std::size_t index = 0;
        if (const auto *i = std::get_if<std::size_t>(&a)) {
            if (*i >= cloud.size()) {
                throw IndexError("annotation " + std::to_string(entry) +
                                         ": index " + std::to_string(*i) +
                                         " out of range for cloud of " +
                                         std::to_string(cloud.size()),
                                 entry);
            }
            index = *i;
        } else {
            const auto px = std::get<PixelCoord>(a);
            if (!pixel_map) {
                throw IndexError("annotation " + std::to_string(entry) +
                                         ": pixel annotations need a pixel map",
                                 entry);
            }
            bool found = false;
            for (std::size_t i = 0; i < pixel_map->size(); ++i) {
                if ((*pixel_map)[i] == px) {
                    index = i;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw IndexError("annotation " + std::to_string(entry) +
                                         ": pixel (" + std::to_string(px.u) +
                                         ", " + std::to_string(px.v) +
                                         ") has no cloud point",
                                 entry);
            }
        }
        for (std::size_t prior = 0; prior < indices.size(); ++prior) {
            if (indices[prior] == index) {
                throw DuplicateAnnotationError(
                        "annotation " + std::to_string(entry) +
                                " repeats cloud point " +
                                std::to_string(index) + " (annotation " +
                                std::to_string(prior) + ")",
                        entry);
            }
        }
        indices.push_back(index);
    }

    std::vector<Keypoint> keypoints;
    keypoints.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto f = cloud.feature(i);
        keypoints.push_back({std::vector<double>(f.begin(), f.end()),
                             cloud.position(i)});
    }
    KnowledgeTemplate tmpl(cloud.feature_dim(), std::move(keypoints),
                           category_label,
                           {{"sampling", "annotation"},
                            {"k", std::to_string(indices.size())}});
    reject_collinear(tmpl);
    return tmpl;
}

const char *to_string(DiagnosticCode code) {
    switch (code) {
        case DiagnosticCode::keypoint_count:
            return "keypoint_count";
        case DiagnosticCode::near_collinear:
            return "near_collinear";
        case DiagnosticCode::duplicate_features:
            return "duplicate_features";
    }
    return "unknown";
}

std::vector<Diagnostic> validate_template(const KnowledgeTemplate &tmpl) {
    std::vector<Diagnostic> out;
    const std::size_t K = tmpl.size();
    if (K < kMinAdvisedKeypoints || K > kMaxAdvisedKeypoints) {
        out.push_back({DiagnosticCode::keypoint_count,
                       "template has " + std::to_string(K) +
                               " keypoints; 3-20 is the usual range"});
    }
    if (K >= 3) {
        const auto positions = tmpl.positions();
        if (is_collinear(positions, kNearCollinearRatio)) {
            out.push_back({DiagnosticCode::near_collinear,
                           "keypoint positions are (nearly) collinear"});
        }
    }

    std::vector<std::vector<double>> unit(K);
    for (std::size_t k = 0; k < K; ++k) {
        unit[k] = tmpl.keypoint(k).feature;
        double norm_sq = 0.0;
        for (double v : unit[k]) norm_sq += v * v;
        if (norm_sq > 0.0) {
            const double norm = std::sqrt(norm_sq);
            for (double &v : unit[k]) v /= norm;
        }
    }
    for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = a + 1; b < K; ++b) {
            const double d = feature_distance(unit[a], unit[b]);
            if (d < kDuplicateFeatureDistance) {
                out.push_back({DiagnosticCode::duplicate_features,
                               "keypoints " + std::to_string(a) + " and " +
                                       std::to_string(b) +
                                       " have near-identical features "
                                       "(distance " +
                                       format_double(d) + ")"});
            }
        }
    }
    return out;
}

}  // namespace ktm
