#include "ktm/core.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace ktm {

double feature_distance(FeatureView a, FeatureView b) {
    if (a.size() != b.size()) {
        throw DimensionError("feature length mismatch", a.size(), b.size());
    }
    if (a.empty()) {
        throw DimensionError("feature vectors must be non-empty");
    }
    return std::sqrt(detail::squared_l2(a.data(), b.data(), a.size()));
}

double rotation_angle(const Mat3 &rotation) {
    const Vec3 axis(rotation(2, 1) - rotation(1, 2),
                    rotation(0, 2) - rotation(2, 0),
                    rotation(1, 0) - rotation(0, 1));
    const double sin_term = 0.5 * axis.norm();
    const double cos_term = 0.5 * (rotation.trace() - 1.0);
    return std::atan2(sin_term, cos_term);
}

double rotation_error(const Mat3 &rotation_a, const Mat3 &rotation_b) {
    return rotation_angle(rotation_a.transpose() * rotation_b);
}

bool is_collinear(std::span<const Vec3> points, double tolerance) {
    if (points.size() < 3) return true;
    Vec3 mean = Vec3::Zero();
    for (const auto &p : points) mean += p;
    mean /= static_cast<double>(points.size());
    Mat3 scatter = Mat3::Zero();
    for (const auto &p : points) {
        const Vec3 d = p - mean;
        scatter += d * d.transpose();
    }
    const Vec3 sv = Eigen::JacobiSVD<Mat3>(scatter).singularValues();
    if (sv(0) <= 0.0) return true;
    return sv(1) <= tolerance * sv(0);
}

// --- SemanticPointCloud -----------------------------------------------------

SemanticPointCloud::SemanticPointCloud(std::size_t feature_dim,
                                       bool features_normalized)
    : feature_dim_(feature_dim), features_normalized_(features_normalized) {
    if (feature_dim_ == 0) {
        throw ValidationError("feature_dim must be positive");
    }
}

SemanticPointCloud::SemanticPointCloud(std::size_t feature_dim,
                                       std::vector<Vec3> positions,
                                       std::vector<Vec3> colors,
                                       std::vector<double> features,
                                       bool features_normalized)
    : feature_dim_(feature_dim),
      features_normalized_(features_normalized),
      positions_(std::move(positions)),
      colors_(std::move(colors)),
      features_(std::move(features)) {
    validate();
}

SemanticPointCloud SemanticPointCloud::from_points(
        std::size_t feature_dim,
        const std::vector<SemanticPoint> &points,
        bool features_normalized) {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;
    std::vector<double> features;
    positions.reserve(points.size());
    colors.reserve(points.size());
    features.reserve(points.size() * feature_dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto &p = points[i];
        if (p.feature.size() != feature_dim) {
            throw DimensionError("point " + std::to_string(i) +
                                         " feature length differs from "
                                         "feature_dim",
                                 p.feature.size(), feature_dim);
        }
        positions.push_back(p.position);
        colors.push_back(p.color);
        features.insert(features.end(), p.feature.begin(), p.feature.end());
    }
    return SemanticPointCloud(feature_dim, std::move(positions),
                              std::move(colors), std::move(features),
                              features_normalized);
}

void SemanticPointCloud::validate() const {
    if (feature_dim_ == 0) {
        throw ValidationError("feature_dim must be positive");
    }
    if (colors_.size() != positions_.size()) {
        throw DimensionError("color count differs from point count",
                             colors_.size(), positions_.size());
    }
    if (features_.size() != positions_.size() * feature_dim_) {
        throw DimensionError("feature block size differs from points x dim",
                             features_.size(), positions_.size() * feature_dim_);
    }
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        if (!positions_[i].allFinite()) {
            throw ValidationError("non-finite position at point " +
                                  std::to_string(i));
        }
        const Vec3 &c = colors_[i];
        if (!c.allFinite() || (c.array() < 0.0).any() ||
            (c.array() > 1.0).any()) {
            throw ValidationError("color outside [0,1] at point " +
                                  std::to_string(i));
        }
        const auto f = feature(i);
        double norm_sq = 0.0;
        for (double v : f) {
            if (!std::isfinite(v)) {
                throw ValidationError("non-finite feature at point " +
                                      std::to_string(i));
            }
            norm_sq += v * v;
        }
        if (features_normalized_ && std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6) {
            throw ValidationError("feature at point " + std::to_string(i) +
                                  " is not unit length but the cloud is "
                                  "flagged normalized");
        }
    }
}

SemanticPoint SemanticPointCloud::point(std::size_t i) const {
    const auto f = feature(i);
    return {positions_[i], colors_[i], std::vector<double>(f.begin(), f.end())};
}

bool SemanticPointCloud::operator==(const SemanticPointCloud &other) const {
    return feature_dim_ == other.feature_dim_ &&
           features_normalized_ == other.features_normalized_ &&
           positions_ == other.positions_ && colors_ == other.colors_ &&
           features_ == other.features_;
}

SemanticPointCloud normalize_features(const SemanticPointCloud &cloud) {
    const std::size_t dim = cloud.feature_dim();
    std::vector<double> features = cloud.feature_data();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        double *f = features.data() + i * dim;
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) norm_sq += f[j] * f[j];
        if (norm_sq == 0.0) throw ZeroFeatureError(i);
        const double norm = std::sqrt(norm_sq);
        for (std::size_t j = 0; j < dim; ++j) f[j] /= norm;
    }
    return SemanticPointCloud(dim, cloud.positions(), cloud.colors(),
                              std::move(features), true);
}

// --- KnowledgeTemplate ------------------------------------------------------

KnowledgeTemplate::KnowledgeTemplate(std::size_t feature_dim,
                                     std::vector<Keypoint> keypoints,
                                     std::string category_label,
                                     Metadata source_meta)
    : feature_dim_(feature_dim),
      keypoints_(std::move(keypoints)),
      category_label_(std::move(category_label)),
      source_meta_(std::move(source_meta)) {
    if (feature_dim_ == 0) {
        throw ValidationError("template feature_dim must be positive");
    }
    for (std::size_t k = 0; k < keypoints_.size(); ++k) {
        const auto &kp = keypoints_[k];
        if (kp.feature.size() != feature_dim_) {
            throw DimensionError("keypoint " + std::to_string(k) +
                                         " feature length differs from "
                                         "feature_dim",
                                 kp.feature.size(), feature_dim_);
        }
        if (!kp.position.allFinite()) {
            throw ValidationError("non-finite position at keypoint " +
                                  std::to_string(k));
        }
        for (double v : kp.feature) {
            if (!std::isfinite(v)) {
                throw ValidationError("non-finite feature at keypoint " +
                                      std::to_string(k));
            }
        }
    }
}

std::vector<Vec3> KnowledgeTemplate::positions() const {
    std::vector<Vec3> out;
    out.reserve(keypoints_.size());
    for (const auto &kp : keypoints_) out.push_back(kp.position);
    return out;
}

bool KnowledgeTemplate::is_collinear() const {
    const auto pts = positions();
    return ktm::is_collinear(pts);
}

// --- SimilarityTransform ----------------------------------------------------

SimilarityTransform::SimilarityTransform()
    : rotation_(Mat3::Identity()), translation_(Vec3::Zero()), scale_(1.0) {}

SimilarityTransform::SimilarityTransform(const Mat3 &rotation,
                                         const Vec3 &translation,
                                         double scale)
    : rotation_(rotation), translation_(translation), scale_(scale) {
    if (!rotation_.allFinite() || !translation_.allFinite()) {
        throw ValidationError("transform has non-finite entries");
    }
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
        throw ValidationError("transform scale must be positive and finite");
    }
    const Mat3 gram = rotation_.transpose() * rotation_;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > kTolerance) {
        throw ValidationError("rotation is not orthonormal");
    }
    if (std::abs(rotation_.determinant() - 1.0) > kTolerance) {
        throw ValidationError("rotation determinant is not +1");
    }
}

bool SimilarityTransform::operator==(const SimilarityTransform &other) const {
    return rotation_ == other.rotation_ &&
           translation_ == other.translation_ && scale_ == other.scale_;
}

SimilarityTransform compose(const SimilarityTransform &second,
                            const SimilarityTransform &first) {
    const Mat3 rotation = second.rotation() * first.rotation();
    const Vec3 translation =
            second.scale() * (second.rotation() * first.translation()) +
            second.translation();
    return {rotation, translation, second.scale() * first.scale()};
}

SimilarityTransform inverse(const SimilarityTransform &t) {
    const Mat3 rt = t.rotation().transpose();
    const double inv_scale = 1.0 / t.scale();
    return {rt, -inv_scale * (rt * t.translation()), inv_scale};
}

// --- MatchParams ------------------------------------------------------------

void MatchParams::validate() const {
    auto positive = [](double v, const char *name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError(std::string(name) +
                                  " must be positive and finite");
        }
    };
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw ValidationError("beta must be nonnegative and finite");
    }
    positive(delta_f, "delta_f");
    positive(delta_p, "delta_p");
    positive(ransac_inlier_radius, "ransac_inlier_radius");
    positive(scale_min, "scale_min");
    positive(scale_max, "scale_max");
    if (ransac_iterations == 0) {
        throw ValidationError("ransac_iterations must be positive");
    }
    if (candidate_cap == 0) {
        throw ValidationError("candidate_cap must be positive");
    }
    if (scale_min > scale_max) {
        throw ValidationError("scale_min exceeds scale_max");
    }
}

}  // namespace ktm
