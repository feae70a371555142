#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ktm/errors.hpp"

namespace ktm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using FeatureView = std::span<const double>;
using Metadata = std::map<std::string, std::string>;

namespace detail {
// Sequential sum of squares; every feature-distance path goes through here
// so that kernels and the public function agree bit-for-bit.
inline double squared_l2(const double *a, const double *b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}
}  // namespace detail

/// Euclidean distance between two descriptors of equal length.
double feature_distance(FeatureView a, FeatureView b);

/// Rotation angle (radians) of a rotation matrix. Accurate near zero, unlike
/// acos((trace - 1) / 2).
double rotation_angle(const Mat3 &rotation);

/// Angle of rotation_a^T * rotation_b.
double rotation_error(const Mat3 &rotation_a, const Mat3 &rotation_b);

/// True when the points span less than a plane's worth of directions: the
/// second singular value of the centered scatter is within `tolerance` of
/// zero relative to the first. Fewer than three points count as collinear.
bool is_collinear(std::span<const Vec3> points, double tolerance = 1e-9);

struct SemanticPoint {
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero();
    std::vector<double> feature;
};

/// Scene representation: positions (meters), colors in [0,1] and semantic
/// descriptors, stored structure-of-arrays. Point order is significant since
/// correspondences refer to points by index.
class SemanticPointCloud {
public:
    explicit SemanticPointCloud(std::size_t feature_dim,
                                bool features_normalized = false);
    SemanticPointCloud(std::size_t feature_dim,
                       std::vector<Vec3> positions,
                       std::vector<Vec3> colors,
                       std::vector<double> features,
                       bool features_normalized);

    static SemanticPointCloud from_points(
            std::size_t feature_dim,
            const std::vector<SemanticPoint> &points,
            bool features_normalized);

    std::size_t size() const { return positions_.size(); }
    bool empty() const { return positions_.empty(); }
    std::size_t feature_dim() const { return feature_dim_; }
    bool features_normalized() const { return features_normalized_; }

    const Vec3 &position(std::size_t i) const { return positions_[i]; }
    const Vec3 &color(std::size_t i) const { return colors_[i]; }
    FeatureView feature(std::size_t i) const {
        return {features_.data() + i * feature_dim_, feature_dim_};
    }
    SemanticPoint point(std::size_t i) const;

    const std::vector<Vec3> &positions() const { return positions_; }
    const std::vector<Vec3> &colors() const { return colors_; }
    /// Row-major size() x feature_dim() block.
    const std::vector<double> &feature_data() const { return features_; }

    bool operator==(const SemanticPointCloud &other) const;

private:
    void validate() const;

    std::size_t feature_dim_;
    bool features_normalized_;
    std::vector<Vec3> positions_;
    std::vector<Vec3> colors_;
    std::vector<double> features_;
};

/// Unit-normalizes every descriptor. Positions and colors are copied as is.
/// Throws ZeroFeatureError naming the first zero-norm descriptor.
SemanticPointCloud normalize_features(const SemanticPointCloud &cloud);

struct Keypoint {
    std::vector<double> feature;
    Vec3 position = Vec3::Zero();

    bool operator==(const Keypoint &other) const {
        return feature == other.feature && position == other.position;
    }
};

/// Category-level template: an ordered set of semantic keypoints. Templates
/// with fewer than three keypoints or collinear layouts can be constructed
/// (the top-1 baseline accepts them) but are reported by is_degenerate().
class KnowledgeTemplate {
public:
    static constexpr std::size_t kMaxCoarseKeypoints = 64;

    KnowledgeTemplate(std::size_t feature_dim,
                      std::vector<Keypoint> keypoints,
                      std::string category_label = {},
                      Metadata source_meta = {});

    std::size_t size() const { return keypoints_.size(); }
    std::size_t feature_dim() const { return feature_dim_; }
    const std::vector<Keypoint> &keypoints() const { return keypoints_; }
    const Keypoint &keypoint(std::size_t k) const { return keypoints_[k]; }
    FeatureView feature(std::size_t k) const { return keypoints_[k].feature; }
    const Vec3 &position(std::size_t k) const {
        return keypoints_[k].position;
    }
    std::vector<Vec3> positions() const;
    const std::string &category_label() const { return category_label_; }
    const Metadata &source_meta() const { return source_meta_; }

    bool is_collinear() const;
    bool is_degenerate() const { return size() < 3 || is_collinear(); }

    bool operator==(const KnowledgeTemplate &other) const = default;

private:
    std::size_t feature_dim_;
    std::vector<Keypoint> keypoints_;
    std::string category_label_;
    Metadata source_meta_;
};

/// x -> scale * rotation * x + translation. The rotation is validated to be
/// proper and orthonormal to 1e-9 on construction.
class SimilarityTransform {
public:
    static constexpr double kTolerance = 1e-9;

    SimilarityTransform();
    SimilarityTransform(const Mat3 &rotation, const Vec3 &translation,
                        double scale);

    static SimilarityTransform identity() { return {}; }

    const Mat3 &rotation() const { return rotation_; }
    const Vec3 &translation() const { return translation_; }
    double scale() const { return scale_; }

    Vec3 apply(const Vec3 &p) const {
        return scale_ * (rotation_ * p) + translation_;
    }

    bool operator==(const SimilarityTransform &other) const;

private:
    Mat3 rotation_;
    Vec3 translation_;
    double scale_;
};

inline Vec3 apply_transform(const SimilarityTransform &t, const Vec3 &p) {
    return t.apply(p);
}

/// Returns T such that T(p) == second(first(p)).
SimilarityTransform compose(const SimilarityTransform &second,
                            const SimilarityTransform &first);

SimilarityTransform inverse(const SimilarityTransform &t);

struct MatchParams {
    double beta = 10.0;                  // per meter
    double delta_f = 0.6;                // on unit-normalized features
    double delta_p = 0.05;               // meters
    std::size_t ransac_iterations = 512;
    double ransac_inlier_radius = 0.02;  // meters
    std::size_t candidate_cap = 50;
    double scale_min = 0.5;
    double scale_max = 2.0;
    std::uint64_t rng_seed = 0;

    /// Throws ValidationError when a threshold is non-positive or the
    /// scale bounds are inverted.
    void validate() const;

    bool operator==(const MatchParams &) const = default;
};

/// One template keypoint's candidate in the scene: a cloud index and its
/// feature distance to the keypoint.
struct Candidate {
    std::size_t index;
    double distance;

    bool operator==(const Candidate &) const = default;
};

/// Per template keypoint, candidates sorted by (distance, index).
using CandidateTable = std::vector<std::vector<Candidate>>;

struct Correspondence {
    std::size_t template_index;
    std::size_t cloud_index;

    bool operator==(const Correspondence &) const = default;
};

/// At most one entry per template keypoint, sorted by template index.
using CorrespondenceSet = std::vector<Correspondence>;

enum class MatchStatus { matched, inferred };

struct KeypointMatch {
    MatchStatus status = MatchStatus::inferred;
    std::size_t cloud_index = 0;  // meaningful only when matched
    Vec3 position = Vec3::Zero();
    double feature_residual = 0.0;
    double structure_residual = 0.0;

    bool matched() const { return status == MatchStatus::matched; }
    bool operator==(const KeypointMatch &) const = default;
};

struct MatchResult {
    std::vector<KeypointMatch> keypoints;  // template order
    SimilarityTransform transform;
    std::size_t inlier_count = 0;
    double objective_value = 0.0;
    /// Set when fewer than three keypoints were matched and the structure
    /// term had to be measured against the stored transform.
    bool objective_uses_stored_transform = false;

    bool operator==(const MatchResult &) const = default;
};

}  // namespace ktm
