#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ktm/core.hpp"
#include "ktm/parallel.hpp"

namespace ktm {

/// Closed-form least-squares similarity (Umeyama): minimizes
/// sum |target_i - (s R source_i + t)|^2 with det(R) = +1. Scale is fixed
/// to 1 when `with_scale` is false. Throws DimensionError on length
/// mismatch and DegenerateGeometryError for fewer than three or collinear
/// source points.
SimilarityTransform umeyama(std::span<const Vec3> source,
                            std::span<const Vec3> target,
                            bool with_scale = true);

/// Feature-space nearest neighbor per keypoint, independently (the top-1
/// baseline). Collisions are allowed. The transform is identity and
/// structure residuals are measured against the raw template positions.
MatchResult top1_match(const KnowledgeTemplate &tmpl,
                       const SemanticPointCloud &cloud,
                       const MatchParams &params = {},
                       Execution exec = Execution::parallel);

/// Up to candidate_cap cloud points per keypoint within delta_f in feature
/// space, nearest first. delta_f = 0 is accepted here (exact matches only).
CandidateTable build_candidates(const KnowledgeTemplate &tmpl,
                                const SemanticPointCloud &cloud,
                                const MatchParams &params,
                                Execution exec = Execution::parallel);

struct CoarseMatch {
    SimilarityTransform transform;
    CorrespondenceSet correspondences;  // inliers of the winning hypothesis
    std::size_t valid_hypotheses = 0;
};

/// RANSAC over feature-gated correspondences. Each iteration draws three
/// distinct keypoints with candidates, one candidate each (probability
/// proportional to exp(-distance / delta_f)), and solves a similarity.
/// Hypotheses with scale outside [scale_min, scale_max] are dropped. A
/// keypoint is an inlier when one of its candidates lies within
/// ransac_inlier_radius of its predicted position. The best hypothesis
/// (most inliers, then lowest summed inlier distance, then lowest iteration)
/// is refit on its inliers.
///
/// Iteration i draws from its own RNG stream derived from (rng_seed, i), so
/// serial and parallel runs agree.
CoarseMatch coarse_match(const KnowledgeTemplate &tmpl,
                         const SemanticPointCloud &cloud,
                         const MatchParams &params,
                         Execution exec = Execution::parallel);

/// The coarse stage as a MatchResult: inlier keypoints Matched at their
/// correspondence, the rest Inferred at the transformed template position.
MatchResult coarse_result(const KnowledgeTemplate &tmpl,
                          const SemanticPointCloud &cloud,
                          const CoarseMatch &coarse,
                          const MatchParams &params);

/// The coarse stage read through its candidate lists: each keypoint Matched
/// at its best-feature candidate, or Inferred at the transformed template
/// position when it has none. Baseline for the fine stage's objective.
MatchResult coarse_top_picks(const KnowledgeTemplate &tmpl,
                             const SemanticPointCloud &cloud,
                             const CoarseMatch &coarse,
                             const MatchParams &params);

/// Per keypoint, anchor a = s R p + t from the coarse transform; among cloud
/// points within delta_p of the anchor pick the minimizer of
/// feature distance + beta * |p_i - a| (ties: lowest index). Keypoints with
/// an empty neighborhood are Inferred at the anchor.
MatchResult fine_match(const KnowledgeTemplate &tmpl,
                       const SemanticPointCloud &cloud,
                       const SimilarityTransform &coarse,
                       const CorrespondenceSet &correspondences,
                       const MatchParams &params);

/// coarse_match followed by fine_match.
MatchResult match_template(const KnowledgeTemplate &tmpl,
                           const SemanticPointCloud &cloud,
                           const MatchParams &params,
                           Execution exec = Execution::parallel);

struct ObjectiveValue {
    double value = 0.0;
    double feature_term = 0.0;
    double structure_term = 0.0;
    bool uses_stored_transform = false;
};

/// feature_term + beta * structure_term, where feature_term sums Matched
/// feature residuals and structure_term is sum_k |m_k - (s R p_k + t)| for
/// the better of the stored transform and a similarity refit on the
/// Matched pairs. With fewer than three Matched keypoints (or a degenerate
/// refit) only the stored transform is used and the flag is set.
ObjectiveValue evaluate_objective(const KnowledgeTemplate &tmpl,
                                  const MatchResult &result,
                                  double beta);

}  // namespace ktm
