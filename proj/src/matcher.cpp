#include "ktm/matcher.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <unordered_map>

#include "ktm/kernels.hpp"
#include "ktm/rng.hpp"

namespace ktm {

// --- Umeyama ----------------------------------------------------------------

SimilarityTransform umeyama(std::span<const Vec3> source,
                            std::span<const Vec3> target,
                            bool with_scale) {
    if (source.size() != target.size()) {
        throw DimensionError("umeyama point count mismatch", source.size(),
                             target.size());
    }
    const std::size_t n = source.size();
    if (n < 3) {
        throw DegenerateGeometryError("umeyama needs at least 3 point pairs");
    }
    if (is_collinear(source)) {
        throw DegenerateGeometryError("umeyama source points are collinear");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    Vec3 mean_src = Vec3::Zero(), mean_dst = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mean_src += source[i];
        mean_dst += target[i];
    }
    mean_src *= inv_n;
    mean_dst *= inv_n;

    Mat3 sigma = Mat3::Zero();
    double var_src = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 xs = source[i] - mean_src;
        const Vec3 xd = target[i] - mean_dst;
        sigma += xd * xs.transpose();
        var_src += xs.squaredNorm();
    }
    sigma *= inv_n;
    var_src *= inv_n;

    const Eigen::JacobiSVD<Mat3> svd(sigma,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 signs = Vec3::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
        signs(2) = -1.0;
    }
    const Mat3 rotation =
            svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
    double scale = 1.0;
    if (with_scale) {
        scale = svd.singularValues().dot(signs) / var_src;
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            throw DegenerateGeometryError(
                    "umeyama target points are degenerate (non-positive "
                    "scale)");
        }
    }
    const Vec3 translation = mean_dst - scale * (rotation * mean_src);
    return {rotation, translation, scale};
}

// --- top-1 ------------------------------------------------------------------

namespace {

void check_dims(const KnowledgeTemplate &tmpl, const SemanticPointCloud &cloud) {
    if (tmpl.feature_dim() != cloud.feature_dim()) {
        throw DimensionError("template and cloud feature_dim differ",
                             tmpl.feature_dim(), cloud.feature_dim());
    }
}

KeypointMatch matched_at(const KnowledgeTemplate &tmpl,
                         const SemanticPointCloud &cloud,
                         std::size_t k,
                         std::size_t index,
                         const Vec3 &anchor) {
    KeypointMatch m;
    m.status = MatchStatus::matched;
    m.cloud_index = index;
    m.position = cloud.position(index);
    m.feature_residual = feature_distance(cloud.feature(index), tmpl.feature(k));
    m.structure_residual = (m.position - anchor).norm();
    return m;
}

KeypointMatch inferred_at(const Vec3 &anchor) {
    KeypointMatch m;
    m.status = MatchStatus::inferred;
    m.position = anchor;
    return m;
}

}  // namespace

MatchResult top1_match(const KnowledgeTemplate &tmpl,
                       const SemanticPointCloud &cloud,
                       const MatchParams &params,
                       Execution exec) {
    check_dims(tmpl, cloud);
    if (cloud.empty()) throw EmptyCloudError("top-1 matching on an empty cloud");
    const auto nearest = kernels::nearest_features(tmpl, cloud, exec);
    MatchResult result;
    result.transform = SimilarityTransform::identity();
    result.keypoints.reserve(tmpl.size());
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        result.keypoints.push_back(
                matched_at(tmpl, cloud, k, nearest[k].index, tmpl.position(k)));
    }
    const auto objective = evaluate_objective(tmpl, result, params.beta);
    result.objective_value = objective.value;
    result.objective_uses_stored_transform = objective.uses_stored_transform;
    return result;
}

CandidateTable build_candidates(const KnowledgeTemplate &tmpl,
                                const SemanticPointCloud &cloud,
                                const MatchParams &params,
                                Execution exec) {
    check_dims(tmpl, cloud);
    if (!(params.delta_f >= 0.0)) {
        throw ValidationError("delta_f must be nonnegative");
    }
    return kernels::gated_features(tmpl, cloud, params.delta_f,
                                   params.candidate_cap, exec);
}

// --- coarse (RANSAC) --------------------------------------------------------

namespace {

struct Hypothesis {
    bool valid = false;
    SimilarityTransform transform;
    std::size_t inliers = 0;
    double residual = 0.0;
};

bool better(const Hypothesis &a, const Hypothesis &b) {
    if (a.valid != b.valid) return a.valid;
    if (a.inliers != b.inliers) return a.inliers > b.inliers;
    return a.residual < b.residual;
}

/// For each eligible keypoint, the candidate nearest its predicted position
/// if within `radius`; -1 otherwise.
struct InlierScan {
    std::vector<long> choice;
    std::size_t inliers = 0;
    double residual = 0.0;
};

InlierScan scan_inliers(const std::vector<Vec3> &template_positions,
                        const SemanticPointCloud &cloud,
                        const CandidateTable &candidates,
                        const std::vector<std::size_t> &eligible,
                        const SimilarityTransform &transform,
                        double radius) {
    InlierScan scan;
    scan.choice.assign(template_positions.size(), -1);
    for (std::size_t k : eligible) {
        const Vec3 predicted = transform.apply(template_positions[k]);
        double best = std::numeric_limits<double>::infinity();
        long best_index = -1;
        for (const auto &c : candidates[k]) {
            const double d = (cloud.position(c.index) - predicted).norm();
            if (d > radius) continue;
            if (d < best || (d == best && static_cast<long>(c.index) < best_index)) {
                best = d;
                best_index = static_cast<long>(c.index);
            }
        }
        if (best_index >= 0) {
            scan.choice[k] = best_index;
            ++scan.inliers;
            scan.residual += best;
        }
    }
    return scan;
}

std::size_t sample_candidate(const std::vector<Candidate> &list,
                             double delta_f,
                             std::mt19937_64 &rng) {
    if (list.size() == 1) return 0;
    std::vector<double> cumulative(list.size());
    double total = 0.0;
    for (std::size_t j = 0; j < list.size(); ++j) {
        total += std::exp(-list[j].distance / delta_f);
        cumulative[j] = total;
    }
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(
            static_cast<std::size_t>(it - cumulative.begin()), list.size() - 1);
}

}  // namespace

CoarseMatch coarse_match(const KnowledgeTemplate &tmpl,
                         const SemanticPointCloud &cloud,
                         const MatchParams &params,
                         Execution exec) {
    params.validate();
    check_dims(tmpl, cloud);
    const std::size_t K = tmpl.size();
    if (K < 3 || K > KnowledgeTemplate::kMaxCoarseKeypoints) {
        throw DegenerateTemplateError(
                "coarse matching needs 3.." +
                std::to_string(KnowledgeTemplate::kMaxCoarseKeypoints) +
                " keypoints, template has " + std::to_string(K));
    }
    if (tmpl.is_collinear()) {
        throw DegenerateTemplateError("template keypoints are collinear");
    }

    const CandidateTable candidates = build_candidates(tmpl, cloud, params, exec);
    std::vector<std::size_t> eligible;
    for (std::size_t k = 0; k < K; ++k) {
        if (!candidates[k].empty()) eligible.push_back(k);
    }
    if (eligible.size() < 3) {
        throw InsufficientCandidatesError(
                "only " + std::to_string(eligible.size()) +
                " keypoints have candidates within delta_f = " +
                std::to_string(params.delta_f));
    }
    const std::vector<Vec3> template_positions = tmpl.positions();

    std::vector<Hypothesis> hypotheses(params.ransac_iterations);
    parallel_for(
            params.ransac_iterations,
            [&](std::size_t iteration) {
                std::mt19937_64 rng(stream_seed(params.rng_seed, iteration));
                std::vector<std::size_t> pool = eligible;
                std::array<Vec3, 3> src, dst;
                for (std::size_t j = 0; j < 3; ++j) {
                    std::uniform_int_distribution<std::size_t> pick(
                            j, pool.size() - 1);
                    std::swap(pool[j], pool[pick(rng)]);
                    const std::size_t k = pool[j];
                    const auto &list = candidates[k];
                    const std::size_t c =
                            sample_candidate(list, params.delta_f, rng);
                    src[j] = template_positions[k];
                    dst[j] = cloud.position(list[c].index);
                }
                Hypothesis &h = hypotheses[iteration];
                try {
                    h.transform = umeyama(src, dst, true);
                } catch (const DegenerateGeometryError &) {
                    return;
                }
                const double s = h.transform.scale();
                if (s < params.scale_min || s > params.scale_max) return;
                const InlierScan scan =
                        scan_inliers(template_positions, cloud, candidates,
                                     eligible, h.transform,
                                     params.ransac_inlier_radius);
                h.valid = true;
                h.inliers = scan.inliers;
                h.residual = scan.residual;
            },
            exec);

    // Serial reduction in iteration order keeps the result independent of
    // the thread schedule.
    std::size_t best = 0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        if (hypotheses[i].valid) ++valid;
        if (better(hypotheses[i], hypotheses[best])) best = i;
    }
    const Hypothesis &winner = hypotheses[best];
    if (!winner.valid || winner.inliers < 3) {
        throw NoConsensusError("no RANSAC hypothesis reached 3 inliers (" +
                               std::to_string(valid) + " valid of " +
                               std::to_string(hypotheses.size()) + ")");
    }

    const InlierScan scan =
            scan_inliers(template_positions, cloud, candidates, eligible,
                         winner.transform, params.ransac_inlier_radius);
    CoarseMatch out;
    out.valid_hypotheses = valid;
    std::vector<Vec3> src, dst;
    for (std::size_t k = 0; k < K; ++k) {
        if (scan.choice[k] < 0) continue;
        const auto index = static_cast<std::size_t>(scan.choice[k]);
        out.correspondences.push_back({k, index});
        src.push_back(template_positions[k]);
        dst.push_back(cloud.position(index));
    }
    try {
        out.transform = umeyama(src, dst, true);
    } catch (const DegenerateGeometryError &) {
        out.transform = winner.transform;
    }
    return out;
}

MatchResult coarse_result(const KnowledgeTemplate &tmpl,
                          const SemanticPointCloud &cloud,
                          const CoarseMatch &coarse,
                          const MatchParams &params) {
    check_dims(tmpl, cloud);
    MatchResult result;
    result.transform = coarse.transform;
    result.inlier_count = coarse.correspondences.size();
    result.keypoints.resize(tmpl.size());
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        result.keypoints[k] = inferred_at(coarse.transform.apply(tmpl.position(k)));
    }
    for (const auto &c : coarse.correspondences) {
        result.keypoints[c.template_index] =
                matched_at(tmpl, cloud, c.template_index, c.cloud_index,
                           coarse.transform.apply(tmpl.position(c.template_index)));
    }
    const auto objective = evaluate_objective(tmpl, result, params.beta);
    result.objective_value = objective.value;
    result.objective_uses_stored_transform = objective.uses_stored_transform;
    return result;
}

MatchResult coarse_top_picks(const KnowledgeTemplate &tmpl,
                             const SemanticPointCloud &cloud,
                             const CoarseMatch &coarse,
                             const MatchParams &params) {
    check_dims(tmpl, cloud);
    const auto candidates = build_candidates(tmpl, cloud, params, Execution::serial);
    MatchResult result;
    result.transform = coarse.transform;
    result.inlier_count = coarse.correspondences.size();
    result.keypoints.reserve(tmpl.size());
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        const Vec3 anchor = coarse.transform.apply(tmpl.position(k));
        if (candidates[k].empty()) {
            result.keypoints.push_back(inferred_at(anchor));
        } else {
            result.keypoints.push_back(
                    matched_at(tmpl, cloud, k, candidates[k].front().index, anchor));
        }
    }
    const auto objective = evaluate_objective(tmpl, result, params.beta);
    result.objective_value = objective.value;
    result.objective_uses_stored_transform = objective.uses_stored_transform;
    return result;
}

// --- fine -------------------------------------------------------------------

namespace {

/// Uniform voxel hash over cloud positions for radius queries.
class VoxelGrid {
public:
    VoxelGrid(const std::vector<Vec3> &points, double cell)
        : points_(&points), cell_(cell) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            cells_[key_of(points[i])].push_back(i);
        }
    }

    /// Calls f(i, distance) for every point with distance <= radius.
    template <typename F>
    void for_each_within(const Vec3 &center, double radius, F &&f) const {
        const Key lo = key_of(center - Vec3::Constant(radius));
        const Key hi = key_of(center + Vec3::Constant(radius));
        // One extra cell of slack on each side guards against rounding in
        // the key computation.
        for (std::int64_t x = lo.x - 1; x <= hi.x + 1; ++x) {
            for (std::int64_t y = lo.y - 1; y <= hi.y + 1; ++y) {
                for (std::int64_t z = lo.z - 1; z <= hi.z + 1; ++z) {
                    const auto it = cells_.find({x, y, z});
                    if (it == cells_.end()) continue;
                    for (std::size_t i : it->second) {
                        const double d = ((*points_)[i] - center).norm();
                        if (d <= radius) f(i, d);
                    }
                }
            }
        }
    }

private:
    struct Key {
        std::int64_t x, y, z;
        bool operator==(const Key &) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key &k) const {
            std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
            h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL;
            h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL;
            return static_cast<std::size_t>(h ^ (h >> 29));
        }
    };

    Key key_of(const Vec3 &p) const {
        return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
                static_cast<std::int64_t>(std::floor(p.y() / cell_)),
                static_cast<std::int64_t>(std::floor(p.z() / cell_))};
    }

    const std::vector<Vec3> *points_;
    double cell_;
    std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells_;
};

}  // namespace

MatchResult fine_match(const KnowledgeTemplate &tmpl,
                       const SemanticPointCloud &cloud,
                       const SimilarityTransform &coarse,
                       const CorrespondenceSet &correspondences,
                       const MatchParams &params) {
    params.validate();
    check_dims(tmpl, cloud);
    const VoxelGrid grid(cloud.positions(), params.delta_p);
    MatchResult result;
    result.transform = coarse;
    result.inlier_count = correspondences.size();
    result.keypoints.reserve(tmpl.size());
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        const Vec3 anchor = coarse.apply(tmpl.position(k));
        const auto feature = tmpl.feature(k);
        double best_score = std::numeric_limits<double>::infinity();
        std::size_t best = cloud.size();
        grid.for_each_within(anchor, params.delta_p,
                             [&](std::size_t i, double distance) {
                                 const double score =
                                         feature_distance(cloud.feature(i),
                                                          feature) +
                                         params.beta * distance;
                                 if (score < best_score ||
                                     (score == best_score && i < best)) {
                                     best_score = score;
                                     best = i;
                                 }
                             });
        if (best == cloud.size()) {
            result.keypoints.push_back(inferred_at(anchor));
        } else {
            result.keypoints.push_back(matched_at(tmpl, cloud, k, best, anchor));
        }
    }
    const auto objective = evaluate_objective(tmpl, result, params.beta);
    result.objective_value = objective.value;
    result.objective_uses_stored_transform = objective.uses_stored_transform;
    return result;
}

MatchResult match_template(const KnowledgeTemplate &tmpl,
                           const SemanticPointCloud &cloud,
                           const MatchParams &params,
                           Execution exec) {
    const CoarseMatch coarse = coarse_match(tmpl, cloud, params, exec);
    return fine_match(tmpl, cloud, coarse.transform, coarse.correspondences,
                      params);
}

// --- objective --------------------------------------------------------------

ObjectiveValue evaluate_objective(const KnowledgeTemplate &tmpl,
                                  const MatchResult &result,
                                  double beta) {
    if (result.keypoints.size() != tmpl.size()) {
        throw DimensionError("match result size differs from template size",
                             result.keypoints.size(), tmpl.size());
    }
    ObjectiveValue out;
    std::vector<Vec3> matched_src, matched_dst;
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        const auto &m = result.keypoints[k];
        if (!m.matched()) continue;
        out.feature_term += m.feature_residual;
        matched_src.push_back(tmpl.position(k));
        matched_dst.push_back(m.position);
    }
    auto structure_under = [&](const SimilarityTransform &t) {
        double sum = 0.0;
        for (std::size_t k = 0; k < tmpl.size(); ++k) {
            sum += (result.keypoints[k].position - t.apply(tmpl.position(k))).norm();
        }
        return sum;
    };
    out.structure_term = structure_under(result.transform);
    out.uses_stored_transform = true;
    if (matched_src.size() >= 3) {
        try {
            const auto refit = umeyama(matched_src, matched_dst, true);
            out.structure_term = std::min(out.structure_term, structure_under(refit));
            out.uses_stored_transform = false;
        } catch (const DegenerateGeometryError &) {
        }
    }
    out.value = out.feature_term + beta * out.structure_term;
    return out;
}

}  // namespace ktm
