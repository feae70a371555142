#pragma once

#include <cstddef>
#include <vector>

#include "ktm/core.hpp"
#include "ktm/parallel.hpp"

namespace ktm::kernels {

// Each kernel has an OpenMP implementation and a plain serial reference.
// The two must agree bit-for-bit; tests compare them and bench/ times them.

/// Per template keypoint, the cloud point with the smallest feature
/// distance (ties: lowest index). Requires a non-empty cloud.
std::vector<Candidate> nearest_features_serial(const KnowledgeTemplate &tmpl,
                                               const SemanticPointCloud &cloud);
std::vector<Candidate> nearest_features_parallel(
        const KnowledgeTemplate &tmpl, const SemanticPointCloud &cloud);

/// Per template keypoint, up to `cap` cloud points with feature distance
/// <= gate, ordered by (distance, index).
CandidateTable gated_features_serial(const KnowledgeTemplate &tmpl,
                                     const SemanticPointCloud &cloud,
                                     double gate,
                                     std::size_t cap);
CandidateTable gated_features_parallel(const KnowledgeTemplate &tmpl,
                                       const SemanticPointCloud &cloud,
                                       double gate,
                                       std::size_t cap);

/// Joint position/color/feature metric used by farthest point sampling:
///   sqrt(wp * |p~a - p~b|^2 + wc * |ca - cb|^2 + wf * |fa - fb|^2)
/// with p~ = p / position_scale. Squared channel norms are summed
/// component-wise in x, y, z (resp. feature) order.
class JointMetric {
public:
    JointMetric(const SemanticPointCloud &cloud,
                double position_scale,
                double position_weight,
                double color_weight,
                double feature_weight);

    std::size_t size() const { return cloud_->size(); }
    double distance(std::size_t a, std::size_t b) const;

private:
    const SemanticPointCloud *cloud_;
    std::vector<Vec3> scaled_positions_;
    double position_weight_;
    double color_weight_;
    double feature_weight_;
};

/// Greedy farthest point order: starts at `first`, then repeatedly takes
/// the unselected point maximizing its minimum distance to the selection
/// (ties: lowest index). Returns `k` indices.
std::vector<std::size_t> farthest_point_order_serial(const JointMetric &metric,
                                                     std::size_t k,
                                                     std::size_t first);
std::vector<std::size_t> farthest_point_order_parallel(
        const JointMetric &metric, std::size_t k, std::size_t first);

inline std::vector<Candidate> nearest_features(const KnowledgeTemplate &tmpl,
                                               const SemanticPointCloud &cloud,
                                               Execution exec) {
    return exec == Execution::serial ? nearest_features_serial(tmpl, cloud)
                                     : nearest_features_parallel(tmpl, cloud);
}

inline CandidateTable gated_features(const KnowledgeTemplate &tmpl,
                                     const SemanticPointCloud &cloud,
                                     double gate,
                                     std::size_t cap,
                                     Execution exec) {
    return exec == Execution::serial
                   ? gated_features_serial(tmpl, cloud, gate, cap)
                   : gated_features_parallel(tmpl, cloud, gate, cap);
}

inline std::vector<std::size_t> farthest_point_order(const JointMetric &metric,
                                                     std::size_t k,
                                                     std::size_t first,
                                                     Execution exec) {
    return exec == Execution::serial
                   ? farthest_point_order_serial(metric, k, first)
                   : farthest_point_order_parallel(metric, k, first);
}

}  // namespace ktm::kernels
