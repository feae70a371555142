#include "ktm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ktm::kernels {

namespace {

void check_dims(const KnowledgeTemplate &tmpl, const SemanticPointCloud &cloud) {
    if (tmpl.feature_dim() != cloud.feature_dim()) {
        throw DimensionError("template and cloud feature_dim differ",
                             tmpl.feature_dim(), cloud.feature_dim());
    }
}

bool candidate_less(const Candidate &a, const Candidate &b) {
    return a.distance < b.distance ||
           (a.distance == b.distance && a.index < b.index);
}

double distance_to(const KnowledgeTemplate &tmpl, std::size_t k,
                   const SemanticPointCloud &cloud, std::size_t i) {
    return std::sqrt(detail::squared_l2(tmpl.feature(k).data(),
                                        cloud.feature(i).data(),
                                        cloud.feature_dim()));
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// --- top-1 scan -------------------------------------------------------------

std::vector<Candidate> nearest_features_serial(const KnowledgeTemplate &tmpl,
                                               const SemanticPointCloud &cloud) {
    check_dims(tmpl, cloud);
    if (cloud.empty()) throw EmptyCloudError("nearest feature search on empty cloud");
    std::vector<Candidate> best(tmpl.size(), Candidate{0, kInf});
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double d = distance_to(tmpl, k, cloud, i);
            if (d < best[k].distance) best[k] = {i, d};
        }
    }
    return best;
}

std::vector<Candidate> nearest_features_parallel(
        const KnowledgeTemplate &tmpl, const SemanticPointCloud &cloud) {
    check_dims(tmpl, cloud);
    if (cloud.empty()) throw EmptyCloudError("nearest feature search on empty cloud");
    const std::size_t K = tmpl.size();
    const std::size_t parts = static_cast<std::size_t>(thread_count());
    std::vector<std::vector<Candidate>> partial(
            parts, std::vector<Candidate>(K, Candidate{0, kInf}));

#pragma omp parallel num_threads(static_cast<int>(parts))
    {
#ifdef _OPENMP
        const auto part = static_cast<std::size_t>(omp_get_thread_num());
        const auto team = static_cast<std::size_t>(omp_get_num_threads());
#else
        const std::size_t part = 0, team = 1;
#endif
        const Block block = block_of(cloud.size(), part, team);
        auto &best = partial[part];
        for (std::size_t i = block.begin; i < block.end; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const double d = distance_to(tmpl, k, cloud, i);
                if (d < best[k].distance) best[k] = {i, d};
            }
        }
    }

    // Blocks are ordered, so a strict comparison keeps the lowest index.
    std::vector<Candidate> best(K, Candidate{0, kInf});
    for (const auto &p : partial) {
        for (std::size_t k = 0; k < K; ++k) {
            if (candidate_less(p[k], best[k])) best[k] = p[k];
        }
    }
    return best;
}

// --- gated candidate lists --------------------------------------------------

CandidateTable gated_features_serial(const KnowledgeTemplate &tmpl,
                                     const SemanticPointCloud &cloud,
                                     double gate,
                                     std::size_t cap) {
    check_dims(tmpl, cloud);
    CandidateTable table(tmpl.size());
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        auto &list = table[k];
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double d = distance_to(tmpl, k, cloud, i);
            if (d <= gate) list.push_back({i, d});
        }
        std::sort(list.begin(), list.end(), candidate_less);
        if (list.size() > cap) list.resize(cap);
    }
    return table;
}

CandidateTable gated_features_parallel(const KnowledgeTemplate &tmpl,
                                       const SemanticPointCloud &cloud,
                                       double gate,
                                       std::size_t cap) {
    check_dims(tmpl, cloud);
    const std::size_t K = tmpl.size();
    const std::size_t parts = static_cast<std::size_t>(thread_count());
    std::vector<CandidateTable> partial(parts, CandidateTable(K));

#pragma omp parallel num_threads(static_cast<int>(parts))
    {
#ifdef _OPENMP
        const auto part = static_cast<std::size_t>(omp_get_thread_num());
        const auto team = static_cast<std::size_t>(omp_get_num_threads());
#else
        const std::size_t part = 0, team = 1;
#endif
        const Block block = block_of(cloud.size(), part, team);
        auto &local = partial[part];
        for (std::size_t i = block.begin; i < block.end; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const double d = distance_to(tmpl, k, cloud, i);
                if (d <= gate) local[k].push_back({i, d});
            }
        }
        for (auto &list : local) {
            if (list.size() > cap) {
                std::partial_sort(list.begin(),
                                  list.begin() + static_cast<long>(cap),
                                  list.end(), candidate_less);
                list.resize(cap);
            }
        }
    }

    CandidateTable table(K);
    for (std::size_t k = 0; k < K; ++k) {
        auto &list = table[k];
        for (const auto &p : partial) {
            list.insert(list.end(), p[k].begin(), p[k].end());
        }
        std::sort(list.begin(), list.end(), candidate_less);
        if (list.size() > cap) list.resize(cap);
    }
    return table;
}

// --- farthest point sampling ------------------------------------------------

JointMetric::JointMetric(const SemanticPointCloud &cloud,
                         double position_scale,
                         double position_weight,
                         double color_weight,
                         double feature_weight)
    : cloud_(&cloud),
      position_weight_(position_weight),
      color_weight_(color_weight),
      feature_weight_(feature_weight) {
    if (!(position_scale > 0.0)) {
        throw ValidationError("position scale must be positive");
    }
    scaled_positions_.reserve(cloud.size());
    for (const auto &p : cloud.positions()) {
        scaled_positions_.push_back(p / position_scale);
    }
}

double JointMetric::distance(std::size_t a, std::size_t b) const {
    const Vec3 &pa = scaled_positions_[a];
    const Vec3 &pb = scaled_positions_[b];
    const Vec3 &ca = cloud_->color(a);
    const Vec3 &cb = cloud_->color(b);
    double dp = 0.0, dc = 0.0;
    for (int j = 0; j < 3; ++j) {
        dp += (pa[j] - pb[j]) * (pa[j] - pb[j]);
        dc += (ca[j] - cb[j]) * (ca[j] - cb[j]);
    }
    const double df = detail::squared_l2(cloud_->feature(a).data(),
                                         cloud_->feature(b).data(),
                                         cloud_->feature_dim());
    return std::sqrt(position_weight_ * dp + color_weight_ * dc +
                     feature_weight_ * df);
}

namespace {

void check_fps_args(const JointMetric &metric, std::size_t k, std::size_t first) {
    if (k > metric.size()) {
        throw InsufficientPointsError("requested " + std::to_string(k) +
                                      " samples from " +
                                      std::to_string(metric.size()) +
                                      " points");
    }
    if (k > 0 && first >= metric.size()) {
        throw IndexError("FPS seed index out of range", first);
    }
}

}  // namespace

std::vector<std::size_t> farthest_point_order_serial(const JointMetric &metric,
                                                     std::size_t k,
                                                     std::size_t first) {
    check_fps_args(metric, k, first);
    std::vector<std::size_t> order;
    if (k == 0) return order;
    const std::size_t n = metric.size();
    std::vector<double> min_dist(n, kInf);
    std::vector<char> taken(n, 0);
    order.push_back(first);
    taken[first] = 1;
    while (order.size() < k) {
        const std::size_t last = order.back();
        std::size_t best = n;
        double best_dist = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            min_dist[i] = std::min(min_dist[i], metric.distance(i, last));
            if (min_dist[i] > best_dist) {
                best_dist = min_dist[i];
                best = i;
            }
        }
        order.push_back(best);
        taken[best] = 1;
    }
    return order;
}

std::vector<std::size_t> farthest_point_order_parallel(
        const JointMetric &metric, std::size_t k, std::size_t first) {
    check_fps_args(metric, k, first);
    std::vector<std::size_t> order;
    if (k == 0) return order;
    const std::size_t n = metric.size();
    const std::size_t parts = static_cast<std::size_t>(thread_count());
    std::vector<double> min_dist(n, kInf);
    std::vector<char> taken(n, 0);
    std::vector<std::size_t> part_best(parts);
    std::vector<double> part_dist(parts);
    order.push_back(first);
    taken[first] = 1;

    while (order.size() < k) {
        const std::size_t last = order.back();
        std::fill(part_best.begin(), part_best.end(), n);
        std::fill(part_dist.begin(), part_dist.end(), -1.0);
#pragma omp parallel num_threads(static_cast<int>(parts))
        {
#ifdef _OPENMP
            const auto part = static_cast<std::size_t>(omp_get_thread_num());
            const auto team = static_cast<std::size_t>(omp_get_num_threads());
#else
            const std::size_t part = 0, team = 1;
#endif
            const Block block = block_of(n, part, team);
            for (std::size_t i = block.begin; i < block.end; ++i) {
                if (taken[i]) continue;
                min_dist[i] = std::min(min_dist[i], metric.distance(i, last));
                if (min_dist[i] > part_dist[part]) {
                    part_dist[part] = min_dist[i];
                    part_best[part] = i;
                }
            }
        }
        std::size_t best = n;
        double best_dist = -1.0;
        for (std::size_t p = 0; p < parts; ++p) {
            if (part_dist[p] > best_dist) {
                best_dist = part_dist[p];
                best = part_best[p];
            }
        }
        order.push_back(best);
        taken[best] = 1;
    }
    return order;
}

}  // namespace ktm::kernels
