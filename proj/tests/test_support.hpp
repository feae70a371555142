#pragma once

// Fixture generators and brute-force reference implementations. The
// oracles deliberately avoid the library's kernels and index structures.

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "ktm/core.hpp"
#include "ktm/io.hpp"
#include "ktm/projection.hpp"
#include "ktm/template_builder.hpp"

namespace ktm::test {

inline std::vector<double> unit_feature(std::mt19937_64 &rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> f(dim);
    double sq = 0.0;
    for (auto &x : f) {
        x = n(rng);
        sq += x * x;
    }
    for (auto &x : f) x /= std::sqrt(sq);
    return f;
}

inline Vec3 uniform_vec(std::mt19937_64 &rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

// Rounds through f32 component by component.
inline Vec3 round_f32(const Vec3 &v) {
    volatile float x = static_cast<float>(v.x()), y = static_cast<float>(v.y()),
                   z = static_cast<float>(v.z());
    return Vec3(x, y, z);
}

inline SemanticPointCloud random_cloud(std::size_t n, std::size_t dim,
                                       std::uint64_t seed,
                                       double extent = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> pos, col;
    std::vector<double> feats;
    for (std::size_t i = 0; i < n; ++i) {
        pos.push_back(uniform_vec(rng, -extent / 2, extent / 2));
        col.push_back(Vec3(unit(rng), unit(rng), unit(rng)));
        const auto f = unit_feature(rng, dim);
        feats.insert(feats.end(), f.begin(), f.end());
    }
    return SemanticPointCloud(dim, std::move(pos), std::move(col),
                              std::move(feats), true);
}

inline SimilarityTransform random_similarity(std::mt19937_64 &rng,
                                             double s_min, double s_max,
                                             double max_angle = M_PI) {
    std::normal_distribution<double> n(0.0, 1.0);
    const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
    const double angle =
            std::uniform_real_distribution<double>(0.0, max_angle)(rng);
    const Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    return {r, uniform_vec(rng, -1.0, 1.0),
            std::uniform_real_distribution<double>(s_min, s_max)(rng)};
}

inline KnowledgeTemplate template_from_points(
        const SemanticPointCloud &cloud, const std::vector<std::size_t> &idx) {
    std::vector<Keypoint> kps;
    for (auto i : idx) {
        const auto f = cloud.feature(i);
        kps.push_back({std::vector<double>(f.begin(), f.end()),
                       cloud.position(i)});
    }
    return KnowledgeTemplate(cloud.feature_dim(), kps, "test");
}

/// Cloud made of the template keypoints moved by `t` (in template order)
/// followed by `distractors` random points, or only the points in
/// `visible` when given.
inline SemanticPointCloud scene_from_template(
        const KnowledgeTemplate &tmpl, const SimilarityTransform &t,
        std::size_t distractors, std::uint64_t seed,
        const std::vector<bool> &visible = {}) {
    std::mt19937_64 rng(seed);
    std::vector<Vec3> pos, col;
    std::vector<double> feats;
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        if (!visible.empty() && !visible[k]) continue;
        pos.push_back(t.apply(tmpl.position(k)));
        col.push_back(Vec3::Constant(0.5));
        feats.insert(feats.end(), tmpl.keypoint(k).feature.begin(),
                     tmpl.keypoint(k).feature.end());
    }
    for (std::size_t i = 0; i < distractors; ++i) {
        pos.push_back(uniform_vec(rng, -1.5, 1.5));
        col.push_back(Vec3::Constant(0.2));
        const auto f = unit_feature(rng, tmpl.feature_dim());
        feats.insert(feats.end(), f.begin(), f.end());
    }
    return SemanticPointCloud(tmpl.feature_dim(), std::move(pos),
                              std::move(col), std::move(feats), true);
}

// ---------------------------------------------------------------------------
// Oracles

inline double brute_feature_distance(FeatureView a, FeatureView b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline std::vector<Candidate> brute_nearest(const KnowledgeTemplate &tmpl,
                                            const SemanticPointCloud &cloud) {
    std::vector<Candidate> out;
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        Candidate best{0, brute_feature_distance(tmpl.feature(k), cloud.feature(0))};
        for (std::size_t i = 1; i < cloud.size(); ++i) {
            const double d = brute_feature_distance(tmpl.feature(k), cloud.feature(i));
            if (d < best.distance) best = {i, d};
        }
        out.push_back(best);
    }
    return out;
}

inline CandidateTable brute_gated(const KnowledgeTemplate &tmpl,
                                  const SemanticPointCloud &cloud, double gate,
                                  std::size_t cap) {
    CandidateTable table(tmpl.size());
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double d = brute_feature_distance(tmpl.feature(k), cloud.feature(i));
            if (d <= gate) table[k].push_back({i, d});
        }
        std::stable_sort(table[k].begin(), table[k].end(),
                         [](const Candidate &a, const Candidate &b) {
                             return a.distance < b.distance;
                         });
        if (table[k].size() > cap) table[k].resize(cap);
    }
    return table;
}

inline double brute_joint_distance(const SemanticPointCloud &c, std::size_t a,
                                   std::size_t b, double scale,
                                   const FpsWeights &w) {
    double dp = 0.0, dc = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double pa = c.position(a)[j] / scale;
        const double pb = c.position(b)[j] / scale;
        dp += (pa - pb) * (pa - pb);
        dc += (c.color(a)[j] - c.color(b)[j]) * (c.color(a)[j] - c.color(b)[j]);
    }
    double df = 0.0;
    for (std::size_t i = 0; i < c.feature_dim(); ++i) {
        const double d = c.feature(a)[i] - c.feature(b)[i];
        df += d * d;
    }
    return std::sqrt(w.position * dp + w.color * dc + w.feature * df);
}

/// O(n^2 k) farthest point selection: every step recomputes each
/// candidate's distance to the whole selection from scratch.
inline std::vector<std::size_t> brute_fps(const SemanticPointCloud &c,
                                          std::size_t k, std::size_t first,
                                          const FpsWeights &w) {
    Vec3 lo = c.position(0), hi = c.position(0);
    for (const auto &p : c.positions()) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double scale = (hi - lo).norm();
    if (!(scale > 0.0)) scale = 1.0;
    std::vector<std::size_t> sel{first};
    std::vector<bool> taken(c.size(), false);
    taken[first] = true;
    while (sel.size() < k) {
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (taken[i]) continue;
            double m = std::numeric_limits<double>::infinity();
            for (auto j : sel) m = std::min(m, brute_joint_distance(c, i, j, scale, w));
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        sel.push_back(arg);
        taken[arg] = true;
    }
    return sel;
}

inline std::size_t brute_centroid_nearest(const SemanticPointCloud &c) {
    Vec3 centroid = Vec3::Zero();
    for (const auto &p : c.positions()) centroid += p;
    centroid /= static_cast<double>(c.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
        if ((c.position(i) - centroid).squaredNorm() <
            (c.position(best) - centroid).squaredNorm()) {
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// RGB-D fixtures

struct RgbdFixture {
    FeatureImage features;
    DepthImage depth;
    io::Calibration calib;
};

/// W x H frame, depth in [400, 1200] mm with ~10% holes, random unit
/// features, a tilted camera above the origin.
inline RgbdFixture make_rgbd(std::uint32_t w, std::uint32_t h,
                             std::uint32_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> depth_mm(400, 1200);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<float> feats;
    std::vector<std::uint16_t> depth;
    for (std::uint32_t i = 0; i < w * h; ++i) {
        const auto f = unit_feature(rng, dim);
        for (double x : f) feats.push_back(static_cast<float>(x));
        depth.push_back(unit(rng) < 0.1 ? 0 : static_cast<std::uint16_t>(depth_mm(rng)));
    }
    io::Calibration calib;
    calib.intrinsics = CameraIntrinsics{500.0, 510.0, w / 2.0 - 0.5,
                                        h / 2.0 + 0.25, w, h};
    calib.extrinsics.rotation =
            Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix() *
            Eigen::AngleAxisd(0.2, Vec3::UnitY()).toRotationMatrix();
    calib.extrinsics.translation = Vec3(0.1, -0.05, 1.3);
    return {FeatureImage(w, h, dim, std::move(feats)),
            DepthImage(w, h, std::move(depth)), calib};
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::uint64_t counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("ktm_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string &name) const {
        return path / name;
    }
};

}  // namespace ktm::test
