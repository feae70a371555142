#include <gtest/gtest.h>

#include "ktm/kernels.hpp"
#include "test_support.hpp"

namespace ktm {
namespace {

// Cloud whose second half repeats the first half's features, so nearest
// and gated scans hit exact distance ties.
SemanticPointCloud cloud_with_ties(std::size_t n, std::size_t dim,
                                   std::uint64_t seed) {
    const auto base = test::random_cloud(n, dim, seed);
    std::vector<Vec3> pos = base.positions(), col = base.colors();
    std::vector<double> feats = base.feature_data();
    for (std::size_t i = 0; i < n; ++i) {
        pos.push_back(base.position(i) + Vec3::Constant(0.01));
        col.push_back(base.color(i));
        const auto f = base.feature(i);
        feats.insert(feats.end(), f.begin(), f.end());
    }
    return SemanticPointCloud(dim, pos, col, feats, true);
}

TEST(NearestFeatures, SerialAndParallelMatchBruteForce) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto cloud = cloud_with_ties(80 + seed * 10, 16, seed);
        const auto tmpl = test::template_from_points(
                test::random_cloud(12, 16, seed + 100), {0, 1, 2, 3, 4, 5});
        const auto with_hits =
                test::template_from_points(cloud, {3, 50, 7, 81});
        for (const auto &t : {tmpl, with_hits}) {
            const auto oracle = test::brute_nearest(t, cloud);
            EXPECT_EQ(kernels::nearest_features_serial(t, cloud), oracle);
            EXPECT_EQ(kernels::nearest_features_parallel(t, cloud), oracle);
        }
    }
}

TEST(NearestFeatures, TiesGoToLowestIndex) {
    const auto cloud = cloud_with_ties(30, 8, 4);
    const auto tmpl = test::template_from_points(cloud, {35, 40});
    const auto res = kernels::nearest_features_parallel(tmpl, cloud);
    EXPECT_EQ(res[0].index, 5u);
    EXPECT_EQ(res[1].index, 10u);
}

TEST(NearestFeatures, EmptyCloudThrows) {
    const SemanticPointCloud empty(4, true);
    const auto tmpl = test::template_from_points(test::random_cloud(3, 4, 1), {0, 1, 2});
    EXPECT_THROW(kernels::nearest_features_serial(tmpl, empty), EmptyCloudError);
    EXPECT_THROW(kernels::nearest_features_parallel(tmpl, empty), EmptyCloudError);
}

TEST(GatedFeatures, SerialAndParallelMatchBruteForce) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto cloud = cloud_with_ties(120, 6, seed);
        const auto tmpl = test::template_from_points(cloud, {0, 5, 9, 130, 200});
        for (double gate : {0.0, 0.3, 0.8, 1.2, 3.0}) {
            for (std::size_t cap : {1u, 5u, 50u, 1000u}) {
                const auto oracle = test::brute_gated(tmpl, cloud, gate, cap);
                EXPECT_EQ(kernels::gated_features_serial(tmpl, cloud, gate, cap), oracle);
                EXPECT_EQ(kernels::gated_features_parallel(tmpl, cloud, gate, cap), oracle);
            }
        }
    }
}

TEST(JointMetric, MatchesBruteForceDistance) {
    const auto cloud = test::random_cloud(40, 10, 9);
    const FpsWeights w{0.7, 0.2, 1.3};
    const kernels::JointMetric m(cloud, 1.7, w.position, w.color, w.feature);
    for (std::size_t a = 0; a < cloud.size(); a += 3) {
        for (std::size_t b = 0; b < cloud.size(); b += 7) {
            EXPECT_EQ(m.distance(a, b), test::brute_joint_distance(cloud, a, b, 1.7, w));
        }
    }
}

TEST(FarthestPointOrder, SerialAndParallelAgree) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto cloud = cloud_with_ties(60 + seed * 7, 8, seed);
        const kernels::JointMetric m(cloud, 1.0, 1.0, 1.0, 1.0);
        const std::size_t k = 1 + seed % 20;
        const std::size_t first = seed % cloud.size();
        EXPECT_EQ(kernels::farthest_point_order_serial(m, k, first),
                  kernels::farthest_point_order_parallel(m, k, first));
    }
}

TEST(FarthestPointOrder, TiesGoToLowestIndex) {
    // Square corners: from corner 0 the two adjacent corners tie.
    const SemanticPointCloud cloud(1, {Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)},
                                   std::vector<Vec3>(4, Vec3::Zero()),
                                   {1.0, 1.0, 1.0, 1.0}, true);
    const kernels::JointMetric m(cloud, 1.0, 1.0, 0.0, 0.0);
    const std::vector<std::size_t> expect{0, 1, 2, 3};
    EXPECT_EQ(kernels::farthest_point_order_serial(m, 4, 0), expect);
    EXPECT_EQ(kernels::farthest_point_order_parallel(m, 4, 0), expect);
}

TEST(FarthestPointOrder, RejectsBadArguments) {
    const auto cloud = test::random_cloud(5, 3, 2);
    const kernels::JointMetric m(cloud, 1.0, 1.0, 1.0, 1.0);
    EXPECT_THROW(kernels::farthest_point_order_serial(m, 6, 0), InsufficientPointsError);
    EXPECT_THROW(kernels::farthest_point_order_parallel(m, 2, 5), IndexError);
}

}  // namespace
}  // namespace ktm
