#include <gtest/gtest.h>

#include "ktm/core.hpp"
#include "test_support.hpp"

namespace ktm {
namespace {

TEST(FeatureDistance, SymmetricAndZeroOnlyForEqualVectors) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = test::unit_feature(rng, 32);
        const auto b = test::unit_feature(rng, 32);
        EXPECT_EQ(feature_distance(a, b), feature_distance(b, a));
        EXPECT_GT(feature_distance(a, b), 0.0);
        EXPECT_EQ(feature_distance(a, a), 0.0);
    }
    const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
    EXPECT_DOUBLE_EQ(feature_distance(a, b), std::sqrt(2.0));
}

TEST(FeatureDistance, RejectsMismatchedOrEmptyInput) {
    const std::vector<double> a{1.0, 2.0}, b{1.0, 2.0, 3.0}, e;
    EXPECT_THROW(feature_distance(a, b), DimensionError);
    EXPECT_THROW(feature_distance(e, e), DimensionError);
}

TEST(RotationAngle, MatchesAxisAngleIncludingTinyAngles) {
    std::mt19937_64 rng(3);
    for (double angle : {0.0, 1e-12, 1e-8, 0.3, 1.5, 3.0, M_PI}) {
        const Vec3 axis = test::uniform_vec(rng, -1, 1).normalized();
        const Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
        EXPECT_NEAR(rotation_angle(r), angle, 1e-12 + angle * 1e-12) << angle;
    }
    const Mat3 a = Eigen::AngleAxisd(0.4, Vec3::UnitZ()).toRotationMatrix();
    const Mat3 b = Eigen::AngleAxisd(0.1, Vec3::UnitZ()).toRotationMatrix();
    EXPECT_NEAR(rotation_error(a, b), 0.3, 1e-14);
}

TEST(Collinear, DetectsLinesAndSmallSets) {
    std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2),
                           Vec3(-3, -3, -3)};
    EXPECT_TRUE(is_collinear(line));
    EXPECT_TRUE(is_collinear(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0)}));
    EXPECT_TRUE(is_collinear(std::vector<Vec3>(4, Vec3(1, 2, 3))));
    line.push_back(Vec3(0, 1, 0));
    EXPECT_FALSE(is_collinear(line));
}

TEST(SemanticPointCloud, ValidatesInvariants) {
    const std::vector<Vec3> one{Vec3::Zero()};
    EXPECT_NO_THROW(SemanticPointCloud(2, one, {Vec3(0.5, 0.5, 0.5)}, {1.0, 0.0}, true));
    EXPECT_THROW(SemanticPointCloud(2, {Vec3(NAN, 0, 0)}, {Vec3::Zero()}, {1.0, 0.0}, true),
                 ValidationError);
    EXPECT_THROW(SemanticPointCloud(2, one, {Vec3(1.5, 0, 0)}, {1.0, 0.0}, true),
                 ValidationError);
    EXPECT_THROW(SemanticPointCloud(2, one, {Vec3::Zero()}, {2.0, 0.0}, true),
                 ValidationError);
    EXPECT_THROW(SemanticPointCloud(2, one, {Vec3::Zero()}, {1.0}, false),
                 DimensionError);
    EXPECT_THROW(SemanticPointCloud(2, one, {Vec3::Zero(), Vec3::Zero()}, {1.0, 0.0}, false),
                 DimensionError);
    EXPECT_THROW(SemanticPointCloud(0), ValidationError);
}

TEST(SemanticPointCloud, NormalizeFeatures) {
    const SemanticPointCloud raw(2, {Vec3::Zero(), Vec3::Ones()},
                                 {Vec3::Zero(), Vec3::Zero()},
                                 {3.0, 4.0, 0.0, -2.0}, false);
    const auto n = normalize_features(raw);
    EXPECT_TRUE(n.features_normalized());
    EXPECT_DOUBLE_EQ(n.feature(0)[0], 0.6);
    EXPECT_DOUBLE_EQ(n.feature(0)[1], 0.8);
    EXPECT_DOUBLE_EQ(n.feature(1)[1], -1.0);
    EXPECT_EQ(n.positions(), raw.positions());

    const SemanticPointCloud zero(2, {Vec3::Zero(), Vec3::Ones()},
                                  {Vec3::Zero(), Vec3::Zero()},
                                  {1.0, 0.0, 0.0, 0.0}, false);
    try {
        normalize_features(zero);
        FAIL();
    } catch (const ZeroFeatureError &e) {
        EXPECT_EQ(e.index(), 1u);
    }
}

TEST(SemanticPointCloud, FromPointsRoundTrip) {
    const auto cloud = test::random_cloud(20, 5, 11);
    std::vector<SemanticPoint> pts;
    for (std::size_t i = 0; i < cloud.size(); ++i) pts.push_back(cloud.point(i));
    EXPECT_EQ(SemanticPointCloud::from_points(5, pts, true), cloud);
}

TEST(KnowledgeTemplate, ValidatesDimensionsAndReportsDegeneracy) {
    EXPECT_THROW(KnowledgeTemplate(3, {Keypoint{{1.0, 0.0}, Vec3::Zero()}}),
                 DimensionError);
    EXPECT_THROW(KnowledgeTemplate(1, {Keypoint{{NAN}, Vec3::Zero()}}),
                 ValidationError);
    const KnowledgeTemplate two(1, {Keypoint{{1.0}, Vec3::Zero()},
                                    Keypoint{{1.0}, Vec3::Ones()}});
    EXPECT_TRUE(two.is_degenerate());
    const KnowledgeTemplate line(1, {Keypoint{{1.0}, Vec3(0, 0, 0)},
                                     Keypoint{{1.0}, Vec3(1, 0, 0)},
                                     Keypoint{{1.0}, Vec3(2, 0, 0)}});
    EXPECT_TRUE(line.is_collinear());
    const KnowledgeTemplate tri(1, {Keypoint{{1.0}, Vec3(0, 0, 0)},
                                    Keypoint{{1.0}, Vec3(1, 0, 0)},
                                    Keypoint{{1.0}, Vec3(0, 1, 0)}});
    EXPECT_FALSE(tri.is_degenerate());
}

TEST(SimilarityTransform, RejectsImproperRotationsAndBadScale) {
    Mat3 reflect = Mat3::Identity();
    reflect(2, 2) = -1.0;
    EXPECT_THROW(SimilarityTransform(reflect, Vec3::Zero(), 1.0), ValidationError);
    EXPECT_THROW(SimilarityTransform(2.0 * Mat3::Identity(), Vec3::Zero(), 1.0),
                 ValidationError);
    EXPECT_THROW(SimilarityTransform(Mat3::Identity(), Vec3::Zero(), 0.0),
                 ValidationError);
    EXPECT_THROW(SimilarityTransform(Mat3::Identity(), Vec3(NAN, 0, 0), 1.0),
                 ValidationError);
}

TEST(SimilarityTransform, ComposeAndInverse) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = test::random_similarity(rng, 0.5, 2.0);
        const auto b = test::random_similarity(rng, 0.5, 2.0);
        const Vec3 p = test::uniform_vec(rng, -1, 1);
        EXPECT_LT((compose(b, a).apply(p) - b.apply(a.apply(p))).norm(), 1e-12);
        EXPECT_LT((inverse(a).apply(a.apply(p)) - p).norm(), 1e-12);
    }
    EXPECT_EQ(SimilarityTransform::identity().apply(Vec3(1, 2, 3)), Vec3(1, 2, 3));
}

TEST(MatchParams, Validation) {
    EXPECT_NO_THROW(MatchParams{}.validate());
    MatchParams p;
    p.delta_f = 0.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.scale_min = 3.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.ransac_iterations = 0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.beta = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.beta = 0.0;
    EXPECT_NO_THROW(p.validate());
}

}  // namespace
}  // namespace ktm
