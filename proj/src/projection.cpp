#include "ktm/projection.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

namespace ktm {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) ||
        !std::isfinite(fy)) {
        throw ValidationError("focal lengths must be positive and finite");
    }
    if (width == 0 || height == 0) {
        throw ValidationError("intrinsics width/height must be positive");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
        throw ValidationError("principal point lies outside the image");
    }
}

void CameraExtrinsics::validate() const {
    if (!rotation.allFinite() || !translation.allFinite()) {
        throw ValidationError("extrinsics have non-finite entries");
    }
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw ValidationError("extrinsic rotation is not a proper rotation");
    }
}

FeatureImage::FeatureImage(std::uint32_t width, std::uint32_t height,
                           std::uint32_t feature_dim, std::vector<float> data)
    : width_(width), height_(height), feature_dim_(feature_dim),
      data_(std::move(data)) {
    if (width_ == 0 || height_ == 0 || feature_dim_ == 0) {
        throw DimensionError("feature image dimensions must be positive");
    }
    const std::size_t expected =
            static_cast<std::size_t>(width_) * height_ * feature_dim_;
    if (data_.size() != expected) {
        throw DimensionError("feature image data length", data_.size(),
                             expected);
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw ValidationError("non-finite feature value at element " +
                                  std::to_string(i));
        }
    }
}

DepthImage::DepthImage(std::uint32_t width, std::uint32_t height,
                       std::vector<std::uint16_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width_ == 0 || height_ == 0) {
        throw DimensionError("depth image dimensions must be positive");
    }
    const std::size_t expected = static_cast<std::size_t>(width_) * height_;
    if (data_.size() != expected) {
        throw DimensionError("depth image data length", data_.size(),
                             expected);
    }
}

ColorImage::ColorImage(std::uint32_t width, std::uint32_t height,
                       std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
    const std::size_t expected = static_cast<std::size_t>(width_) * height_ * 3;
    if (data_.size() != expected) {
        throw DimensionError("color image data length", data_.size(),
                             expected);
    }
    for (float c : data_) {
        if (!(c >= 0.0f && c <= 1.0f)) {
            throw ValidationError("color value outside [0,1]");
        }
    }
}

MaskImage::MaskImage(std::uint32_t width, std::uint32_t height,
                     std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    const std::size_t expected = static_cast<std::size_t>(width_) * height_;
    if (data_.size() != expected) {
        throw DimensionError("mask data length", data_.size(), expected);
    }
}

void Workspace::validate() const {
    if (!min.allFinite() || !max.allFinite() ||
        !(min.array() < max.array()).all()) {
        throw ValidationError("workspace min must be below max on every axis");
    }
}

namespace {

void require_size(const char *what, std::uint32_t w, std::uint32_t h,
                  std::uint32_t ref_w, std::uint32_t ref_h) {
    if (w != ref_w || h != ref_h) {
        throw DimensionError(std::string(what) + " is " + std::to_string(w) +
                             "x" + std::to_string(h) + " but features are " +
                             std::to_string(ref_w) + "x" +
                             std::to_string(ref_h));
    }
}

struct RowPoints {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;
    std::vector<double> features;
    std::vector<PixelCoord> pixels;
};

}  // namespace

ProjectedCloud project_with_pixels(const FeatureImage &features,
                                   const DepthImage &depth,
                                   const CameraIntrinsics &intrinsics,
                                   const CameraExtrinsics &extrinsics,
                                   const ProjectionOptions &options,
                                   Execution exec) {
    intrinsics.validate();
    extrinsics.validate();
    if (options.stride == 0) {
        throw ValidationError("stride must be at least 1");
    }
    const std::uint32_t W = features.width();
    const std::uint32_t H = features.height();
    require_size("depth image", depth.width(), depth.height(), W, H);
    require_size("intrinsics", intrinsics.width, intrinsics.height, W, H);
    if (options.color) {
        require_size("color image", options.color->width(),
                     options.color->height(), W, H);
    }
    if (options.mask) {
        require_size("mask", options.mask->width(), options.mask->height(), W,
                     H);
    }
    if (options.workspace) options.workspace->validate();

    const std::uint32_t stride = options.stride;
    const std::size_t dim = features.feature_dim();
    const std::size_t rows = (H + stride - 1) / stride;
    std::vector<RowPoints> per_row(rows);

    parallel_for(
            rows,
            [&](std::size_t r) {
                const auto v = static_cast<std::uint32_t>(r * stride);
                RowPoints &out = per_row[r];
                for (std::uint32_t u = 0; u < W; u += stride) {
                    const std::uint16_t d = depth.at(u, v);
                    if (d == 0) continue;
                    if (options.mask && !options.mask->at(u, v)) continue;
                    const double z = static_cast<double>(d) / 1000.0;
                    const Vec3 camera((u - intrinsics.cx) * z / intrinsics.fx,
                                      (v - intrinsics.cy) * z / intrinsics.fy,
                                      z);
                    const Vec3 base = extrinsics.apply(camera);
                    if (options.workspace && !options.workspace->contains(base)) {
                        continue;
                    }
                    out.positions.push_back(base);
                    out.colors.push_back(options.color ? options.color->at(u, v)
                                                       : Vec3::Zero());
                    const auto f = features.at(u, v);
                    out.features.insert(out.features.end(), f.begin(), f.end());
                    out.pixels.push_back({u, v});
                }
            },
            exec);

    std::size_t total = 0;
    for (const auto &row : per_row) total += row.positions.size();
    if (total == 0) {
        throw EmptyCloudError(
                "projection produced no points; check depth, mask and "
                "workspace");
    }
    std::vector<Vec3> positions, colors;
    std::vector<double> feats;
    std::vector<PixelCoord> pixels;
    positions.reserve(total);
    colors.reserve(total);
    feats.reserve(total * dim);
    pixels.reserve(total);
    for (auto &row : per_row) {
        positions.insert(positions.end(), row.positions.begin(),
                         row.positions.end());
        colors.insert(colors.end(), row.colors.begin(), row.colors.end());
        feats.insert(feats.end(), row.features.begin(), row.features.end());
        pixels.insert(pixels.end(), row.pixels.begin(), row.pixels.end());
    }
    SemanticPointCloud cloud(dim, std::move(positions), std::move(colors),
                             std::move(feats), false);
    if (options.normalize) cloud = normalize_features(cloud);
    return {std::move(cloud), std::move(pixels)};
}

SemanticPointCloud project(const FeatureImage &features,
                           const DepthImage &depth,
                           const CameraIntrinsics &intrinsics,
                           const CameraExtrinsics &extrinsics,
                           const ProjectionOptions &options,
                           Execution exec) {
    return project_with_pixels(features, depth, intrinsics, extrinsics,
                               options, exec)
            .cloud;
}

Vec3 to_pixel(const Vec3 &position,
              const CameraIntrinsics &intrinsics,
              const CameraExtrinsics &extrinsics) {
    const Vec3 camera =
            extrinsics.rotation.transpose() * (position - extrinsics.translation);
    const double z = camera.z();
    return {camera.x() * intrinsics.fx / z + intrinsics.cx,
            camera.y() * intrinsics.fy / z + intrinsics.cy, z * 1000.0};
}

SemanticPointCloud merge_clouds(std::span<const SemanticPointCloud> clouds) {
    if (clouds.empty()) {
        throw EmptyCloudError("merge_clouds needs at least one cloud");
    }
    const std::size_t dim = clouds.front().feature_dim();
    const bool normalized = clouds.front().features_normalized();
    std::vector<Vec3> positions, colors;
    std::vector<double> features;
    for (std::size_t c = 0; c < clouds.size(); ++c) {
        const auto &cloud = clouds[c];
        if (cloud.feature_dim() != dim) {
            throw DimensionError("cloud " + std::to_string(c) +
                                         " feature_dim differs",
                                 cloud.feature_dim(), dim);
        }
        if (cloud.features_normalized() != normalized) {
            throw ValidationError("cloud " + std::to_string(c) +
                                  " normalization flag differs");
        }
        positions.insert(positions.end(), cloud.positions().begin(),
                         cloud.positions().end());
        colors.insert(colors.end(), cloud.colors().begin(),
                      cloud.colors().end());
        features.insert(features.end(), cloud.feature_data().begin(),
                        cloud.feature_data().end());
    }
    return SemanticPointCloud(dim, std::move(positions), std::move(colors),
                              std::move(features), normalized);
}

}  // namespace ktm
