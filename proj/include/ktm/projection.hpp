#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ktm/core.hpp"
#include "ktm/parallel.hpp"

namespace ktm {

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    void validate() const;
    bool operator==(const CameraIntrinsics &) const = default;
};

/// Rigid camera-to-base transform.
struct CameraExtrinsics {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate() const;
    Vec3 apply(const Vec3 &p) const { return rotation * p + translation; }
    bool operator==(const CameraExtrinsics &other) const {
        return rotation == other.rotation && translation == other.translation;
    }
};

/// Per-pixel descriptors, row-major H x W x N. Producers upsample patch
/// grids to pixel resolution before handing images over; nothing here
/// resamples.
class FeatureImage {
public:
    FeatureImage(std::uint32_t width, std::uint32_t height,
                 std::uint32_t feature_dim, std::vector<float> data);

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    std::uint32_t feature_dim() const { return feature_dim_; }
    std::span<const float> at(std::uint32_t u, std::uint32_t v) const {
        const std::size_t offset =
                (static_cast<std::size_t>(v) * width_ + u) * feature_dim_;
        return {data_.data() + offset, feature_dim_};
    }
    const std::vector<float> &data() const { return data_; }
    bool operator==(const FeatureImage &) const = default;

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::uint32_t feature_dim_;
    std::vector<float> data_;
};

/// Depth in millimeters; 0 marks an invalid pixel.
class DepthImage {
public:
    DepthImage(std::uint32_t width, std::uint32_t height,
               std::vector<std::uint16_t> data);

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    std::uint16_t at(std::uint32_t u, std::uint32_t v) const {
        return data_[static_cast<std::size_t>(v) * width_ + u];
    }
    const std::vector<std::uint16_t> &data() const { return data_; }
    bool operator==(const DepthImage &) const = default;

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::vector<std::uint16_t> data_;
};

/// RGB in [0,1], row-major H x W x 3.
class ColorImage {
public:
    ColorImage(std::uint32_t width, std::uint32_t height,
               std::vector<float> data);

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    Vec3 at(std::uint32_t u, std::uint32_t v) const {
        const std::size_t o = (static_cast<std::size_t>(v) * width_ + u) * 3;
        return {data_[o], data_[o + 1], data_[o + 2]};
    }

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::vector<float> data_;
};

class MaskImage {
public:
    MaskImage(std::uint32_t width, std::uint32_t height,
              std::vector<std::uint8_t> data);

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    bool at(std::uint32_t u, std::uint32_t v) const {
        return data_[static_cast<std::size_t>(v) * width_ + u] != 0;
    }

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::vector<std::uint8_t> data_;
};

/// Axis-aligned box in base coordinates; bounds are inclusive.
struct Workspace {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    void validate() const;
    bool contains(const Vec3 &p) const {
        return (p.array() >= min.array()).all() &&
               (p.array() <= max.array()).all();
    }
};

struct PixelCoord {
    std::uint32_t u;
    std::uint32_t v;
    bool operator==(const PixelCoord &) const = default;
};

struct ProjectionOptions {
    const ColorImage *color = nullptr;  // points get black when absent
    const MaskImage *mask = nullptr;
    std::optional<Workspace> workspace;
    std::uint32_t stride = 4;
    /// Unit-normalize descriptors at ingestion.
    bool normalize = true;
};

struct ProjectedCloud {
    SemanticPointCloud cloud;
    std::vector<PixelCoord> pixels;  // source pixel of each cloud point
};

/// Back-projects every stride-th valid pixel into base coordinates, keeping
/// row-major scan order. Throws DimensionError on raster size mismatch and
/// EmptyCloudError when nothing survives masking and cropping.
ProjectedCloud project_with_pixels(const FeatureImage &features,
                                   const DepthImage &depth,
                                   const CameraIntrinsics &intrinsics,
                                   const CameraExtrinsics &extrinsics,
                                   const ProjectionOptions &options = {},
                                   Execution exec = Execution::parallel);

SemanticPointCloud project(const FeatureImage &features,
                           const DepthImage &depth,
                           const CameraIntrinsics &intrinsics,
                           const CameraExtrinsics &extrinsics,
                           const ProjectionOptions &options = {},
                           Execution exec = Execution::parallel);

/// Forward projection of a base-frame point: (u, v, depth in millimeters).
Vec3 to_pixel(const Vec3 &position,
              const CameraIntrinsics &intrinsics,
              const CameraExtrinsics &extrinsics);

/// Concatenates clouds in order. All inputs must share feature_dim and the
/// normalization flag.
SemanticPointCloud merge_clouds(std::span<const SemanticPointCloud> clouds);

}  // namespace ktm
