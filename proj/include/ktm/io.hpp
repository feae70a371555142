#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ktm/core.hpp"
#include "ktm/projection.hpp"
#include "ktm/template_builder.hpp"

namespace ktm::io {

// Binary formats are little-endian with a 4-byte magic and a u32 version (1).
//
//   SPCF  magic, version, u32 point_count, u32 feature_dim, u8 flags
//         (bit 0: features normalized), then per point 3 x f32 position,
//         3 x f32 color, feature_dim x f32 feature.
//   SFIM  magic, version, u32 width, u32 height, u32 feature_dim, then
//         row-major f32 data.
//   SDEP  magic, version, u32 width, u32 height, then row-major u16 mm.
//
// Decoders throw BadMagicError, VersionUnsupportedError,
// TruncatedPayloadError (offset of the first incomplete record),
// NonFiniteValueError, or FormatError, each carrying a byte offset.

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kCloudHeaderSize = 17;
inline constexpr std::size_t kFeatureImageHeaderSize = 20;
inline constexpr std::size_t kDepthHeaderSize = 16;

std::string encode_cloud(const SemanticPointCloud &cloud);
SemanticPointCloud decode_cloud(std::string_view bytes);

std::string encode_feature_image(const FeatureImage &image);
FeatureImage decode_feature_image(std::string_view bytes);

std::string encode_depth(const DepthImage &image);
DepthImage decode_depth(std::string_view bytes);

std::string read_file(const std::filesystem::path &path);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path,
                       std::string_view contents);

SemanticPointCloud read_cloud(const std::filesystem::path &path);
void write_cloud(const std::filesystem::path &path,
                 const SemanticPointCloud &cloud);
FeatureImage read_feature_image(const std::filesystem::path &path);
void write_feature_image(const std::filesystem::path &path,
                         const FeatureImage &image);
DepthImage read_depth(const std::filesystem::path &path);
void write_depth(const std::filesystem::path &path, const DepthImage &image);

// JSON documents. Parsers report the JSON path of the offending element
// and, in strict mode, reject unknown fields.

using Json = nlohmann::json;

struct Calibration {
    CameraIntrinsics intrinsics;
    CameraExtrinsics extrinsics;
};

/// A match result together with the settings that produced it.
struct MatchDocument {
    MatchResult result;
    MatchParams params;
    std::string variant;

    bool operator==(const MatchDocument &) const = default;
};

Json template_to_json(const KnowledgeTemplate &tmpl);
KnowledgeTemplate template_from_json(const Json &doc, bool strict = true);

Json match_to_json(const MatchDocument &doc);
MatchDocument match_from_json(const Json &doc, bool strict = true);

Json params_to_json(const MatchParams &params);
MatchParams params_from_json(const Json &doc, const std::string &path,
                             bool strict = true);

Json calibration_to_json(const Calibration &calib);
Calibration calibration_from_json(const Json &doc, bool strict = true);

/// {"category": "...", "annotations": [3, {"index": 4}, {"pixel": [u, v]}]}
struct AnnotationFile {
    std::string category;
    std::vector<Annotation> annotations;
};
AnnotationFile annotations_from_json(const Json &doc, bool strict = true);

/// {"pixels": [[u, v], ...]}, one entry per cloud point.
Json pixel_map_to_json(const std::vector<PixelCoord> &pixels);
std::vector<PixelCoord> pixel_map_from_json(const Json &doc);

/// Parses text as JSON; syntax errors become FormatError with the byte
/// offset.
Json parse_json(std::string_view text);

/// Two-space indented dump with a trailing newline.
std::string dump_json(const Json &doc);

KnowledgeTemplate read_template(const std::filesystem::path &path);
void write_template(const std::filesystem::path &path,
                    const KnowledgeTemplate &tmpl);
MatchDocument read_match(const std::filesystem::path &path);
void write_match(const std::filesystem::path &path, const MatchDocument &doc);
Calibration read_calibration(const std::filesystem::path &path);
void write_calibration(const std::filesystem::path &path,
                       const Calibration &calib);

/// Binary PGM (P5, 8-bit) as a mask: nonzero pixels are true.
MaskImage read_mask_pgm(const std::filesystem::path &path);
/// Binary PPM (P6, 8-bit) scaled to [0,1].
ColorImage read_color_ppm(const std::filesystem::path &path);

/// Human-readable header summary of any supported file, detected by magic
/// or JSON shape.
std::string describe_file(const std::filesystem::path &path);

}  // namespace ktm::io
