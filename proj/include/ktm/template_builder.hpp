#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ktm/core.hpp"
#include "ktm/parallel.hpp"
#include "ktm/projection.hpp"

namespace ktm {

/// Channel weights of the joint sampling metric. Positions are divided by
/// the cloud's bounding-box diagonal before weighting; colors and unit
/// features are used as is.
struct FpsWeights {
    double position = 1.0;
    double color = 1.0;
    double feature = 1.0;

    void validate() const;
};

/// Picks k keypoints by greedy farthest point sampling under the joint
/// metric. The first keypoint is `seed_index`, or the point nearest the
/// position centroid when unset. Throws InsufficientPointsError when k
/// exceeds the cloud size and DegenerateGeometryError when k >= 3 picks
/// come out collinear.
KnowledgeTemplate fps_sample(const SemanticPointCloud &cloud,
                             std::size_t k,
                             const FpsWeights &weights = {},
                             std::optional<std::size_t> seed_index = {},
                             const std::string &category_label = {},
                             Execution exec = Execution::parallel);

/// Index of the point closest to the position centroid (ties: lowest).
std::size_t centroid_nearest_index(const SemanticPointCloud &cloud);

/// Bounding-box diagonal of the positions; 1 for degenerate boxes.
double bounding_diagonal(const SemanticPointCloud &cloud);

/// A manual annotation: a cloud index, or a source pixel resolved through
/// the pixel map produced by projection.
using Annotation = std::variant<std::size_t, PixelCoord>;

/// Builds a template from annotated cloud points, in annotation order.
/// `pixel_map` (cloud index -> source pixel) is needed only for pixel
/// annotations. Throws IndexError for unresolvable entries and
/// DuplicateAnnotationError when two entries hit the same point.
KnowledgeTemplate build_from_annotations(
        const SemanticPointCloud &cloud,
        const std::vector<Annotation> &annotations,
        const std::string &category_label,
        const std::vector<PixelCoord> *pixel_map = nullptr);

enum class DiagnosticCode {
    keypoint_count,
    near_collinear,
    duplicate_features,
};

struct Diagnostic {
    DiagnosticCode code;
    std::string message;
};

/// Warnings only: K outside [3, 20], near-collinear layout, and keypoint
/// pairs whose normalized features are closer than 0.05.
std::vector<Diagnostic> validate_template(const KnowledgeTemplate &tmpl);

const char *to_string(DiagnosticCode code);

}  // namespace ktm
