#include <cmath>
#include <initializer_list>
#include <set>
#include <sstream>

#include "ktm/io.hpp"

namespace ktm::io {

namespace {

std::string child(const std::string &path, const std::string &key) {
    return path + "/" + key;
}

std::string child(const std::string &path, std::size_t index) {
    return path + "/" + std::to_string(index);
}

const Json &field(const Json &obj, const std::string &key,
                  const std::string &path) {
    if (!obj.is_object()) throw FormatError("expected an object", path);
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw FormatError("missing field \"" + key + "\"", path);
    }
    return *it;
}

void reject_unknown(const Json &obj, std::initializer_list<const char *> known,
                    const std::string &path, bool strict) {
    if (!strict) return;
    if (!obj.is_object()) throw FormatError("expected an object", path);
    for (const auto &item : obj.items()) {
        bool ok = false;
        for (const char *k : known) ok = ok || item.key() == k;
        if (!ok) {
            throw FormatError("unknown field \"" + item.key() + "\"",
                              child(path, item.key()));
        }
    }
}

double number(const Json &j, const std::string &path) {
    if (!j.is_number()) throw FormatError("expected a number", path);
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw FormatError("expected a finite number", path);
    return v;
}

std::uint64_t unsigned_integer(const Json &j, const std::string &path) {
    if (!j.is_number_unsigned()) {
        throw FormatError("expected a nonnegative integer", path);
    }
    return j.get<std::uint64_t>();
}

std::string string_value(const Json &j, const std::string &path) {
    if (!j.is_string()) throw FormatError("expected a string", path);
    return j.get<std::string>();
}

std::vector<double> numbers(const Json &j, const std::string &path,
                            std::size_t expected_size = 0) {
    if (!j.is_array()) throw FormatError("expected an array", path);
    if (expected_size && j.size() != expected_size) {
        throw FormatError("expected " + std::to_string(expected_size) +
                                  " elements, found " + std::to_string(j.size()),
                          path);
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number(j[i], child(path, i)));
    }
    return out;
}

Vec3 vec3(const Json &j, const std::string &path) {
    const auto v = numbers(j, path, 3);
    return {v[0], v[1], v[2]};
}

Mat3 mat3(const Json &j, const std::string &path) {
    const auto v = numbers(j, path, 9);
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m(r, c) = v[3 * r + c];
    }
    return m;
}

Json to_json(const Vec3 &v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const Mat3 &m) {
    Json out = Json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
    }
    return out;
}

/// Runs `parse` and rethrows library validation errors with the JSON path.
template <typename F>
auto at_path(const std::string &path, F &&parse) {
    try {
        return parse();
    } catch (const FormatError &) {
        throw;
    } catch (const Error &e) {
        throw FormatError(e.what(), path);
    }
}

}  // namespace

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error &e) {
        throw FormatError(std::string("invalid JSON: ") + e.what(),
                          static_cast<std::uint64_t>(e.byte));
    }
}

std::string dump_json(const Json &doc) { return doc.dump(2) + "\n"; }

// --- template ---------------------------------------------------------------

Json template_to_json(const KnowledgeTemplate &tmpl) {
    Json keypoints = Json::array();
    for (const auto &kp : tmpl.keypoints()) {
        keypoints.push_back({{"position", to_json(kp.position)},
                             {"feature", kp.feature}});
    }
    Json meta = Json::object();
    for (const auto &[key, value] : tmpl.source_meta()) meta[key] = value;
    return {{"category", tmpl.category_label()},
            {"feature_dim", tmpl.feature_dim()},
            {"keypoints", std::move(keypoints)},
            {"meta", std::move(meta)}};
}

KnowledgeTemplate template_from_json(const Json &doc, bool strict) {
    const std::string root;
    reject_unknown(doc, {"category", "feature_dim", "keypoints", "meta"}, root,
                   strict);
    const std::string category =
            string_value(field(doc, "category", root), "/category");
    const auto dim = unsigned_integer(field(doc, "feature_dim", root),
                                      "/feature_dim");
    if (dim == 0) throw FormatError("feature_dim must be positive", "/feature_dim");
    const Json &list = field(doc, "keypoints", root);
    if (!list.is_array()) throw FormatError("expected an array", "/keypoints");
    std::vector<Keypoint> keypoints;
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::string path = child("/keypoints", k);
        reject_unknown(list[k], {"position", "feature"}, path, strict);
        Keypoint kp;
        kp.position = vec3(field(list[k], "position", path),
                           child(path, "position"));
        kp.feature = numbers(field(list[k], "feature", path),
                             child(path, "feature"), dim);
        keypoints.push_back(std::move(kp));
    }
    Metadata meta;
    if (doc.contains("meta")) {
        const Json &m = doc["meta"];
        if (!m.is_object()) throw FormatError("expected an object", "/meta");
        for (const auto &item : m.items()) {
            meta[item.key()] = item.value().is_string()
                                       ? item.value().get<std::string>()
                                       : item.value().dump();
        }
    }
    return at_path(root, [&] {
        return KnowledgeTemplate(dim, std::move(keypoints), category,
                                 std::move(meta));
    });
}

// --- match ------------------------------------------------------------------

Json params_to_json(const MatchParams &p) {
    return {{"beta", p.beta},
            {"delta_f", p.delta_f},
            {"delta_p", p.delta_p},
            {"ransac_iterations", p.ransac_iterations},
            {"ransac_inlier_radius", p.ransac_inlier_radius},
            {"candidate_cap", p.candidate_cap},
            {"scale_min", p.scale_min},
            {"scale_max", p.scale_max},
            {"rng_seed", p.rng_seed}};
}

MatchParams params_from_json(const Json &doc, const std::string &path,
                             bool strict) {
    reject_unknown(doc,
                   {"beta", "delta_f", "delta_p", "ransac_iterations",
                    "ransac_inlier_radius", "candidate_cap", "scale_min",
                    "scale_max", "rng_seed", "variant"},
                   path, strict);
    MatchParams p;
    p.beta = number(field(doc, "beta", path), child(path, "beta"));
    p.delta_f = number(field(doc, "delta_f", path), child(path, "delta_f"));
    p.delta_p = number(field(doc, "delta_p", path), child(path, "delta_p"));
    p.ransac_iterations = unsigned_integer(
            field(doc, "ransac_iterations", path),
            child(path, "ransac_iterations"));
    p.ransac_inlier_radius =
            number(field(doc, "ransac_inlier_radius", path),
                   child(path, "ransac_inlier_radius"));
    p.candidate_cap = unsigned_integer(field(doc, "candidate_cap", path),
                                       child(path, "candidate_cap"));
    p.scale_min = number(field(doc, "scale_min", path), child(path, "scale_min"));
    p.scale_max = number(field(doc, "scale_max", path), child(path, "scale_max"));
    p.rng_seed = unsigned_integer(field(doc, "rng_seed", path),
                                  child(path, "rng_seed"));
    return p;
}

Json match_to_json(const MatchDocument &doc) {
    const MatchResult &r = doc.result;
    Json keypoints = Json::array();
    for (const auto &m : r.keypoints) {
        Json entry = {{"status", m.matched() ? "matched" : "inferred"}};
        if (m.matched()) entry["index"] = m.cloud_index;
        entry["position"] = to_json(m.position);
        entry["feature_residual"] = m.feature_residual;
        entry["structure_residual"] = m.structure_residual;
        keypoints.push_back(std::move(entry));
    }
    Json params = params_to_json(doc.params);
    params["variant"] = doc.variant;
    return {{"transform",
             {{"rotation", to_json(r.transform.rotation())},
              {"translation", to_json(r.transform.translation())},
              {"scale", r.transform.scale()}}},
            {"keypoints", std::move(keypoints)},
            {"inlier_count", r.inlier_count},
            {"objective", r.objective_value},
            {"objective_uses_stored_transform",
             r.objective_uses_stored_transform},
            {"params_echo", std::move(params)}};
}

MatchDocument match_from_json(const Json &doc, bool strict) {
    const std::string root;
    reject_unknown(doc,
                   {"transform", "keypoints", "inlier_count", "objective",
                    "objective_uses_stored_transform", "params_echo"},
                   root, strict);
    MatchDocument out;
    MatchResult &r = out.result;

    const Json &t = field(doc, "transform", root);
    reject_unknown(t, {"rotation", "translation", "scale"}, "/transform", strict);
    const Mat3 rotation = mat3(field(t, "rotation", "/transform"),
                               "/transform/rotation");
    const Vec3 translation = vec3(field(t, "translation", "/transform"),
                                  "/transform/translation");
    const double scale = number(field(t, "scale", "/transform"),
                                "/transform/scale");
    r.transform = at_path("/transform", [&] {
        return SimilarityTransform(rotation, translation, scale);
    });

    const Json &list = field(doc, "keypoints", root);
    if (!list.is_array()) throw FormatError("expected an array", "/keypoints");
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::string path = child("/keypoints", k);
        const Json &e = list[k];
        reject_unknown(e,
                       {"status", "index", "position", "feature_residual",
                        "structure_residual"},
                       path, strict);
        KeypointMatch m;
        const std::string status =
                string_value(field(e, "status", path), child(path, "status"));
        if (status == "matched") {
            m.status = MatchStatus::matched;
            m.cloud_index = unsigned_integer(field(e, "index", path),
                                             child(path, "index"));
        } else if (status == "inferred") {
            m.status = MatchStatus::inferred;
            if (e.contains("index")) {
                throw FormatError("inferred keypoints carry no index",
                                  child(path, "index"));
            }
        } else {
            throw FormatError("status must be \"matched\" or \"inferred\"",
                              child(path, "status"));
        }
        m.position = vec3(field(e, "position", path), child(path, "position"));
        m.feature_residual = number(field(e, "feature_residual", path),
                                    child(path, "feature_residual"));
        m.structure_residual = number(field(e, "structure_residual", path),
                                      child(path, "structure_residual"));
        r.keypoints.push_back(m);
    }
    r.inlier_count = unsigned_integer(field(doc, "inlier_count", root),
                                      "/inlier_count");
    r.objective_value = number(field(doc, "objective", root), "/objective");
    if (doc.contains("objective_uses_stored_transform")) {
        const Json &flag = doc["objective_uses_stored_transform"];
        if (!flag.is_boolean()) {
            throw FormatError("expected a boolean",
                              "/objective_uses_stored_transform");
        }
        r.objective_uses_stored_transform = flag.get<bool>();
    }
    const Json &params = field(doc, "params_echo", root);
    out.params = params_from_json(params, "/params_echo", strict);
    if (params.contains("variant")) {
        out.variant = string_value(params["variant"], "/params_echo/variant");
    }
    return out;
}

// --- calibration ------------------------------------------------------------

Json calibration_to_json(const Calibration &calib) {
    const auto &in = calib.intrinsics;
    return {{"intrinsics",
             {{"fx", in.fx},
              {"fy", in.fy},
              {"cx", in.cx},
              {"cy", in.cy},
              {"width", in.width},
              {"height", in.height}}},
            {"extrinsics",
             {{"rotation", to_json(calib.extrinsics.rotation)},
              {"translation", to_json(calib.extrinsics.translation)}}}};
}

Calibration calibration_from_json(const Json &doc, bool strict) {
    const std::string root;
    reject_unknown(doc, {"intrinsics", "extrinsics"}, root, strict);
    Calibration c;
    const Json &in = field(doc, "intrinsics", root);
    reject_unknown(in, {"fx", "fy", "cx", "cy", "width", "height"},
                   "/intrinsics", strict);
    c.intrinsics.fx = number(field(in, "fx", "/intrinsics"), "/intrinsics/fx");
    c.intrinsics.fy = number(field(in, "fy", "/intrinsics"), "/intrinsics/fy");
    c.intrinsics.cx = number(field(in, "cx", "/intrinsics"), "/intrinsics/cx");
    c.intrinsics.cy = number(field(in, "cy", "/intrinsics"), "/intrinsics/cy");
    const auto width = unsigned_integer(field(in, "width", "/intrinsics"),
                                        "/intrinsics/width");
    const auto height = unsigned_integer(field(in, "height", "/intrinsics"),
                                         "/intrinsics/height");
    if (width > UINT32_MAX || height > UINT32_MAX) {
        throw FormatError("image size out of range", "/intrinsics");
    }
    c.intrinsics.width = static_cast<std::uint32_t>(width);
    c.intrinsics.height = static_cast<std::uint32_t>(height);
    at_path("/intrinsics", [&] {
        c.intrinsics.validate();
        return 0;
    });

    const Json &ex = field(doc, "extrinsics", root);
    reject_unknown(ex, {"rotation", "translation"}, "/extrinsics", strict);
    c.extrinsics.rotation = mat3(field(ex, "rotation", "/extrinsics"),
                                 "/extrinsics/rotation");
    c.extrinsics.translation = vec3(field(ex, "translation", "/extrinsics"),
                                    "/extrinsics/translation");
    at_path("/extrinsics", [&] {
        c.extrinsics.validate();
        return 0;
    });
    return c;
}

// --- annotations / pixel maps -----------------------------------------------

AnnotationFile annotations_from_json(const Json &doc, bool strict) {
    const std::string root;
    reject_unknown(doc, {"category", "annotations"}, root, strict);
    AnnotationFile out;
    if (doc.contains("category")) {
        out.category = string_value(doc["category"], "/category");
    }
    const Json &list = field(doc, "annotations", root);
    if (!list.is_array()) throw FormatError("expected an array", "/annotations");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = child("/annotations", i);
        const Json &a = list[i];
        if (a.is_number()) {
            out.annotations.emplace_back(
                    static_cast<std::size_t>(unsigned_integer(a, path)));
        } else if (a.is_object() && a.contains("index")) {
            reject_unknown(a, {"index"}, path, strict);
            out.annotations.emplace_back(static_cast<std::size_t>(
                    unsigned_integer(a["index"], child(path, "index"))));
        } else if (a.is_object() && a.contains("pixel")) {
            reject_unknown(a, {"pixel"}, path, strict);
            const auto px = numbers(a["pixel"], child(path, "pixel"), 2);
            for (std::size_t j = 0; j < 2; ++j) {
                if (px[j] < 0 || px[j] != std::floor(px[j]) || px[j] > UINT32_MAX) {
                    throw FormatError("pixel coordinates must be nonnegative "
                                      "integers",
                                      child(child(path, "pixel"), j));
                }
            }
            out.annotations.emplace_back(
                    PixelCoord{static_cast<std::uint32_t>(px[0]),
                               static_cast<std::uint32_t>(px[1])});
        } else {
            throw FormatError("annotation must be an index, {\"index\": i} or "
                              "{\"pixel\": [u, v]}",
                              path);
        }
    }
    return out;
}

Json pixel_map_to_json(const std::vector<PixelCoord> &pixels) {
    Json list = Json::array();
    for (const auto &p : pixels) list.push_back({p.u, p.v});
    return {{"pixels", std::move(list)}};
}

std::vector<PixelCoord> pixel_map_from_json(const Json &doc) {
    const Json &list = field(doc, "pixels", "");
    if (!list.is_array()) throw FormatError("expected an array", "/pixels");
    std::vector<PixelCoord> out;
    out.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = child("/pixels", i);
        const Json &p = list[i];
        if (!p.is_array() || p.size() != 2) {
            throw FormatError("expected [u, v]", path);
        }
        const auto u = unsigned_integer(p[0], child(path, 0));
        const auto v = unsigned_integer(p[1], child(path, 1));
        out.push_back({static_cast<std::uint32_t>(u),
                       static_cast<std::uint32_t>(v)});
    }
    return out;
}

// --- files ------------------------------------------------------------------

KnowledgeTemplate read_template(const std::filesystem::path &path) {
    return template_from_json(parse_json(read_file(path)));
}

void write_template(const std::filesystem::path &path,
                    const KnowledgeTemplate &tmpl) {
    write_file_atomic(path, dump_json(template_to_json(tmpl)));
}

MatchDocument read_match(const std::filesystem::path &path) {
    return match_from_json(parse_json(read_file(path)));
}

void write_match(const std::filesystem::path &path, const MatchDocument &doc) {
    write_file_atomic(path, dump_json(match_to_json(doc)));
}

Calibration read_calibration(const std::filesystem::path &path) {
    return calibration_from_json(parse_json(read_file(path)));
}

void write_calibration(const std::filesystem::path &path,
                       const Calibration &calib) {
    write_file_atomic(path, dump_json(calibration_to_json(calib)));
}

// --- inspect ----------------------------------------------------------------

std::string describe_file(const std::filesystem::path &path) {
    const std::string bytes = read_file(path);
    std::ostringstream out;
    const std::string_view magic = std::string_view(bytes).substr(0, 4);
    if (magic == "SPCF") {
        const auto cloud = decode_cloud(bytes);
        out << "format: SPCF v1\n"
            << "points: " << cloud.size() << "\n"
            << "feature_dim: " << cloud.feature_dim() << "\n"
            << "features_normalized: "
            << (cloud.features_normalized() ? "true" : "false") << "\n";
        if (!cloud.empty()) {
            Vec3 lo = cloud.position(0), hi = cloud.position(0);
            for (const auto &p : cloud.positions()) {
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
            }
            out << "bounds_min: " << lo.x() << " " << lo.y() << " " << lo.z()
                << "\nbounds_max: " << hi.x() << " " << hi.y() << " " << hi.z()
                << "\n";
        }
        return out.str();
    }
    if (magic == "SFIM") {
        const auto image = decode_feature_image(bytes);
        out << "format: SFIM v1\n"
            << "width: " << image.width() << "\nheight: " << image.height()
            << "\nfeature_dim: " << image.feature_dim() << "\n";
        return out.str();
    }
    if (magic == "SDEP") {
        const auto depth = decode_depth(bytes);
        std::size_t valid = 0;
        for (auto d : depth.data()) valid += d != 0;
        out << "format: SDEP v1\n"
            << "width: " << depth.width() << "\nheight: " << depth.height()
            << "\nvalid_pixels: " << valid << "\n";
        return out.str();
    }
    const Json doc = parse_json(bytes);
    if (doc.is_object() && doc.contains("keypoints") &&
        doc.contains("feature_dim")) {
        const auto tmpl = template_from_json(doc);
        out << "format: template\n"
            << "category: " << tmpl.category_label() << "\n"
            << "K: " << tmpl.size() << "\n"
            << "feature_dim: " << tmpl.feature_dim() << "\n";
        return out.str();
    }
    if (doc.is_object() && doc.contains("transform") &&
        doc.contains("keypoints")) {
        const auto match = match_from_json(doc);
        std::size_t matched = 0;
        for (const auto &m : match.result.keypoints) matched += m.matched();
        out << "format: match\n"
            << "variant: " << match.variant << "\n"
            << "K: " << match.result.keypoints.size() << "\n"
            << "matched: " << matched << "\n"
            << "inferred: " << match.result.keypoints.size() - matched << "\n"
            << "scale: " << match.result.transform.scale() << "\n"
            << "objective: " << match.result.objective_value << "\n";
        return out.str();
    }
    if (doc.is_object() && doc.contains("intrinsics")) {
        const auto calib = calibration_from_json(doc);
        out << "format: calibration\n"
            << "image: " << calib.intrinsics.width << "x"
            << calib.intrinsics.height << "\n"
            << "fx: " << calib.intrinsics.fx << "\nfy: " << calib.intrinsics.fy
            << "\n";
        return out.str();
    }
    if (doc.is_object() && doc.contains("variants") && doc.contains("scenes")) {
        out << "format: bench report\n"
            << "scenes: " << doc["scenes"].size() << "\n";
        return out.str();
    }
    throw FormatError("unrecognized file", "");
}

}  // namespace ktm::io
