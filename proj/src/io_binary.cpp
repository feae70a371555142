#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "ktm/io.hpp"

namespace ktm::io {

namespace {

static_assert(std::numeric_limits<float>::is_iec559);

class ByteWriter {
public:
    explicit ByteWriter(std::size_t reserve) { out_.reserve(reserve); }

    void magic(const char (&tag)[5]) { out_.append(tag, 4); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v & 0xFF));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int shift = 0; shift < 32; shift += 8) {
            u8(static_cast<std::uint8_t>((v >> shift) & 0xFF));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f32(double v) { f32(static_cast<float>(v)); }

    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

    void expect_magic(const char (&tag)[5], const char *format) {
        if (bytes_.size() < 4 || std::memcmp(bytes_.data(), tag, 4) != 0) {
            throw BadMagicError(std::string("not a ") + format + " file", 0);
        }
        offset_ = 4;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[offset_++]);
    }
    std::uint16_t u16() {
        need(2);
        const auto lo = static_cast<std::uint8_t>(bytes_[offset_]);
        const auto hi = static_cast<std::uint8_t>(bytes_[offset_ + 1]);
        offset_ += 2;
        return static_cast<std::uint16_t>(lo | (hi << 8));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(
                         static_cast<std::uint8_t>(bytes_[offset_ + i]))
                 << (8 * i);
        }
        offset_ += 4;
        return v;
    }
    float finite_f32() {
        const std::size_t at = offset_;
        const float v = std::bit_cast<float>(u32());
        if (!std::isfinite(v)) {
            throw NonFiniteValueError("non-finite float", at);
        }
        return v;
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            throw TruncatedPayloadError("header truncated", offset_);
        }
    }

    std::string_view bytes_;
    std::size_t offset_ = 0;
};

void check_version(ByteReader &in) {
    const std::size_t at = in.offset();
    const std::uint32_t version = in.u32();
    if (version != kFormatVersion) {
        throw VersionUnsupportedError(
                "unsupported format version " + std::to_string(version), at);
    }
}

/// Verifies the payload holds exactly `records` records of `record_size`
/// bytes after `header`.
void check_payload(std::string_view bytes, std::size_t header,
                   std::uint64_t records, std::uint64_t record_size) {
    const std::uint64_t available = bytes.size() - header;
    const std::uint64_t complete = available / record_size;
    if (complete < records) {
        throw TruncatedPayloadError(
                "payload truncated: " + std::to_string(records) +
                        " records declared, " + std::to_string(complete) +
                        " present",
                header + complete * record_size);
    }
    const std::uint64_t expected = records * record_size;
    if (available > expected) {
        throw FormatError("trailing bytes after declared payload",
                          header + expected);
    }
}

}  // namespace

// --- SPCF -------------------------------------------------------------------

std::string encode_cloud(const SemanticPointCloud &cloud) {
    const std::size_t dim = cloud.feature_dim();
    if (cloud.size() > std::numeric_limits<std::uint32_t>::max() ||
        dim > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError("cloud too large for SPCF");
    }
    ByteWriter out(kCloudHeaderSize + cloud.size() * (6 + dim) * 4);
    out.magic("SPCF");
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(cloud.size()));
    out.u32(static_cast<std::uint32_t>(dim));
    out.u8(cloud.features_normalized() ? 1 : 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int j = 0; j < 3; ++j) out.f32(cloud.position(i)[j]);
        for (int j = 0; j < 3; ++j) out.f32(cloud.color(i)[j]);
        for (double v : cloud.feature(i)) out.f32(v);
    }
    return out.take();
}

SemanticPointCloud decode_cloud(std::string_view bytes) {
    ByteReader in(bytes);
    in.expect_magic("SPCF", "SPCF");
    check_version(in);
    const std::uint32_t count = in.u32();
    const std::size_t dim_at = in.offset();
    const std::uint32_t dim = in.u32();
    const std::size_t flags_at = in.offset();
    const std::uint8_t flags = in.u8();
    if (dim == 0) throw FormatError("feature_dim must be positive", dim_at);
    if (flags & ~std::uint8_t{1}) {
        throw FormatError("unknown flag bits set", flags_at);
    }
    const bool normalized = flags & 1;
    const std::uint64_t record = (6ULL + dim) * 4ULL;
    check_payload(bytes, kCloudHeaderSize, count, record);

    std::vector<Vec3> positions(count), colors(count);
    std::vector<double> features(static_cast<std::size_t>(count) * dim);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t record_at = in.offset();
        for (int j = 0; j < 3; ++j) positions[i][j] = in.finite_f32();
        for (int j = 0; j < 3; ++j) {
            const std::size_t at = in.offset();
            const double c = in.finite_f32();
            if (c < 0.0 || c > 1.0) {
                throw FormatError("color outside [0,1]", at);
            }
            colors[i][j] = c;
        }
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = in.finite_f32();
            features[i * dim + j] = v;
            norm_sq += v * v;
        }
        if (normalized && std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6) {
            throw FormatError("feature not unit length in normalized cloud",
                              record_at);
        }
    }
    return SemanticPointCloud(dim, std::move(positions), std::move(colors),
                              std::move(features), normalized);
}

// --- SFIM -------------------------------------------------------------------

std::string encode_feature_image(const FeatureImage &image) {
    ByteWriter out(kFeatureImageHeaderSize + image.data().size() * 4);
    out.magic("SFIM");
    out.u32(kFormatVersion);
    out.u32(image.width());
    out.u32(image.height());
    out.u32(image.feature_dim());
    for (float v : image.data()) out.f32(v);
    return out.take();
}

FeatureImage decode_feature_image(std::string_view bytes) {
    ByteReader in(bytes);
    in.expect_magic("SFIM", "SFIM");
    check_version(in);
    const std::uint32_t width = in.u32();
    const std::uint32_t height = in.u32();
    const std::size_t dim_at = in.offset();
    const std::uint32_t dim = in.u32();
    if (width == 0 || height == 0) {
        throw FormatError("image dimensions must be positive", 8);
    }
    if (dim == 0) throw FormatError("feature_dim must be positive", dim_at);
    const std::uint64_t pixels = static_cast<std::uint64_t>(width) * height;
    check_payload(bytes, kFeatureImageHeaderSize, pixels, 4ULL * dim);
    std::vector<float> data(static_cast<std::size_t>(pixels) * dim);
    for (auto &v : data) v = in.finite_f32();
    return FeatureImage(width, height, dim, std::move(data));
}

// --- SDEP -------------------------------------------------------------------

std::string encode_depth(const DepthImage &image) {
    ByteWriter out(kDepthHeaderSize + image.data().size() * 2);
    out.magic("SDEP");
    out.u32(kFormatVersion);
    out.u32(image.width());
    out.u32(image.height());
    for (std::uint16_t v : image.data()) out.u16(v);
    return out.take();
}

DepthImage decode_depth(std::string_view bytes) {
    ByteReader in(bytes);
    in.expect_magic("SDEP", "SDEP");
    check_version(in);
    const std::uint32_t width = in.u32();
    const std::uint32_t height = in.u32();
    if (width == 0 || height == 0) {
        throw FormatError("image dimensions must be positive", 8);
    }
    const std::uint64_t pixels = static_cast<std::uint64_t>(width) * height;
    check_payload(bytes, kDepthHeaderSize, pixels, 2);
    std::vector<std::uint16_t> data(static_cast<std::size_t>(pixels));
    for (auto &v : data) v = in.u16();
    return DepthImage(width, height, std::move(data));
}

// --- files ------------------------------------------------------------------

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path.string());
    return buffer.str();
}

void write_file_atomic(const std::filesystem::path &path,
                       std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path.string());
    }
}

SemanticPointCloud read_cloud(const std::filesystem::path &path) {
    return decode_cloud(read_file(path));
}

void write_cloud(const std::filesystem::path &path,
                 const SemanticPointCloud &cloud) {
    write_file_atomic(path, encode_cloud(cloud));
}

FeatureImage read_feature_image(const std::filesystem::path &path) {
    return decode_feature_image(read_file(path));
}

void write_feature_image(const std::filesystem::path &path,
                         const FeatureImage &image) {
    write_file_atomic(path, encode_feature_image(image));
}

DepthImage read_depth(const std::filesystem::path &path) {
    return decode_depth(read_file(path));
}

void write_depth(const std::filesystem::path &path, const DepthImage &image) {
    write_file_atomic(path, encode_depth(image));
}

// --- PNM --------------------------------------------------------------------

namespace {

struct Pnm {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t maxval = 255;
    std::string_view pixels;
};

Pnm parse_pnm(std::string_view bytes, const char *magic, std::size_t channels) {
    if (bytes.size() < 2 || bytes.substr(0, 2) != magic) {
        throw BadMagicError(std::string("expected a ") + magic + " image", 0);
    }
    std::size_t pos = 2;
    auto next_number = [&]() -> std::uint64_t {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        std::uint64_t v = 0;
        while (pos < bytes.size() &&
               std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + static_cast<std::uint64_t>(bytes[pos] - '0');
            if (v > std::numeric_limits<std::uint32_t>::max()) {
                throw FormatError("PNM header value too large", start);
            }
            ++pos;
        }
        if (pos == start) throw FormatError("malformed PNM header", start);
        return v;
    };
    Pnm pnm;
    pnm.width = static_cast<std::uint32_t>(next_number());
    pnm.height = static_cast<std::uint32_t>(next_number());
    const std::size_t maxval_at = pos;
    const auto maxval = next_number();
    if (maxval == 0 || maxval > 255) {
        throw FormatError("only 8-bit PNM images are supported", maxval_at);
    }
    pnm.maxval = static_cast<std::uint32_t>(maxval);
    ++pos;  // single whitespace byte before the raster
    const std::uint64_t expected =
            static_cast<std::uint64_t>(pnm.width) * pnm.height * channels;
    if (pos > bytes.size() || bytes.size() - pos < expected) {
        throw TruncatedPayloadError("PNM raster truncated", bytes.size());
    }
    pnm.pixels = bytes.substr(pos, expected);
    return pnm;
}

}  // namespace

MaskImage read_mask_pgm(const std::filesystem::path &path) {
    const std::string bytes = read_file(path);
    const Pnm pnm = parse_pnm(bytes, "P5", 1);
    std::vector<std::uint8_t> data(pnm.pixels.begin(), pnm.pixels.end());
    return MaskImage(pnm.width, pnm.height, std::move(data));
}

ColorImage read_color_ppm(const std::filesystem::path &path) {
    const std::string bytes = read_file(path);
    const Pnm pnm = parse_pnm(bytes, "P6", 3);
    std::vector<float> data;
    data.reserve(pnm.pixels.size());
    const auto maxval = static_cast<float>(pnm.maxval);
    for (char c : pnm.pixels) {
        const auto v = static_cast<float>(static_cast<std::uint8_t>(c));
        data.push_back(std::min(v, maxval) / maxval);
    }
    return ColorImage(pnm.width, pnm.height, std::move(data));
}

}  // namespace ktm::io
