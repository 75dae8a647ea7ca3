#include "headbias/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace headbias {

namespace {

constexpr char kMagic[4] = {'H', 'B', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64s(std::ofstream& out, const Vector& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("checkpoint: cannot open " + path, 0);
    }

    std::uint32_t u32(const char* field) {
        std::uint32_t v = 0;
        read(&v, sizeof v, field);
        return v;
    }

    std::uint8_t u8(const char* field) {
        std::uint8_t v = 0;
        read(&v, sizeof v, field);
        return v;
    }

    void f64s(Vector& v, const char* field) {
        read(v.data(), v.size() * sizeof(double), field);
    }

    void expect_magic() {
        char magic[4];
        read(magic, 4, "magic");
        if (std::memcmp(magic, kMagic, 4) != 0) {
            throw FormatError("checkpoint: bad magic in " + path_, 0);
        }
    }

    void expect_eof() {
        char extra;
        in_.read(&extra, 1);
        if (in_.gcount() != 0) {
            throw FormatError("checkpoint: trailing bytes in " + path_, offset_);
        }
    }

    std::size_t offset() const noexcept { return offset_; }

private:
    void read(void* dst, std::size_t n, const char* field) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw FormatError("checkpoint: truncated " + std::string(field) + " in " + path_,
                              offset_);
        }
        offset_ += n;
    }

    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

// Dimension sanity cap so corrupt headers fail fast instead of allocating
// gigabytes.
constexpr std::uint32_t kMaxDim = 1u << 20;

std::uint32_t checked_dim(std::uint32_t v, const char* field, std::size_t offset) {
    if (v == 0 || v > kMaxDim) {
        throw FormatError("checkpoint: implausible " + std::string(field) + " " +
                              std::to_string(v),
                          offset);
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Classifier& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write " + path, 0);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(model.class_count));
    write_u32(out, static_cast<std::uint32_t>(model.input_dim));
    write_u32(out, static_cast<std::uint32_t>(model.feature_dim()));
    write_u32(out, static_cast<std::uint32_t>(model.extractor.layers.size()));
    const char frozen = model.extractor.frozen ? 1 : 0;
    out.write(&frozen, 1);
    for (const AffineLayer& layer : model.extractor.layers) {
        write_u32(out, static_cast<std::uint32_t>(layer.w.rows()));
        write_u32(out, static_cast<std::uint32_t>(layer.w.cols()));
        write_f64s(out, layer.w.data());
        write_f64s(out, layer.b);
    }
    write_f64s(out, model.head.w.data());
    write_f64s(out, model.head.b);
    if (!out) throw FormatError("checkpoint: write failed for " + path, 0);
}

namespace {

struct Header {
    std::uint32_t class_count;
    std::uint32_t input_dim;
    std::uint32_t feature_dim;
    std::uint32_t layer_count;
    bool frozen;
};

Header read_header(Reader& r) {
    r.expect_magic();
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version), 4);
    }
    Header h{};
    h.class_count = checked_dim(r.u32("class_count"), "class_count", 8);
    h.input_dim = checked_dim(r.u32("input_dim"), "input_dim", 12);
    h.feature_dim = checked_dim(r.u32("feature_dim"), "feature_dim", 16);
    h.layer_count = r.u32("layer_count");
    if (h.layer_count > 64) {
        throw FormatError("checkpoint: implausible layer count " + std::to_string(h.layer_count),
                          20);
    }
    h.frozen = r.u8("frozen flag") != 0;
    return h;
}

AffineLayer read_layer(Reader& r) {
    const std::size_t at = r.offset();
    const std::uint32_t out_dim = checked_dim(r.u32("layer out_dim"), "layer out_dim", at);
    const std::uint32_t in_dim = checked_dim(r.u32("layer in_dim"), "layer in_dim", at + 4);
    AffineLayer layer;
    layer.w = Matrix(out_dim, in_dim);
    layer.b = Vector(out_dim, 0.0);
    r.f64s(layer.w.data(), "layer weights");
    r.f64s(layer.b, "layer biases");
    return layer;
}

}  // namespace

Classifier load_checkpoint(const std::string& path) {
    Reader r(path);
    const Header h = read_header(r);
    Classifier model;
    model.class_count = h.class_count;
    model.input_dim = h.input_dim;
    model.extractor.frozen = h.frozen;
    std::size_t expected_in = h.input_dim;
    for (std::uint32_t l = 0; l < h.layer_count; ++l) {
        const std::size_t at = r.offset();
        AffineLayer layer = read_layer(r);
        if (layer.w.cols() != expected_in) {
            throw FormatError("checkpoint: layer input dim " + std::to_string(layer.w.cols()) +
                                  " does not chain from previous dim " +
                                  std::to_string(expected_in),
                              at);
        }
        expected_in = layer.w.rows();
        model.extractor.layers.push_back(std::move(layer));
    }
    if (expected_in != h.feature_dim) {
        throw FormatError("checkpoint: extractor output dim " + std::to_string(expected_in) +
                              " does not match feature_dim " + std::to_string(h.feature_dim),
                          r.offset());
    }
    model.head.w = Matrix(h.class_count, h.feature_dim);
    model.head.b = Vector(h.class_count, 0.0);
    r.f64s(model.head.w.data(), "head weights");
    r.f64s(model.head.b, "head biases");
    r.expect_eof();
    return model;
}

std::pair<ClassificationHead, std::size_t> load_checkpoint_head(const std::string& path) {
    Reader r(path);
    const Header h = read_header(r);
    for (std::uint32_t l = 0; l < h.layer_count; ++l) read_layer(r);
    ClassificationHead head;
    head.w = Matrix(h.class_count, h.feature_dim);
    head.b = Vector(h.class_count, 0.0);
    r.f64s(head.w.data(), "head weights");
    r.f64s(head.b, "head biases");
    return {std::move(head), h.class_count};
}

}  // namespace headbias
