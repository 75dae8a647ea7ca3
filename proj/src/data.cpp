#include "headbias/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace headbias {

ClassSplit ClassSplit::make(std::size_t class_count, const std::set<std::size_t>& forgotten) {
    if (forgotten.empty()) throw ConfigError("class split: forgotten set is empty");
    if (forgotten.size() >= class_count) {
        throw ConfigError("class split: forgotten set must leave at least one retained class");
    }
    ClassSplit split;
    split.forgotten = forgotten;
    for (std::size_t c : forgotten) {
        if (c >= class_count) {
            throw ConfigError("class split: label " + std::to_string(c) + " out of range for " +
                              std::to_string(class_count) + " classes");
        }
    }
    for (std::size_t c = 0; c < class_count; ++c) {
        if (!forgotten.count(c)) split.retained.insert(c);
    }
    return split;
}

Matrix blob_centers(std::size_t class_count, std::size_t dim, double separation, SeededRng& rng) {
    if (class_count == 0 || dim == 0) {
        throw ConfigError("blob centers: class count and dim must be positive");
    }
    if (separation <= 0.0) throw ConfigError("blob centers: separation must be positive");

    // Box side grows with the lattice span needed for class_count balls of
    // radius separation/2.
    const double span = std::ceil(std::pow(static_cast<double>(class_count), 1.0 / dim));
    const double side = separation * (span + 1.0);
    constexpr int kMaxAttempts = 200;

    Matrix centers(class_count, dim);
    for (std::size_t k = 0; k < class_count; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            Vector candidate(dim);
            for (std::size_t j = 0; j < dim; ++j) candidate[j] = rng.uniform(0.0, side);
            placed = true;
            for (std::size_t prev = 0; prev < k && placed; ++prev) {
                double dist2 = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double delta = candidate[j] - centers(prev, j);
                    dist2 += delta * delta;
                }
                if (dist2 < separation * separation) placed = false;
            }
            if (placed) {
                for (std::size_t j = 0; j < dim; ++j) centers(k, j) = candidate[j];
            }
        }
        if (!placed) {
            throw ConfigError("blob centers: dim " + std::to_string(dim) +
                              " too small to place " + std::to_string(class_count) +
                              " centers at separation " + std::to_string(separation));
        }
    }

    // Center the cloud at the origin and contract it until the closest pair
    // sits exactly at `separation`; rejection above only guarantees a floor,
    // and in high dimensions uniform draws land far apart, which would make
    // the task trivially separable.
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (std::size_t k = 0; k < class_count; ++k) mean += centers(k, j);
        mean /= static_cast<double>(class_count);
        for (std::size_t k = 0; k < class_count; ++k) centers(k, j) -= mean;
    }
    if (class_count > 1) {
        double min_dist2 = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < class_count; ++a) {
            for (std::size_t b = a + 1; b < class_count; ++b) {
                double dist2 = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double delta = centers(a, j) - centers(b, j);
                    dist2 += delta * delta;
                }
                min_dist2 = std::min(min_dist2, dist2);
            }
        }
        const double scale = separation / std::sqrt(min_dist2);
        for (double& v : centers.data()) v *= scale;
    }
    return centers;
}

namespace {

// Fixed noise scale of the blob generator; separation is expressed in the
// same units, so the default task (separation 6) keeps adjacent classes
// close enough that retain-only optimization still feels the forgotten
// classes at the decision boundaries.
constexpr double kNoiseStd = 2.0;

}  // namespace

Dataset sample_blobs(const Matrix& centers, std::size_t per_class, SeededRng& rng) {
    if (per_class == 0) throw ConfigError("sample blobs: per_class must be positive");
    Dataset out;
    out.class_count = centers.rows();
    out.samples.reserve(centers.rows() * per_class);
    for (std::size_t k = 0; k < centers.rows(); ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.y = k;
            s.x.resize(centers.cols());
            for (std::size_t j = 0; j < centers.cols(); ++j) {
                s.x[j] = centers(k, j) + kNoiseStd * rng.normal();
            }
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

Dataset make_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                   double separation, SeededRng& rng) {
    const Matrix centers = blob_centers(class_count, dim, separation, rng);
    return sample_blobs(centers, per_class, rng);
}

std::pair<Dataset, Dataset> split_by_classes(const Dataset& d, const std::set<std::size_t>& v) {
    if (v.empty()) throw ConfigError("split: forgotten set is empty");
    Dataset retain;
    Dataset forget;
    retain.class_count = d.class_count;
    forget.class_count = d.class_count;
    bool any_retained = false;
    for (const Sample& s : d.samples) {
        if (v.count(s.y)) {
            forget.samples.push_back(s);
        } else {
            retain.samples.push_back(s);
            any_retained = true;
        }
    }
    if (!any_retained) throw ConfigError("split: forgotten set covers every class present");
    return {std::move(retain), std::move(forget)};
}

namespace {

// Big-endian u32, as the IDX convention demands.
std::uint32_t read_u32_be(std::ifstream& in, std::size_t& offset, const char* field) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (in.gcount() != 4) throw FormatError(std::string("idx: truncated ") + field, offset);
    offset += 4;
    return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
           (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

struct IdxHeader {
    std::uint32_t count = 0;
    std::size_t item_size = 1;  // bytes per record beyond the count dimension
};

IdxHeader read_idx_header(std::ifstream& in, std::size_t& offset, unsigned expected_dims,
                          const std::string& path) {
    unsigned char magic[4];
    in.read(reinterpret_cast<char*>(magic), 4);
    if (in.gcount() != 4) throw FormatError("idx: truncated magic in " + path, offset);
    if (magic[0] != 0 || magic[1] != 0) {
        throw FormatError("idx: bad magic in " + path, offset);
    }
    if (magic[2] != 0x08) {
        throw FormatError("idx: unsupported data type in " + path +
                              " (only unsigned byte, 0x08, is supported)",
                          offset + 2);
    }
    const unsigned dims = magic[3];
    if (dims != expected_dims) {
        throw FormatError("idx: expected " + std::to_string(expected_dims) + " dimensions in " +
                              path + ", found " + std::to_string(dims),
                          offset + 3);
    }
    offset += 4;

    IdxHeader header;
    header.count = read_u32_be(in, offset, "dimension size");
    for (unsigned d = 1; d < dims; ++d) {
        header.item_size *= read_u32_be(in, offset, "dimension size");
    }
    return header;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw FormatError("idx: cannot open " + images_path, 0);
    std::size_t img_offset = 0;
    const IdxHeader img = read_idx_header(images, img_offset, 3, images_path);

    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw FormatError("idx: cannot open " + labels_path, 0);
    std::size_t lbl_offset = 0;
    const IdxHeader lbl = read_idx_header(labels, lbl_offset, 1, labels_path);

    if (img.count != lbl.count) {
        throw FormatError("idx: image count " + std::to_string(img.count) +
                              " does not match label count " + std::to_string(lbl.count),
                          lbl_offset);
    }

    Dataset out;
    out.samples.resize(img.count);
    std::vector<unsigned char> pixel_row(img.item_size);
    std::size_t max_label = 0;
    for (std::uint32_t i = 0; i < img.count; ++i) {
        images.read(reinterpret_cast<char*>(pixel_row.data()),
                    static_cast<std::streamsize>(pixel_row.size()));
        if (images.gcount() != static_cast<std::streamsize>(pixel_row.size())) {
            throw FormatError("idx: truncated pixel data in " + images_path, img_offset);
        }
        img_offset += pixel_row.size();

        Sample& s = out.samples[i];
        s.x.resize(pixel_row.size());
        for (std::size_t j = 0; j < pixel_row.size(); ++j) s.x[j] = pixel_row[j] / 255.0;

        unsigned char label = 0;
        labels.read(reinterpret_cast<char*>(&label), 1);
        if (labels.gcount() != 1) {
            throw FormatError("idx: truncated label data in " + labels_path, lbl_offset);
        }
        lbl_offset += 1;
        s.y = label;
        max_label = std::max(max_label, s.y);
    }
    out.class_count = max_label + 1;
    return out;
}

}  // namespace headbias
