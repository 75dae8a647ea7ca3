#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "headbias/numerics.hpp"

namespace headbias {

struct Sample {
    Vector x;
    std::size_t y = 0;
};

// Immutable after construction; shareable across threads.
struct Dataset {
    std::vector<Sample> samples;
    std::size_t class_count = 0;

    std::size_t size() const noexcept { return samples.size(); }
    std::size_t dim() const noexcept { return samples.empty() ? 0 : samples.front().x.size(); }
};

// Partition of the label space {0..C-1} into forgotten classes V and
// retained classes R. Both sides are always non-empty.
struct ClassSplit {
    std::set<std::size_t> forgotten;
    std::set<std::size_t> retained;

    // Builds the split from C and V; R is the complement. Throws ConfigError
    // when V is empty, covers all classes, or contains an out-of-range label.
    static ClassSplit make(std::size_t class_count, const std::set<std::size_t>& forgotten);

    std::size_t class_count() const noexcept { return forgotten.size() + retained.size(); }
    bool is_forgotten(std::size_t c) const { return forgotten.count(c) != 0; }
};

// Gaussian-blob class centers, pairwise at least `separation` apart
// (rejection sampling in a box sized from the class count). Throws
// ConfigError when centers cannot be placed, e.g. dim too small for the
// requested class count.
Matrix blob_centers(std::size_t class_count, std::size_t dim, double separation, SeededRng& rng);

// `per_class` points per center, unit-variance isotropic Gaussian noise.
// Samples are grouped by class in center order.
Dataset sample_blobs(const Matrix& centers, std::size_t per_class, SeededRng& rng);

// blob_centers + sample_blobs in one call. Deterministic given the rng seed.
Dataset make_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                   double separation, SeededRng& rng);

// Splits by label membership in v: second element holds samples with y in v
// (the forget set), first the rest. Input order is preserved within each
// side. Throws ConfigError when v is empty or covers every class present.
std::pair<Dataset, Dataset> split_by_classes(const Dataset& d, const std::set<std::size_t>& v);

// Reads an IDX image file + IDX label file (the MNIST convention: big-endian
// magic, dimension sizes, raw unsigned bytes). Pixels are scaled to [0,1];
// class_count is max(label)+1. Throws FormatError naming the offending field
// and byte offset.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace headbias
