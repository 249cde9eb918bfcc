#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cilf/matrix.hpp"

namespace cilf {

struct Dataset {
    DenseMatrix inputs;  // N x d
    std::vector<int> labels;
    std::map<int, std::string> class_names;

    std::size_t size() const { return inputs.rows; }
    std::size_t dim() const { return inputs.cols; }
};

// IDX image/label pair (the MNIST container format). Big-endian headers,
// magics 0x00000803 / 0x00000801; pixels scale to [0,1] and flatten
// row-major.
Dataset parse_idx(std::span<const unsigned char> image_bytes,
                  std::span<const unsigned char> label_bytes);

Dataset load_idx(const std::string& image_path, const std::string& label_path);

// Header "label,f0,f1,...". Features are taken as-is.
Dataset parse_csv(std::string_view text);

Dataset load_csv(const std::string& path);

std::string to_csv(const Dataset& dataset);

// Isotropic Gaussian blobs with class means at least separation * sigma
// apart. The blobs stand in for image datasets at desk scale.
Dataset gen_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                      double sigma, double separation, std::uint64_t seed);

}  // namespace cilf
