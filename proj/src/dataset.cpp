#include "cilf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cilf/rng.hpp"

namespace cilf {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const unsigned char> bytes, std::size_t offset,
                        const char* what) {
    if (offset + 4 > bytes.size()) {
        throw DataError(std::string("idx: truncated payload while reading ") + what);
    }
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace

Dataset parse_idx(std::span<const unsigned char> image_bytes,
                  std::span<const unsigned char> label_bytes) {
    const std::uint32_t image_magic = read_be32(image_bytes, 0, "image magic");
    if (image_magic != kImageMagic) {
        throw DataError("idx: bad image magic " + std::to_string(image_magic));
    }
    const std::uint32_t label_magic = read_be32(label_bytes, 0, "label magic");
    if (label_magic != kLabelMagic) {
        throw DataError("idx: bad label magic " + std::to_string(label_magic));
    }
    const std::uint32_t n_images = read_be32(image_bytes, 4, "image count");
    const std::uint32_t rows = read_be32(image_bytes, 8, "rows");
    const std::uint32_t cols = read_be32(image_bytes, 12, "cols");
    const std::uint32_t n_labels = read_be32(label_bytes, 4, "label count");
    if (n_images != n_labels) {
        throw DataError("idx: count mismatch: " + std::to_string(n_images) + " images vs " +
                        std::to_string(n_labels) + " labels");
    }
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    if (image_bytes.size() < 16 + static_cast<std::size_t>(n_images) * pixels) {
        throw DataError("idx: truncated payload in image data");
    }
    if (label_bytes.size() < 8 + n_labels) {
        throw DataError("idx: truncated payload in label data");
    }

    Dataset out;
    out.inputs = DenseMatrix(n_images, pixels);
    out.labels.resize(n_images);
    for (std::size_t i = 0; i < n_images; ++i) {
        const unsigned char* src = image_bytes.data() + 16 + i * pixels;
        double* dst = out.inputs.row(i);
        for (std::size_t p = 0; p < pixels; ++p) dst[p] = static_cast<double>(src[p]) / 255.0;
        out.labels[i] = static_cast<int>(label_bytes[8 + i]);
    }
    return out;
}

Dataset load_idx(const std::string& image_path, const std::string& label_path) {
    const auto images = read_file(image_path);
    const auto labels = read_file(label_path);
    return parse_idx(images, labels);
}

Dataset parse_csv(std::string_view text) {
    Dataset out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t width = 0;
    std::vector<std::vector<double>> rows;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line.substr(0, 5) != "label") {
                throw DataError("csv: line 1: header must start with 'label'");
            }
            continue;
        }
        std::vector<double> cells;
        std::size_t cell_start = 0;
        while (true) {
            std::size_t comma = line.find(',', cell_start);
            std::string_view cell = line.substr(
                cell_start, comma == std::string_view::npos ? line.size() - cell_start
                                                            : comma - cell_start);
            double value = 0.0;
            const auto* begin = cell.data();
            const auto* finish = cell.data() + cell.size();
            auto [ptr, ec] = std::from_chars(begin, finish, value);
            if (ec != std::errc() || ptr != finish) {
                throw DataError("csv: line " + std::to_string(line_no) + ": non-numeric cell '" +
                                std::string(cell) + "'");
            }
            cells.push_back(value);
            if (comma == std::string_view::npos) break;
            cell_start = comma + 1;
        }
        if (cells.size() < 2) {
            throw DataError("csv: line " + std::to_string(line_no) + ": need label and features");
        }
        if (width == 0) {
            width = cells.size();
        } else if (cells.size() != width) {
            throw DataError("csv: line " + std::to_string(line_no) + ": ragged row (" +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(width) + ")");
        }
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw DataError("csv: empty dataset");

    out.inputs = DenseMatrix(rows.size(), width - 1);
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double label = rows[i][0];
        if (label != std::floor(label)) {
            throw DataError("csv: line " + std::to_string(i + 2) + ": label must be an integer");
        }
        out.labels[i] = static_cast<int>(label);
        std::copy(rows[i].begin() + 1, rows[i].end(), out.inputs.row(i));
    }
    return out;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

std::string to_csv(const Dataset& dataset) {
    std::ostringstream out;
    out.precision(17);
    out << "label";
    for (std::size_t j = 0; j < dataset.dim(); ++j) out << ",f" << j;
    out << "\n";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out << dataset.labels[i];
        const double* row = dataset.inputs.row(i);
        for (std::size_t j = 0; j < dataset.dim(); ++j) out << "," << row[j];
        out << "\n";
    }
    return out.str();
}

Dataset gen_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                      double sigma, double separation, std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("gen_synthetic: need at least 2 classes");
    if (per_class == 0 || dim == 0) throw ConfigError("gen_synthetic: empty shape");
    if (sigma < 0.0 || separation < 0.0) throw ConfigError("gen_synthetic: negative scale");

    Rng rng(seed);
    // Draw Gaussian means, then rescale so the closest pair sits exactly at
    // separation * sigma.
    DenseMatrix means(num_classes, dim);
    double min_pair = 0.0;
    do {
        for (double& v : means.data) v = rng.normal();
        min_pair = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < num_classes; ++a) {
            for (std::size_t b = a + 1; b < num_classes; ++b) {
                min_pair = std::min(min_pair,
                                    squared_distance(means.row(a), means.row(b), dim));
            }
        }
    } while (!(min_pair > 0.0));
    const double target = separation * sigma;
    if (target > 0.0) {
        const double scale = target / std::sqrt(min_pair);
        for (double& v : means.data) v *= scale;
    }

    Dataset out;
    out.inputs = DenseMatrix(num_classes * per_class, dim);
    out.labels.resize(num_classes * per_class);
    std::size_t r = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i, ++r) {
            double* row = out.inputs.row(r);
            for (std::size_t j = 0; j < dim; ++j) {
                row[j] = means(c, j) + sigma * rng.normal();
            }
            out.labels[r] = static_cast<int>(c);
        }
    }
    return out;
}

}  // namespace cilf
