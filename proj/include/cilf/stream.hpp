#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cilf/dataset.hpp"
#include "cilf/encoder.hpp"

namespace cilf {

enum class StreamMode { kSingle, kMultiple };

StreamMode stream_mode_from_string(const std::string& name);
std::string to_string(StreamMode mode);

struct WindowSpec {
    int t = 0;
    std::map<int, std::size_t> present;  // class id -> instance count
    std::vector<int> novel;
    std::vector<int> disappeared;  // present in the previous window, absent here
};

struct StreamConfig {
    StreamMode mode = StreamMode::kSingle;
    std::size_t initial_classes = 4;  // C
    std::size_t num_windows = 4;      // T
    std::size_t k_min = 2;            // multiple mode: K^t drawn from [k_min, k_max]
    std::size_t k_max = 3;
    double p_disappear = 0.3;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StreamManifest {
    std::uint64_t seed = 0;
    StreamMode mode = StreamMode::kSingle;
    std::vector<int> initial_classes;
    double holdout_fraction = 0.2;
    std::vector<WindowSpec> windows;

    // Disjoint instance partition; not serialized (reproducible from the
    // labels and the seed).
    std::vector<std::size_t> initial_indices;
    std::vector<std::size_t> holdout_indices;
    std::vector<std::vector<std::size_t>> window_indices;  // [t-1]
    std::map<int, int> introduced_at;                      // class -> window (0 = initial)
};

StreamManifest build_manifest(const std::vector<int>& labels, const StreamConfig& cfg);

std::string manifest_to_json(const StreamManifest& manifest);

// One window's shuffled instances. `truth` is the hidden ground truth; only
// the label oracle and the metrics side may look at it.
struct WindowData {
    DenseMatrix inputs;
    std::vector<int> truth;
    std::vector<std::size_t> dataset_indices;
};

WindowData next_window(const StreamManifest& manifest, const Dataset& dataset, int t);

// Labeled instances returned by the oracle for a queried subset of the
// detected-novel rows, split by whether the true class was already known.
struct QueryResult {
    Batch novel;            // truly new classes: feeds the update's D_new
    Batch known;            // false detections: rejoin the classification term
    std::vector<std::size_t> queried_rows;
};

QueryResult query_labels(const WindowData& window, const std::vector<std::size_t>& detected_rows,
                         double percent, const std::vector<int>& known_ids, std::uint64_t seed);

}  // namespace cilf
