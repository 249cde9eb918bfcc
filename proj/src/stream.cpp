#include "cilf/stream.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "cilf/rng.hpp"

namespace cilf {

StreamMode stream_mode_from_string(const std::string& name) {
    if (name == "single") return StreamMode::kSingle;
    if (name == "multiple") return StreamMode::kMultiple;
    throw ConfigError("stream: unknown mode '" + name + "' (expected single|multiple)");
}

std::string to_string(StreamMode mode) {
    return mode == StreamMode::kSingle ? "single" : "multiple";
}

void StreamConfig::validate() const {
    if (initial_classes < 2) throw ConfigError("stream: need at least 2 initial classes");
    if (mode == StreamMode::kMultiple) {
        if (k_min < 1 || k_min > k_max) throw ConfigError("stream: need 1 <= k_min <= k_max");
    }
    if (p_disappear < 0.0 || p_disappear > 1.0) {
        throw ConfigError("stream: p_disappear must be in [0,1]");
    }
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
        throw ConfigError("stream: holdout_fraction must be in [0,1)");
    }
}

StreamManifest build_manifest(const std::vector<int>& labels, const StreamConfig& cfg) {
    cfg.validate();
    std::map<int, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < labels.size(); ++i) pools[labels[i]].push_back(i);

    const std::size_t num_classes = pools.size();
    if (num_classes < cfg.initial_classes) {
        throw UsageError("stream: dataset has " + std::to_string(num_classes) +
                         " classes, need " + std::to_string(cfg.initial_classes) +
                         " initial classes");
    }
    if (cfg.mode == StreamMode::kSingle &&
        num_classes < cfg.initial_classes + cfg.num_windows) {
        throw UsageError("stream: single mode needs " +
                         std::to_string(cfg.initial_classes + cfg.num_windows) +
                         " classes, dataset has " + std::to_string(num_classes));
    }

    StreamManifest manifest;
    manifest.seed = cfg.seed;
    manifest.mode = cfg.mode;
    manifest.holdout_fraction = cfg.holdout_fraction;

    Rng rng(cfg.seed);

    // Initial classes and the order novel classes will appear in.
    std::vector<int> class_order;
    for (const auto& [cls, _] : pools) class_order.push_back(cls);
    rng.shuffle(class_order);
    manifest.initial_classes.assign(class_order.begin(),
                                    class_order.begin() +
                                        static_cast<std::ptrdiff_t>(cfg.initial_classes));
    std::sort(manifest.initial_classes.begin(), manifest.initial_classes.end());
    std::vector<int> novel_pool(class_order.begin() +
                                    static_cast<std::ptrdiff_t>(cfg.initial_classes),
                                class_order.end());

    // Per-class holdout split over shuffled pools.
    std::map<int, std::vector<std::size_t>> stream_pool;
    for (auto& [cls, pool] : pools) {
        rng.shuffle(pool);
        const auto holdout_n =
            static_cast<std::size_t>(std::floor(cfg.holdout_fraction *
                                                static_cast<double>(pool.size())));
        manifest.holdout_indices.insert(manifest.holdout_indices.end(), pool.begin(),
                                        pool.begin() + static_cast<std::ptrdiff_t>(holdout_n));
        stream_pool[cls].assign(pool.begin() + static_cast<std::ptrdiff_t>(holdout_n),
                                pool.end());
    }

    // Which classes start in which window.
    std::vector<std::vector<int>> novel_by_window(cfg.num_windows);
    std::size_t next_novel = 0;
    for (std::size_t t = 0; t < cfg.num_windows; ++t) {
        std::size_t want = 0;
        if (cfg.mode == StreamMode::kSingle) {
            want = 1;
        } else {
            want = cfg.k_min + rng.below(cfg.k_max - cfg.k_min + 1);
        }
        want = std::min(want, novel_pool.size() - next_novel);
        for (std::size_t j = 0; j < want; ++j) {
            novel_by_window[t].push_back(novel_pool[next_novel++]);
        }
        std::sort(novel_by_window[t].begin(), novel_by_window[t].end());
    }

    for (int cls : manifest.initial_classes) manifest.introduced_at[cls] = 0;

    // Presence draws: a seen class sits a window out with probability
    // p_disappear and may come back later.
    std::vector<std::set<int>> present_by_window(cfg.num_windows);
    std::set<int> seen(manifest.initial_classes.begin(), manifest.initial_classes.end());
    std::set<int> prev_present = seen;
    manifest.windows.resize(cfg.num_windows);
    for (std::size_t t = 0; t < cfg.num_windows; ++t) {
        WindowSpec& spec = manifest.windows[t];
        spec.t = static_cast<int>(t + 1);
        std::set<int>& present = present_by_window[t];
        for (int cls : seen) {
            if (rng.uniform() >= cfg.p_disappear) present.insert(cls);
        }
        for (int cls : novel_by_window[t]) {
            present.insert(cls);
            manifest.introduced_at[cls] = static_cast<int>(t + 1);
        }
        if (present.empty()) {
            // Every known class rolled a disappearance and nothing novel
            // arrived; keep the stream non-degenerate.
            present = seen;
        }
        spec.novel = novel_by_window[t];
        for (int cls : prev_present) {
            if (!present.count(cls)) spec.disappeared.push_back(cls);
        }
        for (int cls : novel_by_window[t]) seen.insert(cls);
        prev_present = present;
    }

    // Split each class's pool evenly across its presence slots; initial
    // classes spend one slot on the training split.
    manifest.window_indices.assign(cfg.num_windows, {});
    for (const auto& [cls, pool] : stream_pool) {
        std::vector<int> slots;  // 0 = initial split, t >= 1 = window t
        if (manifest.introduced_at.count(cls) && manifest.introduced_at[cls] == 0) {
            slots.push_back(0);
        }
        for (std::size_t t = 0; t < cfg.num_windows; ++t) {
            if (present_by_window[t].count(cls)) slots.push_back(static_cast<int>(t + 1));
        }
        if (slots.empty()) continue;  // class never used
        if (pool.size() < slots.size()) {
            throw UsageError("stream: class " + std::to_string(cls) + " has " +
                             std::to_string(pool.size()) + " instances for " +
                             std::to_string(slots.size()) + " windows");
        }
        const std::size_t base = pool.size() / slots.size();
        const std::size_t remainder = pool.size() % slots.size();
        std::size_t cursor = 0;
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const std::size_t count = base + (s < remainder ? 1 : 0);
            const auto begin = pool.begin() + static_cast<std::ptrdiff_t>(cursor);
            const auto end = begin + static_cast<std::ptrdiff_t>(count);
            if (slots[s] == 0) {
                manifest.initial_indices.insert(manifest.initial_indices.end(), begin, end);
            } else {
                auto& rows = manifest.window_indices[static_cast<std::size_t>(slots[s] - 1)];
                rows.insert(rows.end(), begin, end);
                manifest.windows[static_cast<std::size_t>(slots[s] - 1)].present[cls] = count;
            }
            cursor += count;
        }
    }
    return manifest;
}

std::string manifest_to_json(const StreamManifest& manifest) {
    nlohmann::json doc;
    doc["seed"] = manifest.seed;
    doc["mode"] = to_string(manifest.mode);
    doc["initial_classes"] = manifest.initial_classes;
    nlohmann::json windows = nlohmann::json::array();
    for (const WindowSpec& spec : manifest.windows) {
        nlohmann::json present = nlohmann::json::object();
        for (const auto& [cls, count] : spec.present) present[std::to_string(cls)] = count;
        windows.push_back({
            {"t", spec.t},
            {"present", std::move(present)},
            {"novel", spec.novel},
            {"disappeared", spec.disappeared},
        });
    }
    doc["windows"] = std::move(windows);
    return doc.dump(2) + "\n";
}

WindowData next_window(const StreamManifest& manifest, const Dataset& dataset, int t) {
    if (t < 1 || static_cast<std::size_t>(t) > manifest.windows.size()) {
        throw UsageError("next_window: t=" + std::to_string(t) + " out of range 1.." +
                         std::to_string(manifest.windows.size()));
    }
    std::vector<std::size_t> rows = manifest.window_indices[static_cast<std::size_t>(t - 1)];
    Rng rng(Rng::derive(manifest.seed, 1000 + static_cast<std::uint64_t>(t)));
    rng.shuffle(rows);

    WindowData window;
    window.inputs = DenseMatrix(rows.size(), dataset.dim());
    window.truth.resize(rows.size());
    window.dataset_indices = rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= dataset.size()) throw UsageError("next_window: manifest/dataset mismatch");
        std::copy(dataset.inputs.row(rows[i]), dataset.inputs.row(rows[i]) + dataset.dim(),
                  window.inputs.row(i));
        window.truth[i] = dataset.labels[rows[i]];
    }
    return window;
}

QueryResult query_labels(const WindowData& window, const std::vector<std::size_t>& detected_rows,
                         double percent, const std::vector<int>& known_ids, std::uint64_t seed) {
    if (!(percent > 0.0) || percent > 100.0) {
        throw ConfigError("query_labels: percent must be in (0,100]");
    }
    QueryResult result;
    const std::size_t dim = window.inputs.cols;
    result.novel.inputs = DenseMatrix(0, dim);
    result.known.inputs = DenseMatrix(0, dim);
    if (detected_rows.empty()) return result;

    const auto want = static_cast<std::size_t>(
        std::ceil(percent / 100.0 * static_cast<double>(detected_rows.size())));
    Rng rng(seed);
    std::vector<std::size_t> picks =
        rng.sample_without_replacement(detected_rows.size(), std::min(want, detected_rows.size()));
    std::sort(picks.begin(), picks.end());

    const std::set<int> known(known_ids.begin(), known_ids.end());
    std::vector<std::size_t> novel_rows;
    std::vector<std::size_t> known_rows;
    for (std::size_t p : picks) {
        const std::size_t row = detected_rows[p];
        if (row >= window.inputs.rows) throw UsageError("query_labels: row out of range");
        result.queried_rows.push_back(row);
        if (known.count(window.truth[row])) {
            known_rows.push_back(row);
        } else {
            novel_rows.push_back(row);
        }
    }
    auto gather = [&](const std::vector<std::size_t>& rows, Batch& out) {
        out.inputs = DenseMatrix(rows.size(), dim);
        out.labels.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy(window.inputs.row(rows[i]), window.inputs.row(rows[i]) + dim,
                      out.inputs.row(i));
            out.labels[i] = window.truth[rows[i]];
        }
    };
    gather(novel_rows, result.novel);
    gather(known_rows, result.known);
    return result;
}

}  // namespace cilf
