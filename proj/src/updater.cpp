#include "cilf/updater.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "cilf/rng.hpp"

namespace cilf {

std::size_t MemoryBuffer::total() const {
    std::size_t n = 0;
    for (const auto& [_, rows] : entries) n += rows.size();
    return n;
}

std::vector<int> MemoryBuffer::class_ids() const {
    std::vector<int> ids;
    ids.reserve(entries.size());
    for (const auto& [id, _] : entries) ids.push_back(id);
    return ids;
}

Batch MemoryBuffer::as_batch(std::size_t dim) const {
    Batch batch;
    batch.inputs = DenseMatrix(total(), dim);
    batch.labels.reserve(total());
    std::size_t r = 0;
    for (const auto& [id, rows] : entries) {
        for (const auto& row : rows) {
            if (row.size() != dim) throw ShapeError("memory: stored row dimension mismatch");
            std::copy(row.begin(), row.end(), batch.inputs.row(r));
            batch.labels.push_back(id);
            ++r;
        }
    }
    return batch;
}

MemoryBuffer init_memory(const Batch& dataset, std::size_t capacity, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        by_class[dataset.labels[i]].push_back(i);
    }
    if (by_class.empty()) throw UsageError("init_memory: empty dataset");
    if (capacity < by_class.size()) {
        throw UsageError("init_memory: capacity " + std::to_string(capacity) +
                         " below class count " + std::to_string(by_class.size()));
    }
    const std::size_t quota = capacity / by_class.size();
    MemoryBuffer memory;
    memory.capacity = capacity;
    Rng rng(seed);
    for (const auto& [cls, rows] : by_class) {
        std::vector<std::size_t> picks = rng.sample_without_replacement(
            rows.size(), std::min(quota, rows.size()));
        std::sort(picks.begin(), picks.end());
        auto& stored = memory.entries[cls];
        for (std::size_t p : picks) {
            const std::size_t row = rows[p];
            stored.emplace_back(dataset.inputs.row(row), dataset.inputs.row(row) + dataset.inputs.cols);
        }
    }
    return memory;
}

std::vector<std::vector<double>> distill_targets(const EncoderModel& old_model,
                                                 const PrototypeSet& old_prototypes,
                                                 const MemoryBuffer& memory, double alpha) {
    if (memory.total() == 0) return {};
    const Batch rows = memory.as_batch(old_model.input_dim());
    const DenseMatrix emb = forward(old_model, rows.inputs);
    const DenseMatrix probs = proto_prob_batch(emb, old_prototypes, alpha);
    std::vector<std::vector<double>> targets(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        targets[i].assign(probs.row(i), probs.row(i) + probs.cols);
    }
    return targets;
}

UpdateResult incremental_update(const EncoderModel& model, const PrototypeSet& prototypes,
                                const Batch& d_new, const Batch& relabeled_known,
                                const MemoryBuffer& memory, const LossConfig& loss_cfg,
                                const OptimizerConfig& opt_cfg, const TrainConfig& train_cfg) {
    UpdateResult result;
    if (d_new.size() == 0) {
        result.model = model;
        result.prototypes = prototypes;
        result.known_classes = prototypes.ids();
        return result;
    }
    if (d_new.inputs.rows != d_new.labels.size() ||
        relabeled_known.inputs.rows != relabeled_known.labels.size()) {
        throw ShapeError("incremental_update: inputs/labels length mismatch");
    }
    for (int y : d_new.labels) {
        if (prototypes.contains(y)) {
            throw UsageError("incremental_update: class " + std::to_string(y) +
                             " already in the known label space");
        }
    }
    for (int y : relabeled_known.labels) {
        if (!prototypes.empty() && !prototypes.contains(y)) {
            throw UsageError("incremental_update: relabeled instance of unknown class " +
                             std::to_string(y));
        }
    }

    result.model = model;

    // Frozen distillation targets, cached before any parameter change.
    const std::vector<std::vector<double>> memory_targets =
        prototypes.empty() ? std::vector<std::vector<double>>{}
                           : distill_targets(model, prototypes, memory, loss_cfg.alpha);

    // Joint training set: D_new, then queried known instances, then memory.
    const std::size_t dim = d_new.inputs.cols;
    const Batch memory_batch = memory.as_batch(dim);
    const std::size_t n_total =
        d_new.size() + relabeled_known.size() + memory_batch.size();
    DenseMatrix inputs(n_total, dim);
    std::vector<int> labels(n_total);
    std::vector<std::vector<double>> targets(n_total);  // empty row = no distillation
    std::size_t r = 0;
    for (std::size_t i = 0; i < d_new.size(); ++i, ++r) {
        std::copy(d_new.inputs.row(i), d_new.inputs.row(i) + dim, inputs.row(r));
        labels[r] = d_new.labels[i];
    }
    for (std::size_t i = 0; i < relabeled_known.size(); ++i, ++r) {
        if (relabeled_known.inputs.cols != dim) {
            throw ShapeError("incremental_update: relabeled batch width mismatch");
        }
        std::copy(relabeled_known.inputs.row(i), relabeled_known.inputs.row(i) + dim,
                  inputs.row(r));
        labels[r] = relabeled_known.labels[i];
    }
    for (std::size_t i = 0; i < memory_batch.size(); ++i, ++r) {
        std::copy(memory_batch.inputs.row(i), memory_batch.inputs.row(i) + dim, inputs.row(r));
        labels[r] = memory_batch.labels[i];
        if (!memory_targets.empty()) targets[r] = memory_targets[i];
    }

    // New-class prototypes start at the labeled means under the current model.
    result.prototypes = prototypes;
    {
        const DenseMatrix new_emb = forward(result.model, d_new.inputs);
        PrototypeSet new_protos = init_prototypes(new_emb, d_new.labels);
        for (auto& [id, mu] : new_protos.centroids) {
            result.prototypes.centroids.emplace(id, std::move(mu));
        }
    }

    const PrototypeSet anchor = prototypes;  // pre-update known prototypes
    TrainExtras extras;
    extras.anchor = &anchor;
    extras.distill_targets = &targets;
    result.stats = run_training_loop(result.model, result.prototypes, inputs, labels, loss_cfg,
                                     opt_cfg, train_cfg, extras);
    result.known_classes = result.prototypes.ids();
    return result;
}

MemoryBuffer rebalance_memory(const MemoryBuffer& memory, const Batch& d_new,
                              std::size_t capacity, std::uint64_t seed) {
    std::set<int> novel_set(d_new.labels.begin(), d_new.labels.end());
    for (int cls : novel_set) {
        if (memory.entries.count(cls)) {
            throw UsageError("rebalance_memory: class " + std::to_string(cls) +
                             " already stored as known");
        }
    }
    const std::size_t n_old = memory.entries.size();
    const std::size_t n_new = novel_set.size();
    const std::size_t n_all = n_old + n_new;
    if (n_new == 0) return memory;
    if (capacity < n_all) {
        throw UsageError("rebalance_memory: capacity " + std::to_string(capacity) +
                         " below class count " + std::to_string(n_all));
    }

    MemoryBuffer out;
    out.capacity = capacity;
    Rng rng(seed);

    // Uniformly drop the quota's worth of exemplars from each old class.
    const std::size_t drop =
        n_old == 0 ? 0 : (n_new * capacity) / (n_old * n_all);
    for (const auto& [cls, rows] : memory.entries) {
        const std::size_t keep = rows.size() > drop ? rows.size() - drop : 0;
        std::vector<std::size_t> picks = rng.sample_without_replacement(rows.size(), keep);
        std::sort(picks.begin(), picks.end());
        auto& stored = out.entries[cls];
        for (std::size_t p : picks) stored.push_back(rows[p]);
    }

    // Admit a uniform sample per novel class (all rows when under quota).
    const std::size_t admit = capacity / n_all;
    std::map<int, std::vector<std::size_t>> new_rows;
    for (std::size_t i = 0; i < d_new.labels.size(); ++i) {
        new_rows[d_new.labels[i]].push_back(i);
    }
    for (const auto& [cls, rows] : new_rows) {
        std::vector<std::size_t> picks =
            rng.sample_without_replacement(rows.size(), std::min(admit, rows.size()));
        std::sort(picks.begin(), picks.end());
        auto& stored = out.entries[cls];
        for (std::size_t p : picks) {
            const std::size_t row = rows[p];
            stored.emplace_back(d_new.inputs.row(row), d_new.inputs.row(row) + d_new.inputs.cols);
        }
    }

    // Quotas round up against us occasionally; evict from the fullest class.
    while (out.total() > capacity) {
        int largest = out.entries.begin()->first;
        std::size_t largest_n = 0;
        for (const auto& [cls, rows] : out.entries) {
            if (rows.size() > largest_n) {
                largest_n = rows.size();
                largest = cls;
            }
        }
        auto& rows = out.entries[largest];
        rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(rng.below(rows.size())));
    }
    return out;
}

}  // namespace cilf
