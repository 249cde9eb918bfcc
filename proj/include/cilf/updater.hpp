#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cilf/encoder.hpp"
#include "cilf/losses.hpp"
#include "cilf/optimizer.hpp"
#include "cilf/prototypes.hpp"
#include "cilf/trainer.hpp"

namespace cilf {

// Capacity-bounded exemplar store of raw inputs, indexed per class.
struct MemoryBuffer {
    std::size_t capacity = 0;
    std::map<int, std::vector<std::vector<double>>> entries;

    std::size_t total() const;
    std::vector<int> class_ids() const;
    // All stored rows in (class id, insertion order); the row order used for
    // distillation targets.
    Batch as_batch(std::size_t dim) const;
};

// Uniform per-class sample of floor(capacity / C) exemplars.
MemoryBuffer init_memory(const Batch& dataset, std::size_t capacity, std::uint64_t seed);

// Frozen prototype probabilities of every memory row under the pre-update
// model, aligned with MemoryBuffer::as_batch row order.
std::vector<std::vector<double>> distill_targets(const EncoderModel& old_model,
                                                 const PrototypeSet& old_prototypes,
                                                 const MemoryBuffer& memory, double alpha);

struct UpdateResult {
    EncoderModel model;
    PrototypeSet prototypes;
    std::vector<int> known_classes;  // label space after the update
    std::vector<EpochStats> stats;
};

// Retrain on newly labeled novel-class data plus memory: classification over
// the extended label space, distillation toward the frozen old scores on
// memory rows, hard triplets over the joint batch, and the prototype anchor
// pulling old-class prototypes toward their pre-update values.
// `relabeled_known` carries queried instances whose true class was already
// known; they join the classification and triplet terms only.
UpdateResult incremental_update(const EncoderModel& model, const PrototypeSet& prototypes,
                                const Batch& d_new, const Batch& relabeled_known,
                                const MemoryBuffer& memory, const LossConfig& loss_cfg,
                                const OptimizerConfig& opt_cfg, const TrainConfig& train_cfg);

// Post-update rebalance: drop floor(|Y_new| * |M| / (|Y_old| * |Y_all|))
// exemplars per old class, admit floor(|M| / |Y_all|) per novel class, then
// evict from the largest classes while over capacity.
MemoryBuffer rebalance_memory(const MemoryBuffer& memory, const Batch& d_new,
                              std::size_t capacity, std::uint64_t seed);

}  // namespace cilf
