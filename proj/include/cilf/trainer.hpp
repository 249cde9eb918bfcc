#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cilf/encoder.hpp"
#include "cilf/losses.hpp"
#include "cilf/optimizer.hpp"
#include "cilf/prototypes.hpp"

namespace cilf {

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double proto_beta = 0.8;  // temporal-ensemble momentum for prototypes
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    double intra = 0.0;
    double inter = 0.0;
    double anchor = 0.0;
    double distill = 0.0;
    double total = 0.0;
};

// Optional terms for the incremental-update objective. Distill targets align
// with dataset rows; an empty row opts out.
struct TrainExtras {
    const PrototypeSet* anchor = nullptr;
    const std::vector<std::vector<double>>* distill_targets = nullptr;
};

// One gradient step at a time over mini-batches, with Nesterov lookahead and
// a per-epoch temporal-ensemble prototype update. The full-dataset loop and
// the curriculum fine-tune loop both run on this.
class TrainLoop {
public:
    TrainLoop(EncoderModel& model, PrototypeSet& prototypes, const LossConfig& loss,
              const OptimizerConfig& optimizer, double proto_beta);

    // Gradient step on one batch; labels may be true or pseudo labels.
    // Batch-row distill targets align with batch rows when provided.
    EpochStats step_batch(const DenseMatrix& batch_inputs, const std::vector<int>& batch_labels,
                          const std::vector<std::vector<double>>* batch_distill,
                          const PrototypeSet* anchor);

    // Apply the temporal-ensemble update from the class means accumulated
    // since the last call, then reset the accumulator.
    void end_epoch();

private:
    EncoderModel& model_;
    PrototypeSet& prototypes_;
    LossConfig loss_;
    OptimizerConfig optimizer_;
    double proto_beta_;
    OptimizerState state_;
    std::vector<DenseMatrix*> params_;
    std::map<int, std::vector<double>> class_sums_;
    std::map<int, std::size_t> class_counts_;
};

// Shuffled mini-batch epochs over the whole dataset.
std::vector<EpochStats> run_training_loop(EncoderModel& model, PrototypeSet& prototypes,
                                          const DenseMatrix& inputs,
                                          const std::vector<int>& labels, const LossConfig& loss,
                                          const OptimizerConfig& optimizer,
                                          const TrainConfig& cfg,
                                          const TrainExtras& extras = {});

// Initial supervised training: init the model, set prototypes to class means
// of the initial embeddings, then optimize intra + lambda1 * inter.
std::pair<EncoderModel, PrototypeSet> train_initial(const Batch& dataset,
                                                    const EncoderConfig& encoder_cfg,
                                                    const LossConfig& loss_cfg,
                                                    const OptimizerConfig& optimizer_cfg,
                                                    const TrainConfig& train_cfg,
                                                    std::vector<EpochStats>* stats = nullptr);

}  // namespace cilf
