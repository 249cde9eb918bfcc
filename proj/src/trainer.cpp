#include "cilf/trainer.hpp"

#include <set>
#include <string>

#include "cilf/rng.hpp"

namespace cilf {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (proto_beta < 0.0 || proto_beta >= 1.0) throw ConfigError("train: proto_beta in [0,1)");
}

TrainLoop::TrainLoop(EncoderModel& model, PrototypeSet& prototypes, const LossConfig& loss,
                     const OptimizerConfig& optimizer, double proto_beta)
    : model_(model),
      prototypes_(prototypes),
      loss_(loss),
      optimizer_(optimizer),
      proto_beta_(proto_beta),
      params_(model.param_blocks()) {
    loss_.validate();
    optimizer_.validate();
    state_ = OptimizerState::zeros_like(params_);
}

EpochStats TrainLoop::step_batch(const DenseMatrix& batch_inputs,
                                 const std::vector<int>& batch_labels,
                                 const std::vector<std::vector<double>>* batch_distill,
                                 const PrototypeSet* anchor) {
    EpochStats stats;
    const std::size_t n = batch_inputs.rows;
    if (n == 0) return stats;

    // Sutskever lookahead: evaluate the gradient at theta + momentum * v.
    for (std::size_t b = 0; b < params_.size(); ++b) {
        DenseMatrix& theta = *params_[b];
        const DenseMatrix& vel = state_.velocity[b];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            theta.data[i] += optimizer_.momentum * vel.data[i];
        }
    }

    ForwardCache cache;
    const DenseMatrix embeddings = forward(model_, batch_inputs, &cache);

    LossResult total = intra_loss(embeddings, batch_labels, prototypes_, loss_.alpha);
    stats.intra = total.loss;

    if (loss_.lambda1 > 0.0) {
        const TripletSet triplets = mine_hard_triplets(embeddings, batch_labels);
        const LossResult inter = inter_loss(triplets, embeddings, loss_.margin);
        stats.inter = inter.loss;
        total.loss += loss_.lambda1 * inter.loss;
        for (std::size_t i = 0; i < total.grad.size(); ++i) {
            total.grad.data[i] += loss_.lambda1 * inter.grad.data[i];
        }
    }

    if (anchor && !anchor->empty() && loss_.lambda2 > 0.0) {
        const LossResult reg = prototype_anchor_loss(embeddings, batch_labels, prototypes_,
                                                     *anchor, proto_beta_);
        stats.anchor = reg.loss;
        total.loss += loss_.lambda2 * reg.loss;
        for (std::size_t i = 0; i < total.grad.size(); ++i) {
            total.grad.data[i] += loss_.lambda2 * reg.grad.data[i];
        }
    }

    if (batch_distill && anchor && !anchor->empty()) {
        bool any = false;
        for (const auto& row : *batch_distill) {
            if (!row.empty()) {
                any = true;
                break;
            }
        }
        if (any) {
            const LossResult dist = distill_loss(embeddings, *batch_distill, *anchor, loss_.alpha);
            stats.distill = dist.loss;
            total.loss += dist.loss;
            for (std::size_t i = 0; i < total.grad.size(); ++i) {
                total.grad.data[i] += dist.grad.data[i];
            }
        }
    }
    stats.total = total.loss;

    // Scale by batch size so the step magnitude is batch-size free.
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : total.grad.data) g *= inv_n;

    std::vector<DenseMatrix> param_grads = backward(model_, cache, total.grad);

    // Undo the lookahead before the update.
    for (std::size_t b = 0; b < params_.size(); ++b) {
        DenseMatrix& theta = *params_[b];
        const DenseMatrix& vel = state_.velocity[b];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            theta.data[i] -= optimizer_.momentum * vel.data[i];
        }
    }
    sgd_nesterov_step(params_, param_grads, state_, optimizer_);

    // Running class means of the embeddings seen this epoch.
    for (std::size_t i = 0; i < n; ++i) {
        auto& sum = class_sums_[batch_labels[i]];
        if (sum.empty()) sum.assign(embeddings.cols, 0.0);
        const double* row = embeddings.row(i);
        for (std::size_t j = 0; j < embeddings.cols; ++j) sum[j] += row[j];
        ++class_counts_[batch_labels[i]];
    }
    return stats;
}

void TrainLoop::end_epoch() {
    std::map<int, std::vector<double>> means;
    for (auto& [cls, sum] : class_sums_) {
        const double inv = 1.0 / static_cast<double>(class_counts_[cls]);
        std::vector<double> mean(sum.size());
        for (std::size_t j = 0; j < sum.size(); ++j) mean[j] = sum[j] * inv;
        means.emplace(cls, std::move(mean));
    }
    ema_update(prototypes_, means, proto_beta_);
    class_sums_.clear();
    class_counts_.clear();
}

std::vector<EpochStats> run_training_loop(EncoderModel& model, PrototypeSet& prototypes,
                                          const DenseMatrix& inputs,
                                          const std::vector<int>& labels, const LossConfig& loss,
                                          const OptimizerConfig& optimizer,
                                          const TrainConfig& cfg, const TrainExtras& extras) {
    cfg.validate();
    if (inputs.rows != labels.size()) {
        throw ShapeError("run_training_loop: inputs/labels length mismatch");
    }
    TrainLoop loop(model, prototypes, loss, optimizer, cfg.proto_beta);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(inputs.rows);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<EpochStats> history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        EpochStats epoch_stats;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            DenseMatrix batch(stop - start, inputs.cols);
            std::vector<int> batch_labels(stop - start);
            std::vector<std::vector<double>> batch_distill;
            if (extras.distill_targets) batch_distill.resize(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t row = order[k];
                std::copy(inputs.row(row), inputs.row(row) + inputs.cols, batch.row(k - start));
                batch_labels[k - start] = labels[row];
                if (extras.distill_targets) batch_distill[k - start] = (*extras.distill_targets)[row];
            }
            const EpochStats s = loop.step_batch(
                batch, batch_labels, extras.distill_targets ? &batch_distill : nullptr,
                extras.anchor);
            epoch_stats.intra += s.intra;
            epoch_stats.inter += s.inter;
            epoch_stats.anchor += s.anchor;
            epoch_stats.distill += s.distill;
            epoch_stats.total += s.total;
        }
        loop.end_epoch();
        history.push_back(epoch_stats);
    }
    return history;
}

std::pair<EncoderModel, PrototypeSet> train_initial(const Batch& dataset,
                                                    const EncoderConfig& encoder_cfg,
                                                    const LossConfig& loss_cfg,
                                                    const OptimizerConfig& optimizer_cfg,
                                                    const TrainConfig& train_cfg,
                                                    std::vector<EpochStats>* stats) {
    if (dataset.inputs.rows != dataset.labels.size()) {
        throw ShapeError("train_initial: inputs/labels length mismatch");
    }
    std::set<int> classes(dataset.labels.begin(), dataset.labels.end());
    if (classes.size() < 2) {
        throw UsageError("train_initial: need at least 2 classes, got " +
                         std::to_string(classes.size()));
    }

    EncoderModel model = init_model(encoder_cfg);
    const DenseMatrix emb = forward(model, dataset.inputs);
    PrototypeSet prototypes = init_prototypes(emb, dataset.labels);
    prototypes.ema_beta = train_cfg.proto_beta;

    auto history = run_training_loop(model, prototypes, dataset.inputs, dataset.labels, loss_cfg,
                                     optimizer_cfg, train_cfg);
    if (stats) *stats = std::move(history);
    return {std::move(model), std::move(prototypes)};
}

}  // namespace cilf
