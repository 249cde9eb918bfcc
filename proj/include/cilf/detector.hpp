#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cilf/encoder.hpp"
#include "cilf/losses.hpp"
#include "cilf/optimizer.hpp"
#include "cilf/prototypes.hpp"

namespace cilf {

// Threshold for the self-taught weighting function w = (u - gamma)^2.
// By default gamma is the median of the window's confidence scores, which
// keeps the weighting scale-free across datasets.
struct WeightingConfig {
    bool use_median = true;
    double gamma = 0.0;  // used when use_median is false
};

struct InstanceWeight {
    std::size_t index = 0;
    double confidence = 0.0;  // u: -log of the top known-class probability
    double weight = 0.0;      // w = (u - gamma)^2
};

struct WeightingResult {
    std::vector<InstanceWeight> weights;
    double gamma = 0.0;  // resolved threshold
};

// Exponential pacing h(l) = min(upsilon * delta^floor(l/phi), 1) * N.
struct PacingConfig {
    double upsilon = 0.2;
    double delta = 3.0;
    std::size_t phi = 10;

    void validate() const;
};

struct DetectorConfig {
    std::size_t finetune_epochs = 10;
    std::size_t batches_per_epoch = 0;  // 0: derived from the pacing plateau
    std::size_t kmeans_max_iters = 100;
    double proto_beta = 0.8;
    bool kstar_by_knee = false;       // default: argmax of the CVI curve
    bool random_order = false;        // ablation: ignore difficulty ordering
};

WeightingResult confidence_weights(const DenseMatrix& embeddings, const PrototypeSet& known,
                                   double alpha, const WeightingConfig& cfg);

struct WeightedKMeansResult {
    PrototypeSet prototypes;                // known ids plus K provisional novel ids
    std::vector<int> assignment;            // class id per instance
    std::vector<double> objective_history;  // weighted objective per iteration
    std::vector<int> novel_ids;
    bool used_global_seed_fallback = false;
};

// Semi-supervised weighted k-means: known centroids blend toward the weighted
// mean of their assigned instances while staying tied to the previous
// prototypes; novel centroids are pure weighted means. Novel seeds come from
// farthest-point sampling over instances whose nearest known prototype is
// beyond the median such distance.
WeightedKMeansResult weighted_kmeans_init(const DenseMatrix& embeddings,
                                          const std::vector<double>& weights,
                                          const PrototypeSet& old_prototypes, std::size_t k,
                                          double beta, std::size_t max_iters = 100);

// Subset sizes h(0..L-1); non-decreasing, clamped to [1, n].
std::vector<std::size_t> pacing_schedule(std::size_t n, const PacingConfig& cfg,
                                         std::size_t num_batches);

struct FinetuneResult {
    EncoderModel model;
    PrototypeSet prototypes;
    std::vector<int> pseudo_labels;
};

// Curriculum fine-tune clustering: instances are sorted easiest-first by the
// weighting function, presented as growing prefixes under the pacing
// schedule, and trained on their own pseudo-labels with the known prototypes
// anchored to their pre-window values.
FinetuneResult curriculum_finetune(const EncoderModel& model, const PrototypeSet& prototypes_init,
                                   const DenseMatrix& window_inputs, const PrototypeSet& known,
                                   const LossConfig& loss_cfg, const OptimizerConfig& opt_cfg,
                                   const PacingConfig& pacing_cfg, const WeightingConfig& w_cfg,
                                   const DetectorConfig& det_cfg, std::uint64_t seed);

// Instance-summed silhouette over the assignment's non-empty clusters.
// Needs at least two occupied clusters.
double silhouette_cvi(const DenseMatrix& embeddings, const std::vector<int>& assignments);

struct DetectionReport {
    int k_star = 0;
    int k_star_knee = 0;
    std::map<int, double> cvi_curve;  // NaN marks an undefined CVI
    std::vector<int> pseudo_labels;
    std::vector<double> novelty_scores;  // min squared distance to a known prototype
    std::vector<int> novel_ids;          // provisional ids of the k_star clustering
    EncoderModel model;                  // fine-tuned for k_star
    PrototypeSet prototypes;
};

// Sweep K = 0..k_max, each on its own copy of (model, prototypes), score each
// clustering with the CVI and keep the winner. The sweep is parallel; per-K
// seeds are derived from `seed` so the result does not depend on scheduling.
DetectionReport estimate_classes(const EncoderModel& model, const PrototypeSet& prototypes,
                                 const DenseMatrix& window_inputs, std::size_t k_max,
                                 const LossConfig& loss_cfg, const OptimizerConfig& opt_cfg,
                                 const PacingConfig& pacing_cfg, const WeightingConfig& w_cfg,
                                 const DetectorConfig& det_cfg, std::uint64_t seed);

std::string report_to_json(const DetectionReport& report);

}  // namespace cilf
