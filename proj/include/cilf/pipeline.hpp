#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cilf/dataset.hpp"
#include "cilf/detector.hpp"
#include "cilf/projection.hpp"
#include "cilf/stream.hpp"
#include "cilf/trainer.hpp"
#include "cilf/updater.hpp"

namespace cilf {

struct DatasetConfig {
    std::string type = "synthetic";  // synthetic | csv | idx
    std::string csv_path;
    std::string idx_images;
    std::string idx_labels;
    std::size_t synth_classes = 8;
    std::size_t synth_per_class = 150;
    std::size_t synth_dim = 2;
    double synth_sigma = 1.0;
    double synth_separation = 10.0;
    std::uint64_t synth_seed = 0;  // 0: follow the run seed
};

struct RunConfig {
    DatasetConfig dataset;
    EncoderConfig encoder;  // input_dim 0 resolves to the dataset width
    LossConfig loss;
    OptimizerConfig optimizer;
    PacingConfig pacing;
    WeightingConfig weighting;
    DetectorConfig detector;
    StreamConfig stream;  // per-seed runs override stream.seed

    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double proto_beta = 0.8;
    std::size_t k_max = 4;
    double query_percent = 100.0;
    std::size_t memory_capacity = 500;
    bool use_memory = true;
    double lambda_r = 0.5;
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
};

RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

Dataset load_dataset(const RunConfig& cfg, std::uint64_t run_seed);

struct WindowOutcome {
    int t = 0;
    double na = 0.0;
    double macro_f = 0.0;
    double micro_f = 0.0;
    double auroc = 0.0;  // NaN when the window has one class side only
    int k_star = 0;
    std::size_t true_novel = 0;
    double pseudo_label_accuracy = 0.0;  // mapped pseudo-labels vs truth
};

struct PipelineResult {
    std::vector<WindowOutcome> windows;
    std::vector<double> a_m;
    double forgetting_value = 0.0;
    double a_star = 0.0;
    double initial_known_accuracy = 0.0;
    std::vector<std::vector<double>> acc_ledger;

    std::string manifest_json;
    std::string metrics_json;
    std::string checkpoint_json;
    std::string run_state_json;
    std::vector<std::string> report_jsons;  // one per window
    std::vector<ProjectionRow> projection;
};

// One full stream replay for one seed; detection never sees ground truth,
// which reaches the update only through the label-query oracle.
PipelineResult run_stream(const RunConfig& cfg, const Dataset& data, std::uint64_t seed);

// Runs every configured seed and writes per-seed artifact directories.
// Returns the per-seed output directories.
std::vector<std::string> run_pipeline(const RunConfig& cfg);

// Nearest-prototype accuracy of (model, prototypes) on a labeled batch.
double prototype_accuracy(const EncoderModel& model, const PrototypeSet& prototypes, double alpha,
                          const DenseMatrix& inputs, const std::vector<int>& labels);

std::string run_state_to_json(const MemoryBuffer& memory, const std::vector<int>& known_classes);
MemoryBuffer run_state_from_json(const std::string& text, std::vector<int>* known_classes);

}  // namespace cilf
