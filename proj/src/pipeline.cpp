#include "cilf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cilf/checkpoint.hpp"
#include "cilf/kernels.hpp"
#include "cilf/metrics.hpp"
#include "cilf/rng.hpp"

namespace cilf {

using nlohmann::json;

namespace {

// Seed streams per pipeline stage, all derived from the run seed.
enum SeedStream : std::uint64_t {
    kSeedInit = 11,
    kSeedTrain = 12,
    kSeedMemory = 13,
    kSeedAStarInit = 500,
    kSeedAStarTrain = 501,
    kSeedDetect = 100,
    kSeedQuery = 200,
    kSeedUpdate = 300,
    kSeedRebalance = 400,
};

template <typename T>
void read_if(const json& doc, const char* key, T& out) {
    if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (doc.contains("params")) {
            const json& p = doc.at("params");
            read_if(p, "epochs", cfg.epochs);
            read_if(p, "batch_size", cfg.batch_size);
            read_if(p, "proto_beta", cfg.proto_beta);
            read_if(p, "k_max", cfg.k_max);
            read_if(p, "query_percent", cfg.query_percent);
            read_if(p, "memory_capacity", cfg.memory_capacity);
            read_if(p, "use_memory", cfg.use_memory);
            read_if(p, "lambda_r", cfg.lambda_r);
            read_if(p, "seeds", cfg.seeds);
            read_if(p, "out_dir", cfg.out_dir);
        }
        if (doc.contains("dataset")) {
            const json& d = doc.at("dataset");
            read_if(d, "type", cfg.dataset.type);
            read_if(d, "csv_path", cfg.dataset.csv_path);
            read_if(d, "idx_images", cfg.dataset.idx_images);
            read_if(d, "idx_labels", cfg.dataset.idx_labels);
            read_if(d, "classes", cfg.dataset.synth_classes);
            read_if(d, "per_class", cfg.dataset.synth_per_class);
            read_if(d, "dim", cfg.dataset.synth_dim);
            read_if(d, "sigma", cfg.dataset.synth_sigma);
            read_if(d, "separation", cfg.dataset.synth_separation);
            read_if(d, "seed", cfg.dataset.synth_seed);
        }
        if (doc.contains("encoder")) {
            const json& e = doc.at("encoder");
            read_if(e, "input_dim", cfg.encoder.input_dim);
            read_if(e, "hidden_dims", cfg.encoder.hidden_dims);
            read_if(e, "embedding_dim", cfg.encoder.embedding_dim);
            read_if(e, "init_seed", cfg.encoder.init_seed);
        }
        if (doc.contains("loss")) {
            const json& l = doc.at("loss");
            read_if(l, "alpha", cfg.loss.alpha);
            read_if(l, "lambda1", cfg.loss.lambda1);
            read_if(l, "lambda2", cfg.loss.lambda2);
            read_if(l, "margin", cfg.loss.margin);
        }
        if (doc.contains("optimizer")) {
            const json& o = doc.at("optimizer");
            read_if(o, "learning_rate", cfg.optimizer.learning_rate);
            read_if(o, "momentum", cfg.optimizer.momentum);
            read_if(o, "weight_decay", cfg.optimizer.weight_decay);
        }
        if (doc.contains("pacing")) {
            const json& p = doc.at("pacing");
            read_if(p, "upsilon", cfg.pacing.upsilon);
            read_if(p, "delta", cfg.pacing.delta);
            read_if(p, "phi", cfg.pacing.phi);
        }
        if (doc.contains("weighting")) {
            const json& w = doc.at("weighting");
            read_if(w, "use_median", cfg.weighting.use_median);
            read_if(w, "gamma", cfg.weighting.gamma);
        }
        if (doc.contains("detector")) {
            const json& d = doc.at("detector");
            read_if(d, "finetune_epochs", cfg.detector.finetune_epochs);
            read_if(d, "batches_per_epoch", cfg.detector.batches_per_epoch);
            read_if(d, "kmeans_max_iters", cfg.detector.kmeans_max_iters);
            read_if(d, "kstar_by_knee", cfg.detector.kstar_by_knee);
            read_if(d, "random_order", cfg.detector.random_order);
        }
        if (doc.contains("stream")) {
            const json& s = doc.at("stream");
            if (s.contains("mode")) cfg.stream.mode = stream_mode_from_string(s.at("mode"));
            read_if(s, "initial_classes", cfg.stream.initial_classes);
            read_if(s, "num_windows", cfg.stream.num_windows);
            read_if(s, "k_min", cfg.stream.k_min);
            read_if(s, "k_max", cfg.stream.k_max);
            read_if(s, "p_disappear", cfg.stream.p_disappear);
            read_if(s, "holdout_fraction", cfg.stream.holdout_fraction);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.detector.proto_beta = cfg.proto_beta;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json_text(buf.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    json doc;
    doc["params"] = {
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"proto_beta", cfg.proto_beta},
        {"k_max", cfg.k_max},
        {"query_percent", cfg.query_percent},
        {"memory_capacity", cfg.memory_capacity},
        {"use_memory", cfg.use_memory},
        {"lambda_r", cfg.lambda_r},
        {"seeds", cfg.seeds},
        {"out_dir", cfg.out_dir},
    };
    doc["dataset"] = {
        {"type", cfg.dataset.type},
        {"csv_path", cfg.dataset.csv_path},
        {"idx_images", cfg.dataset.idx_images},
        {"idx_labels", cfg.dataset.idx_labels},
        {"classes", cfg.dataset.synth_classes},
        {"per_class", cfg.dataset.synth_per_class},
        {"dim", cfg.dataset.synth_dim},
        {"sigma", cfg.dataset.synth_sigma},
        {"separation", cfg.dataset.synth_separation},
        {"seed", cfg.dataset.synth_seed},
    };
    doc["encoder"] = {
        {"input_dim", cfg.encoder.input_dim},
        {"hidden_dims", cfg.encoder.hidden_dims},
        {"embedding_dim", cfg.encoder.embedding_dim},
        {"init_seed", cfg.encoder.init_seed},
    };
    doc["loss"] = {
        {"alpha", cfg.loss.alpha},
        {"lambda1", cfg.loss.lambda1},
        {"lambda2", cfg.loss.lambda2},
        {"margin", cfg.loss.margin},
    };
    doc["optimizer"] = {
        {"learning_rate", cfg.optimizer.learning_rate},
        {"momentum", cfg.optimizer.momentum},
        {"weight_decay", cfg.optimizer.weight_decay},
    };
    doc["pacing"] = {
        {"upsilon", cfg.pacing.upsilon},
        {"delta", cfg.pacing.delta},
        {"phi", cfg.pacing.phi},
    };
    doc["weighting"] = {
        {"use_median", cfg.weighting.use_median},
        {"gamma", cfg.weighting.gamma},
    };
    doc["detector"] = {
        {"finetune_epochs", cfg.detector.finetune_epochs},
        {"batches_per_epoch", cfg.detector.batches_per_epoch},
        {"kmeans_max_iters", cfg.detector.kmeans_max_iters},
        {"kstar_by_knee", cfg.detector.kstar_by_knee},
        {"random_order", cfg.detector.random_order},
    };
    doc["stream"] = {
        {"mode", to_string(cfg.stream.mode)},
        {"initial_classes", cfg.stream.initial_classes},
        {"num_windows", cfg.stream.num_windows},
        {"k_min", cfg.stream.k_min},
        {"k_max", cfg.stream.k_max},
        {"p_disappear", cfg.stream.p_disappear},
        {"holdout_fraction", cfg.stream.holdout_fraction},
    };
    return doc.dump(2) + "\n";
}

Dataset load_dataset(const RunConfig& cfg, std::uint64_t run_seed) {
    const DatasetConfig& d = cfg.dataset;
    if (d.type == "synthetic") {
        const std::uint64_t seed = d.synth_seed != 0 ? d.synth_seed : run_seed;
        return gen_synthetic(d.synth_classes, d.synth_per_class, d.synth_dim, d.synth_sigma,
                             d.synth_separation, seed);
    }
    if (d.type == "csv") return load_csv(d.csv_path);
    if (d.type == "idx") return load_idx(d.idx_images, d.idx_labels);
    throw ConfigError("dataset: unknown type '" + d.type + "' (synthetic|csv|idx)");
}

double prototype_accuracy(const EncoderModel& model, const PrototypeSet& prototypes, double alpha,
                          const DenseMatrix& inputs, const std::vector<int>& labels) {
    if (inputs.rows == 0) throw UsageError("prototype_accuracy: empty batch");
    const DenseMatrix emb = forward(model, inputs);
    const DenseMatrix probs = proto_prob_batch(emb, prototypes, alpha);
    const std::vector<int> ids = prototypes.ids();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        const double* row = probs.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c) {
            if (row[c] > row[best]) best = c;
        }
        if (ids[best] == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(inputs.rows);
}

std::string run_state_to_json(const MemoryBuffer& memory, const std::vector<int>& known_classes) {
    json doc;
    doc["version"] = 1;
    doc["capacity"] = memory.capacity;
    doc["known_classes"] = known_classes;
    json mem = json::object();
    for (const auto& [cls, rows] : memory.entries) {
        mem[std::to_string(cls)] = rows;
    }
    doc["memory"] = std::move(mem);
    return doc.dump(2) + "\n";
}

MemoryBuffer run_state_from_json(const std::string& text, std::vector<int>* known_classes) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("run state: malformed JSON: ") + e.what());
    }
    try {
        MemoryBuffer memory;
        memory.capacity = doc.at("capacity").get<std::size_t>();
        for (const auto& [key, rows] : doc.at("memory").items()) {
            memory.entries[std::stoi(key)] = rows.get<std::vector<std::vector<double>>>();
        }
        if (known_classes) *known_classes = doc.at("known_classes").get<std::vector<int>>();
        return memory;
    } catch (const json::exception& e) {
        throw DataError(std::string("run state: ") + e.what());
    }
}

namespace {

Batch gather_batch(const Dataset& data, const std::vector<std::size_t>& rows) {
    Batch batch;
    batch.inputs = DenseMatrix(rows.size(), data.dim());
    batch.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(data.inputs.row(rows[i]), data.inputs.row(rows[i]) + data.dim(),
                  batch.inputs.row(i));
        batch.labels[i] = data.labels[rows[i]];
    }
    return batch;
}

// Holdout accuracy of one introduction group; NaN when the group has no
// holdout presence (empty groups stay out of the ledger).
double group_accuracy(const EncoderModel& model, const PrototypeSet& protos, double alpha,
                      const Dataset& data, const std::vector<std::size_t>& holdout_rows,
                      const std::set<int>& group_classes) {
    std::vector<std::size_t> rows;
    for (std::size_t r : holdout_rows) {
        if (group_classes.count(data.labels[r])) rows.push_back(r);
    }
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    const Batch batch = gather_batch(data, rows);
    return prototype_accuracy(model, protos, alpha, batch.inputs, batch.labels);
}

std::string metrics_to_json(const PipelineResult& result) {
    json doc;
    json windows = json::array();
    for (const WindowOutcome& w : result.windows) {
        windows.push_back({
            {"t", w.t},
            {"na", w.na},
            {"macro_f", w.macro_f},
            {"micro_f", w.micro_f},
            {"auroc", w.auroc},
        });
    }
    doc["windows"] = std::move(windows);
    doc["A_m"] = result.a_m;
    doc["forgetting"] = result.forgetting_value;
    doc["a_star"] = result.a_star;
    return doc.dump(2) + "\n";
}

}  // namespace

PipelineResult run_stream(const RunConfig& cfg, const Dataset& data, std::uint64_t seed) {
    PipelineResult result;

    StreamConfig stream_cfg = cfg.stream;
    stream_cfg.seed = seed;
    const StreamManifest manifest = build_manifest(data.labels, stream_cfg);
    result.manifest_json = manifest_to_json(manifest);

    EncoderConfig enc_cfg = cfg.encoder;
    if (enc_cfg.input_dim == 0) enc_cfg.input_dim = data.dim();
    if (enc_cfg.input_dim != data.dim()) {
        throw ConfigError("encoder: input_dim does not match the dataset width");
    }
    enc_cfg.init_seed = Rng::derive(seed, kSeedInit);

    TrainConfig train_cfg{cfg.epochs, cfg.batch_size, cfg.proto_beta, Rng::derive(seed, kSeedTrain)};
    const Batch initial = gather_batch(data, manifest.initial_indices);
    auto [model, protos] = train_initial(initial, enc_cfg, cfg.loss, cfg.optimizer, train_cfg);

    MemoryBuffer memory;
    memory.capacity = cfg.memory_capacity;
    if (cfg.use_memory) {
        memory = init_memory(initial, cfg.memory_capacity, Rng::derive(seed, kSeedMemory));
    }

    // Class groups by introduction window; group 0 is the initial classes.
    std::vector<std::set<int>> groups(manifest.windows.size() + 1);
    groups[0].insert(manifest.initial_classes.begin(), manifest.initial_classes.end());
    for (const WindowSpec& spec : manifest.windows) {
        groups[static_cast<std::size_t>(spec.t)].insert(spec.novel.begin(), spec.novel.end());
    }

    result.initial_known_accuracy =
        manifest.holdout_indices.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : group_accuracy(model, protos, cfg.loss.alpha, data, manifest.holdout_indices,
                             groups[0]);

    DetectorConfig det_cfg = cfg.detector;
    det_cfg.proto_beta = cfg.proto_beta;

    for (int t = 1; t <= static_cast<int>(manifest.windows.size()); ++t) {
        const WindowData window = next_window(manifest, data, t);
        const std::set<int> known_before(protos.ids().begin(), protos.ids().end());

        const DetectionReport report = estimate_classes(
            model, protos, window.inputs, cfg.k_max, cfg.loss, cfg.optimizer, cfg.pacing,
            cfg.weighting, det_cfg, Rng::derive(seed, kSeedDetect + static_cast<std::uint64_t>(t)));
        result.report_jsons.push_back(report_to_json(report));

        // Window-level detection metrics, before any label is revealed.
        WindowOutcome outcome;
        outcome.t = t;
        outcome.k_star = report.k_star;
        outcome.true_novel = manifest.windows[static_cast<std::size_t>(t - 1)].novel.size();
        outcome.na = normalized_accuracy(report.pseudo_labels, window.truth, known_before,
                                         cfg.lambda_r);
        const std::map<int, int> mapping =
            optimal_cluster_mapping(report.pseudo_labels, window.truth, known_before);
        const std::vector<int> mapped = apply_mapping(report.pseudo_labels, mapping);
        outcome.macro_f = macro_f(mapped, window.truth);
        outcome.micro_f = micro_f(mapped, window.truth);
        std::size_t mapped_hits = 0;
        for (std::size_t i = 0; i < mapped.size(); ++i) {
            if (mapped[i] == window.truth[i]) ++mapped_hits;
        }
        outcome.pseudo_label_accuracy =
            static_cast<double>(mapped_hits) / static_cast<double>(mapped.size());
        std::vector<bool> is_novel(window.truth.size());
        bool any_novel = false;
        bool any_known = false;
        for (std::size_t i = 0; i < window.truth.size(); ++i) {
            is_novel[i] = !known_before.count(window.truth[i]);
            (is_novel[i] ? any_novel : any_known) = true;
        }
        outcome.auroc = (any_novel && any_known)
                            ? auroc(report.novelty_scores, is_novel)
                            : std::numeric_limits<double>::quiet_NaN();

        // Plot-ready projection of the fine-tuned embedding.
        {
            const DenseMatrix emb = forward(report.model, window.inputs);
            const auto rows = export_projection(emb, window.truth, report.pseudo_labels, t);
            result.projection.insert(result.projection.end(), rows.begin(), rows.end());
        }

        // Oracle step: query labels for the detected-novel rows only.
        std::vector<std::size_t> detected;
        for (std::size_t i = 0; i < report.pseudo_labels.size(); ++i) {
            if (!known_before.count(report.pseudo_labels[i])) detected.push_back(i);
        }
        const QueryResult query =
            query_labels(window, detected, cfg.query_percent, protos.ids(),
                         Rng::derive(seed, kSeedQuery + static_cast<std::uint64_t>(t)));

        TrainConfig update_cfg{cfg.epochs, cfg.batch_size, cfg.proto_beta,
                               Rng::derive(seed, kSeedUpdate + static_cast<std::uint64_t>(t))};
        UpdateResult update = incremental_update(model, protos, query.novel, query.known, memory,
                                                 cfg.loss, cfg.optimizer, update_cfg);
        model = std::move(update.model);
        protos = std::move(update.prototypes);

        if (cfg.use_memory && query.novel.size() > 0) {
            memory = rebalance_memory(memory, query.novel, cfg.memory_capacity,
                                      Rng::derive(seed, kSeedRebalance +
                                                            static_cast<std::uint64_t>(t)));
        }

        // Forgetting ledger row m = t over groups 0..t.
        if (!manifest.holdout_indices.empty()) {
            std::vector<double> row;
            for (int n = 0; n <= t; ++n) {
                row.push_back(group_accuracy(model, protos, cfg.loss.alpha, data,
                                             manifest.holdout_indices,
                                             groups[static_cast<std::size_t>(n)]));
            }
            result.acc_ledger.push_back(std::move(row));
        }
        result.windows.push_back(outcome);
    }

    // A*: the same encoder trained once on everything the stream contains.
    if (!manifest.holdout_indices.empty()) {
        std::vector<std::size_t> union_rows = manifest.initial_indices;
        for (const auto& rows : manifest.window_indices) {
            union_rows.insert(union_rows.end(), rows.begin(), rows.end());
        }
        const Batch union_batch = gather_batch(data, union_rows);
        EncoderConfig astar_cfg = enc_cfg;
        astar_cfg.init_seed = Rng::derive(seed, kSeedAStarInit);
        TrainConfig astar_train{cfg.epochs, cfg.batch_size, cfg.proto_beta,
                                Rng::derive(seed, kSeedAStarTrain)};
        auto [astar_model, astar_protos] =
            train_initial(union_batch, astar_cfg, cfg.loss, cfg.optimizer, astar_train);
        const Batch holdout = gather_batch(data, manifest.holdout_indices);
        result.a_star = prototype_accuracy(astar_model, astar_protos, cfg.loss.alpha,
                                           holdout.inputs, holdout.labels);
        const ForgettingResult fr = forgetting(result.acc_ledger, result.a_star);
        result.a_m = fr.average_accuracy;
        result.forgetting_value = fr.forgetting;
    } else {
        result.a_star = std::numeric_limits<double>::quiet_NaN();
        result.forgetting_value = std::numeric_limits<double>::quiet_NaN();
    }

    result.checkpoint_json = checkpoint_to_json(model, protos, cfg.loss.alpha);
    result.run_state_json = run_state_to_json(memory, protos.ids());
    result.metrics_json = metrics_to_json(result);
    return result;
}

std::vector<std::string> run_pipeline(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    std::vector<std::string> dirs;
    if (cfg.seeds.empty()) throw ConfigError("pipeline: no seeds configured");
    for (std::uint64_t seed : cfg.seeds) {
        const Dataset data = load_dataset(cfg, seed);
        PipelineResult result;
        try {
            result = run_stream(cfg, data, seed);
        } catch (const std::exception& e) {
            throw UsageError("pipeline: seed " + std::to_string(seed) + ": " + e.what());
        }

        const fs::path dir = fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);
        auto write = [&](const std::string& name, const std::string& content) {
            std::ofstream out(dir / name, std::ios::binary);
            if (!out) throw DataError("pipeline: cannot write " + (dir / name).string());
            out << content;
        };
        write("manifest.json", result.manifest_json);
        write("metrics.json", result.metrics_json);
        write("checkpoint.json", result.checkpoint_json);
        write("run_state.json", result.run_state_json);
        for (std::size_t t = 0; t < result.report_jsons.size(); ++t) {
            write("report_window_" + std::to_string(t + 1) + ".json", result.report_jsons[t]);
        }
        {
            std::ofstream out(dir / "projection.csv", std::ios::binary);
            if (!out) throw DataError("pipeline: cannot write projection.csv");
            write_projection_csv_header(out);
            write_projection_csv_rows(out, result.projection);
        }
        dirs.push_back(dir.string());
    }
    return dirs;
}

}  // namespace cilf
