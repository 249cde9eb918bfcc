#include "cilf/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cilf {

using nlohmann::json;

std::string checkpoint_to_json(const EncoderModel& model, const PrototypeSet& prototypes,
                               double alpha) {
    json doc;
    doc["version"] = kCheckpointVersion;
    doc["alpha"] = alpha;
    doc["config"] = {
        {"input_dim", model.config.input_dim},
        {"hidden_dims", model.config.hidden_dims},
        {"embedding_dim", model.config.embedding_dim},
        {"init_seed", model.config.init_seed},
    };
    json layers = json::array();
    for (const Layer& layer : model.layers) {
        layers.push_back({
            {"rows", layer.weights.rows},
            {"cols", layer.weights.cols},
            {"weights", layer.weights.data},
            {"bias", layer.bias.data},
        });
    }
    doc["layers"] = std::move(layers);
    json protos = json::object();
    for (const auto& [id, mu] : prototypes.centroids) {
        protos[std::to_string(id)] = mu;
    }
    doc["prototypes"] = std::move(protos);
    return doc.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("checkpoint: malformed file: ") + e.what());
    }
    try {
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw CheckpointVersionError("checkpoint: unsupported version " +
                                         std::to_string(version) + " (supported: " +
                                         std::to_string(kCheckpointVersion) + ")");
        }
        Checkpoint ckpt;
        ckpt.alpha = doc.at("alpha").get<double>();
        const json& cfg = doc.at("config");
        ckpt.model.config.input_dim = cfg.at("input_dim").get<std::size_t>();
        ckpt.model.config.hidden_dims = cfg.at("hidden_dims").get<std::vector<std::size_t>>();
        ckpt.model.config.embedding_dim = cfg.at("embedding_dim").get<std::size_t>();
        ckpt.model.config.init_seed = cfg.at("init_seed").get<std::uint64_t>();

        std::size_t prev = ckpt.model.config.input_dim;
        for (const json& jl : doc.at("layers")) {
            Layer layer;
            layer.weights.rows = jl.at("rows").get<std::size_t>();
            layer.weights.cols = jl.at("cols").get<std::size_t>();
            layer.weights.data = jl.at("weights").get<std::vector<double>>();
            layer.bias = DenseMatrix(1, layer.weights.cols);
            layer.bias.data = jl.at("bias").get<std::vector<double>>();
            if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols ||
                layer.bias.data.size() != layer.weights.cols || layer.weights.rows != prev) {
                throw ShapeError("checkpoint: inconsistent layer shapes");
            }
            prev = layer.weights.cols;
            ckpt.model.layers.push_back(std::move(layer));
        }
        if (prev != ckpt.model.config.embedding_dim) {
            throw ShapeError("checkpoint: layer chain does not end at embedding_dim");
        }
        for (const auto& [key, value] : doc.at("prototypes").items()) {
            std::vector<double> mu = value.get<std::vector<double>>();
            if (mu.size() != ckpt.model.config.embedding_dim) {
                throw ShapeError("checkpoint: prototype dimension mismatch for class " + key);
            }
            ckpt.prototypes.centroids.emplace(std::stoi(key), std::move(mu));
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint: malformed file: ") + e.what());
    }
}

void save_checkpoint(const EncoderModel& model, const PrototypeSet& prototypes, double alpha,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open for writing: " + path);
    out << checkpoint_to_json(model, prototypes, alpha);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_json(buf.str());
}

}  // namespace cilf
