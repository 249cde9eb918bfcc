#include "cilf/encoder.hpp"

#include <cmath>
#include <string>

#include "cilf/kernels.hpp"
#include "cilf/rng.hpp"

namespace cilf {

void EncoderConfig::validate() const {
    if (input_dim == 0) throw ConfigError("encoder: input_dim must be >= 1");
    if (embedding_dim == 0) throw ConfigError("encoder: embedding_dim must be >= 1");
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw ConfigError("encoder: hidden dims must be >= 1");
    }
}

std::vector<DenseMatrix*> EncoderModel::param_blocks() {
    std::vector<DenseMatrix*> blocks;
    blocks.reserve(layers.size() * 2);
    for (Layer& layer : layers) {
        blocks.push_back(&layer.weights);
        blocks.push_back(&layer.bias);
    }
    return blocks;
}

std::vector<const DenseMatrix*> EncoderModel::param_blocks() const {
    std::vector<const DenseMatrix*> blocks;
    blocks.reserve(layers.size() * 2);
    for (const Layer& layer : layers) {
        blocks.push_back(&layer.weights);
        blocks.push_back(&layer.bias);
    }
    return blocks;
}

EncoderModel init_model(const EncoderConfig& cfg) {
    cfg.validate();
    EncoderModel model;
    model.config = cfg;
    std::vector<std::size_t> dims;
    dims.push_back(cfg.input_dim);
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(cfg.embedding_dim);

    Rng rng(cfg.init_seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        const std::size_t fan_in = dims[l];
        const std::size_t fan_out = dims[l + 1];
        const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        layer.weights = DenseMatrix(fan_in, fan_out);
        for (double& w : layer.weights.data) w = rng.uniform(-s, s);
        layer.bias = DenseMatrix(1, fan_out, 0.0);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

DenseMatrix forward(const EncoderModel& model, const DenseMatrix& inputs, ForwardCache* cache) {
    if (inputs.cols != model.input_dim()) {
        throw ShapeError("forward: batch width " + std::to_string(inputs.cols) +
                         " does not match input_dim " + std::to_string(model.input_dim()));
    }
    if (inputs.rows == 0) throw UsageError("forward: empty batch");
    if (cache) {
        cache->model = &model;
        cache->activations.clear();
        cache->activations.push_back(inputs);
    }

    DenseMatrix current = inputs;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        DenseMatrix next;
        kernels::matmul_nn(current, layer.weights, next);
        for (std::size_t i = 0; i < next.rows; ++i) {
            double* row = next.row(i);
            for (std::size_t j = 0; j < next.cols; ++j) row[j] += layer.bias.data[j];
        }
        const bool is_output = (l + 1 == model.layers.size());
        if (!is_output) {
            for (double& v : next.data) v = v > 0.0 ? v : 0.0;
        }
        if (cache) cache->activations.push_back(next);
        current = std::move(next);
    }
    if (!current.all_finite()) throw NumericError("forward: non-finite embeddings");
    return current;
}

std::vector<DenseMatrix> backward(const EncoderModel& model, const ForwardCache& cache,
                                  const DenseMatrix& upstream) {
    if (cache.model != &model || cache.activations.size() != model.layers.size() + 1) {
        throw UsageError("backward: cache is missing or from a different forward call");
    }
    const DenseMatrix& embeddings = cache.activations.back();
    if (!upstream.same_shape(embeddings)) {
        throw ShapeError("backward: upstream gradient shape does not match embeddings");
    }

    std::vector<DenseMatrix> grads(model.layers.size() * 2);
    DenseMatrix delta = upstream;  // gradient w.r.t. current layer's output
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const DenseMatrix& layer_in = cache.activations[l];
        const bool is_output = (l + 1 == model.layers.size());
        if (!is_output) {
            // Rectifier: kill gradient where the cached post-activation is zero.
            const DenseMatrix& post = cache.activations[l + 1];
            for (std::size_t i = 0; i < delta.size(); ++i) {
                if (post.data[i] <= 0.0) delta.data[i] = 0.0;
            }
        }
        DenseMatrix grad_w;
        kernels::matmul_tn(layer_in, delta, grad_w);
        DenseMatrix grad_b(1, delta.cols, 0.0);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* row = delta.row(i);
            for (std::size_t j = 0; j < delta.cols; ++j) grad_b.data[j] += row[j];
        }
        grads[2 * l] = std::move(grad_w);
        grads[2 * l + 1] = std::move(grad_b);
        if (l > 0) {
            DenseMatrix next_delta;
            kernels::matmul_nt(delta, model.layers[l].weights, next_delta);
            delta = std::move(next_delta);
        }
    }
    return grads;
}

}  // namespace cilf
