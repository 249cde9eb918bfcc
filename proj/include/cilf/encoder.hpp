#pragma once

#include <cstdint>
#include <vector>

#include "cilf/matrix.hpp"

namespace cilf {

struct EncoderConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims = {128, 64};
    std::size_t embedding_dim = 32;
    std::uint64_t init_seed = 0;

    void validate() const;
};

// One affine layer; weights are (in x out), bias is (1 x out).
struct Layer {
    DenseMatrix weights;
    DenseMatrix bias;
};

// f(x; theta): rectifier hidden layers, linear output layer so embeddings
// can occupy all of R^e.
struct EncoderModel {
    EncoderConfig config;
    std::vector<Layer> layers;

    std::size_t input_dim() const { return config.input_dim; }
    std::size_t embedding_dim() const { return config.embedding_dim; }

    // Blocks in optimizer order: W0, b0, W1, b1, ...
    std::vector<DenseMatrix*> param_blocks();
    std::vector<const DenseMatrix*> param_blocks() const;
};

struct Batch {
    DenseMatrix inputs;       // N x d
    std::vector<int> labels;  // empty when unlabeled

    std::size_t size() const { return inputs.rows; }
};

// Activations kept for the matching backward call. `model` tags the owner so
// a cache from a different model (or none at all) is rejected.
struct ForwardCache {
    const EncoderModel* model = nullptr;
    std::vector<DenseMatrix> activations;  // [inputs, post-relu per hidden, embeddings]
};

// Uniform init in [-s, s] with s = sqrt(6 / (fan_in + fan_out)); zero biases.
EncoderModel init_model(const EncoderConfig& cfg);

DenseMatrix forward(const EncoderModel& model, const DenseMatrix& inputs,
                    ForwardCache* cache = nullptr);

// Gradients of a scalar loss w.r.t. every parameter block, given the loss
// gradient w.r.t. the embeddings (N x e).
std::vector<DenseMatrix> backward(const EncoderModel& model, const ForwardCache& cache,
                                  const DenseMatrix& upstream);

}  // namespace cilf
