#include "cilf/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cilf/kernels.hpp"

namespace cilf {

std::vector<int> PrototypeSet::ids() const {
    std::vector<int> out;
    out.reserve(centroids.size());
    for (const auto& [id, _] : centroids) out.push_back(id);
    return out;
}

DenseMatrix PrototypeSet::as_matrix() const {
    DenseMatrix m(centroids.size(), dim());
    std::size_t r = 0;
    for (const auto& [_, mu] : centroids) {
        std::copy(mu.begin(), mu.end(), m.row(r));
        ++r;
    }
    return m;
}

namespace {

// Row-wise softmax of -alpha * sqdist, shifted by the row max for stability.
void softmax_from_sqdist(DenseMatrix& sqdist, double alpha) {
    for (std::size_t i = 0; i < sqdist.rows; ++i) {
        double* row = sqdist.row(i);
        double zmax = -alpha * row[0];
        for (std::size_t c = 0; c < sqdist.cols; ++c) zmax = std::max(zmax, -alpha * row[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < sqdist.cols; ++c) {
            row[c] = std::exp(-alpha * row[c] - zmax);
            denom += row[c];
        }
        for (std::size_t c = 0; c < sqdist.cols; ++c) row[c] /= denom;
    }
}

}  // namespace

std::vector<double> proto_prob(std::span<const double> embedding, const PrototypeSet& prototypes,
                               double alpha) {
    if (prototypes.empty()) throw UsageError("proto_prob: empty prototype set");
    if (!(alpha > 0.0)) throw ConfigError("proto_prob: alpha must be > 0");
    if (embedding.size() != prototypes.dim()) {
        throw ShapeError("proto_prob: embedding dimension does not match prototypes");
    }
    DenseMatrix sq(1, prototypes.size());
    std::size_t c = 0;
    for (const auto& [_, mu] : prototypes.centroids) {
        sq.data[c++] = squared_distance(embedding.data(), mu.data(), mu.size());
    }
    softmax_from_sqdist(sq, alpha);
    return sq.data;
}

DenseMatrix proto_prob_batch(const DenseMatrix& embeddings, const PrototypeSet& prototypes,
                             double alpha) {
    if (prototypes.empty()) throw UsageError("proto_prob_batch: empty prototype set");
    if (!(alpha > 0.0)) throw ConfigError("proto_prob_batch: alpha must be > 0");
    const DenseMatrix mus = prototypes.as_matrix();
    DenseMatrix probs;
    kernels::pairwise_sqdist(embeddings, mus, probs);
    softmax_from_sqdist(probs, alpha);
    return probs;
}

PrototypeSet init_prototypes(const DenseMatrix& embeddings, const std::vector<int>& labels) {
    if (embeddings.rows != labels.size()) {
        throw ShapeError("init_prototypes: embeddings/labels length mismatch");
    }
    if (embeddings.rows == 0) throw UsageError("init_prototypes: empty batch");
    PrototypeSet protos;
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        auto& mu = protos.centroids[labels[i]];
        if (mu.empty()) mu.assign(embeddings.cols, 0.0);
        const double* row = embeddings.row(i);
        for (std::size_t j = 0; j < embeddings.cols; ++j) mu[j] += row[j];
        ++counts[labels[i]];
    }
    for (auto& [id, mu] : protos.centroids) {
        const double n = static_cast<double>(counts[id]);
        for (double& v : mu) v /= n;
    }
    return protos;
}

void ema_update(PrototypeSet& prototypes, const std::map<int, std::vector<double>>& epoch_means,
                double beta) {
    if (beta < 0.0 || beta >= 1.0) throw ConfigError("ema_update: beta must be in [0,1)");
    for (const auto& [id, mean] : epoch_means) {
        auto it = prototypes.centroids.find(id);
        if (it == prototypes.centroids.end()) {
            throw UsageError("ema_update: unknown class id " + std::to_string(id));
        }
        std::vector<double>& mu = it->second;
        if (mean.size() != mu.size()) throw ShapeError("ema_update: mean dimension mismatch");
        for (std::size_t j = 0; j < mu.size(); ++j) {
            mu[j] = beta * mu[j] + (1.0 - beta) * mean[j];
        }
    }
}

}  // namespace cilf
