#pragma once

#include <map>
#include <span>
#include <vector>

#include "cilf/matrix.hpp"

namespace cilf {

// Per-class embedding centroids, kept in class-id order for deterministic
// iteration. ema_beta is the temporal-ensemble momentum.
struct PrototypeSet {
    std::map<int, std::vector<double>> centroids;
    double ema_beta = 0.8;

    bool empty() const { return centroids.empty(); }
    std::size_t size() const { return centroids.size(); }
    bool contains(int class_id) const { return centroids.count(class_id) > 0; }
    std::size_t dim() const { return centroids.empty() ? 0 : centroids.begin()->second.size(); }

    std::vector<int> ids() const;
    // Centroids stacked as a (C x e) matrix in ids() order.
    DenseMatrix as_matrix() const;
};

// Distance-softmax class probabilities for one embedding, aligned with
// prototypes.ids(): p_c = exp(-alpha * ||f - mu_c||^2) / sum_m exp(...).
std::vector<double> proto_prob(std::span<const double> embedding, const PrototypeSet& prototypes,
                               double alpha);

// Batch version: one row of probabilities per embedding row.
DenseMatrix proto_prob_batch(const DenseMatrix& embeddings, const PrototypeSet& prototypes,
                             double alpha);

// Class means of the embeddings; every class id must have at least one row.
PrototypeSet init_prototypes(const DenseMatrix& embeddings, const std::vector<int>& labels);

// mu_c <- beta * mu_c + (1 - beta) * mean_c; classes absent from the means
// are left unchanged, unknown class ids are an error.
void ema_update(PrototypeSet& prototypes, const std::map<int, std::vector<double>>& epoch_means,
                double beta);

}  // namespace cilf
