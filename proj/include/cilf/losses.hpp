#pragma once

#include <vector>

#include "cilf/matrix.hpp"
#include "cilf/prototypes.hpp"

namespace cilf {

struct LossConfig {
    double alpha = 0.3;    // distance temperature
    double lambda1 = 1.0;  // inter-class weight
    double lambda2 = 1.0;  // prototype-anchor weight
    double margin = 1.0;   // triplet hinge margin

    void validate() const;
};

// Scalar loss plus its gradient w.r.t. the embeddings it was computed from.
struct LossResult {
    double loss = 0.0;
    DenseMatrix grad;  // same shape as the embeddings
};

// Prototype cross entropy: sum_i -log p_{i, y_i}. Prototypes are constants;
// the gradient flows to embeddings only.
LossResult intra_loss(const DenseMatrix& embeddings, const std::vector<int>& labels,
                      const PrototypeSet& prototypes, double alpha);

// One hard tuple per eligible anchor: the farthest same-class member as
// positive and the nearest member of every other class as negatives.
struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::vector<std::size_t> negatives;  // one per other class, in class-id order
};

struct TripletSet {
    std::vector<Triplet> triplets;
    std::size_t class_count = 0;
};

// Anchors whose class has fewer than two batch members are skipped; a batch
// with fewer than two classes yields an empty set.
TripletSet mine_hard_triplets(const DenseMatrix& embeddings, const std::vector<int>& labels);

// Hinge over squared Euclidean distances:
//   sum over tuples of max(0, margin + d(a,p) - min_c d(a,n_c)).
LossResult inter_loss(const TripletSet& triplets, const DenseMatrix& embeddings, double margin);

// Penalty keeping known-class prototypes near their anchor values:
//   sum_c || beta * mu_c + (1-beta) * batch_mean_c  -  anchor_c ||^2
// over anchor classes with members in the batch. The inner expression is the
// temporal-ensemble update the batch would produce, so the gradient steers
// embeddings toward keeping those prototypes in place.
LossResult prototype_anchor_loss(const DenseMatrix& embeddings, const std::vector<int>& labels,
                                 const PrototypeSet& current, const PrototypeSet& anchor,
                                 double beta);

// Distillation cross entropy against frozen per-row target distributions over
// `old_classes` (rows of `targets` align with embedding rows; an empty target
// row opts that row out).
LossResult distill_loss(const DenseMatrix& embeddings,
                        const std::vector<std::vector<double>>& targets,
                        const PrototypeSet& old_classes, double alpha);

}  // namespace cilf
