#include "cilf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "cilf/kernels.hpp"

namespace cilf {

void LossConfig::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("loss: alpha must be > 0");
    if (lambda1 < 0.0) throw ConfigError("loss: lambda1 must be >= 0");
    if (lambda2 < 0.0) throw ConfigError("loss: lambda2 must be >= 0");
    if (!(margin > 0.0)) throw ConfigError("loss: margin must be > 0");
}

namespace {

// z_c = -alpha * ||f - mu_c||^2 per row, with the row's log-sum-exp.
struct DistanceLogits {
    DenseMatrix z;
    std::vector<double> lse;
};

DistanceLogits distance_logits(const DenseMatrix& embeddings, const PrototypeSet& prototypes,
                               double alpha) {
    DistanceLogits out;
    const DenseMatrix mus = prototypes.as_matrix();
    kernels::pairwise_sqdist(embeddings, mus, out.z);
    for (double& v : out.z.data) v *= -alpha;
    out.lse.resize(out.z.rows);
    for (std::size_t i = 0; i < out.z.rows; ++i) {
        const double* row = out.z.row(i);
        double zmax = row[0];
        for (std::size_t c = 1; c < out.z.cols; ++c) zmax = std::max(zmax, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < out.z.cols; ++c) sum += std::exp(row[c] - zmax);
        out.lse[i] = zmax + std::log(sum);
    }
    return out;
}

// grad_i += scale * sum_c coeff_c * d z_c / d f_i, with
// d z_c / d f = -2 alpha (f - mu_c).
void add_logit_grad(DenseMatrix& grad, std::size_t i, const DenseMatrix& embeddings,
                    const DenseMatrix& mus, const std::vector<double>& coeff, double alpha,
                    double scale) {
    const double* f = embeddings.row(i);
    double* g = grad.row(i);
    for (std::size_t c = 0; c < mus.rows; ++c) {
        const double w = scale * coeff[c] * (-2.0) * alpha;
        if (w == 0.0) continue;
        const double* mu = mus.row(c);
        for (std::size_t j = 0; j < grad.cols; ++j) g[j] += w * (f[j] - mu[j]);
    }
}

}  // namespace

LossResult intra_loss(const DenseMatrix& embeddings, const std::vector<int>& labels,
                      const PrototypeSet& prototypes, double alpha) {
    if (embeddings.rows != labels.size()) {
        throw ShapeError("intra_loss: embeddings/labels length mismatch");
    }
    std::map<int, std::size_t> index_of;
    {
        std::size_t c = 0;
        for (const auto& [id, _] : prototypes.centroids) index_of[id] = c++;
    }
    for (int y : labels) {
        if (!index_of.count(y)) {
            throw UsageError("intra_loss: no prototype for class " + std::to_string(y));
        }
    }

    const DistanceLogits logits = distance_logits(embeddings, prototypes, alpha);
    const DenseMatrix mus = prototypes.as_matrix();
    LossResult result;
    result.grad = DenseMatrix(embeddings.rows, embeddings.cols, 0.0);
    std::vector<double> coeff(prototypes.size());
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        const std::size_t target = index_of[labels[i]];
        const double* z = logits.z.row(i);
        result.loss += logits.lse[i] - z[target];
        for (std::size_t c = 0; c < coeff.size(); ++c) {
            coeff[c] = std::exp(z[c] - logits.lse[i]) - (c == target ? 1.0 : 0.0);
        }
        add_logit_grad(result.grad, i, embeddings, mus, coeff, alpha, 1.0);
    }
    return result;
}

TripletSet mine_hard_triplets(const DenseMatrix& embeddings, const std::vector<int>& labels) {
    if (embeddings.rows != labels.size()) {
        throw ShapeError("mine_hard_triplets: embeddings/labels length mismatch");
    }
    TripletSet set;
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    set.class_count = by_class.size();
    if (by_class.size() < 2) return set;

    DenseMatrix dist;
    kernels::pairwise_sqdist(embeddings, embeddings, dist);

    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& own = by_class[labels[i]];
        if (own.size() < 2) continue;  // anchor needs a positive
        Triplet t;
        t.anchor = i;
        double far = -1.0;
        for (std::size_t j : own) {
            if (j == i) continue;
            if (dist(i, j) > far) {
                far = dist(i, j);
                t.positive = j;
            }
        }
        for (const auto& [cls, members] : by_class) {
            if (cls == labels[i]) continue;
            std::size_t best = members.front();
            double near = dist(i, best);
            for (std::size_t j : members) {
                if (dist(i, j) < near) {
                    near = dist(i, j);
                    best = j;
                }
            }
            t.negatives.push_back(best);
        }
        set.triplets.push_back(std::move(t));
    }
    return set;
}

LossResult inter_loss(const TripletSet& triplets, const DenseMatrix& embeddings, double margin) {
    LossResult result;
    result.grad = DenseMatrix(embeddings.rows, embeddings.cols, 0.0);
    const std::size_t e = embeddings.cols;
    for (const Triplet& t : triplets.triplets) {
        if (t.anchor >= embeddings.rows || t.positive >= embeddings.rows) {
            throw UsageError("inter_loss: triplet index out of range");
        }
        const double* fa = embeddings.row(t.anchor);
        const double d_ap = squared_distance(fa, embeddings.row(t.positive), e);
        double d_an = std::numeric_limits<double>::infinity();
        std::size_t nearest = 0;
        for (std::size_t n : t.negatives) {
            if (n >= embeddings.rows) throw UsageError("inter_loss: triplet index out of range");
            const double d = squared_distance(fa, embeddings.row(n), e);
            if (d < d_an) {
                d_an = d;
                nearest = n;
            }
        }
        if (t.negatives.empty()) continue;
        const double hinge = margin + d_ap - d_an;
        if (hinge <= 0.0) continue;
        result.loss += hinge;
        double* ga = result.grad.row(t.anchor);
        double* gp = result.grad.row(t.positive);
        double* gn = result.grad.row(nearest);
        const double* fp = embeddings.row(t.positive);
        const double* fn = embeddings.row(nearest);
        for (std::size_t j = 0; j < e; ++j) {
            const double ap = fa[j] - fp[j];
            const double an = fa[j] - fn[j];
            ga[j] += 2.0 * ap - 2.0 * an;
            gp[j] -= 2.0 * ap;
            gn[j] += 2.0 * an;
        }
    }
    return result;
}

LossResult prototype_anchor_loss(const DenseMatrix& embeddings, const std::vector<int>& labels,
                                 const PrototypeSet& current, const PrototypeSet& anchor,
                                 double beta) {
    if (embeddings.rows != labels.size()) {
        throw ShapeError("prototype_anchor_loss: embeddings/labels length mismatch");
    }
    if (beta < 0.0 || beta >= 1.0) throw ConfigError("prototype_anchor_loss: beta in [0,1)");
    LossResult result;
    result.grad = DenseMatrix(embeddings.rows, embeddings.cols, 0.0);
    const std::size_t e = embeddings.cols;

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (anchor.contains(labels[i])) members[labels[i]].push_back(i);
    }

    for (const auto& [cls, mu_anchor] : anchor.centroids) {
        auto cur_it = current.centroids.find(cls);
        if (cur_it == current.centroids.end()) {
            throw UsageError("prototype_anchor_loss: anchor class " + std::to_string(cls) +
                             " missing from current prototypes");
        }
        const std::vector<double>& mu_cur = cur_it->second;
        if (mu_cur.size() != e || mu_anchor.size() != e) {
            throw ShapeError("prototype_anchor_loss: prototype dimension mismatch");
        }
        auto mem_it = members.find(cls);
        if (mem_it == members.end()) {
            // No batch members: the would-be update leaves mu unchanged, so the
            // term is a constant with zero gradient.
            result.loss += squared_distance(mu_cur.data(), mu_anchor.data(), e);
            continue;
        }
        const auto& rows = mem_it->second;
        const double inv_n = 1.0 / static_cast<double>(rows.size());
        std::vector<double> diff(e);  // beta*mu_cur + (1-beta)*mean - anchor
        for (std::size_t j = 0; j < e; ++j) {
            double mean_j = 0.0;
            for (std::size_t r : rows) mean_j += embeddings(r, j);
            mean_j *= inv_n;
            diff[j] = beta * mu_cur[j] + (1.0 - beta) * mean_j - mu_anchor[j];
            result.loss += diff[j] * diff[j];
        }
        const double scale = 2.0 * (1.0 - beta) * inv_n;
        for (std::size_t r : rows) {
            double* g = result.grad.row(r);
            for (std::size_t j = 0; j < e; ++j) g[j] += scale * diff[j];
        }
    }
    return result;
}

LossResult distill_loss(const DenseMatrix& embeddings,
                        const std::vector<std::vector<double>>& targets,
                        const PrototypeSet& old_classes, double alpha) {
    if (embeddings.rows != targets.size()) {
        throw ShapeError("distill_loss: embeddings/targets length mismatch");
    }
    LossResult result;
    result.grad = DenseMatrix(embeddings.rows, embeddings.cols, 0.0);
    if (old_classes.empty()) return result;

    const DistanceLogits logits = distance_logits(embeddings, old_classes, alpha);
    const DenseMatrix mus = old_classes.as_matrix();
    std::vector<double> coeff(old_classes.size());
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        const std::vector<double>& t = targets[i];
        if (t.empty()) continue;
        if (t.size() != old_classes.size()) {
            throw ShapeError("distill_loss: target width does not match old class count");
        }
        const double* z = logits.z.row(i);
        for (std::size_t c = 0; c < coeff.size(); ++c) {
            result.loss -= t[c] * (z[c] - logits.lse[i]);
            coeff[c] = std::exp(z[c] - logits.lse[i]) - t[c];
        }
        add_logit_grad(result.grad, i, embeddings, mus, coeff, alpha, 1.0);
    }
    return result;
}

}  // namespace cilf
