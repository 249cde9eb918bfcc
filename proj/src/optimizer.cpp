#include "cilf/optimizer.hpp"

#include <cmath>
#include <string>

namespace cilf {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("optimizer: learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("optimizer: weight_decay must be >= 0");
}

OptimizerState OptimizerState::zeros_like(const std::vector<DenseMatrix*>& params) {
    OptimizerState state;
    state.velocity.reserve(params.size());
    for (const DenseMatrix* p : params) {
        state.velocity.emplace_back(p->rows, p->cols, 0.0);
    }
    return state;
}

void sgd_nesterov_step(const std::vector<DenseMatrix*>& params,
                       const std::vector<DenseMatrix>& grads, OptimizerState& state,
                       const OptimizerConfig& cfg) {
    cfg.validate();
    if (params.size() != grads.size() || params.size() != state.velocity.size()) {
        throw ShapeError("sgd_nesterov_step: block count mismatch");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        DenseMatrix& theta = *params[b];
        const DenseMatrix& grad = grads[b];
        DenseMatrix& vel = state.velocity[b];
        require_same_shape(theta, grad, "sgd_nesterov_step");
        require_same_shape(theta, vel, "sgd_nesterov_step");
        if (!grad.all_finite()) {
            throw NumericError("sgd_nesterov_step: non-finite gradient in block " +
                               std::to_string(b));
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad.data[i] + cfg.weight_decay * theta.data[i];
            vel.data[i] = cfg.momentum * vel.data[i] - cfg.learning_rate * g;
            theta.data[i] += vel.data[i];
        }
    }
}

std::vector<DenseMatrix> finite_diff_grad(const std::function<double()>& loss,
                                          const std::vector<DenseMatrix*>& params,
                                          double step) {
    if (!(step > 0.0)) throw ConfigError("finite_diff_grad: step must be > 0");
    std::vector<DenseMatrix> grads;
    grads.reserve(params.size());
    for (DenseMatrix* block : params) {
        DenseMatrix g(block->rows, block->cols, 0.0);
        for (std::size_t i = 0; i < block->size(); ++i) {
            const double saved = block->data[i];
            block->data[i] = saved + step;
            const double up = loss();
            block->data[i] = saved - step;
            const double down = loss();
            block->data[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("finite_diff_grad: loss is non-finite near the base point");
            }
            g.data[i] = (up - down) / (2.0 * step);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

}  // namespace cilf
