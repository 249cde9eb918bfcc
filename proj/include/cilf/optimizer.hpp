#pragma once

#include <functional>
#include <vector>

#include "cilf/matrix.hpp"

namespace cilf {

struct OptimizerConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.001;

    void validate() const;
};

struct OptimizerState {
    std::vector<DenseMatrix> velocity;

    static OptimizerState zeros_like(const std::vector<DenseMatrix*>& params);
};

// Nesterov momentum, Sutskever form: the caller evaluates gradients at the
// lookahead point theta + momentum * v, then this applies
//   g <- g + weight_decay * theta
//   v <- momentum * v - lr * g
//   theta <- theta + v
void sgd_nesterov_step(const std::vector<DenseMatrix*>& params,
                       const std::vector<DenseMatrix>& grads, OptimizerState& state,
                       const OptimizerConfig& cfg);

// Central-difference gradient of a scalar loss over parameter blocks. The
// blocks are perturbed in place and restored; loss() must read them through
// the same pointers. Test oracle for every analytic gradient in the repo.
std::vector<DenseMatrix> finite_diff_grad(const std::function<double()>& loss,
                                          const std::vector<DenseMatrix*>& params,
                                          double step = 1e-5);

}  // namespace cilf
