#pragma once

#include <cstddef>
#include <vector>

#include "cilf/matrix.hpp"

namespace cilf::kernels {

// Hot inner loops, each in a serial reference version and an OpenMP version.
// The parallel kernels split work over independent output elements with a
// static schedule and keep the serial accumulation order inside each element,
// so their results are bitwise identical to the serial reference. The test
// suite asserts that equality; the bench target compares their throughput.

namespace serial {

// out = a * b
void matmul_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out = a^T * b
void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out = a * b^T
void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

// out(i,j) = ||x_i - y_j||^2
void pairwise_sqdist(const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out);

// Per-row argmin with value; ties resolve to the lowest column.
void nearest_column(const DenseMatrix& dist, std::vector<std::size_t>& arg,
                    std::vector<double>& value);

// Per-point silhouette values for an assignment into clusters 0..k-1.
// Euclidean distance; singleton clusters and the all-coincident case give 0.
void silhouette_samples(const DenseMatrix& points, const std::vector<int>& assign,
                        int num_clusters, std::vector<double>& out);

}  // namespace serial

namespace parallel {

void matmul_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void pairwise_sqdist(const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out);
void nearest_column(const DenseMatrix& dist, std::vector<std::size_t>& arg,
                    std::vector<double>& value);
void silhouette_samples(const DenseMatrix& points, const std::vector<int>& assign,
                        int num_clusters, std::vector<double>& out);

}  // namespace parallel

// Process-wide switch; defaults to on when built with OpenMP. Small problems
// fall back to the serial path regardless (same bits, less overhead).
void set_parallel(bool enabled);
bool parallel_enabled();

void matmul_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void pairwise_sqdist(const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out);
void nearest_column(const DenseMatrix& dist, std::vector<std::size_t>& arg,
                    std::vector<double>& value);
void silhouette_samples(const DenseMatrix& points, const std::vector<int>& assign,
                        int num_clusters, std::vector<double>& out);

}  // namespace cilf::kernels
