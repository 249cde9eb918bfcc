#include "cilf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cilf::kernels {

namespace {

void check_matmul_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols != b.rows) throw ShapeError("matmul_nn: inner dimensions differ");
    if (out.rows != a.rows || out.cols != b.cols) out = DenseMatrix(a.rows, b.cols);
}

void check_matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.rows != b.rows) throw ShapeError("matmul_tn: inner dimensions differ");
    if (out.rows != a.cols || out.cols != b.cols) out = DenseMatrix(a.cols, b.cols);
}

void check_matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols != b.cols) throw ShapeError("matmul_nt: inner dimensions differ");
    if (out.rows != a.rows || out.cols != b.rows) out = DenseMatrix(a.rows, b.rows);
}

inline void matmul_nn_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                          std::size_t i) {
    double* out_row = out.row(i);
    std::fill(out_row, out_row + out.cols, 0.0);
    const double* a_row = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
        const double aik = a_row[k];
        const double* b_row = b.row(k);
        for (std::size_t j = 0; j < b.cols; ++j) out_row[j] += aik * b_row[j];
    }
}

inline void matmul_tn_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                          std::size_t i) {
    // out(i,j) = sum_k a(k,i) * b(k,j)
    double* out_row = out.row(i);
    std::fill(out_row, out_row + out.cols, 0.0);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double aki = a(k, i);
        const double* b_row = b.row(k);
        for (std::size_t j = 0; j < b.cols; ++j) out_row[j] += aki * b_row[j];
    }
}

inline void matmul_nt_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                          std::size_t i) {
    double* out_row = out.row(i);
    const double* a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
        const double* b_row = b.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < a.cols; ++k) acc += a_row[k] * b_row[k];
        out_row[j] = acc;
    }
}

inline void sqdist_row(const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out,
                       std::size_t i) {
    const double* xi = x.row(i);
    double* out_row = out.row(i);
    for (std::size_t j = 0; j < y.rows; ++j) {
        out_row[j] = squared_distance(xi, y.row(j), x.cols);
    }
}

inline void nearest_entry(const DenseMatrix& dist, std::vector<std::size_t>& arg,
                          std::vector<double>& value, std::size_t i) {
    const double* row = dist.row(i);
    std::size_t best = 0;
    double best_v = row[0];
    for (std::size_t j = 1; j < dist.cols; ++j) {
        if (row[j] < best_v) {
            best_v = row[j];
            best = j;
        }
    }
    arg[i] = best;
    value[i] = best_v;
}

// Silhouette of one point: a = mean distance to own cluster's other members,
// b = smallest mean distance to another non-empty cluster.
inline double silhouette_point(const DenseMatrix& points, const std::vector<int>& assign,
                               const std::vector<std::size_t>& cluster_size, int num_clusters,
                               std::size_t i, std::vector<double>& scratch) {
    const int own = assign[i];
    if (cluster_size[static_cast<std::size_t>(own)] <= 1) return 0.0;
    scratch.assign(static_cast<std::size_t>(num_clusters), 0.0);
    const double* pi = points.row(i);
    for (std::size_t j = 0; j < points.rows; ++j) {
        if (j == i) continue;
        scratch[static_cast<std::size_t>(assign[j])] +=
            std::sqrt(squared_distance(pi, points.row(j), points.cols));
    }
    const double a =
        scratch[static_cast<std::size_t>(own)] /
        static_cast<double>(cluster_size[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_clusters; ++c) {
        if (c == own || cluster_size[static_cast<std::size_t>(c)] == 0) continue;
        b = std::min(b, scratch[static_cast<std::size_t>(c)] /
                            static_cast<double>(cluster_size[static_cast<std::size_t>(c)]));
    }
    if (!std::isfinite(b)) return 0.0;  // no other occupied cluster
    const double denom = std::max(a, b);
    if (denom == 0.0) return 0.0;  // coincident points
    return (b - a) / denom;
}

std::vector<std::size_t> count_clusters(const std::vector<int>& assign, int num_clusters) {
    std::vector<std::size_t> size(static_cast<std::size_t>(num_clusters), 0);
    for (int c : assign) {
        if (c < 0 || c >= num_clusters) throw UsageError("silhouette: assignment out of range");
        ++size[static_cast<std::size_t>(c)];
    }
    return size;
}

bool flag_default() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

bool g_parallel = flag_default();

}  // namespace

void set_parallel(bool enabled) { g_parallel = enabled; }
bool parallel_enabled() { return g_parallel; }

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------

namespace serial {

void matmul_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    check_matmul_nn(a, b, out);
    for (std::size_t i = 0; i < a.rows; ++i) matmul_nn_row(a, b, out, i);
}

void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    check_matmul_tn(a, b, out);
    for (std::size_t i = 0; i < a.cols; ++i) matmul_tn_row(a, b, out, i);
}

void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    check_matmul_nt(a, b, out);
    for (std::size_t i = 0; i < a.rows; ++i) matmul_nt_row(a, b, out, i);
}

void pairwise_sqdist(const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out) {
    if (x.cols != y.cols) throw ShapeError("pairwise_sqdist: dimension mismatch");
    if (out.rows != x.rows || out.cols != y.rows) out = DenseMatrix(x.rows, y.rows);
    for (std::size_t i = 0; i < x.rows; ++i) sqdist_row(x, y, out, i);
}

void nearest_column(const DenseMatrix& dist, std::vector<std::size_t>& arg,
                    std::vector<double>& value) {
    if (dist.cols == 0) throw UsageError("nearest_column: empty matrix");
    arg.resize(dist.rows);
    value.resize(dist.rows);
    for (std::size_t i = 0; i < dist.rows; ++i) nearest_entry(dist, arg, value, i);
}

void silhouette_samples(const DenseMatrix& points, const std::vector<int>& assign,
                        int num_clusters, std::vector<double>& out) {
    const auto size = count_clusters(assign, num_clusters);
    out.resize(points.rows);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < points.rows; ++i) {
        out[i] = silhouette_point(points, assign, size, num_clusters, i, scratch);
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP
// ---------------------------------------------------------------------------

namespace parallel {

void matmul_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    check_matmul_nn(a, b, out);
    const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) matmul_nn_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    check_matmul_tn(a, b, out);
    const std::int64_t n = static_cast<std::int64_t>(a.cols);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) matmul_tn_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    check_matmul_nt(a, b, out);
    const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) matmul_nt_row(a, b, out, static_cast<std::size_t>(i));
}

void pairwise_sqdist(const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out) {
    if (x.cols != y.cols) throw ShapeError("pairwise_sqdist: dimension mismatch");
    if (out.rows != x.rows || out.cols != y.rows) out = DenseMatrix(x.rows, y.rows);
    const std::int64_t n = static_cast<std::int64_t>(x.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) sqdist_row(x, y, out, static_cast<std::size_t>(i));
}

void nearest_column(const DenseMatrix& dist, std::vector<std::size_t>& arg,
                    std::vector<double>& value) {
    if (dist.cols == 0) throw UsageError("nearest_column: empty matrix");
    arg.resize(dist.rows);
    value.resize(dist.rows);
    const std::int64_t n = static_cast<std::int64_t>(dist.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) nearest_entry(dist, arg, value, static_cast<std::size_t>(i));
}

void silhouette_samples(const DenseMatrix& points, const std::vector<int>& assign,
                        int num_clusters, std::vector<double>& out) {
    const auto size = count_clusters(assign, num_clusters);
    out.resize(points.rows);
    const std::int64_t n = static_cast<std::int64_t>(points.rows);
#pragma omp parallel
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(i)] = silhouette_point(
                points, assign, size, num_clusters, static_cast<std::size_t>(i), scratch);
        }
    }
}

}  // namespace parallel

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

namespace {

// Work below these cutoffs is not worth a thread team.
constexpr std::size_t kMatmulFlopCutoff = 64 * 1024;
constexpr std::size_t kRowWorkCutoff = 16 * 1024;

}  // namespace

void matmul_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (g_parallel && a.rows * a.cols * b.cols >= kMatmulFlopCutoff) {
        parallel::matmul_nn(a, b, out);
    } else {
        serial::matmul_nn(a, b, out);
    }
}

void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (g_parallel && a.rows * a.cols * b.cols >= kMatmulFlopCutoff) {
        parallel::matmul_tn(a, b, out);
    } else {
        serial::matmul_tn(a, b, out);
    }
}

void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (g_parallel && a.rows * a.cols * b.rows >= kMatmulFlopCutoff) {
        parallel::matmul_nt(a, b, out);
    } else {
        serial::matmul_nt(a, b, out);
    }
}

void pairwise_sqdist(const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out) {
    if (g_parallel && x.rows * y.rows * x.cols >= kMatmulFlopCutoff) {
        parallel::pairwise_sqdist(x, y, out);
    } else {
        serial::pairwise_sqdist(x, y, out);
    }
}

void nearest_column(const DenseMatrix& dist, std::vector<std::size_t>& arg,
                    std::vector<double>& value) {
    if (g_parallel && dist.rows * dist.cols >= kRowWorkCutoff) {
        parallel::nearest_column(dist, arg, value);
    } else {
        serial::nearest_column(dist, arg, value);
    }
}

void silhouette_samples(const DenseMatrix& points, const std::vector<int>& assign,
                        int num_clusters, std::vector<double>& out) {
    if (g_parallel && points.rows * points.rows * points.cols >= kMatmulFlopCutoff) {
        parallel::silhouette_samples(points, assign, num_clusters, out);
    } else {
        serial::silhouette_samples(points, assign, num_clusters, out);
    }
}

}  // namespace cilf::kernels
