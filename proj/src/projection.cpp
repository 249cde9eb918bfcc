#include "cilf/projection.hpp"

#include <algorithm>
#include <cmath>

namespace cilf {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Plenty for the
// embedding dimensions this code sees.
void jacobi_eig(DenseMatrix a, std::vector<double>& eigenvalues, DenseMatrix& eigenvectors) {
    const std::size_t n = a.rows;
    eigenvectors = DenseMatrix(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eigenvectors(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = eigenvectors(k, p);
                    const double vkq = eigenvectors(k, q);
                    eigenvectors(k, p) = c * vkp - s * vkq;
                    eigenvectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a(i, i);
}

}  // namespace

std::vector<std::array<double, 2>> pca_project_2d(const DenseMatrix& points) {
    if (points.rows < 2) throw UsageError("pca_project_2d: need at least 2 instances");
    const std::size_t n = points.rows;
    const std::size_t d = points.cols;

    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = points.row(i);
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    for (double& m : mean) m /= static_cast<double>(n);

    DenseMatrix cov(d, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = points.row(i);
        for (std::size_t a = 0; a < d; ++a) {
            const double da = row[a] - mean[a];
            for (std::size_t b = a; b < d; ++b) {
                cov(a, b) += da * (row[b] - mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            cov(a, b) /= static_cast<double>(n);
            cov(b, a) = cov(a, b);
        }
    }

    std::vector<double> eigenvalues;
    DenseMatrix vectors;
    jacobi_eig(cov, eigenvalues, vectors);

    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (eigenvalues[a] != eigenvalues[b]) return eigenvalues[a] > eigenvalues[b];
        return a < b;
    });

    std::array<std::vector<double>, 2> axes;
    for (std::size_t k = 0; k < 2; ++k) {
        axes[k].assign(d, 0.0);
        if (k >= d) continue;  // 1-D input: second axis stays zero
        const std::size_t col = order[k];
        if (eigenvalues[col] <= 1e-18) continue;  // rank-deficient direction
        for (std::size_t j = 0; j < d; ++j) axes[k][j] = vectors(j, col);
        // Sign convention: the largest-magnitude coordinate is positive.
        std::size_t top = 0;
        for (std::size_t j = 1; j < d; ++j) {
            if (std::abs(axes[k][j]) > std::abs(axes[k][top])) top = j;
        }
        if (axes[k][top] < 0.0) {
            for (double& v : axes[k]) v = -v;
        }
    }

    std::vector<std::array<double, 2>> projected(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = points.row(i);
        for (std::size_t k = 0; k < 2; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += (row[j] - mean[j]) * axes[k][j];
            projected[i][k] = acc;
        }
    }
    return projected;
}

std::vector<ProjectionRow> export_projection(const DenseMatrix& embeddings,
                                             const std::vector<int>& labels,
                                             const std::vector<int>& pseudo_labels, int window) {
    if (embeddings.rows != labels.size() || embeddings.rows != pseudo_labels.size()) {
        throw ShapeError("export_projection: length mismatch");
    }
    const auto projected = pca_project_2d(embeddings);
    std::vector<ProjectionRow> rows(embeddings.rows);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        rows[i] = {projected[i][0], projected[i][1], labels[i], pseudo_labels[i], window};
    }
    return rows;
}

void write_projection_csv_header(std::ostream& out) {
    out << "x,y,true_label,pseudo_label,window\n";
}

void write_projection_csv_rows(std::ostream& out, const std::vector<ProjectionRow>& rows) {
    const auto precision = out.precision(17);
    for (const ProjectionRow& r : rows) {
        out << r.x << "," << r.y << "," << r.true_label << "," << r.pseudo_label << ","
            << r.window << "\n";
    }
    out.precision(precision);
}

}  // namespace cilf
