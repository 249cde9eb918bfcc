#pragma once

#include <array>
#include <ostream>
#include <vector>

#include "cilf/matrix.hpp"

namespace cilf {

// Top-2 principal components of the centered rows; the sign of each component
// makes its largest-magnitude coordinate positive. Rank-deficient directions
// project to zero.
std::vector<std::array<double, 2>> pca_project_2d(const DenseMatrix& points);

struct ProjectionRow {
    double x = 0.0;
    double y = 0.0;
    int true_label = 0;
    int pseudo_label = 0;
    int window = 0;
};

std::vector<ProjectionRow> export_projection(const DenseMatrix& embeddings,
                                             const std::vector<int>& labels,
                                             const std::vector<int>& pseudo_labels, int window);

void write_projection_csv_header(std::ostream& out);
void write_projection_csv_rows(std::ostream& out, const std::vector<ProjectionRow>& rows);

}  // namespace cilf
