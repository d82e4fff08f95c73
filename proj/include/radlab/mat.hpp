#pragma once

#include <cstddef>
#include <vector>

namespace radlab {

// Row-major dense matrix of doubles, sized once and reused.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  void resize(int r, int c) {
    rows = r;
    cols = c;
    v.assign(static_cast<size_t>(r) * c, 0.0);
  }
  double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
};

// out(r x n) = x(r x m) * w(m x n) + optional bias(n), bias broadcast per row.
void matmul_bias(const Mat& x, const double* w, const double* bias, int m, int n, Mat& out);

// Accumulating transposed products used by backward passes:
// dw(m x n) += x^T(m x r) * dy(r x n); db(n) += column sums of dy.
void accum_xt_dy(const Mat& x, const Mat& dy, double* dw, double* db);
// dx(r x m) += dy(r x n) * w^T(n x m)
void accum_dy_wt(const Mat& dy, const double* w, int m, int n, Mat& dx);

}  // namespace radlab
