#include "radlab/mat.hpp"

namespace radlab {

void matmul_bias(const Mat& x, const double* w, const double* bias, int m, int n, Mat& out) {
  out.resize(x.rows, n);
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    if (bias) {
      for (int j = 0; j < n; ++j) oi[j] = bias[j];
    }
    for (int k = 0; k < m; ++k) {
      const double xv = xi[k];
      const double* wk = w + static_cast<size_t>(k) * n;
      for (int j = 0; j < n; ++j) oi[j] += xv * wk[j];
    }
  }
}

void accum_xt_dy(const Mat& x, const Mat& dy, double* dw, double* db) {
  const int m = x.cols;
  const int n = dy.cols;
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    const double* di = dy.row(i);
    for (int k = 0; k < m; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      double* dwk = dw + static_cast<size_t>(k) * n;
      for (int j = 0; j < n; ++j) dwk[j] += xv * di[j];
    }
    if (db) {
      for (int j = 0; j < n; ++j) db[j] += di[j];
    }
  }
}

void accum_dy_wt(const Mat& dy, const double* w, int m, int n, Mat& dx) {
  // walk w row-wise: dx[i][k] += sum_j dy[i][j] * w[k][j] needs w transposed,
  // so accumulate k-major with stride-1 reads of both dy and w rows
  for (int i = 0; i < dy.rows; ++i) {
    const double* di = dy.row(i);
    double* xi = dx.row(i);
    for (int k = 0; k < m; ++k) {
      const double* wk = w + static_cast<size_t>(k) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += di[j] * wk[j];
      xi[k] += acc;
    }
  }
}

}  // namespace radlab
