#include <cmath>

#include "ifx/kernels.hpp"

namespace ifx::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_rs,
                 std::size_t a_cs, const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * a_rs + p * a_cs] * b[p * n + j];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

void adamw_scalar(double* param, const double* grad, double* m, double* v, std::size_t n,
                  double lr, double beta1, double beta2, double bias1, double bias2, double eps,
                  double decay) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    param[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + decay * param[i]);
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table table{dot_scalar, axpy_scalar, scale_scalar, sum_squares_scalar,
                           gemm_scalar, adamw_scalar};
  return table;
}

}  // namespace ifx::kernels
