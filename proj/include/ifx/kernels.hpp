#pragma once

// Dense double-precision inner loops used by the encoder, trainer and probe.
//
// Every kernel has a portable scalar reference and an AVX2+FMA variant. The
// active variant is chosen once at startup from the CPU's capabilities and can
// be pinned with the IFX_KERNELS environment variable ("scalar" or "avx2") or
// with set_backend(). Both variants compute the same quantities; the vector
// variants reassociate sums and fuse multiply-adds, so results agree to
// rounding, not bit-for-bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace ifx::kernels {

enum class Backend { scalar, avx2 };

struct Table {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  // C[m x n] (+)= A[m x k] * B[k x n]. B and C are row-major and contiguous;
  // A is addressed as A[i * a_row_stride + p * a_col_stride], which covers
  // both A and A^T operands.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t a_row_stride, std::size_t a_col_stride, const double* b, double* c,
               bool accumulate);
  // One AdamW moment/parameter update over a contiguous block; see adamw_step.
  void (*adamw)(double* param, const double* grad, double* m, double* v, std::size_t n,
                double lr, double beta1, double beta2, double bias1, double bias2,
                double eps, double decay);
};

const Table& scalar_table();
// Null when the binary was built without x86 vector support.
const Table* avx2_table();

bool backend_available(Backend b);
Backend active_backend();
void set_backend(Backend b);
std::string_view backend_name(Backend b);

const Table& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }
inline double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

// Row-major helpers built on dot/axpy.
//   out[r, :] (+)= in[r, :] * w   where w is (in_dim x out_dim)
void matmul(const double* in, std::size_t rows, std::size_t in_dim, const double* w,
            std::size_t out_dim, double* out, bool accumulate = false);
//   out[r, :] (+)= in[r, :] * w^T where w is (out_dim x in_dim)
void matmul_transposed(const double* in, std::size_t rows, std::size_t in_dim, const double* w,
                       std::size_t out_dim, double* out, bool accumulate = false);
//   dw += a^T * b   with a (rows x a_dim), b (rows x b_dim), dw (a_dim x b_dim)
void outer_accumulate(const double* a, std::size_t rows, std::size_t a_dim, const double* b,
                      std::size_t b_dim, double* dw);

// Scoped override for tests that compare variants.
class BackendGuard {
 public:
  explicit BackendGuard(Backend b) : saved_(active_backend()) { set_backend(b); }
  ~BackendGuard() { set_backend(saved_); }
  BackendGuard(const BackendGuard&) = delete;
  BackendGuard& operator=(const BackendGuard&) = delete;

 private:
  Backend saved_;
};

}  // namespace ifx::kernels
