#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "ifx/kernels.hpp"

namespace ifx::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  const bool vector_ok = avx2_table() != nullptr && cpu_has_avx2();
  if (const char* env = std::getenv("IFX_KERNELS")) {
    const std::string choice(env);
    if (choice == "scalar") return Backend::scalar;
    if (choice == "avx2" && vector_ok) return Backend::avx2;
  }
  return vector_ok ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
  return avx2_table() != nullptr && cpu_has_avx2();
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::runtime_error("kernel backend not available: " + std::string(backend_name(b)));
  }
  current().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

const Table& active() {
  return active_backend() == Backend::avx2 ? *avx2_table() : scalar_table();
}

void matmul(const double* in, std::size_t rows, std::size_t in_dim, const double* w,
            std::size_t out_dim, double* out, bool accumulate) {
  active().gemm(rows, out_dim, in_dim, in, in_dim, 1, w, out, accumulate);
}

void matmul_transposed(const double* in, std::size_t rows, std::size_t in_dim, const double* w,
                       std::size_t out_dim, double* out, bool accumulate) {
  thread_local std::vector<double> wt;
  wt.resize(in_dim * out_dim);
  for (std::size_t j = 0; j < out_dim; ++j) {
    for (std::size_t i = 0; i < in_dim; ++i) wt[i * out_dim + j] = w[j * in_dim + i];
  }
  active().gemm(rows, out_dim, in_dim, in, in_dim, 1, wt.data(), out, accumulate);
}

void outer_accumulate(const double* a, std::size_t rows, std::size_t a_dim, const double* b,
                      std::size_t b_dim, double* dw) {
  active().gemm(a_dim, b_dim, rows, a, 1, a_dim, b, dw, true);
}

}  // namespace ifx::kernels
