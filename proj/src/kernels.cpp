#include "rftlab/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace rftlab::kernels {

// ===========================================================================
// Scalar reference kernels
// ===========================================================================

namespace scalar {

void matmul(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
            std::size_t n) {
  // i-l-j order: each c[i][j] accumulates over l in ascending order, which the
  // AVX2 variant reproduces lane-for-lane.
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    double* c_row = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a_row[l];
      const double* b_row = b + l * n;
      for (std::size_t j = 0; j < n; ++j) {
        c_row[j] += av * b_row[j];
      }
    }
  }
}

void add_rowwise(double* y, const double* x, const double* b, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* x_row = x + i * cols;
    double* y_row = y + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y_row[j] = x_row[j] + b[j];
  }
}

void col_sum(double* dst, const double* x, std::size_t rows, std::size_t cols) {
  std::memset(dst, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) {
    const double* x_row = x + i * cols;
    for (std::size_t j = 0; j < cols; ++j) dst[j] += x_row[j];
  }
}

void relu(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(double* dx, const double* x, const double* dy, std::size_t n) {
  // Unconditional add of 0.0 on the inactive side keeps -0.0 handling
  // identical to the vector variant.
  for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

void add(double* y, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sign_scale_add(double* y, const double* x, const double* g, double eps, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (g[i] > 0.0 ? 1.0 : 0.0) - (g[i] < 0.0 ? 1.0 : 0.0);
    y[i] = x[i] + eps * s;
  }
}

void clip_linf_box(double* y, const double* ref, double eps, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = ref[i] - eps;
    const double hi = ref[i] + eps;
    double v = y[i];
    v = v < lo ? lo : v;
    v = v > hi ? hi : v;
    v = v < 0.0 ? 0.0 : v;
    v = v > 1.0 ? 1.0 : v;
    y[i] = v;
  }
}

void sgd_momentum_update(double* p, double* vel, const double* g, std::size_t n, double lr,
                         double momentum, double weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    vel[i] = momentum * vel[i] + g[i];
    p[i] = p[i] - lr * (vel[i] + weight_decay * p[i]);
  }
}

void adamw_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay, double bias_c1,
                  double bias_c2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double m_hat = m[i] / bias_c1;
    const double v_hat = v[i] / bias_c2;
    p[i] = p[i] - lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * p[i]);
  }
}

}  // namespace scalar

// ===========================================================================
// Runtime dispatch
// ===========================================================================

bool avx2_available() {
#if defined(RFTLAB_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("RFTLAB_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Backend::Avx2;
  }
  return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

Backend& backend_slot() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

Backend active_backend() { return backend_slot(); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_available()) b = Backend::Scalar;
  backend_slot() = b;
}

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

#if defined(RFTLAB_HAVE_AVX2_TU)
#define RFTLAB_DISPATCH(fn, ...)                     \
  if (active_backend() == Backend::Avx2) {           \
    avx2::fn(__VA_ARGS__);                           \
  } else {                                           \
    scalar::fn(__VA_ARGS__);                         \
  }
#else
#define RFTLAB_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void matmul(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
            std::size_t n) {
  RFTLAB_DISPATCH(matmul, c, a, b, m, k, n);
}

void add_rowwise(double* y, const double* x, const double* b, std::size_t rows,
                 std::size_t cols) {
  RFTLAB_DISPATCH(add_rowwise, y, x, b, rows, cols);
}

void col_sum(double* dst, const double* x, std::size_t rows, std::size_t cols) {
  RFTLAB_DISPATCH(col_sum, dst, x, rows, cols);
}

void relu(double* y, const double* x, std::size_t n) { RFTLAB_DISPATCH(relu, y, x, n); }

void relu_backward(double* dx, const double* x, const double* dy, std::size_t n) {
  RFTLAB_DISPATCH(relu_backward, dx, x, dy, n);
}

void add(double* y, const double* a, const double* b, std::size_t n) {
  RFTLAB_DISPATCH(add, y, a, b, n);
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  RFTLAB_DISPATCH(axpy, y, alpha, x, n);
}

void sign_scale_add(double* y, const double* x, const double* g, double eps, std::size_t n) {
  RFTLAB_DISPATCH(sign_scale_add, y, x, g, eps, n);
}

void clip_linf_box(double* y, const double* ref, double eps, std::size_t n) {
  RFTLAB_DISPATCH(clip_linf_box, y, ref, eps, n);
}

void sgd_momentum_update(double* p, double* vel, const double* g, std::size_t n, double lr,
                         double momentum, double weight_decay) {
  RFTLAB_DISPATCH(sgd_momentum_update, p, vel, g, n, lr, momentum, weight_decay);
}

void adamw_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay, double bias_c1,
                  double bias_c2) {
  RFTLAB_DISPATCH(adamw_update, p, m, v, g, n, lr, beta1, beta2, eps, weight_decay, bias_c1,
                  bias_c2);
}

#undef RFTLAB_DISPATCH

}  // namespace rftlab::kernels
