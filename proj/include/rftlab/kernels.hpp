#pragma once

#include <cstddef>

// Arithmetic inner loops used by the tensor ops, the attacks, and the
// optimizers. Every kernel has a scalar reference implementation and, on
// x86-64, an AVX2 variant selected at runtime. The AVX2 variants keep the
// scalar accumulation order and use no FMA, so both backends produce
// bit-identical results; the equivalence tests assert exact equality.
//
// Reduction-heavy ops (softmax, log-sum-exp) stay scalar on purpose: lane
// splitting would change the summation order and break bit equality.

namespace rftlab::kernels {

enum class Backend { Scalar, Avx2 };

/// True when the running CPU can execute the AVX2 variants.
bool avx2_available();

/// Backend used by the dispatching entry points below. Defaults to the best
/// available; the RFTLAB_SIMD env var ("scalar" / "avx2") overrides.
Backend active_backend();
void set_backend(Backend b);
const char* backend_name(Backend b);

// --------------------------------------------------------------------------
// Dispatching entry points
// --------------------------------------------------------------------------

/// c[m*n] = a[m*k] * b[k*n], row major; c is overwritten.
void matmul(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
            std::size_t n);

/// y[r*cols] = x[r*cols] + b[cols] broadcast over rows.
void add_rowwise(double* y, const double* x, const double* b, std::size_t rows, std::size_t cols);

/// dst[j] = sum over rows of x[i*cols + j], accumulated in row order.
void col_sum(double* dst, const double* x, std::size_t rows, std::size_t cols);

void relu(double* y, const double* x, std::size_t n);

/// dx[i] += dy[i] where x[i] > 0 (adds 0.0 otherwise; subgradient at 0 is 0).
void relu_backward(double* dx, const double* x, const double* dy, std::size_t n);

void add(double* y, const double* a, const double* b, std::size_t n);

/// y += alpha * x
void axpy(double* y, double alpha, const double* x, std::size_t n);

/// y[i] = x[i] + eps * sign(g[i]) with sign(0) = 0.
void sign_scale_add(double* y, const double* x, const double* g, double eps, std::size_t n);

/// y[i] clamped into [ref[i]-eps, ref[i]+eps] and then into [0, 1].
void clip_linf_box(double* y, const double* ref, double eps, std::size_t n);

/// SGD with classical momentum and decoupled weight decay:
///   vel = momentum*vel + g;  p -= lr*(vel + wd*p)
void sgd_momentum_update(double* p, double* vel, const double* g, std::size_t n, double lr,
                         double momentum, double weight_decay);

/// AdamW step. bias_c1/bias_c2 are the (1 - beta^t) corrections, computed by
/// the caller once per step:
///   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
///   p -= lr*((m/bias_c1) / (sqrt(v/bias_c2) + eps) + wd*p)
void adamw_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay, double bias_c1,
                  double bias_c2);

// --------------------------------------------------------------------------
// Backend-pinned variants (exposed for the equivalence tests)
// --------------------------------------------------------------------------

namespace scalar {
void matmul(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
            std::size_t n);
void add_rowwise(double* y, const double* x, const double* b, std::size_t rows, std::size_t cols);
void col_sum(double* dst, const double* x, std::size_t rows, std::size_t cols);
void relu(double* y, const double* x, std::size_t n);
void relu_backward(double* dx, const double* x, const double* dy, std::size_t n);
void add(double* y, const double* a, const double* b, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);
void sign_scale_add(double* y, const double* x, const double* g, double eps, std::size_t n);
void clip_linf_box(double* y, const double* ref, double eps, std::size_t n);
void sgd_momentum_update(double* p, double* vel, const double* g, std::size_t n, double lr,
                         double momentum, double weight_decay);
void adamw_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay, double bias_c1,
                  double bias_c2);
}  // namespace scalar

#if defined(RFTLAB_HAVE_AVX2_TU)
namespace avx2 {
void matmul(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
            std::size_t n);
void add_rowwise(double* y, const double* x, const double* b, std::size_t rows, std::size_t cols);
void col_sum(double* dst, const double* x, std::size_t rows, std::size_t cols);
void relu(double* y, const double* x, std::size_t n);
void relu_backward(double* dx, const double* x, const double* dy, std::size_t n);
void add(double* y, const double* a, const double* b, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);
void sign_scale_add(double* y, const double* x, const double* g, double eps, std::size_t n);
void clip_linf_box(double* y, const double* ref, double eps, std::size_t n);
void sgd_momentum_update(double* p, double* vel, const double* g, std::size_t n, double lr,
                         double momentum, double weight_decay);
void adamw_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay, double bias_c1,
                  double bias_c2);
}  // namespace avx2
#endif

}  // namespace rftlab::kernels
