// AVX2 kernel variants. Compiled with -mavx2 only (no -mfma): every lane does
// the same mul-then-add the scalar kernels do, in the same order, so results
// are bit-identical to the scalar backend.

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "rftlab/kernels.hpp"

namespace rftlab::kernels::avx2 {

void matmul(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
            std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    double* c_row = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const __m256d av = _mm256_set1_pd(a_row[l]);
      const double* b_row = b + l * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(c_row + j);
        __m256d bv = _mm256_loadu_pd(b_row + j);
        cv = _mm256_add_pd(cv, _mm256_mul_pd(av, bv));
        _mm256_storeu_pd(c_row + j, cv);
      }
      const double as = a_row[l];
      for (; j < n; ++j) c_row[j] += as * b_row[j];
    }
  }
}

void add_rowwise(double* y, const double* x, const double* b, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* x_row = x + i * cols;
    double* y_row = y + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      __m256d xv = _mm256_loadu_pd(x_row + j);
      __m256d bv = _mm256_loadu_pd(b + j);
      _mm256_storeu_pd(y_row + j, _mm256_add_pd(xv, bv));
    }
    for (; j < cols; ++j) y_row[j] = x_row[j] + b[j];
  }
}

void col_sum(double* dst, const double* x, std::size_t rows, std::size_t cols) {
  std::memset(dst, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) {
    const double* x_row = x + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      __m256d dv = _mm256_loadu_pd(dst + j);
      __m256d xv = _mm256_loadu_pd(x_row + j);
      _mm256_storeu_pd(dst + j, _mm256_add_pd(dv, xv));
    }
    for (; j < cols; ++j) dst[j] += x_row[j];
  }
}

void relu(double* y, const double* x, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(double* dx, const double* x, const double* dy, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d gated = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gated));
  }
  for (; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

void add(double* y, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void sign_scale_add(double* y, const double* x, const double* g, double eps, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ev = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d gv = _mm256_loadu_pd(g + i);
    __m256d pos = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_GT_OQ), one);
    __m256d neg = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_LT_OQ), one);
    __m256d sign = _mm256_sub_pd(pos, neg);
    __m256d out = _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(ev, sign));
    _mm256_storeu_pd(y + i, out);
  }
  for (; i < n; ++i) {
    const double s = (g[i] > 0.0 ? 1.0 : 0.0) - (g[i] < 0.0 ? 1.0 : 0.0);
    y[i] = x[i] + eps * s;
  }
}

void clip_linf_box(double* y, const double* ref, double eps, std::size_t n) {
  const __m256d ev = _mm256_set1_pd(eps);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d rv = _mm256_loadu_pd(ref + i);
    __m256d lo = _mm256_sub_pd(rv, ev);
    __m256d hi = _mm256_add_pd(rv, ev);
    __m256d v = _mm256_loadu_pd(y + i);
    v = _mm256_max_pd(v, lo);
    v = _mm256_min_pd(v, hi);
    v = _mm256_max_pd(v, zero);
    v = _mm256_min_pd(v, one);
    _mm256_storeu_pd(y + i, v);
  }
  for (; i < n; ++i) {
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
  const __m256d mv = _mm256_set1_pd(momentum);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d wdv = _mm256_set1_pd(weight_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vv = _mm256_loadu_pd(vel + i);
    vv = _mm256_add_pd(_mm256_mul_pd(mv, vv), _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(vel + i, vv);
    __m256d pv = _mm256_loadu_pd(p + i);
    __m256d step = _mm256_add_pd(vv, _mm256_mul_pd(wdv, pv));
    pv = _mm256_sub_pd(pv, _mm256_mul_pd(lrv, step));
    _mm256_storeu_pd(p + i, pv);
  }
  for (; i < n; ++i) {
    vel[i] = momentum * vel[i] + g[i];
    p[i] = p[i] - lr * (vel[i] + weight_decay * p[i]);
  }
}

void adamw_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay, double bias_c1,
                  double bias_c2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d c1 = _mm256_set1_pd(bias_c1);
  const __m256d c2 = _mm256_set1_pd(bias_c2);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d wdv = _mm256_set1_pd(weight_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(ob1, gv));
    _mm256_storeu_pd(m + i, mv);
    __m256d vv = _mm256_loadu_pd(v + i);
    vv = _mm256_add_pd(_mm256_mul_pd(b2, vv), _mm256_mul_pd(ob2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(v + i, vv);
    __m256d m_hat = _mm256_div_pd(mv, c1);
    __m256d v_hat = _mm256_div_pd(vv, c2);
    __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), epsv);
    __m256d pv = _mm256_loadu_pd(p + i);
    __m256d step = _mm256_add_pd(_mm256_div_pd(m_hat, denom), _mm256_mul_pd(wdv, pv));
    pv = _mm256_sub_pd(pv, _mm256_mul_pd(lrv, step));
    _mm256_storeu_pd(p + i, pv);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double m_hat = m[i] / bias_c1;
    const double v_hat = v[i] / bias_c2;
    p[i] = p[i] - lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * p[i]);
  }
}

}  // namespace rftlab::kernels::avx2
