#include <immintrin.h>

#include <vector>

#include "lddl/kernels.hpp"

namespace lddl::kernels::avx2 {

namespace {

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

}  // namespace

void local_energy(double half_m, const double* dw, double* el, double* eld,
                  std::size_t n) {
  const __m256d hm = _mm256_set1_pd(half_m);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d d = _mm256_loadu_pd(dw + k);
    _mm256_storeu_pd(el + k, _mm256_mul_pd(_mm256_mul_pd(hm, d), d));
    _mm256_storeu_pd(eld + k, _mm256_mul_pd(_mm256_mul_pd(hm, abs_pd(d)), d));
  }
  scalar::local_energy(half_m, dw + k, el + k, eld + k, n - k);
}

void coupling_accumulate(double half_b, const double* ti, const double* tj,
                         double* ec, double* ecd, std::size_t n) {
  const __m256d hb = _mm256_set1_pd(half_b);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(ti + k), _mm256_loadu_pd(tj + k));
    const __m256d e = _mm256_mul_pd(_mm256_mul_pd(hb, d), d);
    const __m256d ed = _mm256_mul_pd(_mm256_mul_pd(hb, abs_pd(d)), d);
    _mm256_storeu_pd(ec + k, _mm256_add_pd(_mm256_loadu_pd(ec + k), e));
    _mm256_storeu_pd(ecd + k, _mm256_add_pd(_mm256_loadu_pd(ecd + k), ed));
  }
  scalar::coupling_accumulate(half_b, ti + k, tj + k, ec + k, ecd + k, n - k);
}

void window_sum(const double* a, const double* b, double w, std::size_t window,
                double* out, std::size_t n) {
  std::vector<double> c(n);
  const __m256d wv = _mm256_set1_pd(w);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d prod = _mm256_mul_pd(wv, _mm256_loadu_pd(b + j));
    _mm256_storeu_pd(c.data() + j, _mm256_add_pd(_mm256_loadu_pd(a + j), prod));
  }
  for (; j < n; ++j) c[j] = a[j] + w * b[j];

  std::size_t k = 0;
  for (; k < n && k + 1 < window; ++k) out[k] = 0.0;
  // Four consecutive outputs per vector; each lane sums its own window in
  // the same order as the scalar loop.
  for (; k + 4 <= n; k += 4) {
    const double* base = c.data() + (k + 1 - window);
    __m256d s = _mm256_setzero_pd();
    for (std::size_t i = 0; i < window; ++i) {
      s = _mm256_add_pd(s, _mm256_loadu_pd(base + i));
    }
    _mm256_storeu_pd(out + k, s);
  }
  for (; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = k + 1 - window; i <= k; ++i) s += c[i];
    out[k] = s;
  }
}

}  // namespace lddl::kernels::avx2
