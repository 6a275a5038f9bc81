#include <cmath>
#include <vector>

#include "lddl/kernels.hpp"

namespace lddl::kernels::scalar {

void local_energy(double half_m, const double* dw, double* el, double* eld,
                  std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    el[k] = (half_m * dw[k]) * dw[k];
    eld[k] = (half_m * std::abs(dw[k])) * dw[k];
  }
}

void coupling_accumulate(double half_b, const double* ti, const double* tj,
                         double* ec, double* ecd, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double d = ti[k] - tj[k];
    ec[k] += (half_b * d) * d;
    ecd[k] += (half_b * std::abs(d)) * d;
  }
}

void window_sum(const double* a, const double* b, double w, std::size_t window,
                double* out, std::size_t n) {
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) c[j] = a[j] + w * b[j];
  for (std::size_t k = 0; k < n; ++k) {
    if (k + 1 < window) {
      out[k] = 0.0;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = k + 1 - window; j <= k; ++j) s += c[j];
    out[k] = s;
  }
}

}  // namespace lddl::kernels::scalar
