#pragma once

#include <cstddef>
#include <optional>

// Data-parallel kernels behind the energy-flow analytics. Each entry has a
// scalar reference and an AVX2 variant producing bit-identical results; the
// dispatching wrappers pick AVX2 when the CPU supports it.
namespace lddl::kernels {

enum class Isa { scalar, avx2 };

/// Best ISA available on this CPU, unless overridden by force_isa.
Isa active_isa() noexcept;
bool isa_available(Isa isa) noexcept;
/// Pins dispatch to `isa` (falls back to scalar if unavailable); nullopt
/// restores auto-detection.
void force_isa(std::optional<Isa> isa) noexcept;
const char* to_string(Isa isa) noexcept;

// el[k] = (half_m*dw[k])*dw[k];  eld[k] = (half_m*|dw[k]|)*dw[k]
void local_energy(double half_m, const double* dw, double* el, double* eld,
                  std::size_t n);

// d = ti[k]-tj[k];  ec[k] += (half_b*d)*d;  ecd[k] += (half_b*|d|)*d
void coupling_accumulate(double half_b, const double* ti, const double* tj,
                         double* ec, double* ecd, std::size_t n);

// out[k] = sum_{j=k-window+1..k} (a[j] + w*b[j]) summed in increasing j,
// and 0 for k < window-1. Requires window >= 1.
void window_sum(const double* a, const double* b, double w, std::size_t window,
                double* out, std::size_t n);

namespace scalar {
void local_energy(double, const double*, double*, double*, std::size_t);
void coupling_accumulate(double, const double*, const double*, double*,
                         double*, std::size_t);
void window_sum(const double*, const double*, double, std::size_t, double*,
                std::size_t);
}  // namespace scalar

namespace avx2 {
void local_energy(double, const double*, double*, double*, std::size_t);
void coupling_accumulate(double, const double*, const double*, double*,
                         double*, std::size_t);
void window_sum(const double*, const double*, double, std::size_t, double*,
                std::size_t);
}  // namespace avx2

}  // namespace lddl::kernels
