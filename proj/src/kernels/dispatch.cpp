#include <atomic>

#include "lddl/kernels.hpp"

namespace lddl::kernels {

namespace {

// -1: auto, otherwise a forced Isa value.
std::atomic<int> forced{-1};

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  static const bool has = __builtin_cpu_supports("avx2");
  return has;
#else
  return false;
#endif
}

}  // namespace

bool isa_available(Isa isa) noexcept {
  return isa == Isa::scalar || cpu_has_avx2();
}

Isa active_isa() noexcept {
  const int f = forced.load(std::memory_order_relaxed);
  if (f >= 0) {
    const auto isa = static_cast<Isa>(f);
    return isa_available(isa) ? isa : Isa::scalar;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

void force_isa(std::optional<Isa> isa) noexcept {
  forced.store(isa ? static_cast<int>(*isa) : -1, std::memory_order_relaxed);
}

const char* to_string(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

void local_energy(double half_m, const double* dw, double* el, double* eld,
                  std::size_t n) {
  if (active_isa() == Isa::avx2) {
    avx2::local_energy(half_m, dw, el, eld, n);
  } else {
    scalar::local_energy(half_m, dw, el, eld, n);
  }
}

void coupling_accumulate(double half_b, const double* ti, const double* tj,
                         double* ec, double* ecd, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    avx2::coupling_accumulate(half_b, ti, tj, ec, ecd, n);
  } else {
    scalar::coupling_accumulate(half_b, ti, tj, ec, ecd, n);
  }
}

void window_sum(const double* a, const double* b, double w, std::size_t window,
                double* out, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    avx2::window_sum(a, b, w, window, out, n);
  } else {
    scalar::window_sum(a, b, w, window, out, n);
  }
}

}  // namespace lddl::kernels
