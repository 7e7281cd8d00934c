#pragma once

#include <cstddef>

namespace pmsim::simd {

// Data-parallel inner loops used by the GP predictor and the MA filter.
// Every operation has a scalar reference implementation and, on x86-64
// hardware with AVX2+FMA, a vectorized variant. The active variant is
// selected once at runtime; the PMSIM_SIMD environment variable
// ("scalar" or "avx2") or force_isa() overrides the automatic choice.

enum class Isa { scalar, avx2 };

/// Instruction set the dispatch table currently points at.
Isa active_isa();

/// Name of the active instruction set ("scalar" / "avx2").
const char* active_isa_name();

/// True when the running CPU supports the AVX2+FMA variants.
bool cpu_supports_avx2();

/// Override dispatch (tests use this to compare variants). Throws
/// ConfigError when the requested ISA is unavailable on this CPU.
void force_isa(Isa isa);

double dot(const double* a, const double* b, std::size_t n);

void vexp(const double* x, double* out, std::size_t n);

void vsin(const double* x, double* out, std::size_t n);

// Composite RBF x periodic covariance, precomputed as inverse denominators:
//   k(q, w_i) = signal_var * exp(-(dx^2*inv_rbf_x + dy^2*inv_rbf_y
//               + two_inv_per_x*sin^2(pi_over_period*dx)
//               + two_inv_per_y*sin^2(pi_over_period*dy)))
// with dx = qx - xs[i], dy = qy - ys[i].
struct KernelRowParams {
  double signal_var = 1.0;
  double inv_rbf_x = 0.0;
  double inv_rbf_y = 0.0;
  double two_inv_per_x = 0.0;
  double two_inv_per_y = 0.0;
  double pi_over_period = 0.0;
};

void kernel_row(const double* xs, const double* ys, std::size_t n, double qx,
                double qy, const KernelRowParams& p, double* out);

/// out[i] = mean(x[i .. i+window-1]) for i in [0, n-window]; out has
/// n-window+1 entries. Direct per-window summation (no running-sum drift).
void windowed_mean(const double* x, std::size_t n, std::size_t window,
                   double* out);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void vexp(const double* x, double* out, std::size_t n);
void vsin(const double* x, double* out, std::size_t n);
void kernel_row(const double* xs, const double* ys, std::size_t n, double qx,
                double qy, const KernelRowParams& p, double* out);
void windowed_mean(const double* x, std::size_t n, std::size_t window,
                   double* out);
}  // namespace scalar

}  // namespace pmsim::simd
