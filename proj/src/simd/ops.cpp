#include "pmsim/simd/ops.hpp"

#include "pmsim/common.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>

#if defined(PMSIM_HAVE_AVX2_TU)
namespace pmsim::simd::avx2 {
double dot(const double* a, const double* b, std::size_t n);
void vexp(const double* x, double* out, std::size_t n);
void vsin(const double* x, double* out, std::size_t n);
void kernel_row(const double* xs, const double* ys, std::size_t n, double qx,
                double qy, const KernelRowParams& p, double* out);
void windowed_mean(const double* x, std::size_t n, std::size_t window,
                   double* out);
}  // namespace pmsim::simd::avx2
#endif

namespace pmsim::simd {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void vexp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void vsin(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(x[i]);
}

void kernel_row(const double* xs, const double* ys, std::size_t n, double qx,
                double qy, const KernelRowParams& p, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = qx - xs[i];
    const double dy = qy - ys[i];
    double arg = dx * dx * p.inv_rbf_x + dy * dy * p.inv_rbf_y;
    const double sx = std::sin(p.pi_over_period * dx);
    const double sy = std::sin(p.pi_over_period * dy);
    arg += p.two_inv_per_x * sx * sx + p.two_inv_per_y * sy * sy;
    out[i] = p.signal_var * std::exp(-arg);
  }
}

void windowed_mean(const double* x, std::size_t n, std::size_t window,
                   double* out) {
  const double inv = 1.0 / static_cast<double>(window);
  for (std::size_t i = 0; i + window <= n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < window; ++k) acc += x[i + k];
    out[i] = acc * inv;
  }
}

}  // namespace scalar

namespace {

struct Table {
  Isa isa;
  double (*dot)(const double*, const double*, std::size_t);
  void (*vexp)(const double*, double*, std::size_t);
  void (*vsin)(const double*, double*, std::size_t);
  void (*kernel_row)(const double*, const double*, std::size_t, double, double,
                     const KernelRowParams&, double*);
  void (*windowed_mean)(const double*, std::size_t, std::size_t, double*);
};

constexpr Table kScalarTable = {Isa::scalar,        &scalar::dot,
                                &scalar::vexp,      &scalar::vsin,
                                &scalar::kernel_row, &scalar::windowed_mean};

#if defined(PMSIM_HAVE_AVX2_TU)
constexpr Table kAvx2Table = {Isa::avx2,        &avx2::dot,
                              &avx2::vexp,      &avx2::vsin,
                              &avx2::kernel_row, &avx2::windowed_mean};
#endif

bool detect_avx2() {
#if defined(PMSIM_HAVE_AVX2_TU) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* g_table = nullptr;
std::once_flag g_init_flag;

void init_table() {
  const Table* chosen = &kScalarTable;
#if defined(PMSIM_HAVE_AVX2_TU)
  if (detect_avx2()) chosen = &kAvx2Table;
#endif
  if (const char* env = std::getenv("PMSIM_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) chosen = &kScalarTable;
#if defined(PMSIM_HAVE_AVX2_TU)
    if (std::strcmp(env, "avx2") == 0 && detect_avx2()) chosen = &kAvx2Table;
#endif
  }
  g_table = chosen;
}

const Table& table() {
  std::call_once(g_init_flag, init_table);
  return *g_table;
}

}  // namespace

Isa active_isa() { return table().isa; }

const char* active_isa_name() {
  return active_isa() == Isa::avx2 ? "avx2" : "scalar";
}

bool cpu_supports_avx2() { return detect_avx2(); }

void force_isa(Isa isa) {
  table();  // ensure initialized
  if (isa == Isa::scalar) {
    g_table = &kScalarTable;
    return;
  }
#if defined(PMSIM_HAVE_AVX2_TU)
  if (detect_avx2()) {
    g_table = &kAvx2Table;
    return;
  }
#endif
  throw ConfigError("simd: requested ISA not available on this CPU");
}

double dot(const double* a, const double* b, std::size_t n) {
  return table().dot(a, b, n);
}

void vexp(const double* x, double* out, std::size_t n) {
  table().vexp(x, out, n);
}

void vsin(const double* x, double* out, std::size_t n) {
  table().vsin(x, out, n);
}

void kernel_row(const double* xs, const double* ys, std::size_t n, double qx,
                double qy, const KernelRowParams& p, double* out) {
  table().kernel_row(xs, ys, n, qx, qy, p, out);
}

void windowed_mean(const double* x, std::size_t n, std::size_t window,
                   double* out) {
  table().windowed_mean(x, n, window, out);
}

}  // namespace pmsim::simd
