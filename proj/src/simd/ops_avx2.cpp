// AVX2+FMA variants of the dispatch kernels. Compiled with -mavx2 -mfma in
// its own translation unit; ops.cpp only calls in here after a runtime
// CPU check.

#include "pmsim/simd/ops.hpp"

#include <cmath>
#include <cstdint>
#include <immintrin.h>

namespace pmsim::simd::avx2 {

namespace {

// exp: Cephes-style rational approximation after range reduction
// x = n*ln2 + r, |r| <= ln2/2. Accuracy ~2 ulp over the full range.

constexpr double kLog2E = 1.4426950408889634073599;
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;
constexpr double kExpMax = 709.437;
constexpr double kExpMin = -708.39641853226408;

constexpr double kExpP[3] = {1.26177193074810590878e-4,
                             3.02994407707441961300e-2,
                             9.99999999999999999910e-1};
constexpr double kExpQ[4] = {3.00198505138664455042e-6,
                             2.52448340349684104192e-3,
                             2.27265548208155028766e-1,
                             2.00000000000000000005e0};

inline __m256d exp4d(__m256d x) {
  const __m256d in = x;
  x = _mm256_min_pd(x, _mm256_set1_pd(kExpMax));
  x = _mm256_max_pd(x, _mm256_set1_pd(kExpMin));

  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2E)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Hi), x);
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(kExpP[0]);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(kExpP[1]));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(kExpP[2]));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(kExpQ[0]);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(kExpQ[1]));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(kExpQ[2]));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(kExpQ[3]));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  // scale by 2^n via exponent-field arithmetic; n is in [-1022, 1024]
  __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(n64));

  // saturate out-of-range inputs and pass NaN through
  const __m256d under =
      _mm256_cmp_pd(in, _mm256_set1_pd(kExpMin), _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(in, _mm256_set1_pd(kExpMax), _CMP_GT_OQ);
  const __m256d nan = _mm256_cmp_pd(in, in, _CMP_UNORD_Q);
  r = _mm256_andnot_pd(under, r);
  r = _mm256_blendv_pd(r, _mm256_set1_pd(HUGE_VAL), over);
  r = _mm256_blendv_pd(r, in, nan);
  return r;
}

// sin: octant reduction with a 3-term Cody-Waite split of pi/4, then the
// Cephes sin/cos polynomials on |z| <= pi/4, blended per lane.

constexpr double kDp1 = 7.85398125648498535156e-1;
constexpr double kDp2 = 3.77489470793079817668e-8;
constexpr double kDp3 = 2.69515142907905952645e-15;
constexpr double kFourOverPi = 1.27323954473516268615;
// beyond this the int32 octant index would overflow; fall back to libm
constexpr double kSinRangeLimit = 1.0e9;

constexpr double kSinCof[6] = {1.58962301576546568060e-10,
                               -2.50507477628578072866e-8,
                               2.75573136213857245213e-6,
                               -1.98412698295895385996e-4,
                               8.33333333332211858878e-3,
                               -1.66666666666666307295e-1};
constexpr double kCosCof[6] = {-1.13585365213876817300e-11,
                               2.08757008419747316778e-9,
                               -2.75573141792967388112e-7,
                               2.48015872888517179954e-5,
                               -1.38888888888730564116e-3,
                               4.16666666666665929218e-2};

inline __m256d poly6(__m256d z, const double* c) {
  __m256d p = _mm256_set1_pd(c[0]);
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(c[1]));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(c[2]));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(c[3]));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(c[4]));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(c[5]));
  return p;
}

inline __m256d sin4d(__m256d x) {
  const __m256d sign_bit = _mm256_set1_pd(-0.0);
  __m256d sign = _mm256_and_pd(x, sign_bit);
  __m256d ax = _mm256_andnot_pd(sign_bit, x);

  __m256d y = _mm256_floor_pd(_mm256_mul_pd(ax, _mm256_set1_pd(kFourOverPi)));
  __m128i j32 = _mm256_cvtpd_epi32(y);
  __m256i j = _mm256_cvtepi32_epi64(j32);

  // if octant index is odd, bump to the next even octant
  const __m256i one = _mm256_set1_epi64x(1);
  __m256i odd = _mm256_and_si256(j, one);
  __m256d oddmask =
      _mm256_castsi256_pd(_mm256_cmpeq_epi64(odd, one));
  j = _mm256_add_epi64(j, odd);
  y = _mm256_add_pd(y, _mm256_and_pd(oddmask, _mm256_set1_pd(1.0)));

  j = _mm256_and_si256(j, _mm256_set1_epi64x(7));
  const __m256i gt3 = _mm256_cmpgt_epi64(j, _mm256_set1_epi64x(3));
  j = _mm256_sub_epi64(j, _mm256_and_si256(gt3, _mm256_set1_epi64x(4)));
  sign = _mm256_xor_pd(
      sign, _mm256_and_pd(_mm256_castsi256_pd(gt3), sign_bit));

  __m256d z = _mm256_fnmadd_pd(y, _mm256_set1_pd(kDp1), ax);
  z = _mm256_fnmadd_pd(y, _mm256_set1_pd(kDp2), z);
  z = _mm256_fnmadd_pd(y, _mm256_set1_pd(kDp3), z);
  const __m256d zz = _mm256_mul_pd(z, z);

  // cos branch: 1 - zz/2 + zz^2*P(zz); sin branch: z + z*zz*P(zz)
  __m256d yc = _mm256_mul_pd(_mm256_mul_pd(zz, zz), poly6(zz, kCosCof));
  yc = _mm256_add_pd(yc, _mm256_fnmadd_pd(zz, _mm256_set1_pd(0.5),
                                          _mm256_set1_pd(1.0)));
  __m256d ys = _mm256_fmadd_pd(_mm256_mul_pd(z, zz), poly6(zz, kSinCof), z);

  const __m256i jm1 = _mm256_cmpeq_epi64(j, one);
  const __m256i jm2 = _mm256_cmpeq_epi64(j, _mm256_set1_epi64x(2));
  const __m256d cos_sel = _mm256_castsi256_pd(_mm256_or_si256(jm1, jm2));
  __m256d r = _mm256_blendv_pd(ys, yc, cos_sel);
  return _mm256_xor_pd(r, sign);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_hadd_pd(lo, lo));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8),
                           _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12),
                           _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1),
                                  _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void vexp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, exp4d(_mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

void vsin(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(out + i, sin4d(v));
    // rare huge arguments: octant index washes out of int32 range
    for (int k = 0; k < 4; ++k) {
      if (std::abs(x[i + k]) > kSinRangeLimit) out[i + k] = std::sin(x[i + k]);
    }
  }
  for (; i < n; ++i) out[i] = std::sin(x[i]);
}

void kernel_row(const double* xs, const double* ys, std::size_t n, double qx,
                double qy, const KernelRowParams& p, double* out) {
  const __m256d vqx = _mm256_set1_pd(qx);
  const __m256d vqy = _mm256_set1_pd(qy);
  const __m256d irx = _mm256_set1_pd(p.inv_rbf_x);
  const __m256d iry = _mm256_set1_pd(p.inv_rbf_y);
  const __m256d tpx = _mm256_set1_pd(p.two_inv_per_x);
  const __m256d tpy = _mm256_set1_pd(p.two_inv_per_y);
  const __m256d pip = _mm256_set1_pd(p.pi_over_period);
  const __m256d sv = _mm256_set1_pd(p.signal_var);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(vqx, _mm256_loadu_pd(xs + i));
    const __m256d dy = _mm256_sub_pd(vqy, _mm256_loadu_pd(ys + i));
    __m256d arg = _mm256_mul_pd(_mm256_mul_pd(dx, dx), irx);
    arg = _mm256_fmadd_pd(_mm256_mul_pd(dy, dy), iry, arg);
    const __m256d sx = sin4d(_mm256_mul_pd(pip, dx));
    const __m256d sy = sin4d(_mm256_mul_pd(pip, dy));
    arg = _mm256_fmadd_pd(_mm256_mul_pd(sx, sx), tpx, arg);
    arg = _mm256_fmadd_pd(_mm256_mul_pd(sy, sy), tpy, arg);
    const __m256d k =
        _mm256_mul_pd(sv, exp4d(_mm256_sub_pd(_mm256_setzero_pd(), arg)));
    _mm256_storeu_pd(out + i, k);
  }
  if (i < n) {
    scalar::kernel_row(xs + i, ys + i, n - i, qx, qy, p, out + i);
  }
}

void windowed_mean(const double* x, std::size_t n, std::size_t window,
                   double* out) {
  const double inv = 1.0 / static_cast<double>(window);
  for (std::size_t i = 0; i + window <= n; ++i) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= window; k += 4) {
      acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i + k));
    }
    double s = hsum(acc);
    for (; k < window; ++k) s += x[i + k];
    out[i] = s * inv;
  }
}

}  // namespace pmsim::simd::avx2
