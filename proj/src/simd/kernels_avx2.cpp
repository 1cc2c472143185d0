// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "rsim/kernels.hpp"

namespace rsim::kernels {
namespace {

// exp(x) on 4 lanes: x = n*ln2 + r with |r| <= ln2/2, degree-12 Taylor in r
// (truncation below 2e-16 relative), then scaling by 2^n through the
// exponent bits. Lanes below -708 flush to zero; NaN propagates.
inline __m256d exp4(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d xc = _mm256_max_pd(_mm256_min_pd(x, hi), lo);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), xc);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

  __m256d p = _mm256_set1_pd(1.0 / 479001600.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // n + 1.5*2^52 puts n in the low mantissa bits.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                      _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_add_epi64(_mm256_slli_epi64(ni, 52), _mm256_set1_epi64x(0x3ff0000000000000LL));
  __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  result = _mm256_andnot_pd(underflow, result);
  return _mm256_blendv_pd(result, x, nan);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

inline __m256i tail_mask(std::size_t rem) {
  alignas(32) static const long long table[8] = {-1, -1, -1, -1, 0, 0, 0, 0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 4 - rem));
}

void utilities_avx2(const double* x, const double* z, const double* wlog, const double* w, std::size_t n,
                    double bx, double bz, double bw, double log_coupon, double* out) {
  const __m256d vbx = _mm256_set1_pd(bx);
  const __m256d vbz = _mm256_set1_pd(bz);
  const __m256d vbw = _mm256_set1_pd(bw);
  const __m256d vlc = _mm256_set1_pd(log_coupon);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d price = _mm256_fmadd_pd(vlc, _mm256_loadu_pd(w + i), _mm256_loadu_pd(wlog + i));
    __m256d acc = _mm256_mul_pd(vbw, price);
    acc = _mm256_fmadd_pd(vbz, _mm256_loadu_pd(z + i), acc);
    acc = _mm256_fmadd_pd(vbx, _mm256_loadu_pd(x + i), acc);
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) out[i] = bx * x[i] + bz * z[i] + bw * (wlog[i] + log_coupon * w[i]);
}

double logsumexp_avx2(const double* x, std::size_t n) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (n == 0) return ninf;
  const std::size_t full = n & ~std::size_t{3};
  const std::size_t rem = n - full;
  const __m256d vninf = _mm256_set1_pd(ninf);

  __m256d vmax = vninf;
  for (std::size_t i = 0; i < full; i += 4) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(x + i));
  __m256d tail = vninf;
  __m256i mask{};
  if (rem != 0) {
    mask = tail_mask(rem);
    tail = _mm256_blendv_pd(vninf, _mm256_maskload_pd(x + full, mask), _mm256_castsi256_pd(mask));
    vmax = _mm256_max_pd(vmax, tail);
  }
  const double m = hmax(vmax);
  if (!std::isfinite(m)) return m;

  const __m256d vm = _mm256_set1_pd(m);
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < full; i += 4) acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), vm)));
  if (rem != 0) acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(tail, vm)));
  return m + std::log(hsum(acc));
}

void segment_logsumexp_avx2(const double* x, const std::uint32_t* offsets, std::size_t n_segments,
                            double* out) {
  for (std::size_t s = 0; s < n_segments; ++s)
    out[s] = logsumexp_avx2(x + offsets[s], offsets[s + 1] - offsets[s]);
}

void exp_shifted_avx2(const double* x, std::size_t n, double shift, double* out) {
  const __m256d vs = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), vs)));
  if (i < n) {
    const __m256i mask = tail_mask(n - i);
    const __m256d v = exp4(_mm256_sub_pd(_mm256_maskload_pd(x + i, mask), vs));
    _mm256_maskstore_pd(out + i, mask, v);
  }
}

}  // namespace

const KernelTable& avx2_table_impl() noexcept {
  static const KernelTable table{"avx2", utilities_avx2, logsumexp_avx2, segment_logsumexp_avx2,
                                 exp_shifted_avx2};
  return table;
}

}  // namespace rsim::kernels
