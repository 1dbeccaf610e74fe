// AVX2 variants. Compiled with per-function target attributes so the rest of
// the library stays baseline x86-64; only called after a runtime CPU check.

#include "ccgm/kernels.hpp"

#if defined(CCGM_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#define CCGM_AVX2 __attribute__((target("avx2,fma")))

namespace ccgm::kernels::avx2 {
namespace {

CCGM_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

CCGM_AVX2 inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

}  // namespace

CCGM_AVX2 double sum(std::span<const double> x) {
  const std::size_t n = x.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x.data() + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

CCGM_AVX2 double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
    m = _mm256_max_pd(m, _mm256_andnot_pd(sign, d));
  }
  double r = hmax(m);
  for (; i < n; ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

CCGM_AVX2 double pearson_sum(std::span<const double> obs, std::span<const double> fit) {
  const std::size_t n = obs.size();
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d f = _mm256_loadu_pd(fit.data() + i);
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(obs.data() + i), f);
    const __m256d pos = _mm256_cmp_pd(f, zero, _CMP_GT_OQ);
    // Lanes with fit <= 0 divide by 1 and are then masked out.
    const __m256d safe = _mm256_blendv_pd(_mm256_set1_pd(1.0), f, pos);
    const __m256d term = _mm256_div_pd(_mm256_mul_pd(d, d), safe);
    acc = _mm256_add_pd(acc, _mm256_and_pd(term, pos));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    if (fit[i] > 0.0) {
      const double d = obs[i] - fit[i];
      s += d * d / fit[i];
    }
  }
  return s;
}

CCGM_AVX2 void scale_gathered(std::span<double> cells, std::span<const std::uint32_t> index,
                              std::span<const double> ratio) {
  const std::size_t n = cells.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(index.data() + i));
    const __m256d r = _mm256_i32gather_pd(ratio.data(), idx, 8);
    _mm256_storeu_pd(cells.data() + i, _mm256_mul_pd(_mm256_loadu_pd(cells.data() + i), r));
  }
  for (; i < n; ++i) cells[i] *= ratio[index[i]];
}

}  // namespace ccgm::kernels::avx2

#endif
