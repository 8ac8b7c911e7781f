#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <array>
#include <cstdint>

#include "keyrate/kernels.hpp"

// Functions carry target attributes instead of the file being built with
// -mavx2, so nothing here can leak AVX2 code into generic inline symbols.
#define KEYRATE_AVX2 __attribute__((target("avx2,fma")))

namespace keyrate::simd {

namespace {

constexpr std::size_t kLanes = 4;

// log2(v) for finite v >= 1. v = m*2^e with m in [sqrt(1/2), sqrt(2)),
// ln(m) = 2 atanh(s), s = (m-1)/(m+1), |s| <= 0.1716; the odd series through
// s^21 leaves a truncation error below 1e-18.
KEYRATE_AVX2 inline __m256d log2_ge1(__m256d v) {
  const __m256i mantissa_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  const __m256i magic_bits = _mm256_set1_epi64x(0x4330000000000000LL);  // 2^52
  const __m256d magic_bias = _mm256_set1_pd(4503599627370496.0 + 1023.0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d sqrt2 = _mm256_set1_pd(1.4142135623730951);

  const __m256i bits = _mm256_castpd_si256(v);
  const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(exp_bits, magic_bits)), magic_bias);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mantissa_mask), one_bits));

  const __m256d big = _mm256_cmp_pd(m, sqrt2, _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, half), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, one));

  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d z = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(1.0 / 21.0);
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 3.0));
  p = _mm256_mul_pd(p, z);
  // ln(m) = 2s + 2s*p
  const __m256d two_s = _mm256_add_pd(s, s);
  const __m256d ln_m = _mm256_fmadd_pd(two_s, p, two_s);
  return _mm256_fmadd_pd(ln_m, _mm256_set1_pd(1.4426950408889634), e);
}

KEYRATE_AVX2 inline __m256d ratio_term(__m256d a, __m256d b, __m256d c, __m256d x, __m256d y) {
  const __m256d den = _mm256_fmadd_pd(b, y, c);
  const __m256d r = _mm256_div_pd(_mm256_mul_pd(a, x), den);
  return log2_ge1(_mm256_add_pd(_mm256_set1_pd(1.0), r));
}

KEYRATE_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// Tail lanes are padded with x = 0 (f = 0) and w = 0 so they add nothing.
struct Tail {
  std::array<double, kLanes> x{}, y{}, xa{}, ya{}, w{};
};

KEYRATE_AVX2 Moments moments(RatioCoeffs k, std::span<const double> x, std::span<const double> y) {
  const __m256d a = _mm256_set1_pd(k.a), b = _mm256_set1_pd(k.b), c = _mm256_set1_pd(k.c);
  __m256d sum = _mm256_setzero_pd(), sum_sq = _mm256_setzero_pd();
  const std::size_t n = x.size();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    const __m256d v = ratio_term(a, b, c, _mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i));
    sum = _mm256_add_pd(sum, v);
    sum_sq = _mm256_fmadd_pd(v, v, sum_sq);
  }
  if (body < n) {
    Tail t;
    t.y.fill(1.0);
    for (std::size_t i = body; i < n; ++i) t.x[i - body] = x[i], t.y[i - body] = y[i];
    const __m256d v = ratio_term(a, b, c, _mm256_loadu_pd(t.x.data()), _mm256_loadu_pd(t.y.data()));
    sum = _mm256_add_pd(sum, v);
    sum_sq = _mm256_fmadd_pd(v, v, sum_sq);
  }
  return {hsum(sum), hsum(sum_sq), n};
}

KEYRATE_AVX2 inline void accumulate_pair(__m256d a, __m256d b, __m256d c, const double* px,
                                          const double* py, const double* pxa, const double* pya,
                                          __m256d& sum, __m256d& sum_sq) {
  const __m256d v0 = ratio_term(a, b, c, _mm256_loadu_pd(px), _mm256_loadu_pd(py));
  const __m256d v1 = ratio_term(a, b, c, _mm256_loadu_pd(pxa), _mm256_loadu_pd(pya));
  const __m256d v = _mm256_mul_pd(_mm256_set1_pd(0.5), _mm256_add_pd(v0, v1));
  sum = _mm256_add_pd(sum, v);
  sum_sq = _mm256_fmadd_pd(v, v, sum_sq);
}

KEYRATE_AVX2 Moments pair_moments(RatioCoeffs k, std::span<const double> x, std::span<const double> y,
                                  std::span<const double> xa, std::span<const double> ya) {
  const __m256d a = _mm256_set1_pd(k.a), b = _mm256_set1_pd(k.b), c = _mm256_set1_pd(k.c);
  __m256d sum = _mm256_setzero_pd(), sum_sq = _mm256_setzero_pd();
  const std::size_t n = x.size();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    accumulate_pair(a, b, c, x.data() + i, y.data() + i, xa.data() + i, ya.data() + i, sum, sum_sq);
  }
  if (body < n) {
    Tail t;
    t.y.fill(1.0);
    t.ya.fill(1.0);
    for (std::size_t i = body; i < n; ++i) {
      t.x[i - body] = x[i], t.y[i - body] = y[i];
      t.xa[i - body] = xa[i], t.ya[i - body] = ya[i];
    }
    accumulate_pair(a, b, c, t.x.data(), t.y.data(), t.xa.data(), t.ya.data(), sum, sum_sq);
  }
  return {hsum(sum), hsum(sum_sq), n};
}

KEYRATE_AVX2 double dot(RatioCoeffs k, std::span<const double> x, std::span<const double> y,
                        std::span<const double> w) {
  const __m256d a = _mm256_set1_pd(k.a), b = _mm256_set1_pd(k.b), c = _mm256_set1_pd(k.c);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n = x.size();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    const __m256d v = ratio_term(a, b, c, _mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w.data() + i), v, acc);
  }
  if (body < n) {
    Tail t;
    t.y.fill(1.0);
    for (std::size_t i = body; i < n; ++i) {
      t.x[i - body] = x[i], t.y[i - body] = y[i], t.w[i - body] = w[i];
    }
    const __m256d v = ratio_term(a, b, c, _mm256_loadu_pd(t.x.data()), _mm256_loadu_pd(t.y.data()));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(t.w.data()), v, acc);
  }
  return hsum(acc);
}

KEYRATE_AVX2 void eval(RatioCoeffs k, std::span<const double> x, std::span<const double> y,
                       std::span<double> out) {
  const __m256d a = _mm256_set1_pd(k.a), b = _mm256_set1_pd(k.b), c = _mm256_set1_pd(k.c);
  const std::size_t n = x.size();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    _mm256_storeu_pd(out.data() + i,
                     ratio_term(a, b, c, _mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i)));
  }
  if (body < n) {
    Tail t;
    t.y.fill(1.0);
    for (std::size_t i = body; i < n; ++i) t.x[i - body] = x[i], t.y[i - body] = y[i];
    std::array<double, kLanes> v{};
    _mm256_storeu_pd(v.data(), ratio_term(a, b, c, _mm256_loadu_pd(t.x.data()), _mm256_loadu_pd(t.y.data())));
    for (std::size_t i = body; i < n; ++i) out[i] = v[i - body];
  }
}

}  // namespace

const KernelTable& detail::avx2_table() {
  static const KernelTable table{Isa::avx2, &moments, &pair_moments, &dot, &eval};
  return table;
}

}  // namespace keyrate::simd

#endif
