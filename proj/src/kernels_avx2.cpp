#include "ner/kernels.hpp"

#if NER_HAVE_AVX2_KERNELS

#include <immintrin.h>

#include <cstring>

// Compiled with -mavx2 -mfma for this translation unit only; callers must
// route through the dispatch table so these never execute on unsupported
// hardware.

namespace ner::kernels::avx2 {

namespace {

inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

inline double hsum256d(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

}  // namespace

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(float) * static_cast<std::size_t>(m) * n);
    const int n8 = n & ~7;
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const float av = a[static_cast<std::size_t>(i) * k + p];
            const __m256 avv = _mm256_set1_ps(av);
            const float* brow = b + static_cast<std::size_t>(p) * n;
            int j = 0;
            for (; j < n8; j += 8) {
                const __m256 bv = _mm256_loadu_ps(brow + j);
                const __m256 cv = _mm256_loadu_ps(crow + j);
                _mm256_storeu_ps(crow + j, _mm256_fmadd_ps(avv, bv, cv));
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    const int n4 = n & ~3;
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[static_cast<std::size_t>(i) * k + p];
            const __m256d avv = _mm256_set1_pd(av);
            const double* brow = b + static_cast<std::size_t>(p) * n;
            int j = 0;
            for (; j < n4; j += 4) {
                const __m256d bv = _mm256_loadu_pd(brow + j);
                const __m256d cv = _mm256_loadu_pd(crow + j);
                _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(avv, bv, cv));
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            c[static_cast<std::size_t>(i) * n + j] = dot(arow, b + static_cast<std::size_t>(j) * k, k);
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            c[static_cast<std::size_t>(i) * n + j] = dot(arow, b + static_cast<std::size_t>(j) * k, k);
        }
    }
}

void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(float) * static_cast<std::size_t>(m) * n);
    const int n8 = n & ~7;
    for (int p = 0; p < k; ++p) {
        const float* arow = a + static_cast<std::size_t>(p) * m;
        const float* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const float av = arow[i];
            const __m256 avv = _mm256_set1_ps(av);
            float* crow = c + static_cast<std::size_t>(i) * n;
            int j = 0;
            for (; j < n8; j += 8) {
                const __m256 bv = _mm256_loadu_ps(brow + j);
                const __m256 cv = _mm256_loadu_ps(crow + j);
                _mm256_storeu_ps(crow + j, _mm256_fmadd_ps(avv, bv, cv));
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    const int n4 = n & ~3;
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<std::size_t>(p) * m;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            const __m256d avv = _mm256_set1_pd(av);
            double* crow = c + static_cast<std::size_t>(i) * n;
            int j = 0;
            for (; j < n4; j += 4) {
                const __m256d bv = _mm256_loadu_pd(brow + j);
                const __m256d cv = _mm256_loadu_pd(crow + j);
                _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(avv, bv, cv));
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void axpy(float alpha, const float* x, float* y, int n) {
    const __m256 av = _mm256_set1_ps(alpha);
    const int n8 = n & ~7;
    int i = 0;
    for (; i < n8; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        const __m256 yv = _mm256_loadu_ps(y + i);
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, xv, yv));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const double* x, double* y, int n) {
    const __m256d av = _mm256_set1_pd(alpha);
    const int n4 = n & ~3;
    int i = 0;
    for (; i < n4; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, xv, yv));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

float dot(const float* x, const float* y, int n) {
    __m256 acc = _mm256_setzero_ps();
    const int n8 = n & ~7;
    int i = 0;
    for (; i < n8; i += 8) {
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
    }
    float out = hsum256(acc);
    for (; i < n; ++i) out += x[i] * y[i];
    return out;
}

double dot(const double* x, const double* y, int n) {
    __m256d acc = _mm256_setzero_pd();
    const int n4 = n & ~3;
    int i = 0;
    for (; i < n4; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    }
    double out = hsum256d(acc);
    for (; i < n; ++i) out += x[i] * y[i];
    return out;
}

}  // namespace ner::kernels::avx2

#endif  // NER_HAVE_AVX2_KERNELS
