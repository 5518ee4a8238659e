#include "ner/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "ner/errors.hpp"

namespace ner::kernels {

namespace scalar {

template <typename T>
static void matmul_impl(const T* a, const T* b, T* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<std::size_t>(i) * k + p];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
static void matmul_nt_impl(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<std::size_t>(j) * k;
            T acc = 0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
}

template <typename T>
static void matmul_tn_impl(const T* a, const T* b, T* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const T* arow = a + static_cast<std::size_t>(p) * m;
        const T* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
static void axpy_impl(T alpha, const T* x, T* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
static T dot_impl(const T* x, const T* y, int n) {
    T acc = 0;
    for (int i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

#define NER_KERNEL_DEFS(T)                                                                  \
    void matmul(const T* a, const T* b, T* c, int m, int k, int n) {                        \
        matmul_impl(a, b, c, m, k, n);                                                      \
    }                                                                                       \
    void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {                     \
        matmul_nt_impl(a, b, c, m, k, n);                                                   \
    }                                                                                       \
    void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {                     \
        matmul_tn_impl(a, b, c, m, k, n);                                                   \
    }                                                                                       \
    void axpy(T alpha, const T* x, T* y, int n) { axpy_impl(alpha, x, y, n); }              \
    T dot(const T* x, const T* y, int n) { return dot_impl(x, y, n); }

NER_KERNEL_DEFS(float)
NER_KERNEL_DEFS(double)
#undef NER_KERNEL_DEFS

}  // namespace scalar

const char* isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

bool isa_supported(Isa isa) {
    if (isa == Isa::scalar) return true;
#if NER_HAVE_AVX2_KERNELS
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect_best() { return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

namespace {

Isa initial_isa() {
    if (const char* env = std::getenv("NER_KERNEL_ISA")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && isa_supported(Isa::avx2)) return Isa::avx2;
    }
    return detect_best();
}

Isa g_active = initial_isa();

}  // namespace

Isa active_isa() { return g_active; }

void set_active_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw ConfigError(std::string("kernel ISA '") + isa_name(isa) +
                          "' is not supported on this machine");
    }
    g_active = isa;
}

#if NER_HAVE_AVX2_KERNELS
#define NER_DISPATCH(T, call_scalar, call_avx2) \
    if (g_active == Isa::avx2) {                \
        call_avx2;                              \
    } else {                                    \
        call_scalar;                            \
    }
#else
#define NER_DISPATCH(T, call_scalar, call_avx2) call_scalar;
#endif

#define NER_KERNEL_DISPATCH(T)                                                              \
    void matmul(const T* a, const T* b, T* c, int m, int k, int n) {                        \
        NER_DISPATCH(T, scalar::matmul(a, b, c, m, k, n), avx2::matmul(a, b, c, m, k, n))   \
    }                                                                                       \
    void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {                     \
        NER_DISPATCH(T, scalar::matmul_nt(a, b, c, m, k, n),                                \
                     avx2::matmul_nt(a, b, c, m, k, n))                                     \
    }                                                                                       \
    void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {                     \
        NER_DISPATCH(T, scalar::matmul_tn(a, b, c, m, k, n),                                \
                     avx2::matmul_tn(a, b, c, m, k, n))                                     \
    }                                                                                       \
    void axpy(T alpha, const T* x, T* y, int n) {                                           \
        NER_DISPATCH(T, scalar::axpy(alpha, x, y, n), avx2::axpy(alpha, x, y, n))           \
    }                                                                                       \
    T dot(const T* x, const T* y, int n) {                                                  \
        T out;                                                                              \
        NER_DISPATCH(T, out = scalar::dot(x, y, n), out = avx2::dot(x, y, n))               \
        return out;                                                                         \
    }

NER_KERNEL_DISPATCH(float)
NER_KERNEL_DISPATCH(double)
#undef NER_KERNEL_DISPATCH
#undef NER_DISPATCH

}  // namespace ner::kernels
