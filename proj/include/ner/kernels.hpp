#pragma once

#include <string>

namespace ner::kernels {

// Numeric inner loops behind the encoder: a scalar reference implementation
// and an AVX2+FMA variant selected at runtime. The two are equivalence-tested
// against a double-precision oracle; results may differ in final-bit rounding
// between ISAs, so the active ISA is part of the training backend descriptor.
enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa detect_best();

// Active ISA for the dispatching free functions below. Defaults to
// detect_best(); NER_KERNEL_ISA=scalar|avx2 in the environment overrides.
Isa active_isa();
void set_active_isa(Isa isa);  // throws ConfigError when unsupported

// All matrices are dense row-major. C is overwritten.
//   matmul:    C(m x n) = A(m x k) * B(k x n)
//   matmul_nt: C(m x n) = A(m x k) * B(n x k)^T
//   matmul_tn: C(m x n) = A(k x m)^T * B(k x n)
//   axpy:      y += alpha * x
//   dot:       <x, y>
#define NER_KERNEL_DECLS(T)                                                  \
    void matmul(const T* a, const T* b, T* c, int m, int k, int n);          \
    void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n);       \
    void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n);       \
    void axpy(T alpha, const T* x, T* y, int n);                             \
    T dot(const T* x, const T* y, int n);

NER_KERNEL_DECLS(float)
NER_KERNEL_DECLS(double)

namespace scalar {
NER_KERNEL_DECLS(float)
NER_KERNEL_DECLS(double)
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define NER_HAVE_AVX2_KERNELS 1
namespace avx2 {
NER_KERNEL_DECLS(float)
NER_KERNEL_DECLS(double)
}  // namespace avx2
#endif

#undef NER_KERNEL_DECLS

}  // namespace ner::kernels
