#pragma once
// Inner-loop vector kernels. Every kernel has a scalar reference and, on x86-64,
// an AVX2/FMA variant picked once at startup from cpuid.

#include <cstddef>
#include <string>

namespace liftlab::kernels {

struct Table {
  double (*wdot)(const double* a, const double* b, const double* w, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y <- alpha*x + beta*y
  void (*axpby)(double alpha, const double* x, double beta, double* y, std::size_t n);
  const char* name;
};

const Table& scalar_table();
// nullptr when the CPU or the build lacks AVX2+FMA.
const Table* avx2_table();

// Active table. LIFTLAB_FORCE_SCALAR=1 in the environment pins the scalar one.
const Table& active();
std::string active_name();

inline double wdot(const double* a, const double* b, const double* w, std::size_t n) {
  return active().wdot(a, b, w, n);
}
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) {
  active().axpby(alpha, x, beta, y, n);
}

}  // namespace liftlab::kernels
