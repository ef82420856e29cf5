#include "liftlab/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace liftlab::kernels {
namespace {

// Four independent accumulators so the reduction order matches the AVX2 lanes.
double wdot_scalar(const double* a, const double* b, const double* w, std::size_t n) {
  double s[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) s[l] += a[i + l] * b[i + l] * w[i + l];
  double r = (s[0] + s[2]) + (s[1] + s[3]);
  for (; i < n; ++i) r += a[i] * b[i] * w[i];
  return r;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) s[l] += a[i + l] * b[i + l];
  double r = (s[0] + s[2]) + (s[1] + s[3]);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpby_scalar(double alpha, const double* x, double beta, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i] + beta * y[i];
}

const Table kScalar{wdot_scalar, dot_scalar, axpy_scalar, axpby_scalar, "scalar"};

const Table& pick() {
  const char* env = std::getenv("LIFTLAB_FORCE_SCALAR");
  if (env && std::strcmp(env, "0") != 0 && env[0] != '\0') return kScalar;
  if (const Table* t = avx2_table()) return *t;
  return kScalar;
}

}  // namespace

const Table& scalar_table() { return kScalar; }

const Table& active() {
  static const Table& t = pick();
  return t;
}

std::string active_name() { return active().name; }

}  // namespace liftlab::kernels
