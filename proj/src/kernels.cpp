#include "maas/kernels.hpp"

#include <cassert>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace maas::kernels {

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::int64_t kParallelWork = 1 << 14;
}  // namespace

namespace serial {

void gemv(const Matrix& m, std::span<const double> x, std::span<const double> bias, std::span<double> out) {
  assert(x.size() == m.cols && out.size() == m.rows && (bias.empty() || bias.size() == m.rows));
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    out[r] = bias.empty() ? acc : acc + bias[r];
  }
}

void gemv_t(const Matrix& m, std::span<const double> g, std::span<double> out) {
  assert(g.size() == m.rows && out.size() == m.cols);
  for (std::size_t c = 0; c < m.cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) acc += m.data[r * m.cols + c] * g[r];
    out[c] = acc;
  }
}

void add_outer(Matrix& m, double scale, std::span<const double> u, std::span<const double> v) {
  assert(u.size() == m.rows && v.size() == m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double su = scale * u[r];
    double* row = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) row[c] += su * v[c];
  }
}

void axpy(std::span<double> y, double a, std::span<const double> x) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace serial

namespace omp {

// Small inputs take the serial path outright: an `if` clause would still run
// the outlined (and less optimized) loop body.

void gemv(const Matrix& m, std::span<const double> x, std::span<const double> bias, std::span<double> out) {
  const auto rows = static_cast<std::int64_t>(m.rows);
  const std::size_t cols = m.cols;
  if (rows * static_cast<std::int64_t>(cols) < kParallelWork) return serial::gemv(m, x, bias, out);
  assert(x.size() == cols && out.size() == m.rows && (bias.empty() || bias.size() == m.rows));
  const double* md = m.data.data();
  const double* xd = x.data();
  const double* bd = bias.empty() ? nullptr : bias.data();
  double* od = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* row = md + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xd[c];
    od[r] = bd ? acc + bd[r] : acc;
  }
}

void gemv_t(const Matrix& m, std::span<const double> g, std::span<double> out) {
  const auto cols = static_cast<std::int64_t>(m.cols);
  const std::size_t rows = m.rows;
  if (cols * static_cast<std::int64_t>(rows) < kParallelWork) return serial::gemv_t(m, g, out);
  assert(g.size() == rows && out.size() == m.cols);
  const double* md = m.data.data();
  const double* gd = g.data();
  double* od = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += md[r * cols + c] * gd[r];
    od[c] = acc;
  }
}

void add_outer(Matrix& m, double scale, std::span<const double> u, std::span<const double> v) {
  const auto rows = static_cast<std::int64_t>(m.rows);
  const std::size_t cols = m.cols;
  if (rows * static_cast<std::int64_t>(cols) < kParallelWork) return serial::add_outer(m, scale, u, v);
  assert(u.size() == m.rows && v.size() == cols);
  double* md = m.data.data();
  const double* ud = u.data();
  const double* vd = v.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double su = scale * ud[r];
    double* row = md + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += su * vd[c];
  }
}

void axpy(std::span<double> y, double a, std::span<const double> x) {
  const auto n = static_cast<std::int64_t>(y.size());
  if (n < kParallelWork) return serial::axpy(y, a, x);
  assert(x.size() == y.size());
  double* yd = y.data();
  const double* xd = x.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) yd[i] += a * xd[i];
}

}  // namespace omp

void gemv(ExecPolicy p, const Matrix& m, std::span<const double> x, std::span<const double> bias,
          std::span<double> out) {
  p == ExecPolicy::parallel ? omp::gemv(m, x, bias, out) : serial::gemv(m, x, bias, out);
}

void gemv_t(ExecPolicy p, const Matrix& m, std::span<const double> g, std::span<double> out) {
  p == ExecPolicy::parallel ? omp::gemv_t(m, g, out) : serial::gemv_t(m, g, out);
}

void add_outer(ExecPolicy p, Matrix& m, double scale, std::span<const double> u, std::span<const double> v) {
  p == ExecPolicy::parallel ? omp::add_outer(m, scale, u, v) : serial::add_outer(m, scale, u, v);
}

void axpy(ExecPolicy p, std::span<double> y, double a, std::span<const double> x) {
  p == ExecPolicy::parallel ? omp::axpy(y, a, x) : serial::axpy(y, a, x);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace maas::kernels
