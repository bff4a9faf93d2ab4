#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace maas {

enum class ExecPolicy { serial, parallel };

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// Dense kernels used by the controller. Every kernel has a serial reference
// and an OpenMP version; both accumulate each output element in the same
// order, so their results are bitwise identical.
namespace kernels {

namespace serial {
// out = m * x + bias
void gemv(const Matrix& m, std::span<const double> x, std::span<const double> bias, std::span<double> out);
// out = m^T * g
void gemv_t(const Matrix& m, std::span<const double> g, std::span<double> out);
// m += scale * u v^T
void add_outer(Matrix& m, double scale, std::span<const double> u, std::span<const double> v);
// y += a * x
void axpy(std::span<double> y, double a, std::span<const double> x);
}  // namespace serial

namespace omp {
void gemv(const Matrix& m, std::span<const double> x, std::span<const double> bias, std::span<double> out);
void gemv_t(const Matrix& m, std::span<const double> g, std::span<double> out);
void add_outer(Matrix& m, double scale, std::span<const double> u, std::span<const double> v);
void axpy(std::span<double> y, double a, std::span<const double> x);
}  // namespace omp

void gemv(ExecPolicy p, const Matrix& m, std::span<const double> x, std::span<const double> bias,
          std::span<double> out);
void gemv_t(ExecPolicy p, const Matrix& m, std::span<const double> g, std::span<double> out);
void add_outer(ExecPolicy p, Matrix& m, double scale, std::span<const double> u, std::span<const double> v);
void axpy(ExecPolicy p, std::span<double> y, double a, std::span<const double> x);

// Number of worker threads OpenMP would use (1 when built without OpenMP).
int max_threads();

}  // namespace kernels
}  // namespace maas
