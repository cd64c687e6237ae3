#ifndef CSPHHN_LINALG_HPP_
#define CSPHHN_LINALG_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "csphhn/errors.hpp"

namespace csphhn {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix Identity(std::size_t n);
  static Matrix FromRows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix Transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Vector matvec(const Matrix& m, std::span<const double> v);

// m^T v without materializing the transpose.
Vector matvec_transposed(const Matrix& m, std::span<const double> v);

// out += scale * u v^T
void add_outer(Matrix& out, double scale, std::span<const double> u,
               std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> v);

struct LeastSquaresFit {
  Vector coefficients;
  // Residual sum of squares, read off the orthogonal complement of the
  // column space (not recomputed from the coefficients).
  double residual_ss = 0.0;
};

// Householder QR solve of min ||Ax - b||_2. Throws RankDeficient when a
// diagonal entry of R falls below 1e-10 * max|R|.
LeastSquaresFit solve_least_squares(const Matrix& a, std::span<const double> b);

inline Vector least_squares(const Matrix& a, std::span<const double> b) {
  return solve_least_squares(a, b).coefficients;
}

inline constexpr double kRankTolerance = 1e-10;

Vector softmax_stable(std::span<const double> v);
double logsumexp(std::span<const double> v);

// log(1 + exp(x)) without overflow, and its derivative.
double softplus(double x);
double sigmoid(double x);

}  // namespace csphhn

#endif  // CSPHHN_LINALG_HPP_
