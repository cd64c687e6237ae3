#include "csphhn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace csphhn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  CSPHHN_REQUIRE(data_.size() == rows_ * cols_,
                 "Matrix: data length " + std::to_string(data_.size()) +
                     " != rows*cols " + std::to_string(rows_ * cols_));
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::FromRows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    CSPHHN_REQUIRE(rows[r].size() == cols, "Matrix::FromRows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::Transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  CSPHHN_REQUIRE(m.cols() == v.size(),
                 "matvec: matrix has " + std::to_string(m.cols()) +
                     " columns but vector has " + std::to_string(v.size()) +
                     " entries");
  Vector out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  CSPHHN_REQUIRE(m.rows() == v.size(), "matvec_transposed: dimension mismatch");
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double s = v[r];
    if (s == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += s * row[c];
  }
  return out;
}

void add_outer(Matrix& out, double scale, std::span<const double> u,
               std::span<const double> v) {
  CSPHHN_REQUIRE(out.rows() == u.size() && out.cols() == v.size(),
                 "add_outer: dimension mismatch");
  for (std::size_t r = 0; r < u.size(); ++r) {
    const double s = scale * u[r];
    if (s == 0.0) continue;
    auto row = out.row(r);
    for (std::size_t c = 0; c < v.size(); ++c) row[c] += s * v[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  CSPHHN_REQUIRE(a.size() == b.size(), "dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> v) {
  // Scaled accumulation so huge or tiny entries do not over/underflow.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double acc = 0.0;
  for (double x : v) {
    const double y = x / scale;
    acc += y * y;
  }
  return scale * std::sqrt(acc);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  CSPHHN_REQUIRE(x.size() == y.size(), "axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

LeastSquaresFit solve_least_squares(const Matrix& a,
                                    std::span<const double> b) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  CSPHHN_REQUIRE(n >= 1, "least_squares: no columns");
  CSPHHN_REQUIRE(m >= n, "least_squares: fewer rows than columns");
  CSPHHN_REQUIRE(b.size() == m, "least_squares: rhs length mismatch");

  Matrix r = a;
  Vector qtb(b.begin(), b.end());
  Vector v(m);

  for (std::size_t k = 0; k < n; ++k) {
    double col_norm = 0.0;
    {
      double scale = 0.0;
      for (std::size_t i = k; i < m; ++i)
        scale = std::max(scale, std::abs(r(i, k)));
      if (scale > 0.0) {
        double acc = 0.0;
        for (std::size_t i = k; i < m; ++i) {
          const double y = r(i, k) / scale;
          acc += y * y;
        }
        col_norm = scale * std::sqrt(acc);
      }
    }
    if (col_norm == 0.0) continue;  // R(k,k) stays 0; caught below.

    const double alpha = r(k, k) > 0.0 ? -col_norm : col_norm;
    for (std::size_t i = k; i < m; ++i) v[i] = r(i, k);
    v[k] -= alpha;
    double vtv = 0.0;
    for (std::size_t i = k; i < m; ++i) vtv += v[i] * v[i];
    if (vtv == 0.0) continue;

    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * r(i, j);
      s = 2.0 * s / vtv;
      for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i];
    }
    double s = 0.0;
    for (std::size_t i = k; i < m; ++i) s += v[i] * qtb[i];
    s = 2.0 * s / vtv;
    for (std::size_t i = k; i < m; ++i) qtb[i] -= s * v[i];
  }

  double r_max = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) r_max = std::max(r_max, std::abs(r(i, j)));
  for (std::size_t k = 0; k < n; ++k) {
    if (!(std::abs(r(k, k)) >= kRankTolerance * r_max) || r_max == 0.0) {
      throw RankDeficient("least_squares: column " + std::to_string(k) +
                          " is (numerically) linearly dependent");
    }
  }

  LeastSquaresFit fit;
  fit.coefficients.assign(n, 0.0);
  for (std::size_t kk = n; kk-- > 0;) {
    double s = qtb[kk];
    for (std::size_t j = kk + 1; j < n; ++j) s -= r(kk, j) * fit.coefficients[j];
    fit.coefficients[kk] = s / r(kk, kk);
  }
  double rss = 0.0;
  for (std::size_t i = n; i < m; ++i) rss += qtb[i] * qtb[i];
  fit.residual_ss = rss;
  return fit;
}

Vector softmax_stable(std::span<const double> v) {
  CSPHHN_REQUIRE(!v.empty(), "softmax_stable: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double logsumexp(std::span<const double> v) {
  CSPHHN_REQUIRE(!v.empty(), "logsumexp: empty input");
  if (v.size() == 1) return v[0];
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace csphhn
