#include "csphhn/vmf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace csphhn::vmf {

namespace {

using Poly = std::vector<double>;  // coefficient of t^i at index i

constexpr int kDebyeTerms = 14;

// Debye polynomials u_k(t) of the uniform expansion, from the recurrence
//   u_{k+1}(t) = t^2 (1 - t^2) u_k'(t) / 2 + 1/8 \int_0^t (1 - 5 s^2) u_k(s) ds.
std::vector<Poly> BuildDebyePolynomials() {
  std::vector<Poly> u;
  u.push_back({1.0});
  for (int k = 0; k + 1 < kDebyeTerms; ++k) {
    const Poly& p = u.back();
    Poly next(p.size() + 3, 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) {
      const double d = static_cast<double>(i) * p[i];  // coeff of t^{i-1}
      next[i + 1] += 0.5 * d;
      next[i + 3] -= 0.5 * d;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      // (1 - 5 s^2) p_i s^i, integrated.
      next[i + 1] += p[i] / (8.0 * static_cast<double>(i + 1));
      next[i + 3] -= 5.0 * p[i] / (8.0 * static_cast<double>(i + 3));
    }
    u.push_back(std::move(next));
  }
  return u;
}

const std::vector<Poly>& DebyePolynomials() {
  static const std::vector<Poly> polys = BuildDebyePolynomials();
  return polys;
}

double LogBesselSeries(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  double log_scale = 0.0;
  for (int k = 1; k < 100000; ++k) {
    term *= q / (static_cast<double>(k) * (nu + k));
    sum += term;
    if (sum > 1e250) {
      sum *= 1e-250;
      term *= 1e-250;
      log_scale += 250.0 * std::numbers::ln10;
    }
    // Terms decrease once k(nu+k) > q; stop when negligible.
    if (term < 1e-17 * sum && static_cast<double>(k) * (nu + k) > q) break;
  }
  return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + std::log(sum) +
         log_scale;
}

// I_nu(x) ~ exp(R + nu log(x/(nu+R))) / sqrt(2 pi R) * sum_k u_k(t)/nu^k,
// with R = sqrt(nu^2 + x^2), t = nu / R. Written in terms of R so nu = 0 is
// regular: u_k(t)/nu^k = R^{-k} sum_j c_kj t^{j-k} (c_kj = 0 for j < k).
double LogBesselUniform(double nu, double x) {
  const double r = std::hypot(nu, x);
  const double t = nu / r;
  const auto& polys = DebyePolynomials();
  double sum = 0.0;
  double prev_abs = INFINITY;
  double r_pow = 1.0;
  for (int k = 0; k < kDebyeTerms; ++k) {
    const Poly& p = polys[k];
    double poly_val = 0.0;
    for (std::size_t j = p.size(); j-- > static_cast<std::size_t>(k);) {
      poly_val = poly_val * t + p[j];
    }
    const double term = poly_val / r_pow;
    if (std::abs(term) > prev_abs) break;  // asymptotic series turned.
    sum += term;
    prev_abs = std::abs(term);
    if (k > 0 && std::abs(term) < 1e-17 * std::abs(sum)) break;
    r_pow *= r;
  }
  const double log_prefactor = nu > 0.0 ? nu * std::log(x / (nu + r)) : 0.0;
  return r + log_prefactor - 0.5 * std::log(2.0 * std::numbers::pi * r) +
         std::log(sum);
}

// I_{nu+1}(x) / I_nu(x) by the Gautschi continued fraction
//   1 / (2(nu+1)/x + 1 / (2(nu+2)/x + ...)), modified Lentz evaluation.
double BesselRatioContinuedFraction(double nu, double x) {
  constexpr double kTiny = 1e-300;
  double f = 2.0 * (nu + 1.0) / x;
  if (f == 0.0) f = kTiny;
  double c = f;
  double d = 0.0;
  for (int k = 2; k < 10000000; ++k) {
    const double b = 2.0 * (nu + k) / x;
    d = b + d;
    d = d == 0.0 ? 1.0 / kTiny : 1.0 / d;
    c = b + 1.0 / c;
    if (c == 0.0) c = kTiny;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

void RequireDim(int dim, const char* where) {
  CSPHHN_REQUIRE(dim >= 2, std::string(where) + ": dimension must be >= 2, got " +
                               std::to_string(dim));
}

void RequireKappa(double kappa, const char* where) {
  CSPHHN_REQUIRE(std::isfinite(kappa) && kappa >= 0.0,
                 std::string(where) + ": kappa must be finite and >= 0");
}

}  // namespace

void VmfParams::validate() const {
  RequireDim(dim(), "VmfParams");
  RequireKappa(kappa, "VmfParams");
  CSPHHN_REQUIRE(std::abs(norm2(mu) - 1.0) <= 1e-9,
                 "VmfParams: mu must be unit-norm");
}

double log_bessel_i(double nu, double x) {
  CSPHHN_REQUIRE(std::isfinite(nu) && std::isfinite(x),
                 "log_bessel_i: non-finite argument");
  CSPHHN_REQUIRE(nu >= 0.0 && x >= 0.0,
                 "log_bessel_i: order and argument must be >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -INFINITY;
  if (x < std::max(20.0, 2.0 * nu)) return LogBesselSeries(nu, x);
  return LogBesselUniform(nu, x);
}

double log_sphere_area(int dim) {
  RequireDim(dim, "log_sphere_area");
  const double half = 0.5 * dim;
  return std::numbers::ln2 + half * std::log(std::numbers::pi) -
         std::lgamma(half);
}

double log_norm_const(int dim, double kappa) {
  RequireDim(dim, "log_norm_const");
  RequireKappa(kappa, "log_norm_const");
  if (kappa < kUniformKappa) return -log_sphere_area(dim);
  const double nu = 0.5 * dim - 1.0;
  return nu * std::log(kappa) -
         0.5 * dim * std::log(2.0 * std::numbers::pi) -
         log_bessel_i(nu, kappa);
}

double mean_resultant(int dim, double kappa) {
  RequireDim(dim, "mean_resultant");
  RequireKappa(kappa, "mean_resultant");
  if (kappa == 0.0) return 0.0;
  if (kappa < kUniformKappa) return kappa / dim;
  const double nu = 0.5 * dim - 1.0;
  if (kappa > 500.0) return BesselRatioContinuedFraction(nu, kappa);
  return std::exp(log_bessel_i(nu + 1.0, kappa) - log_bessel_i(nu, kappa));
}

double mean_resultant_derivative(int dim, double kappa) {
  RequireDim(dim, "mean_resultant_derivative");
  RequireKappa(kappa, "mean_resultant_derivative");
  if (kappa < kUniformKappa) return 1.0 / dim;
  const double a = mean_resultant(dim, kappa);
  return 1.0 - a * a - (dim - 1.0) * a / kappa;
}

double entropy(int dim, double kappa) {
  RequireDim(dim, "entropy");
  RequireKappa(kappa, "entropy");
  if (kappa < kUniformKappa) return log_sphere_area(dim);
  return -log_norm_const(dim, kappa) - kappa * mean_resultant(dim, kappa);
}

double entropy_derivative(int dim, double kappa) {
  return -kappa * mean_resultant_derivative(dim, kappa);
}

double log_density(const VmfParams& p, std::span<const double> h) {
  p.validate();
  CSPHHN_REQUIRE(h.size() == p.mu.size(), "log_density: dimension mismatch");
  CSPHHN_REQUIRE(std::abs(norm2(h) - 1.0) <= 1e-6,
                 "log_density: h must be a unit vector");
  return log_norm_const(p.dim(), p.kappa) + p.kappa * dot(p.mu, h);
}

Vector sample_uniform_sphere(int dim, Rng& rng) {
  RequireDim(dim, "sample_uniform_sphere");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = normal(rng);
    n = norm2(v);
  } while (n < 1e-12);
  for (double& x : v) x /= n;
  return v;
}

std::vector<Vector> sample(const VmfParams& p, Rng& rng, std::size_t n) {
  p.validate();
  CSPHHN_REQUIRE(n >= 1, "vmf::sample: n must be >= 1");
  const int d = p.dim();
  const double dm1 = d - 1.0;
  const double kappa = p.kappa;

  // b written in the cancellation-free form (d-1) / (2k + sqrt(4k^2+(d-1)^2)).
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);

  std::gamma_distribution<double> gamma(0.5 * dm1, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Householder reflection taking e1 to mu.
  Vector u(p.mu.begin(), p.mu.end());
  u[0] -= 1.0;
  const double utu = dot(u, u);
  const bool reflect = utu > 1e-30;

  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    double w = 0.0;
    while (true) {
      const double g1 = gamma(rng);
      const double g2 = gamma(rng);
      const double z = g1 / (g1 + g2);
      w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      const double uu = unif(rng);
      if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(uu)) break;
    }
    Vector tangent;
    if (d == 2) {
      tangent = {unif(rng) < 0.5 ? -1.0 : 1.0};
    } else {
      tangent = sample_uniform_sphere(d - 1, rng);
    }
    Vector y(d);
    y[0] = w;
    const double scale = std::sqrt(std::max(0.0, 1.0 - w * w));
    for (int i = 1; i < d; ++i) y[i] = scale * tangent[i - 1];
    if (reflect) {
      const double proj = 2.0 * dot(u, y) / utu;
      for (int i = 0; i < d; ++i) y[i] -= proj * u[i];
    }
    const double nrm = norm2(y);
    for (double& v : y) v /= nrm;
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace csphhn::vmf
