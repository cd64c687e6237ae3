#ifndef CSPHHN_VMF_HPP_
#define CSPHHN_VMF_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "csphhn/linalg.hpp"
#include "csphhn/rng.hpp"

// von Mises-Fisher distribution on the unit sphere S^{d-1} in R^d.
//
//   p(h; mu, kappa) = C_d(kappa) exp(kappa mu^T h)
//   C_d(kappa)      = kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa))
//
// All entropies are differential entropies in nats with respect to the
// surface measure of the sphere.
namespace csphhn::vmf {

struct VmfParams {
  Vector mu;
  double kappa = 0.0;

  int dim() const { return static_cast<int>(mu.size()); }
  // Throws ContractViolation unless |mu| = 1 +- 1e-9, kappa >= 0, dim >= 2.
  void validate() const;
};

// Below this concentration the uniform-limit formulas are used.
inline constexpr double kUniformKappa = 1e-8;

// log I_nu(x), the modified Bessel function of the first kind.
// Power series for x < max(20, 2 nu); uniform (Debye) asymptotic expansion
// otherwise.
double log_bessel_i(double nu, double x);

// log of the surface area of S^{d-1}: log(2 pi^{d/2} / Gamma(d/2)).
double log_sphere_area(int dim);

double log_norm_const(int dim, double kappa);

// A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa), the expected projection of
// a sample onto mu. Uses a Gautschi continued fraction for kappa > 500.
double mean_resultant(int dim, double kappa);

// dA_d/dkappa = 1 - A^2 - (d-1) A / kappa.
double mean_resultant_derivative(int dim, double kappa);

double entropy(int dim, double kappa);
inline double entropy(const VmfParams& p) {
  p.validate();
  return entropy(p.dim(), p.kappa);
}

// dH/dkappa = -kappa * A'_d(kappa).
double entropy_derivative(int dim, double kappa);

double log_density(const VmfParams& p, std::span<const double> h);

// Wood (1994) rejection sampler. Mutates only `rng`.
std::vector<Vector> sample(const VmfParams& p, Rng& rng, std::size_t n);

// Uniform draw from S^{d-1}.
Vector sample_uniform_sphere(int dim, Rng& rng);

}  // namespace csphhn::vmf

#endif  // CSPHHN_VMF_HPP_
