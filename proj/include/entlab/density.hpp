#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>

#include "entlab/measure.hpp"

namespace entlab {

/// A named nonnegative function on the support of a reference measure,
/// with a rigorous upper bound on its values (used by the rejection
/// sampler). Copies share the underlying closure.
class Density {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  Density(std::string name, Fn fn, double sup_bound)
      : name_(std::move(name)), fn_(std::move(fn)), sup_(sup_bound) {}

  double operator()(std::span<const double> x) const { return fn_(x); }
  double sup_bound() const { return sup_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Fn fn_;
  double sup_;
};

namespace densities {

/// Constant density 1 / total_mass(mu); valid on every variant.
Density uniform(const ReferenceMeasure& mu);

/// Explicit probability list over the flattened atoms of a finite-support
/// measure (lexicographic order for products). The density value at atom i
/// is probs[i] / mass[i].
Density pmf(const ReferenceMeasure& mu, Eigen::VectorXd probs);

/// Two-atom law (1-p, p); mu must have exactly two atoms.
Density bernoulli(const ReferenceMeasure& mu, double p);

/// Independent product of two-atom laws over a product of binary factors,
/// one success probability per factor.
Density bernoulli_product(const ReferenceMeasure& mu, std::vector<double> ps);

/// Product of per-axis Gaussians truncated to the box/interval support;
/// normalized in closed form via erf.
Density truncated_gaussian(const ReferenceMeasure& mu, Eigen::VectorXd mean,
                           Eigen::VectorXd sigma);

/// Rotation-invariant density on an annulus whose radial law is uniform
/// on [r_min, r_max]: f(x, y) = p(r) / (2 pi r) with p constant.
Density annulus_radial_uniform(const ReferenceMeasure& mu);

/// Rotation-invariant density on an annulus whose radial law is a Gaussian
/// truncated to [r_min, r_max].
Density annulus_radial_gaussian(const ReferenceMeasure& mu, double mean,
                                double sigma);

/// Piecewise-linear density on an interval interpolating the given values
/// on the uniform grid over [a, b].
Density grid1d(const ReferenceMeasure& mu, std::vector<double> values);

}  // namespace densities

}  // namespace entlab
