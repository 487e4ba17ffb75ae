#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "entlab/error.hpp"
#include "entlab/group.hpp"
#include "entlab/kahan.hpp"
#include "entlab/rng.hpp"

namespace entlab {

class ReferenceMeasure;

/// Finitely many atoms with strictly positive weights. Points are the
/// atom positions 0..n-1 encoded as a single coordinate; identifiers are
/// opaque labels used only in reports.
struct Discrete {
  std::vector<std::string> atoms;
  Eigen::VectorXd weights;
};

/// 1-D Lebesgue measure dr on [a, b].
struct Interval {
  double a;
  double b;
};

/// Lebesgue measure on an axis-aligned box.
struct LebesgueBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Lebesgue dx dy restricted to r_min <= |(x,y)| <= r_max. Integrated in
/// polar coordinates internally, so the boundary never meets a grid cell.
struct Annulus2D {
  double r_min;
  double r_max;
};

/// The measure r dtheta on [0, 2*pi); total mass 2*pi*r. Points are angles.
struct CircleScaled {
  double radius;
};

/// Product of two reference measures; points are concatenated coordinates.
struct Product {
  std::shared_ptr<const ReferenceMeasure> left;
  std::shared_ptr<const ReferenceMeasure> right;
};

/// scale x counting measure on a finite group; points are element indices.
struct GroupHaar {
  FiniteGroup group;
  double scale;
};

/// A finite reference measure, one of the closed variants above, carrying
/// a global scale factor alpha > 0. Immutable after construction; copies
/// share payload and are safe for concurrent read-only use.
class ReferenceMeasure {
 public:
  using Variant = std::variant<Discrete, Interval, LebesgueBox, Annulus2D,
                               CircleScaled, Product, GroupHaar>;

  static ReferenceMeasure discrete(Eigen::VectorXd weights,
                                   std::vector<std::string> atoms = {});
  /// Counting measure on n atoms labelled "0".."n-1".
  static ReferenceMeasure counting(int n);
  static ReferenceMeasure interval(double a, double b);
  static ReferenceMeasure box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static ReferenceMeasure annulus(double r_min, double r_max);
  static ReferenceMeasure circle(double radius);
  static ReferenceMeasure product(ReferenceMeasure left, ReferenceMeasure right);
  static ReferenceMeasure group_haar(FiniteGroup group, double scale = 1.0);

  /// Same measure with the global scale multiplied by alpha.
  ReferenceMeasure scaled(double alpha) const;

  double scale() const { return scale_; }
  const Variant& data() const { return *v_; }

  /// Number of coordinates of a point of the support.
  int point_dim() const;
  /// True when the support is a finite set (Discrete, GroupHaar, products
  /// of such).
  bool discrete_support() const;

 private:
  ReferenceMeasure(Variant v, double scale);

  double scale_ = 1.0;
  std::shared_ptr<const Variant> v_;
};

/// Structural equality (same variant shape, parameters, and scale).
bool references_equal(const ReferenceMeasure& a, const ReferenceMeasure& b);

struct QuadratureOptions {
  /// Composite-Simpson panels per axis for continuous variants.
  int panels = 2048;
  /// Panels per axis for Annulus2D in polar coordinates.
  int annulus_panels = 4096;
  /// Throw DivergenceError when |partial sum| of a quadrature level
  /// exceeds this magnitude.
  double partial_sum_limit = std::numeric_limits<double>::infinity();
  /// Hard cap on integrand evaluations per integrate() call.
  std::int64_t eval_budget = 400'000'000;
};

struct IntegralResult {
  double value = 0.0;
  /// Richardson-style estimate from the half-resolution rule; exactly 0
  /// for discrete variants.
  double error = 0.0;
};

namespace detail {

/// Type-erased integrand view; keeps the recursive engine out of the
/// header and bounds template instantiation across Product nesting.
struct ErasedEval {
  void* state;
  double (*fn)(void*, std::span<const double>);
};

IntegralResult integrate_erased(const ReferenceMeasure& mu,
                                const QuadratureOptions& opts, ErasedEval f);

std::string point_to_string(std::span<const double> x);

}  // namespace detail

/// Integral of f against mu. Discrete and GroupHaar variants (and products
/// of them) are exact weighted sums; continuous variants use deterministic
/// composite Simpson at the configured resolution with a reported error
/// estimate; products integrate iteratively, left factor outermost.
/// Throws EvaluationError if f returns a non-finite value.
template <class F>  // F: (std::span<const double>) -> double
IntegralResult integrate(const ReferenceMeasure& mu, F&& f,
                         const QuadratureOptions& opts = {}) {
  auto call = [&f](std::span<const double> x) -> double { return f(x); };
  return detail::integrate_erased(
      mu, opts,
      detail::ErasedEval{&call, [](void* p, std::span<const double> x) {
                           return (*static_cast<decltype(call)*>(p))(x);
                         }});
}

/// Total mass of the measure, by closed form; equals integrate(mu, 1).
double total_mass(const ReferenceMeasure& mu);

/// Flattened view of a finite-support measure: per-atom masses (all scales
/// included), point coordinates, labels, and the per-factor radix used to
/// map points back to flat indices.
struct FlatDiscrete {
  Eigen::VectorXd masses;
  Eigen::MatrixXd points;  // n_atoms x point_dim
  std::vector<std::string> labels;
  std::vector<int> radix;

  int size() const { return static_cast<int>(masses.size()); }
  int index_of(std::span<const double> x) const;
};

/// Throws Error unless mu.discrete_support().
FlatDiscrete flatten_discrete(const ReferenceMeasure& mu);

/// Draws one point of the probability measure mu / total_mass(mu); exact
/// per variant (no rejection). Writes point_dim coordinates.
void sample_reference_point(const ReferenceMeasure& mu, Rng& rng,
                            std::span<double> out);

}  // namespace entlab
