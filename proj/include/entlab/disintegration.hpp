#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "entlab/prob.hpp"

namespace entlab {

/// One fiber of a disintegration: a reference measure on the fiber's own
/// parameter space plus the embedding of fiber points into the total
/// space. The fiber measure is concentrated on {T = t} by construction.
struct FiberView {
  ReferenceMeasure measure;
  /// Writes the total-space coordinates of a local fiber point.
  std::function<void(std::span<const double>, std::span<double>)> embed;
};

/// Wraps a total-space function as a function on fiber coordinates.
template <class F>
auto on_fiber(const FiberView& fv, int total_dim, F&& f) {
  return [embed = fv.embed, f = std::forward<F>(f),
          buf = std::vector<double>(static_cast<size_t>(total_dim))](
             std::span<const double> local) mutable {
    embed(local, buf);
    return f(std::span<const double>(buf.data(), buf.size()));
  };
}

/// A measurable map T, a base measure xi, and the fiber kernel t -> nu_t,
/// as one of four closed variants. Kernels are built, not user-supplied,
/// so the defining identity can be checked rather than trusted. Immutable;
/// copies share payload.
class Disintegration {
 public:
  enum class Kind { DiscreteMap, ProductProjection, Polar, GroupQuotient };

  /// T given as an atom-index table from the total measure's flat atoms to
  /// the base measure's atoms. Fiber weights are mass(i) / xi(T(i)), which
  /// makes the defining identity an exact regrouping of finite sums. Every
  /// base atom must have a nonempty preimage.
  static Disintegration discrete_map(const ReferenceMeasure& total,
                                     std::vector<int> map,
                                     const ReferenceMeasure& base);

  /// T = projection onto the left factor of a Product measure; the fiber
  /// over t is the right factor embedded at t, and the base is the left
  /// factor (carrying the product's global scale).
  static Disintegration product_projection(const ReferenceMeasure& product);

  /// T = radius on an annulus; base is Lebesgue dr on [r_min, r_max] and
  /// the fiber over r is the circle measure r dtheta of mass 2 pi r.
  static Disintegration polar(const ReferenceMeasure& annulus);

  /// T = canonical projection G -> G/H for a normal subgroup H, with Haar
  /// measures in canonical relation: total_scale = base_scale * fiber_scale.
  /// fiber_scale defaults to total_scale / base_scale; passing it
  /// explicitly enforces the constraint. The section (one representative
  /// per coset) defaults to the smallest element index; the chain rule
  /// does not depend on this choice.
  static Disintegration group_quotient(
      const FiniteGroup& G, std::vector<int> subgroup, double total_scale = 1.0,
      double base_scale = 1.0, std::optional<double> fiber_scale = std::nullopt,
      std::optional<std::vector<int>> section = std::nullopt);

  Kind kind() const;
  const ReferenceMeasure& total() const;
  const ReferenceMeasure& base() const;

  /// The fiber over base point t (flat atom index for discrete bases, the
  /// radius for the polar case, the left-factor coordinates for products).
  FiberView fiber(std::span<const double> t) const;

  /// Upper bound on the total mass of any fiber.
  double fiber_mass_bound() const;

  /// Discrete kinds only: T as a flat-index table, and the flat views.
  const std::vector<int>& index_map() const;
  const FlatDiscrete& total_flat() const;
  const FlatDiscrete& base_flat() const;

  /// GroupQuotient only.
  const CosetStructure& cosets() const;

 private:
  struct Impl;
  explicit Disintegration(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

inline constexpr std::uint64_t kDefaultBatterySeed = 0x5eed0001ULL;

/// Smooth bounded test functions (separable plus coupled terms) with
/// seeded pseudo-random coefficients, for validating disintegrations.
std::vector<std::function<double(std::span<const double>)>>
default_validation_battery(int dim, std::uint64_t seed = kDefaultBatterySeed,
                           int count = 16);

/// Max over the battery of |integral of f d(total) - iterated integral
/// over fibers then base|. Exact variants regroup finite sums, so the
/// residual is at roundoff; a large residual is a result, not an error.
double validate_disintegration(
    const Disintegration& D,
    std::span<const std::function<double(std::span<const double>)>> battery,
    const QuadratureOptions& opts = {});

double validate_disintegration(const Disintegration& D,
                               std::uint64_t seed = kDefaultBatterySeed,
                               const QuadratureOptions& opts = {});

/// Image measure T_* rho over the base, with density t -> integral of
/// rho's density over the fiber at t; validated as a probability measure
/// (a failure flags a broken kernel).
ProbMeasure pushforward(const ProbMeasure& rho, const Disintegration& D,
                        const QuadratureOptions& opts = {});

struct FiberConditional {
  /// Probability measure on the fiber (in fiber coordinates), density
  /// f / (pushforward density) relative to nu_t.
  ProbMeasure conditional;
  /// Pushforward density at t, i.e. the mass of the unnormalized fiber
  /// measure rho~_t = f . nu_t.
  double base_density;
  /// Density of rho~_t with respect to nu_t (the restriction of f).
  Density unnormalized_density;
  FiberView fiber;
};

/// Conditional probability on the fiber over t. Throws ZeroMassFiberError
/// where the pushforward density vanishes (the conditional is only well
/// defined where T_* rho puts mass).
FiberConditional fiber_conditional(const ProbMeasure& rho,
                                   const Disintegration& D,
                                   std::span<const double> t,
                                   const QuadratureOptions& opts = {});

struct FiberTableRow {
  std::string label;
  double t = 0.0;
  double fiber_entropy = 0.0;
  double pushforward_density = 0.0;
};

struct ChainRuleReport {
  double total = 0.0;        // S_mu(rho)
  double marginal = 0.0;     // S_xi(T_* rho)
  double conditional = 0.0;  // integral of fiber entropies d T_* rho
  double discrepancy = 0.0;  // |total - marginal - conditional|
  double tolerance = 0.0;    // declared by the variants involved
  EntropyValue::Method method = EntropyValue::Method::ExactSum;
  std::vector<FiberTableRow> fibers;

  bool within_tolerance() const { return discrepancy <= tolerance; }
};

/// Number of rows of the fiber table for continuous bases.
inline constexpr int kFiberTableRows = 129;

/// Both sides of the chain rule, each term computed independently (total
/// from rho, marginal from the pushforward, conditional by integrating
/// fiber entropies against T_* rho). Zero-mass fibers contribute weight 0.
ChainRuleReport chain_rule_report(const ProbMeasure& rho,
                                  const Disintegration& D,
                                  const QuadratureOptions& opts = {});

struct DeformedPolarReport {
  ChainRuleReport polar;        // exact chain rule with r dtheta fibers
  double flat_total = 0.0;      // S w.r.t. the flat reference dr dtheta
  double mean_log_radius = 0.0; // E_rho[ln R]
  double conditional_flat = 0.0;// conditional term of the flat chain rule
  double flat_identity_residual = 0.0;
  double conditional_identity_residual = 0.0;
};

/// Compares the polar chain rule against the flat-reference route: the
/// (R, Theta) law has density r f(r, theta) w.r.t. dr dtheta, so
/// S_flat = S_annulus - E[ln R], and the polar conditional term equals the
/// flat conditional term plus E[ln R].
DeformedPolarReport deformed_chain_rule_comparison(
    const ProbMeasure& rho, const QuadratureOptions& opts = {});

}  // namespace entlab
