#pragma once

#include <cstdint>
#include <optional>

#include "entlab/disintegration.hpp"
#include "entlab/prob.hpp"

namespace entlab {

/// Hard caps for exact (method-of-types) computations.
inline constexpr int kMaxExactAlphabet = 8;
inline constexpr int kMaxExactBlock = 24;

/// A typical-set problem: source law, block length, half-width delta in
/// nats, and the cached source entropy.
struct TypicalSetSpec {
  ProbMeasure source;
  int n;
  double delta;
  double entropy_nats;
};

/// Computes and caches the source entropy.
TypicalSetSpec make_typical_spec(ProbMeasure source, int n, double delta,
                                 const QuadratureOptions& opts = {});

/// Empirical rate -(1/n) sum log f(x_i) of an n-tuple (rows of points).
/// Any zero-density coordinate makes the rate +infinity.
double empirical_rate(const Eigen::MatrixXd& tuple, const ProbMeasure& source);

/// Membership in A_delta^(n): |empirical rate - S| <= delta, boundary
/// inclusive. Zero-density coordinates are never typical. For discrete
/// sources the rate is computed from occupancy counts, the same expression
/// the exact enumeration uses, so boundary ties agree across paths.
bool is_typical(const Eigen::MatrixXd& tuple, const TypicalSetSpec& spec);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  bool exact = false;
};

struct TypicalSetReport {
  int n = 0;
  double delta = 0.0;
  double entropy_nats = 0.0;
  Estimate prob;      // P(A) under rho^(x)n
  Estimate volume;    // mu^(x)n (A)
  double upper_bound = 0.0;  // exp(n (S + delta))
  double lower_bound = 0.0;  // (1 - epsilon) exp(n (S - delta))
  double epsilon = 0.0;
  double rate = 0.0;  // (1/n) log volume; NaN when the volume is 0
  bool lower_premise = false;  // prob >= 1 - epsilon
  bool zero_hits = false;      // MC saw no typical draw; volume >= 0 only
  std::string mode;            // "exact" | "monte-carlo"
};

/// Exact typical-set probability and volume by enumerating empirical
/// types (composition vectors): per type, one rate evaluation, an exact
/// multinomial count, and closed-form per-sequence masses. Requires a
/// finite-support source with alphabet <= 8 and n <= 24; larger inputs
/// throw BudgetError suggesting monte_carlo_typical.
TypicalSetReport exact_typical(const TypicalSetSpec& spec, double epsilon = 0.1);

/// Monte Carlo estimate of P(A) and, via importance reweighting by the
/// sampling density, of the volume: mu^(x)n (A) = E[1_A prod f(x_i)^{-1}].
/// Deterministic per seed; workers > 1 splits draws into ranges with
/// derived seeds (seed + worker index) merged in range order.
TypicalSetReport monte_carlo_typical(const TypicalSetSpec& spec,
                                     std::int64_t samples, std::uint64_t seed,
                                     double epsilon = 0.1, int workers = 1);

struct SweepRow {
  int n = 0;
  double delta = 0.0;
  double rate = 0.0;
  double entropy_nats = 0.0;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  double prob = 0.0;
  bool rate_in_band = false;  // exact mode, P > 0: rate within [S-d, S+d]
};

struct RateSweepOptions {
  double epsilon = 0.1;
  bool monte_carlo = false;
  std::int64_t samples = 100000;
  std::uint64_t seed = 0;
  int workers = 1;
  QuadratureOptions quad{};
};

/// One row per (n, delta) pair.
std::vector<SweepRow> rate_sweep(const ProbMeasure& source,
                                 std::span<const int> ns,
                                 std::span<const double> deltas,
                                 const RateSweepOptions& opts = {});

struct SliceRatioReport {
  int n = 0;
  double delta = 0.0;
  /// integral over base sequences y of mu_y^(x)n (A_joint) d xi^(x)n (y);
  /// equals the joint typical volume by the disintegration identity.
  double numerator = 0.0;
  double denominator = 0.0;  // xi^(x)n (A of the pushforward)
  double log_ratio_rate = 0.0;  // (1/n) log (numerator / denominator)
  double conditional_term = 0.0;  // from chain_rule_report
  /// Relative disagreement between the direct per-fiber grouping of the
  /// numerator and the identity-based value (must be <= 1e-12).
  double identity_residual = 0.0;
  bool defined = false;  // denominator > 0
  double joint_entropy = 0.0;
  double marginal_entropy = 0.0;
};

/// Exact slice-ratio experiment for a finite-support source under a
/// DiscreteMap or discrete ProductProjection disintegration. The
/// numerator is computed twice: directly as the fiber-grouped sum and via
/// the identity with the joint typical volume; disagreement beyond 1e-12
/// relative throws.
SliceRatioReport slice_ratio(const ProbMeasure& rho, const Disintegration& D,
                             int n, double delta,
                             const QuadratureOptions& opts = {});

namespace detail {
/// -(1/n) sum_i counts[i] log_f[i], compensated; shared by the exact and
/// Monte Carlo paths so boundary ties are decided identically.
double type_rate(std::span<const int> counts, std::span<const double> log_f,
                 int n);
/// Exact multinomial coefficient as a double (error-free integer path with
/// an lgamma fallback if the integer range is exceeded).
double multinomial(int n, std::span<const int> counts);
/// Enumerates all composition vectors of n into parts.size() bins.
void for_each_type(int n, int bins,
                   const std::function<void(std::span<const int>)>& cb);
}  // namespace detail

}  // namespace entlab
