#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "entlab/density.hpp"
#include "entlab/measure.hpp"

namespace entlab {

/// Normalization tolerances for make_prob: exact variants vs quadrature.
inline constexpr double kDiscreteNormTol = 1e-9;
inline constexpr double kContinuousNormTol = 1e-6;

/// Magnitude at which entropy quadrature partial sums are declared
/// divergent.
inline constexpr double kDivergenceLimit = 1e12;

/// A probability measure as (reference, density) with the density a
/// validated Radon-Nikodym derivative. Immutable; copies share payload.
class ProbMeasure {
 public:
  const ReferenceMeasure& reference() const { return reference_; }
  const Density& density() const { return density_; }
  /// |integral of the density - 1| observed at validation time.
  double normalization_residual() const { return residual_; }

 private:
  friend ProbMeasure make_prob(const ReferenceMeasure&, Density,
                               const QuadratureOptions&);
  friend ProbMeasure make_prob_unchecked(const ReferenceMeasure&, Density,
                                         double);
  ProbMeasure(ReferenceMeasure reference, Density density, double residual)
      : reference_(std::move(reference)),
        density_(std::move(density)),
        residual_(residual) {}

  ReferenceMeasure reference_;
  Density density_;
  double residual_;
};

/// Validates that the density is nonnegative and integrates to 1 within
/// tolerance (1e-9 discrete, 1e-6 continuous). Throws NegativeDensityError
/// or NormalizationError.
ProbMeasure make_prob(const ReferenceMeasure& mu, Density density,
                      const QuadratureOptions& opts = {});

/// Skips validation; for densities valid by construction (and for probing
/// failure paths deliberately).
ProbMeasure make_prob_unchecked(const ReferenceMeasure& mu, Density density,
                                double residual = 0.0);

struct EntropyValue {
  enum class Method { ExactSum, Quadrature, MonteCarlo };
  double value = 0.0;  // nats
  Method method = Method::ExactSum;
  double error_estimate = 0.0;
};

const char* method_name(EntropyValue::Method m);

/// Generalized differential entropy -integral of f log f dmu, in nats,
/// with 0 log 0 := 0. Exact summation for finite-support references,
/// quadrature otherwise; quadrature partial sums beyond 1e12 raise
/// DivergenceError.
EntropyValue entropy(const ProbMeasure& rho, const QuadratureOptions& opts = {});

/// D_KL(rho || mu) = -S_mu(rho) for a probability reference given over the
/// same ReferenceMeasure. Throws AbsoluteContinuityError when rho's density
/// is positive somewhere mu's vanishes.
double kl_divergence(const ProbMeasure& rho, const ProbMeasure& mu_prob,
                     const QuadratureOptions& opts = {});

struct RescaleResult {
  ProbMeasure prob;          // over alpha * mu, density f / alpha
  double entropy_shift;      // entropy(prob) - entropy(original) = ln(alpha)
};

/// Moves rho to the rescaled reference alpha * mu. The entropy over the
/// rescaled reference exceeds the original by ln(alpha); equivalently the
/// entropy over the un-scaled reference is smaller by ln(alpha).
RescaleResult rescale_reference(const ProbMeasure& rho, double alpha,
                                const QuadratureOptions& opts = {});

struct AffineResult {
  ProbMeasure prob;      // over the image box/interval
  double log_abs_det;    // predicted entropy shift
};

/// Pushforward of rho under x -> A x + b for diagonal invertible A over an
/// Interval or LebesgueBox reference. The image density is
/// f(A^{-1}(y - b)) / |det A|; the entropy increases by log|det A|.
/// Throws LinAlgError for singular or non-diagonal maps.
AffineResult affine_pushforward(const ProbMeasure& rho,
                                const Eigen::MatrixXd& A,
                                const Eigen::VectorXd& b,
                                const QuadratureOptions& opts = {});

/// Reusable sampler for a probability measure: cumulative weights for
/// finite supports, rejection against the normalized reference otherwise.
/// Not safe to share across threads (it tracks rejection efficiency);
/// give each worker its own copy.
class Sampler {
 public:
  explicit Sampler(ProbMeasure rho);

  int dim() const { return dim_; }
  bool discrete() const { return discrete_; }

  /// Draws one point into out (dim() coordinates). Deterministic given the
  /// Rng state. Throws RejectionError if the acceptance rate falls below
  /// 1e-4 over a large window.
  void draw(Rng& rng, std::span<double> out) const;

  /// Finite-support fast path: draws the flat atom index.
  int draw_index(Rng& rng) const;

  const FlatDiscrete& flat() const;

 private:
  ProbMeasure rho_;
  int dim_;
  bool discrete_;
  std::shared_ptr<const FlatDiscrete> flat_;
  std::vector<double> cdf_;
  double sup_ = 0.0;
  mutable std::int64_t proposals_ = 0;
  mutable std::int64_t accepts_ = 0;
};

/// count i.i.d. draws from rho as rows; deterministic per seed.
Eigen::MatrixXd sample(const ProbMeasure& rho, std::int64_t count,
                       std::uint64_t seed);

}  // namespace entlab
