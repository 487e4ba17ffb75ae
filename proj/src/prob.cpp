#include "entlab/prob.hpp"

#include <cmath>

namespace entlab {

namespace {

double plogp(double f) {
  return f > 0.0 ? f * std::log(f) : 0.0;
}

}  // namespace

ProbMeasure make_prob(const ReferenceMeasure& mu, Density density,
                      const QuadratureOptions& opts) {
  const auto mass = integrate(
      mu,
      [&](std::span<const double> x) {
        const double v = density(x);
        if (v < 0.0) {
          throw NegativeDensityError("density is negative at point " +
                                     detail::point_to_string(x));
        }
        return v;
      },
      opts);
  const double tol = mu.discrete_support() ? kDiscreteNormTol : kContinuousNormTol;
  const double residual = std::fabs(mass.value - 1.0);
  if (residual > tol) {
    throw NormalizationError(
        "density integrates to " + std::to_string(mass.value) +
        ", residual " + std::to_string(residual) + " exceeds tolerance " +
        std::to_string(tol));
  }
  return ProbMeasure(mu, std::move(density), residual);
}

ProbMeasure make_prob_unchecked(const ReferenceMeasure& mu, Density density,
                                double residual) {
  return ProbMeasure(mu, std::move(density), residual);
}

const char* method_name(EntropyValue::Method m) {
  switch (m) {
    case EntropyValue::Method::ExactSum:
      return "exact-sum";
    case EntropyValue::Method::Quadrature:
      return "quadrature";
    case EntropyValue::Method::MonteCarlo:
      return "monte-carlo";
  }
  return "unknown";
}

EntropyValue entropy(const ProbMeasure& rho, const QuadratureOptions& opts) {
  const auto& f = rho.density();
  if (rho.reference().discrete_support()) {
    const auto res = integrate(rho.reference(),
                               [&](std::span<const double> x) { return plogp(f(x)); });
    return EntropyValue{-res.value, EntropyValue::Method::ExactSum, 0.0};
  }
  QuadratureOptions o = opts;
  o.partial_sum_limit = kDivergenceLimit;
  const auto res =
      integrate(rho.reference(),
                [&](std::span<const double> x) { return plogp(f(x)); }, o);
  return EntropyValue{-res.value, EntropyValue::Method::Quadrature, res.error};
}

double kl_divergence(const ProbMeasure& rho, const ProbMeasure& mu_prob,
                     const QuadratureOptions& opts) {
  if (!references_equal(rho.reference(), mu_prob.reference())) {
    throw Error("kl_divergence requires both measures over the identical reference");
  }
  const auto& fr = rho.density();
  const auto& fm = mu_prob.density();
  const auto res = integrate(
      rho.reference(),
      [&](std::span<const double> x) {
        const double a = fr(x);
        if (a == 0.0) return 0.0;
        const double b = fm(x);
        if (b == 0.0) {
          throw AbsoluteContinuityError(
              "rho has positive density where mu vanishes, at point " +
              detail::point_to_string(x));
        }
        return a * std::log(a / b);
      },
      opts);
  return res.value;
}

RescaleResult rescale_reference(const ProbMeasure& rho, double alpha,
                                const QuadratureOptions& opts) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error("rescale factor must be strictly positive");
  }
  const ReferenceMeasure nu = rho.reference().scaled(alpha);
  const Density f = rho.density();
  Density g(f.name(),
            [f, alpha](std::span<const double> x) { return f(x) / alpha; },
            f.sup_bound() / alpha);
  return RescaleResult{make_prob(nu, std::move(g), opts), std::log(alpha)};
}

AffineResult affine_pushforward(const ProbMeasure& rho,
                                const Eigen::MatrixXd& A,
                                const Eigen::VectorXd& b,
                                const QuadratureOptions& opts) {
  Eigen::VectorXd lo, hi;
  const auto& data = rho.reference().data();
  if (const auto* iv = std::get_if<Interval>(&data)) {
    lo = Eigen::VectorXd::Constant(1, iv->a);
    hi = Eigen::VectorXd::Constant(1, iv->b);
  } else if (const auto* bx = std::get_if<LebesgueBox>(&data)) {
    lo = bx->lower;
    hi = bx->upper;
  } else {
    throw Error("affine_pushforward requires an Interval or LebesgueBox reference");
  }
  const int d = static_cast<int>(lo.size());
  if (A.rows() != d || A.cols() != d || b.size() != d) {
    throw LinAlgError("affine map dimensions do not match the reference");
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j && A(i, j) != 0.0) {
        throw LinAlgError(
            "affine_pushforward supports axis-aligned (diagonal) maps only: "
            "the image of a box support must again be a box");
      }
    }
  }
  double log_abs_det = 0.0;
  Eigen::VectorXd diag(d), inv_diag(d), nlo(d), nhi(d);
  for (int i = 0; i < d; ++i) {
    diag[i] = A(i, i);
    if (diag[i] == 0.0 || !std::isfinite(diag[i])) {
      throw LinAlgError("affine map is singular on axis " + std::to_string(i));
    }
    inv_diag[i] = 1.0 / diag[i];
    log_abs_det += std::log(std::fabs(diag[i]));
    const double y0 = diag[i] * lo[i] + b[i];
    const double y1 = diag[i] * hi[i] + b[i];
    nlo[i] = std::min(y0, y1);
    nhi[i] = std::max(y0, y1);
  }
  const double inv_abs_det = std::exp(-log_abs_det);
  ReferenceMeasure image =
      (d == 1) ? ReferenceMeasure::interval(nlo[0], nhi[0])
               : ReferenceMeasure::box(nlo, nhi);
  image = image.scaled(rho.reference().scale());
  const Density f = rho.density();
  const Eigen::VectorXd shift = b;
  Density g(f.name() + "-pushforward",
            [f, inv_diag, shift, inv_abs_det, d](std::span<const double> y) {
              Eigen::VectorXd x(d);
              for (int i = 0; i < d; ++i) {
                x[i] = (y[static_cast<size_t>(i)] - shift[i]) * inv_diag[i];
              }
              return f(std::span<const double>(x.data(),
                                               static_cast<size_t>(d))) *
                     inv_abs_det;
            },
            f.sup_bound() * inv_abs_det);
  return AffineResult{make_prob(image, std::move(g), opts), log_abs_det};
}

Sampler::Sampler(ProbMeasure rho)
    : rho_(std::move(rho)),
      dim_(rho_.reference().point_dim()),
      discrete_(rho_.reference().discrete_support()) {
  if (discrete_) {
    auto flat = std::make_shared<FlatDiscrete>(flatten_discrete(rho_.reference()));
    cdf_.reserve(static_cast<size_t>(flat->size()));
    KahanSum acc;
    Eigen::VectorXd row(flat->points.cols());
    for (int i = 0; i < flat->size(); ++i) {
      row = flat->points.row(i);
      const double fi = rho_.density()(
          std::span<const double>(row.data(), static_cast<size_t>(row.size())));
      acc.add(flat->masses[i] * fi);
      cdf_.push_back(acc.value());
    }
    flat_ = std::move(flat);
  } else {
    sup_ = rho_.density().sup_bound();
    if (!(sup_ > 0.0) || !std::isfinite(sup_)) {
      throw Error("rejection sampling needs a positive finite density bound");
    }
  }
}

const FlatDiscrete& Sampler::flat() const {
  if (!flat_) throw Error("sampler has no finite-support view");
  return *flat_;
}

int Sampler::draw_index(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = static_cast<int>(it - cdf_.begin());
  return std::min(idx, static_cast<int>(cdf_.size()) - 1);
}

void Sampler::draw(Rng& rng, std::span<double> out) const {
  if (discrete_) {
    const int i = draw_index(rng);
    for (int c = 0; c < flat_->points.cols(); ++c) {
      out[static_cast<size_t>(c)] = flat_->points(i, c);
    }
    return;
  }
  // Rejection against the normalized reference.
  while (true) {
    ++proposals_;
    sample_reference_point(rho_.reference(), rng, out);
    const double f = rho_.density()(std::span<const double>(out.data(), out.size()));
    if (rng.uniform() * sup_ <= f) {
      ++accepts_;
      return;
    }
    if (proposals_ % 100000 == 0) {
      const double eff = static_cast<double>(accepts_) /
                         static_cast<double>(proposals_);
      if (eff < 1e-4) {
        throw RejectionError(
            "rejection efficiency " + std::to_string(eff) + " after " +
            std::to_string(proposals_) + " proposals (accepts " +
            std::to_string(accepts_) + ", density bound " +
            std::to_string(sup_) + ")");
      }
    }
  }
}

Eigen::MatrixXd sample(const ProbMeasure& rho, std::int64_t count,
                       std::uint64_t seed) {
  if (count <= 0) throw Error("sample count must be positive");
  Sampler s(rho);
  Rng rng(seed);
  Eigen::MatrixXd out(count, s.dim());
  std::vector<double> row(static_cast<size_t>(s.dim()));
  for (std::int64_t i = 0; i < count; ++i) {
    s.draw(rng, row);
    for (int c = 0; c < s.dim(); ++c) out(i, c) = row[static_cast<size_t>(c)];
  }
  return out;
}

}  // namespace entlab
