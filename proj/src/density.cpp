#include "entlab/density.hpp"

#include <algorithm>
#include <cmath>

namespace entlab::densities {

namespace {

double gauss_z(double lo, double hi, double mean, double sigma) {
  // Mass of N(mean, sigma^2) on [lo, hi].
  const double s = sigma * std::numbers::sqrt2;
  return 0.5 * (std::erf((hi - mean) / s) - std::erf((lo - mean) / s));
}

double gauss_pdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) /
         (sigma * std::sqrt(2.0 * std::numbers::pi));
}

const Annulus2D& require_annulus(const ReferenceMeasure& mu) {
  const auto* an = std::get_if<Annulus2D>(&mu.data());
  if (an == nullptr) {
    throw Error("this density preset requires an Annulus2D reference");
  }
  return *an;
}

// Axis-aligned Lebesgue support: Interval, LebesgueBox, or products of
// them. Returns per-axis bounds and the product of all scale factors.
void rect_support(const ReferenceMeasure& mu, std::vector<double>& lo,
                  std::vector<double>& hi, double& scale) {
  scale *= mu.scale();
  if (const auto* iv = std::get_if<Interval>(&mu.data())) {
    lo.push_back(iv->a);
    hi.push_back(iv->b);
  } else if (const auto* bx = std::get_if<LebesgueBox>(&mu.data())) {
    for (int i = 0; i < bx->lower.size(); ++i) {
      lo.push_back(bx->lower[i]);
      hi.push_back(bx->upper[i]);
    }
  } else if (const auto* pr = std::get_if<Product>(&mu.data())) {
    rect_support(*pr->left, lo, hi, scale);
    rect_support(*pr->right, lo, hi, scale);
  } else {
    throw Error(
        "truncated-gaussian requires an Interval, LebesgueBox, or a product "
        "of them");
  }
}

}  // namespace

Density uniform(const ReferenceMeasure& mu) {
  const double f = 1.0 / total_mass(mu);
  return Density("uniform", [f](std::span<const double>) { return f; }, f);
}

Density pmf(const ReferenceMeasure& mu, Eigen::VectorXd probs) {
  auto flat = std::make_shared<FlatDiscrete>(flatten_discrete(mu));
  if (probs.size() != flat->masses.size()) {
    throw Error("pmf length must equal the number of atoms (" +
                std::to_string(flat->masses.size()) + ")");
  }
  double sup = 0.0;
  auto values = std::make_shared<Eigen::VectorXd>(probs.size());
  for (int i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i])) {
      throw Error("pmf entries must be nonnegative and finite");
    }
    (*values)[i] = probs[i] / flat->masses[i];
    sup = std::max(sup, (*values)[i]);
  }
  return Density(
      "pmf",
      [flat, values](std::span<const double> x) {
        return (*values)[flat->index_of(x)];
      },
      sup);
}

Density bernoulli(const ReferenceMeasure& mu, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("bernoulli p must lie in [0, 1]");
  Eigen::VectorXd probs(2);
  probs << 1.0 - p, p;
  auto flat = flatten_discrete(mu);
  if (flat.size() != 2) {
    throw Error("bernoulli preset requires a two-atom reference");
  }
  Density d = pmf(mu, probs);
  return Density("bernoulli", [d](std::span<const double> x) { return d(x); },
                 d.sup_bound());
}

Density bernoulli_product(const ReferenceMeasure& mu, std::vector<double> ps) {
  auto flat = flatten_discrete(mu);
  if (flat.radix.size() != ps.size()) {
    throw Error("bernoulli-product needs one p per factor");
  }
  for (size_t d = 0; d < ps.size(); ++d) {
    if (flat.radix[d] != 2) {
      throw Error("bernoulli-product requires binary factors");
    }
    if (!(ps[d] >= 0.0 && ps[d] <= 1.0)) {
      throw Error("bernoulli-product probabilities must lie in [0, 1]");
    }
  }
  Eigen::VectorXd probs(flat.size());
  for (int i = 0; i < flat.size(); ++i) {
    double v = 1.0;
    for (size_t d = 0; d < ps.size(); ++d) {
      v *= flat.points(i, static_cast<long>(d)) > 0.5 ? ps[d] : 1.0 - ps[d];
    }
    probs[i] = v;
  }
  Density d = pmf(mu, probs);
  return Density("bernoulli-product",
                 [d](std::span<const double> x) { return d(x); },
                 d.sup_bound());
}

Density truncated_gaussian(const ReferenceMeasure& mu, Eigen::VectorXd mean,
                           Eigen::VectorXd sigma) {
  std::vector<double> lov, hiv;
  double scale = 1.0;
  rect_support(mu, lov, hiv, scale);
  const Eigen::VectorXd lo =
      Eigen::Map<Eigen::VectorXd>(lov.data(), static_cast<long>(lov.size()));
  const Eigen::VectorXd hi =
      Eigen::Map<Eigen::VectorXd>(hiv.data(), static_cast<long>(hiv.size()));
  const int d = static_cast<int>(lo.size());
  if (mean.size() != d || sigma.size() != d) {
    throw Error("truncated-gaussian mean/sigma must match the dimension");
  }
  Eigen::VectorXd norm(d);
  double sup = 1.0 / scale;
  for (int i = 0; i < d; ++i) {
    if (!(sigma[i] > 0.0)) throw Error("truncated-gaussian sigma must be > 0");
    norm[i] = gauss_z(lo[i], hi[i], mean[i], sigma[i]);
    if (!(norm[i] > 0.0)) {
      throw Error("truncated-gaussian support mass underflows");
    }
    const double peak_x = std::clamp(mean[i], lo[i], hi[i]);
    sup *= gauss_pdf(peak_x, mean[i], sigma[i]) / norm[i];
  }
  return Density(
      "truncated-gaussian",
      [mean, sigma, norm, scale, d](std::span<const double> x) {
        double v = 1.0 / scale;
        for (int i = 0; i < d; ++i) {
          v *= gauss_pdf(x[static_cast<size_t>(i)], mean[i], sigma[i]) / norm[i];
        }
        return v;
      },
      sup);
}

Density annulus_radial_uniform(const ReferenceMeasure& mu) {
  const auto& an = require_annulus(mu);
  const double p = 1.0 / (an.r_max - an.r_min);
  const double scale = mu.scale();
  return Density(
      "annulus-radial-uniform",
      [p, scale](std::span<const double> x) {
        const double r = std::hypot(x[0], x[1]);
        return p / (2.0 * std::numbers::pi * r * scale);
      },
      p / (2.0 * std::numbers::pi * an.r_min * scale));
}

Density annulus_radial_gaussian(const ReferenceMeasure& mu, double mean,
                                double sigma) {
  const auto& an = require_annulus(mu);
  if (!(sigma > 0.0)) throw Error("radial sigma must be > 0");
  const double z = gauss_z(an.r_min, an.r_max, mean, sigma);
  if (!(z > 0.0)) throw Error("radial gaussian support mass underflows");
  const double scale = mu.scale();
  const double peak_r = std::clamp(mean, an.r_min, an.r_max);
  const double sup =
      gauss_pdf(peak_r, mean, sigma) / (z * 2.0 * std::numbers::pi * an.r_min * scale);
  return Density(
      "annulus-radial-gaussian",
      [mean, sigma, z, scale](std::span<const double> x) {
        const double r = std::hypot(x[0], x[1]);
        return gauss_pdf(r, mean, sigma) /
               (z * 2.0 * std::numbers::pi * r * scale);
      },
      sup);
}

Density grid1d(const ReferenceMeasure& mu, std::vector<double> values) {
  const auto* iv = std::get_if<Interval>(&mu.data());
  if (iv == nullptr) throw Error("grid density requires an Interval reference");
  if (values.size() < 2) throw Error("grid density needs at least two nodes");
  double sup = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error("grid density values must be nonnegative and finite");
    }
    sup = std::max(sup, v);
  }
  const double a = iv->a;
  const double h = (iv->b - iv->a) / static_cast<double>(values.size() - 1);
  const double scale = mu.scale();
  auto vals = std::make_shared<std::vector<double>>(std::move(values));
  return Density(
      "grid",
      [vals, a, h, scale](std::span<const double> x) {
        const double t = (x[0] - a) / h;
        const auto n = static_cast<long>(vals->size());
        long k = static_cast<long>(std::floor(t));
        k = std::clamp(k, 0L, n - 2);
        const double w = std::clamp(t - static_cast<double>(k), 0.0, 1.0);
        const double v = (*vals)[static_cast<size_t>(k)] * (1.0 - w) +
                         (*vals)[static_cast<size_t>(k + 1)] * w;
        return v / scale;
      },
      sup / scale);
}

}  // namespace entlab::densities
