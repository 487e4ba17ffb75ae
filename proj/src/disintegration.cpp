#include "entlab/disintegration.hpp"

#include <algorithm>
#include <cmath>

namespace entlab {

struct Disintegration::Impl {
  Kind kind;
  ReferenceMeasure total;
  ReferenceMeasure base;
  double fiber_mass_bound = 0.0;

  // Discrete kinds (DiscreteMap, GroupQuotient, discrete ProductProjection).
  std::vector<int> map;                       // total flat atom -> base atom
  std::vector<std::vector<int>> fiber_atoms;  // base atom -> total flat atoms
  std::vector<Eigen::VectorXd> fiber_weights; // matching nu_t weights
  std::optional<FlatDiscrete> tflat, bflat;

  // GroupQuotient.
  std::optional<FiniteGroup> group;
  std::optional<CosetStructure> cs;
  std::vector<int> section;
  double fiber_scale = 1.0;

  Impl(Kind k, ReferenceMeasure t, ReferenceMeasure b)
      : kind(k), total(std::move(t)), base(std::move(b)) {}

  void build_discrete_fibers();
};

Disintegration::Disintegration(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

Disintegration::Kind Disintegration::kind() const { return impl_->kind; }
const ReferenceMeasure& Disintegration::total() const { return impl_->total; }
const ReferenceMeasure& Disintegration::base() const { return impl_->base; }
double Disintegration::fiber_mass_bound() const { return impl_->fiber_mass_bound; }

const std::vector<int>& Disintegration::index_map() const {
  if (impl_->map.empty()) {
    throw Error("index_map is only available for discrete disintegrations");
  }
  return impl_->map;
}

const FlatDiscrete& Disintegration::total_flat() const {
  if (!impl_->tflat) {
    throw Error("flat view is only available for discrete disintegrations");
  }
  return *impl_->tflat;
}

const FlatDiscrete& Disintegration::base_flat() const {
  if (!impl_->bflat) {
    throw Error("flat view is only available for discrete disintegrations");
  }
  return *impl_->bflat;
}

const CosetStructure& Disintegration::cosets() const {
  if (!impl_->cs) throw Error("cosets are only available for GroupQuotient");
  return *impl_->cs;
}

void Disintegration::Impl::build_discrete_fibers() {
  const auto& tf = *tflat;
  const auto& bf = *bflat;
  fiber_atoms.assign(static_cast<size_t>(bf.size()), {});
  for (int i = 0; i < tf.size(); ++i) {
    const int t = map[static_cast<size_t>(i)];
    if (t < 0 || t >= bf.size()) {
      throw Error("map value " + std::to_string(t) + " out of base range");
    }
    fiber_atoms[static_cast<size_t>(t)].push_back(i);
  }
  fiber_weights.clear();
  double bound = 0.0;
  for (int t = 0; t < bf.size(); ++t) {
    const auto& atoms = fiber_atoms[static_cast<size_t>(t)];
    if (atoms.empty()) {
      throw Error("base atom " + std::to_string(t) +
                  " has an empty fiber; the kernel cannot reconstruct it");
    }
    Eigen::VectorXd w(static_cast<long>(atoms.size()));
    for (size_t k = 0; k < atoms.size(); ++k) {
      w[static_cast<long>(k)] = tf.masses[atoms[k]] / bf.masses[t];
    }
    bound = std::max(bound, w.sum());
    fiber_weights.push_back(std::move(w));
  }
  fiber_mass_bound = bound;
}

Disintegration Disintegration::discrete_map(const ReferenceMeasure& total,
                                            std::vector<int> map,
                                            const ReferenceMeasure& base) {
  auto impl = std::make_shared<Impl>(Kind::DiscreteMap, total, base);
  impl->tflat = flatten_discrete(total);
  impl->bflat = flatten_discrete(base);
  if (static_cast<int>(map.size()) != impl->tflat->size()) {
    throw Error("map must assign a base atom to each total atom");
  }
  impl->map = std::move(map);
  impl->build_discrete_fibers();
  return Disintegration(std::move(impl));
}

Disintegration Disintegration::product_projection(
    const ReferenceMeasure& product) {
  const auto* pr = std::get_if<Product>(&product.data());
  if (pr == nullptr) {
    throw Error("product_projection requires a Product measure");
  }
  auto impl = std::make_shared<Impl>(Kind::ProductProjection, product,
                                     pr->left->scaled(product.scale()));
  impl->fiber_mass_bound = total_mass(*pr->right);
  if (product.discrete_support()) {
    impl->tflat = flatten_discrete(product);
    impl->bflat = flatten_discrete(impl->base);
    const int rn = impl->tflat->size() / impl->bflat->size();
    impl->map.resize(static_cast<size_t>(impl->tflat->size()));
    for (int i = 0; i < impl->tflat->size(); ++i) {
      impl->map[static_cast<size_t>(i)] = i / rn;  // left digit varies slowest
    }
    impl->build_discrete_fibers();
  }
  return Disintegration(std::move(impl));
}

Disintegration Disintegration::polar(const ReferenceMeasure& annulus) {
  const auto* an = std::get_if<Annulus2D>(&annulus.data());
  if (an == nullptr) {
    throw Error("polar disintegration requires an Annulus2D measure");
  }
  auto impl = std::make_shared<Impl>(
      Kind::Polar, annulus,
      ReferenceMeasure::interval(an->r_min, an->r_max).scaled(annulus.scale()));
  impl->fiber_mass_bound = 2.0 * std::numbers::pi * an->r_max;
  return Disintegration(std::move(impl));
}

Disintegration Disintegration::group_quotient(
    const FiniteGroup& G, std::vector<int> subgroup, double total_scale,
    double base_scale, std::optional<double> fiber_scale,
    std::optional<std::vector<int>> section) {
  if (!(total_scale > 0.0) || !(base_scale > 0.0)) {
    throw Error("Haar scales must be strictly positive");
  }
  CosetStructure cs = coset_structure(G, std::move(subgroup));
  const double derived = total_scale / base_scale;
  if (fiber_scale) {
    // Canonical relation: the three scales must satisfy
    // total = base * fiber exactly up to roundoff.
    if (std::fabs(*fiber_scale - derived) >
        1e-12 * std::max(1.0, std::fabs(derived))) {
      throw Error(
          "Haar scales violate the canonical relation total = base * fiber");
    }
  }
  const double fscale = fiber_scale.value_or(derived);

  auto impl = std::make_shared<Impl>(
      Kind::GroupQuotient, ReferenceMeasure::group_haar(G, total_scale),
      ReferenceMeasure::group_haar(cs.quotient, base_scale));
  impl->fiber_scale = fscale;
  impl->fiber_mass_bound = fscale * static_cast<double>(cs.subgroup.size());
  if (section) {
    if (section->size() != cs.cosets.size()) {
      throw Error("section must pick one representative per coset");
    }
    for (size_t c = 0; c < section->size(); ++c) {
      if (cs.coset_of[static_cast<size_t>((*section)[c])] !=
          static_cast<int>(c)) {
        throw Error("section element " + std::to_string((*section)[c]) +
                    " does not lie in coset " + std::to_string(c));
      }
    }
    cs.section = *section;
  }
  impl->section = cs.section;
  impl->group = G;

  impl->tflat = flatten_discrete(impl->total);
  impl->bflat = flatten_discrete(impl->base);
  impl->map.resize(static_cast<size_t>(G.order()));
  for (int g = 0; g < G.order(); ++g) {
    impl->map[static_cast<size_t>(g)] = cs.coset_of[static_cast<size_t>(g)];
  }
  // nu_[g] is the image of (fiber_scale x counting on H) under h -> rep h;
  // enumerate fiber atoms in that order rather than ascending, so the
  // representative choice is visible to nothing but the embedding.
  impl->fiber_atoms.assign(cs.cosets.size(), {});
  impl->fiber_weights.clear();
  for (size_t c = 0; c < cs.cosets.size(); ++c) {
    const int rep = cs.section[c];
    std::vector<int>& atoms = impl->fiber_atoms[c];
    for (int h : cs.subgroup) atoms.push_back(G.op(rep, h));
    impl->fiber_weights.push_back(Eigen::VectorXd::Constant(
        static_cast<long>(atoms.size()), fscale));
  }
  impl->cs = std::move(cs);
  return Disintegration(std::move(impl));
}

FiberView Disintegration::fiber(std::span<const double> t) const {
  const Impl& im = *impl_;
  switch (im.kind) {
    case Kind::Polar: {
      const double r = t[0];
      return FiberView{
          ReferenceMeasure::circle(r),
          [r](std::span<const double> local, std::span<double> out) {
            out[0] = r * std::cos(local[0]);
            out[1] = r * std::sin(local[0]);
          }};
    }
    case Kind::ProductProjection: {
      const auto& pr = std::get<Product>(im.total.data());
      std::vector<double> tv(t.begin(), t.end());
      return FiberView{
          *pr.right,
          [tv](std::span<const double> local, std::span<double> out) {
            std::copy(tv.begin(), tv.end(), out.begin());
            std::copy(local.begin(), local.end(), out.begin() + tv.size());
          }};
    }
    case Kind::DiscreteMap:
    case Kind::GroupQuotient: {
      const int bt = im.bflat->index_of(t);
      const auto& atoms = im.fiber_atoms[static_cast<size_t>(bt)];
      std::vector<std::string> labels;
      labels.reserve(atoms.size());
      for (int a : atoms) labels.push_back(im.tflat->labels[static_cast<size_t>(a)]);
      ReferenceMeasure nu = ReferenceMeasure::discrete(
          im.fiber_weights[static_cast<size_t>(bt)], std::move(labels));
      // Local atom k sits at the total-space point of its global atom.
      const auto* tf = &*im.tflat;
      std::vector<int> atom_copy = atoms;
      return FiberView{
          std::move(nu),
          [tf, atom_copy](std::span<const double> local, std::span<double> out) {
            const int k = static_cast<int>(std::lround(local[0]));
            const int g = atom_copy[static_cast<size_t>(k)];
            for (int c = 0; c < tf->points.cols(); ++c) {
              out[static_cast<size_t>(c)] = tf->points(g, c);
            }
          }};
    }
  }
  throw Error("unreachable disintegration kind");
}

std::vector<std::function<double(std::span<const double>)>>
default_validation_battery(int dim, std::uint64_t seed, int count) {
  std::vector<std::function<double(std::span<const double>)>> out;
  Rng rng(seed);
  for (int k = 0; k < count; ++k) {
    const double a0 = rng.uniform(-1.0, 1.0);
    std::array<double, 2> amp{}, phase{};
    std::vector<double> freq(static_cast<size_t>(dim) * 2);
    for (int j = 0; j < 2; ++j) {
      amp[static_cast<size_t>(j)] = rng.uniform(-1.0, 1.0);
      phase[static_cast<size_t>(j)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int d = 0; d < dim; ++d) {
        freq[static_cast<size_t>(j * dim + d)] = rng.uniform(-2.0, 2.0);
      }
    }
    const double couple = rng.uniform(-1.0, 1.0);
    std::vector<double> kappa(static_cast<size_t>(dim)), psi(static_cast<size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      kappa[static_cast<size_t>(d)] = rng.uniform(-2.0, 2.0);
      psi[static_cast<size_t>(d)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    out.push_back([a0, amp, phase, freq, couple, kappa, psi,
                   dim](std::span<const double> x) {
      double v = a0;
      for (int j = 0; j < 2; ++j) {
        double arg = phase[static_cast<size_t>(j)];
        for (int d = 0; d < dim; ++d) {
          arg += freq[static_cast<size_t>(j * dim + d)] * x[static_cast<size_t>(d)];
        }
        v += amp[static_cast<size_t>(j)] * std::sin(arg);
      }
      double prod = couple;
      for (int d = 0; d < dim; ++d) {
        prod *= std::cos(kappa[static_cast<size_t>(d)] * x[static_cast<size_t>(d)] +
                         psi[static_cast<size_t>(d)]);
      }
      return v + prod;
    });
  }
  return out;
}

double validate_disintegration(
    const Disintegration& D,
    std::span<const std::function<double(std::span<const double>)>> battery,
    const QuadratureOptions& opts) {
  if (battery.empty()) throw Error("validation battery must be nonempty");
  const int tdim = D.total().point_dim();
  double worst = 0.0;
  for (const auto& f : battery) {
    const double lhs = integrate(D.total(), f, opts).value;
    const double rhs =
        integrate(
            D.base(),
            [&](std::span<const double> t) {
              FiberView fv = D.fiber(t);
              return integrate(fv.measure, on_fiber(fv, tdim, f), opts).value;
            },
            opts)
            .value;
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  return worst;
}

double validate_disintegration(const Disintegration& D, std::uint64_t seed,
                               const QuadratureOptions& opts) {
  const auto battery = default_validation_battery(D.total().point_dim(), seed);
  return validate_disintegration(D, battery, opts);
}

ProbMeasure pushforward(const ProbMeasure& rho, const Disintegration& D,
                        const QuadratureOptions& opts) {
  if (!references_equal(rho.reference(), D.total())) {
    throw Error("pushforward: rho's reference is not the disintegration's "
                "total measure");
  }
  const int tdim = D.total().point_dim();
  const Density f = rho.density();
  Density g("pushforward(" + f.name() + ")",
            [D, f, tdim, opts](std::span<const double> t) {
              FiberView fv = D.fiber(t);
              return integrate(fv.measure, on_fiber(fv, tdim, f), opts).value;
            },
            f.sup_bound() * D.fiber_mass_bound());
  return make_prob(D.base(), std::move(g), opts);
}

FiberConditional fiber_conditional(const ProbMeasure& rho,
                                   const Disintegration& D,
                                   std::span<const double> t,
                                   const QuadratureOptions& opts) {
  if (!references_equal(rho.reference(), D.total())) {
    throw Error("fiber_conditional: rho's reference is not the "
                "disintegration's total measure");
  }
  const int tdim = D.total().point_dim();
  FiberView fv = D.fiber(t);
  const Density f = rho.density();
  const double mass =
      integrate(fv.measure, on_fiber(fv, tdim, f), opts).value;
  if (!(mass > 0.0)) {
    throw ZeroMassFiberError(
        "conditional undefined at base point " + detail::point_to_string(t) +
        ": pushforward density is " + std::to_string(mass));
  }
  Density unnorm("fiber-restriction(" + f.name() + ")",
                 [embed = fv.embed, f,
                  buf = std::vector<double>(static_cast<size_t>(tdim))](
                     std::span<const double> local) mutable {
                   embed(local, buf);
                   return f(std::span<const double>(buf.data(), buf.size()));
                 },
                 f.sup_bound());
  Density cond("fiber-conditional(" + f.name() + ")",
               [unnorm, mass](std::span<const double> local) {
                 return unnorm(local) / mass;
               },
               unnorm.sup_bound() / mass);
  return FiberConditional{make_prob(fv.measure, std::move(cond), opts), mass,
                          std::move(unnorm), std::move(fv)};
}

namespace {

double plogp(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

/// Entropy of the conditional on the fiber at t, given the pushforward
/// density there; 0-mass fibers return 0 (they carry no T_* rho mass).
double fiber_entropy_at(const Disintegration& D, const Density& f, int tdim,
                        std::span<const double> t, double g,
                        const QuadratureOptions& opts) {
  if (!(g > 0.0)) return 0.0;
  FiberView fv = D.fiber(t);
  auto restricted = on_fiber(fv, tdim, [&f](std::span<const double> x) {
    return f(x);
  });
  const double s =
      integrate(
          fv.measure,
          [&](std::span<const double> local) { return plogp(restricted(local) / g); },
          opts)
          .value;
  return -s;
}

}  // namespace

ChainRuleReport chain_rule_report(const ProbMeasure& rho,
                                  const Disintegration& D,
                                  const QuadratureOptions& opts) {
  ChainRuleReport rep;
  const bool exact =
      D.total().discrete_support() && D.base().discrete_support();
  rep.tolerance = exact ? 1e-12 : 1e-4;
  rep.method = exact ? EntropyValue::Method::ExactSum
                     : EntropyValue::Method::Quadrature;

  const EntropyValue total = entropy(rho, opts);
  rep.total = total.value;

  const ProbMeasure push = pushforward(rho, D, opts);
  rep.marginal = entropy(push, opts).value;

  const int tdim = D.total().point_dim();
  const Density& f = rho.density();
  rep.conditional =
      integrate(
          D.base(),
          [&](std::span<const double> t) {
            const double g = push.density()(t);
            if (!(g > 0.0)) return 0.0;
            return g * fiber_entropy_at(D, f, tdim, t, g, opts);
          },
          opts)
          .value;
  rep.discrepancy = std::fabs(rep.total - rep.marginal - rep.conditional);

  // Per-fiber table: every atom for discrete bases, a fixed grid otherwise.
  if (D.base().discrete_support()) {
    const FlatDiscrete bf = flatten_discrete(D.base());
    Eigen::VectorXd row(bf.points.cols());
    for (int t = 0; t < bf.size(); ++t) {
      row = bf.points.row(t);
      const std::span<const double> ts(row.data(), static_cast<size_t>(row.size()));
      const double g = push.density()(ts);
      if (!(g > 0.0)) continue;  // carries no mass; conditional undefined
      rep.fibers.push_back(FiberTableRow{bf.labels[static_cast<size_t>(t)],
                                         static_cast<double>(t),
                                         fiber_entropy_at(D, f, tdim, ts, g, opts),
                                         g});
    }
  } else {
    const auto& iv = std::get<Interval>(D.base().data());
    for (int k = 0; k < kFiberTableRows; ++k) {
      const double r =
          iv.a + (iv.b - iv.a) * static_cast<double>(k) / (kFiberTableRows - 1);
      const std::span<const double> ts(&r, 1);
      const double g = push.density()(ts);
      FiberTableRow rowr;
      rowr.label = "";
      rowr.t = r;
      rowr.pushforward_density = g;
      rowr.fiber_entropy =
          (g > 0.0) ? fiber_entropy_at(D, f, tdim, ts, g, opts) : 0.0;
      rep.fibers.push_back(std::move(rowr));
    }
  }
  return rep;
}

DeformedPolarReport deformed_chain_rule_comparison(const ProbMeasure& rho,
                                                   const QuadratureOptions& opts) {
  const auto* an = std::get_if<Annulus2D>(&rho.reference().data());
  if (an == nullptr) {
    throw Error("deformed_chain_rule_comparison requires an Annulus2D measure");
  }
  DeformedPolarReport rep;
  rep.polar = chain_rule_report(rho, Disintegration::polar(rho.reference()), opts);

  rep.mean_log_radius =
      integrate(
          rho.reference(),
          [&](std::span<const double> x) {
            const double f = rho.density()(x);
            return f > 0.0 ? f * std::log(std::hypot(x[0], x[1])) : 0.0;
          },
          opts)
          .value;

  // Flat route: the (R, Theta) law has density r f(r, theta) w.r.t. dr dtheta.
  const ReferenceMeasure flat_ref =
      ReferenceMeasure::product(
          ReferenceMeasure::interval(an->r_min, an->r_max),
          ReferenceMeasure::interval(0.0, 2.0 * std::numbers::pi))
          .scaled(rho.reference().scale());
  const Density f = rho.density();
  Density flat_density(
      "polar-coordinates(" + f.name() + ")",
      [f](std::span<const double> rt) {
        const double r = rt[0];
        const double xy[2] = {r * std::cos(rt[1]), r * std::sin(rt[1])};
        return r * f(std::span<const double>(xy, 2));
      },
      an->r_max * f.sup_bound());
  const ProbMeasure flat_rho = make_prob(flat_ref, std::move(flat_density), opts);
  rep.flat_total = entropy(flat_rho, opts).value;

  const ChainRuleReport flat_report =
      chain_rule_report(flat_rho, Disintegration::product_projection(flat_ref), opts);
  rep.conditional_flat = flat_report.conditional;

  rep.flat_identity_residual =
      std::fabs(rep.flat_total - (rep.polar.total - rep.mean_log_radius));
  rep.conditional_identity_residual = std::fabs(
      rep.polar.conditional - (rep.conditional_flat + rep.mean_log_radius));
  return rep;
}

}  // namespace entlab
