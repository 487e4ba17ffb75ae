#include "entlab/measure.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace entlab {

ReferenceMeasure::ReferenceMeasure(Variant v, double scale)
    : scale_(scale), v_(std::make_shared<const Variant>(std::move(v))) {}

ReferenceMeasure ReferenceMeasure::discrete(Eigen::VectorXd weights,
                                            std::vector<std::string> atoms) {
  if (weights.size() == 0) throw Error("discrete measure needs at least one atom");
  for (int i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw Error("discrete weights must be strictly positive and finite");
    }
  }
  if (atoms.empty()) {
    atoms.reserve(static_cast<size_t>(weights.size()));
    for (int i = 0; i < weights.size(); ++i) atoms.push_back(std::to_string(i));
  }
  if (static_cast<int>(atoms.size()) != weights.size()) {
    throw Error("atom identifiers and weights must have equal length");
  }
  std::set<std::string> distinct(atoms.begin(), atoms.end());
  if (distinct.size() != atoms.size()) {
    throw Error("discrete atom identifiers must be pairwise distinct");
  }
  return ReferenceMeasure(Discrete{std::move(atoms), std::move(weights)}, 1.0);
}

ReferenceMeasure ReferenceMeasure::counting(int n) {
  if (n <= 0) throw Error("counting measure needs a positive atom count");
  return discrete(Eigen::VectorXd::Ones(n));
}

ReferenceMeasure ReferenceMeasure::interval(double a, double b) {
  if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) {
    throw Error("interval requires finite bounds with b > a");
  }
  return ReferenceMeasure(Interval{a, b}, 1.0);
}

ReferenceMeasure ReferenceMeasure::box(Eigen::VectorXd lower,
                                       Eigen::VectorXd upper) {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw Error("box bounds must be nonempty and of equal dimension");
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (!(upper[i] > lower[i]) || !std::isfinite(lower[i]) ||
        !std::isfinite(upper[i])) {
      throw Error("box requires finite bounds with upper > lower per axis");
    }
  }
  return ReferenceMeasure(LebesgueBox{std::move(lower), std::move(upper)}, 1.0);
}

ReferenceMeasure ReferenceMeasure::annulus(double r_min, double r_max) {
  if (!(r_min > 0.0) || !(r_max > r_min) || !std::isfinite(r_max)) {
    throw Error("annulus requires 0 < r_min < r_max < inf");
  }
  return ReferenceMeasure(Annulus2D{r_min, r_max}, 1.0);
}

ReferenceMeasure ReferenceMeasure::circle(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error("circle requires a positive radius");
  }
  return ReferenceMeasure(CircleScaled{radius}, 1.0);
}

ReferenceMeasure ReferenceMeasure::product(ReferenceMeasure left,
                                           ReferenceMeasure right) {
  return ReferenceMeasure(
      Product{std::make_shared<const ReferenceMeasure>(std::move(left)),
              std::make_shared<const ReferenceMeasure>(std::move(right))},
      1.0);
}

ReferenceMeasure ReferenceMeasure::group_haar(FiniteGroup group, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error("Haar scale must be strictly positive");
  }
  return ReferenceMeasure(GroupHaar{std::move(group), scale}, 1.0);
}

ReferenceMeasure ReferenceMeasure::scaled(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error("scale factor must be strictly positive");
  }
  ReferenceMeasure out = *this;
  out.scale_ = scale_ * alpha;
  return out;
}

int ReferenceMeasure::point_dim() const {
  struct Visitor {
    int operator()(const Discrete&) const { return 1; }
    int operator()(const Interval&) const { return 1; }
    int operator()(const LebesgueBox& b) const {
      return static_cast<int>(b.lower.size());
    }
    int operator()(const Annulus2D&) const { return 2; }
    int operator()(const CircleScaled&) const { return 1; }
    int operator()(const Product& p) const {
      return p.left->point_dim() + p.right->point_dim();
    }
    int operator()(const GroupHaar&) const { return 1; }
  };
  return std::visit(Visitor{}, *v_);
}

bool ReferenceMeasure::discrete_support() const {
  if (std::get_if<Discrete>(&*v_) != nullptr) return true;
  if (std::get_if<GroupHaar>(&*v_) != nullptr) return true;
  if (const auto* p = std::get_if<Product>(&*v_)) {
    return p->left->discrete_support() && p->right->discrete_support();
  }
  return false;
}

bool references_equal(const ReferenceMeasure& a, const ReferenceMeasure& b) {
  if (a.scale() != b.scale()) return false;
  const auto& va = a.data();
  const auto& vb = b.data();
  if (va.index() != vb.index()) return false;
  if (const auto* d = std::get_if<Discrete>(&va)) {
    const auto& e = std::get<Discrete>(vb);
    return d->atoms == e.atoms && d->weights == e.weights;
  }
  if (const auto* iv = std::get_if<Interval>(&va)) {
    const auto& e = std::get<Interval>(vb);
    return iv->a == e.a && iv->b == e.b;
  }
  if (const auto* bx = std::get_if<LebesgueBox>(&va)) {
    const auto& e = std::get<LebesgueBox>(vb);
    return bx->lower == e.lower && bx->upper == e.upper;
  }
  if (const auto* an = std::get_if<Annulus2D>(&va)) {
    const auto& e = std::get<Annulus2D>(vb);
    return an->r_min == e.r_min && an->r_max == e.r_max;
  }
  if (const auto* ci = std::get_if<CircleScaled>(&va)) {
    return ci->radius == std::get<CircleScaled>(vb).radius;
  }
  if (const auto* pr = std::get_if<Product>(&va)) {
    const auto& e = std::get<Product>(vb);
    return references_equal(*pr->left, *e.left) &&
           references_equal(*pr->right, *e.right);
  }
  const auto& ga = std::get<GroupHaar>(va);
  const auto& gb = std::get<GroupHaar>(vb);
  return ga.scale == gb.scale && ga.group == gb.group;
}

double total_mass(const ReferenceMeasure& mu) {
  struct Visitor {
    double operator()(const Discrete& d) const { return d.weights.sum(); }
    double operator()(const Interval& i) const { return i.b - i.a; }
    double operator()(const LebesgueBox& b) const {
      return (b.upper - b.lower).prod();
    }
    double operator()(const Annulus2D& a) const {
      return std::numbers::pi * (a.r_max * a.r_max - a.r_min * a.r_min);
    }
    double operator()(const CircleScaled& c) const {
      return 2.0 * std::numbers::pi * c.radius;
    }
    double operator()(const Product& p) const {
      return total_mass(*p.left) * total_mass(*p.right);
    }
    double operator()(const GroupHaar& g) const {
      return g.scale * g.group.order();
    }
  };
  return mu.scale() * std::visit(Visitor{}, mu.data());
}

namespace {

void flatten_rec(const ReferenceMeasure& mu, FlatDiscrete& out,
                 std::vector<double>& point, std::vector<std::string>& label,
                 double mass, std::vector<Eigen::VectorXd>& rows,
                 std::vector<double>& masses) {
  const auto& data = mu.data();
  if (const auto* d = std::get_if<Discrete>(&data)) {
    for (int i = 0; i < d->weights.size(); ++i) {
      point.push_back(static_cast<double>(i));
      label.push_back(d->atoms[static_cast<size_t>(i)]);
      masses.push_back(mass * mu.scale() * d->weights[i]);
      rows.push_back(Eigen::Map<Eigen::VectorXd>(point.data(),
                                                 static_cast<long>(point.size())));
      std::string joined;
      for (size_t k = 0; k < label.size(); ++k) {
        if (k) joined += ",";
        joined += label[k];
      }
      out.labels.push_back(std::move(joined));
      point.pop_back();
      label.pop_back();
    }
  } else if (const auto* g = std::get_if<GroupHaar>(&data)) {
    for (int i = 0; i < g->group.order(); ++i) {
      point.push_back(static_cast<double>(i));
      label.push_back(std::to_string(i));
      masses.push_back(mass * mu.scale() * g->scale);
      rows.push_back(Eigen::Map<Eigen::VectorXd>(point.data(),
                                                 static_cast<long>(point.size())));
      std::string joined;
      for (size_t k = 0; k < label.size(); ++k) {
        if (k) joined += ",";
        joined += label[k];
      }
      out.labels.push_back(std::move(joined));
      point.pop_back();
      label.pop_back();
    }
  } else if (const auto* p = std::get_if<Product>(&data)) {
    // Lexicographic: left digit varies slowest. Recurse left, then right.
    const auto& left = *p->left;
    const auto& right = *p->right;
    const auto& ldata = left.data();
    const double lscale = mu.scale() * left.scale();
    auto emit_left = [&](int i, const std::string& lab, double w) {
      point.push_back(static_cast<double>(i));
      label.push_back(lab);
      flatten_rec(right, out, point, label, mass * lscale * w, rows, masses);
      point.pop_back();
      label.pop_back();
    };
    if (const auto* ld = std::get_if<Discrete>(&ldata)) {
      for (int i = 0; i < ld->weights.size(); ++i) {
        emit_left(i, ld->atoms[static_cast<size_t>(i)], ld->weights[i]);
      }
    } else if (const auto* lg = std::get_if<GroupHaar>(&ldata)) {
      for (int i = 0; i < lg->group.order(); ++i) {
        emit_left(i, std::to_string(i), lg->scale);
      }
    } else if (std::get_if<Product>(&ldata) != nullptr) {
      // Nested product on the left: flatten it standalone and splice.
      FlatDiscrete lf = flatten_discrete(left);
      for (int i = 0; i < lf.size(); ++i) {
        for (int c = 0; c < lf.points.cols(); ++c) {
          point.push_back(lf.points(i, c));
        }
        label.push_back(lf.labels[static_cast<size_t>(i)]);
        flatten_rec(right, out, point, label, mass * mu.scale() * lf.masses[i],
                    rows, masses);
        for (int c = 0; c < lf.points.cols(); ++c) point.pop_back();
        label.pop_back();
      }
    } else {
      throw Error("flatten_discrete requires a finite-support measure");
    }
  } else {
    throw Error("flatten_discrete requires a finite-support measure");
  }
}

void collect_radix(const ReferenceMeasure& mu, std::vector<int>& radix) {
  const auto& data = mu.data();
  if (const auto* d = std::get_if<Discrete>(&data)) {
    radix.push_back(static_cast<int>(d->weights.size()));
  } else if (const auto* g = std::get_if<GroupHaar>(&data)) {
    radix.push_back(g->group.order());
  } else if (const auto* p = std::get_if<Product>(&data)) {
    collect_radix(*p->left, radix);
    collect_radix(*p->right, radix);
  } else {
    throw Error("flatten_discrete requires a finite-support measure");
  }
}

}  // namespace

int FlatDiscrete::index_of(std::span<const double> x) const {
  if (x.size() != radix.size()) {
    throw Error("point dimension mismatch in FlatDiscrete::index_of");
  }
  long idx = 0;
  for (size_t d = 0; d < radix.size(); ++d) {
    const long k = std::lround(x[d]);
    if (k < 0 || k >= radix[d]) {
      throw Error("point coordinate out of range in FlatDiscrete::index_of");
    }
    idx = idx * radix[d] + k;
  }
  return static_cast<int>(idx);
}

FlatDiscrete flatten_discrete(const ReferenceMeasure& mu) {
  if (!mu.discrete_support()) {
    throw Error("flatten_discrete requires a finite-support measure");
  }
  FlatDiscrete out;
  collect_radix(mu, out.radix);
  std::vector<double> point;
  std::vector<std::string> label;
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> masses;
  flatten_rec(mu, out, point, label, 1.0, rows, masses);
  const int n = static_cast<int>(masses.size());
  out.masses = Eigen::Map<Eigen::VectorXd>(masses.data(), n);
  out.points.resize(n, mu.point_dim());
  for (int i = 0; i < n; ++i) out.points.row(i) = rows[static_cast<size_t>(i)];
  return out;
}

void sample_reference_point(const ReferenceMeasure& mu, Rng& rng,
                            std::span<double> out) {
  const auto& data = mu.data();
  if (const auto* d = std::get_if<Discrete>(&data)) {
    const double u = rng.uniform() * d->weights.sum();
    double acc = 0.0;
    int pick = static_cast<int>(d->weights.size()) - 1;
    for (int i = 0; i < d->weights.size(); ++i) {
      acc += d->weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out[0] = static_cast<double>(pick);
  } else if (const auto* iv = std::get_if<Interval>(&data)) {
    out[0] = rng.uniform(iv->a, iv->b);
  } else if (const auto* bx = std::get_if<LebesgueBox>(&data)) {
    for (int i = 0; i < bx->lower.size(); ++i) {
      out[static_cast<size_t>(i)] = rng.uniform(bx->lower[i], bx->upper[i]);
    }
  } else if (const auto* an = std::get_if<Annulus2D>(&data)) {
    // Area-uniform radius, then uniform angle.
    const double r2 = rng.uniform(an->r_min * an->r_min, an->r_max * an->r_max);
    const double r = std::sqrt(r2);
    const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    out[0] = r * std::cos(th);
    out[1] = r * std::sin(th);
  } else if (std::get_if<CircleScaled>(&data) != nullptr) {
    out[0] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  } else if (const auto* pr = std::get_if<Product>(&data)) {
    const size_t ldim = static_cast<size_t>(pr->left->point_dim());
    sample_reference_point(*pr->left, rng, out.subspan(0, ldim));
    sample_reference_point(*pr->right, rng, out.subspan(ldim));
  } else {
    const auto& gh = std::get<GroupHaar>(data);
    out[0] = static_cast<double>(rng.below(static_cast<uint64_t>(gh.group.order())));
  }
}

namespace detail {

namespace {

struct QuadContext {
  const QuadratureOptions& opts;
  std::vector<double> buf;
  std::int64_t evals_left;
  ErasedEval eval;
};

/// Continuation invoked once the coordinates at [off, dim) are written.
struct Leaf {
  void* state;
  IntegralResult (*fn)(void*);
  IntegralResult operator()() const { return fn(state); }
};

IntegralResult integrate_rec(const ReferenceMeasure& m, QuadContext& cx,
                             std::size_t off, Leaf leaf);

/// Composite Simpson over [a, b]. The error estimate compares against the
/// half-resolution rule evaluated on the shared (even) nodes.
template <class Node>  // Node: (double x) -> IntegralResult
IntegralResult simpson_axis(double a, double b, int panels, double partial_limit,
                            Node&& node) {
  if (panels < 2) panels = 2;
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  KahanSum fine, coarse, inner_err;
  for (int k = 0; k <= panels; ++k) {
    const double x = (k == panels) ? b : a + k * h;
    const IntegralResult r = node(x);
    const double cf = (k == 0 || k == panels) ? 1.0 : (k % 2 != 0 ? 4.0 : 2.0);
    fine.add(cf * r.value);
    inner_err.add(cf * r.error);
    if (k % 2 == 0) {
      const int j = k / 2;
      const double cc =
          (j == 0 || j == panels / 2) ? 1.0 : (j % 2 != 0 ? 4.0 : 2.0);
      coarse.add(cc * r.value);
    }
    if (std::fabs(fine.value()) * h / 3.0 > partial_limit) {
      throw DivergenceError(
          "quadrature partial sums exceeded the divergence threshold (" +
          std::to_string(partial_limit) + ")");
    }
  }
  const double vf = fine.value() * h / 3.0;
  const double vc = coarse.value() * 2.0 * h / 3.0;
  return {vf, std::fabs(vf - vc) / 15.0 + inner_err.value() * h / 3.0};
}

IntegralResult annulus_rec(const Annulus2D& an, QuadContext& cx,
                           std::size_t off, Leaf leaf) {
  int P = cx.opts.annulus_panels;
  if (P < 2) P = 2;
  if (P % 2 != 0) ++P;
  const double hr = (an.r_max - an.r_min) / P;
  const double ht = 2.0 * std::numbers::pi / P;
  // Angular nodes are shared across radii; precompute the trig tables.
  std::vector<double> ct(static_cast<size_t>(P) + 1), st(static_cast<size_t>(P) + 1);
  std::vector<double> cf(static_cast<size_t>(P) + 1);
  for (int k = 0; k <= P; ++k) {
    const double th = (k == P) ? 2.0 * std::numbers::pi : k * ht;
    ct[static_cast<size_t>(k)] = std::cos(th);
    st[static_cast<size_t>(k)] = std::sin(th);
    cf[static_cast<size_t>(k)] =
        (k == 0 || k == P) ? 1.0 : (k % 2 != 0 ? 4.0 : 2.0);
  }
  KahanSum fine, coarse, inner_err;
  const double cell = hr * ht / 9.0;
  for (int i = 0; i <= P; ++i) {
    const double r = (i == P) ? an.r_max : an.r_min + i * hr;
    const double cfr = (i == 0 || i == P) ? 1.0 : (i % 2 != 0 ? 4.0 : 2.0);
    KahanSum line_f, line_c, line_e;
    for (int k = 0; k <= P; ++k) {
      cx.buf[off] = r * ct[static_cast<size_t>(k)];
      cx.buf[off + 1] = r * st[static_cast<size_t>(k)];
      const IntegralResult v = leaf();
      const double val = v.value * r;
      line_f.add(cf[static_cast<size_t>(k)] * val);
      line_e.add(cf[static_cast<size_t>(k)] * v.error * r);
      if (k % 2 == 0) {
        const int j = k / 2;
        const double cc =
            (j == 0 || j == P / 2) ? 1.0 : (j % 2 != 0 ? 4.0 : 2.0);
        line_c.add(cc * val);
      }
    }
    fine.add(cfr * line_f.value());
    inner_err.add(cfr * line_e.value());
    if (i % 2 == 0) {
      const int j = i / 2;
      const double ccr = (j == 0 || j == P / 2) ? 1.0 : (j % 2 != 0 ? 4.0 : 2.0);
      coarse.add(ccr * line_c.value());
    }
    if (std::fabs(fine.value()) * cell > cx.opts.partial_sum_limit) {
      throw DivergenceError(
          "quadrature partial sums exceeded the divergence threshold (" +
          std::to_string(cx.opts.partial_sum_limit) + ")");
    }
  }
  const double vf = fine.value() * cell;
  const double vc = coarse.value() * 4.0 * cell;
  return {vf, std::fabs(vf - vc) / 15.0 + inner_err.value() * cell};
}

IntegralResult box_axis_rec(const LebesgueBox& box, int axis, QuadContext& cx,
                            std::size_t off, Leaf leaf) {
  if (axis == box.lower.size()) return leaf();
  return simpson_axis(box.lower[axis], box.upper[axis], cx.opts.panels,
                      cx.opts.partial_sum_limit, [&](double x) {
                        cx.buf[off + static_cast<size_t>(axis)] = x;
                        return box_axis_rec(box, axis + 1, cx, off, leaf);
                      });
}

struct ProductCont {
  const ReferenceMeasure* right;
  QuadContext* cx;
  std::size_t off;
  Leaf inner;
};

IntegralResult product_cont(void* p) {
  auto* c = static_cast<ProductCont*>(p);
  return integrate_rec(*c->right, *c->cx, c->off, c->inner);
}

IntegralResult integrate_rec(const ReferenceMeasure& m, QuadContext& cx,
                             std::size_t off, Leaf leaf) {
  IntegralResult out;
  const auto& data = m.data();
  if (const auto* d = std::get_if<Discrete>(&data)) {
    KahanSum sum, err;
    for (int i = 0; i < d->weights.size(); ++i) {
      cx.buf[off] = static_cast<double>(i);
      const IntegralResult r = leaf();
      sum.add(d->weights[i] * r.value);
      err.add(d->weights[i] * r.error);
    }
    out = {sum.value(), err.value()};
  } else if (const auto* iv = std::get_if<Interval>(&data)) {
    out = simpson_axis(iv->a, iv->b, cx.opts.panels, cx.opts.partial_sum_limit,
                       [&](double x) {
                         cx.buf[off] = x;
                         return leaf();
                       });
  } else if (const auto* bx = std::get_if<LebesgueBox>(&data)) {
    out = box_axis_rec(*bx, 0, cx, off, leaf);
  } else if (const auto* an = std::get_if<Annulus2D>(&data)) {
    out = annulus_rec(*an, cx, off, leaf);
  } else if (const auto* ci = std::get_if<CircleScaled>(&data)) {
    out = simpson_axis(0.0, 2.0 * std::numbers::pi, cx.opts.panels,
                       cx.opts.partial_sum_limit, [&](double th) {
                         cx.buf[off] = th;
                         return leaf();
                       });
    out.value *= ci->radius;
    out.error *= ci->radius;
  } else if (const auto* pr = std::get_if<Product>(&data)) {
    const std::size_t ldim = static_cast<std::size_t>(pr->left->point_dim());
    ProductCont cont{pr->right.get(), &cx, off + ldim, leaf};
    out = integrate_rec(*pr->left, cx, off, Leaf{&cont, &product_cont});
  } else {
    const auto& gh = std::get<GroupHaar>(data);
    KahanSum sum, err;
    for (int i = 0; i < gh.group.order(); ++i) {
      cx.buf[off] = static_cast<double>(i);
      const IntegralResult r = leaf();
      sum.add(gh.scale * r.value);
      err.add(gh.scale * r.error);
    }
    out = {sum.value(), err.value()};
  }
  out.value *= m.scale();
  out.error *= m.scale();
  return out;
}

double estimate_evals(const ReferenceMeasure& m, const QuadratureOptions& o) {
  const auto& data = m.data();
  if (const auto* d = std::get_if<Discrete>(&data)) {
    return static_cast<double>(d->weights.size());
  }
  if (const auto* g = std::get_if<GroupHaar>(&data)) {
    return static_cast<double>(g->group.order());
  }
  if (std::get_if<Interval>(&data) != nullptr ||
      std::get_if<CircleScaled>(&data) != nullptr) {
    return static_cast<double>(o.panels) + 1.0;
  }
  if (const auto* bx = std::get_if<LebesgueBox>(&data)) {
    return std::pow(static_cast<double>(o.panels) + 1.0,
                    static_cast<double>(bx->lower.size()));
  }
  if (std::get_if<Annulus2D>(&data) != nullptr) {
    const double side = static_cast<double>(o.annulus_panels) + 1.0;
    return side * side;
  }
  const auto& pr = std::get<Product>(data);
  return estimate_evals(*pr.left, o) * estimate_evals(*pr.right, o);
}

IntegralResult eval_leaf(void* p) {
  auto& cx = *static_cast<QuadContext*>(p);
  if (--cx.evals_left < 0) {
    throw BudgetError(
        "integrand evaluation budget exhausted; lower the quadrature "
        "resolution or the dimension");
  }
  const double v =
      cx.eval.fn(cx.eval.state, std::span<const double>(cx.buf));
  if (!std::isfinite(v)) {
    throw EvaluationError("integrand is not finite at point " +
                          point_to_string(cx.buf));
  }
  return {v, 0.0};
}

}  // namespace

IntegralResult integrate_erased(const ReferenceMeasure& mu,
                                const QuadratureOptions& opts, ErasedEval f) {
  const double estimate = estimate_evals(mu, opts);
  if (estimate > static_cast<double>(opts.eval_budget)) {
    throw BudgetError("integral needs about " + std::to_string(estimate) +
                      " evaluations, over the budget of " +
                      std::to_string(opts.eval_budget) +
                      "; lower the quadrature resolution or the dimension");
  }
  QuadContext cx{opts, std::vector<double>(static_cast<size_t>(mu.point_dim())),
                 opts.eval_budget, f};
  return integrate_rec(mu, cx, 0, Leaf{&cx, &eval_leaf});
}

std::string point_to_string(std::span<const double> x) {
  std::string s = "(";
  char buf[40];
  for (size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", x[i]);
    if (i) s += ", ";
    s += buf;
  }
  s += ")";
  return s;
}

}  // namespace detail

}  // namespace entlab
