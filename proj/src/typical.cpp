#include "entlab/typical.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace entlab {

namespace detail {

double type_rate(std::span<const int> counts, std::span<const double> log_f,
                 int n) {
  KahanSum acc;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] != 0) acc.add(static_cast<double>(counts[i]) * log_f[i]);
  }
  return -acc.value() / static_cast<double>(n);
}

double multinomial(int n, std::span<const int> counts) {
  // Product of binomials C(k_1, k_1) C(k_1+k_2, k_2) ...; each factor is
  // computed exactly with overflow-checked 64-bit arithmetic.
  unsigned long long result = 1;
  bool overflow = false;
  int partial = 0;
  for (int c : counts) {
    partial += c;
    // C(partial, c), iteratively.
    unsigned long long binom = 1;
    for (int i = 1; i <= c; ++i) {
      const unsigned long long num =
          static_cast<unsigned long long>(partial - c + i);
      const unsigned __int128 next =
          static_cast<unsigned __int128>(binom) * num / static_cast<unsigned>(i);
      if (next > static_cast<unsigned __int128>(UINT64_MAX)) {
        overflow = true;
        break;
      }
      binom = static_cast<unsigned long long>(next);
    }
    if (overflow) break;
    const unsigned __int128 next =
        static_cast<unsigned __int128>(result) * binom;
    if (next > static_cast<unsigned __int128>(UINT64_MAX)) {
      overflow = true;
      break;
    }
    result = static_cast<unsigned long long>(next);
  }
  if (!overflow) return static_cast<double>(result);
  double lg = std::lgamma(static_cast<double>(n) + 1.0);
  for (int c : counts) lg -= std::lgamma(static_cast<double>(c) + 1.0);
  return std::exp(lg);
}

void for_each_type(int n, int bins,
                   const std::function<void(std::span<const int>)>& cb) {
  std::vector<int> counts(static_cast<size_t>(bins), 0);
  const auto rec = [&](auto&& self, int bin, int left) -> void {
    if (bin == bins - 1) {
      counts[static_cast<size_t>(bin)] = left;
      cb(counts);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      counts[static_cast<size_t>(bin)] = k;
      self(self, bin + 1, left - k);
    }
  };
  rec(rec, 0, n);
}

}  // namespace detail

namespace {

/// Per-atom masses, density values, and log densities of a finite-support
/// source, plus the enumeration caps.
struct DiscreteSource {
  FlatDiscrete flat;
  Eigen::VectorXd f;      // density per atom
  Eigen::VectorXd log_f;  // ln f where f > 0, else quiet NaN (never used)
  Eigen::VectorXd log_mass;
};

DiscreteSource discrete_source(const ProbMeasure& rho) {
  DiscreteSource s{flatten_discrete(rho.reference()), {}, {}, {}};
  const int m = s.flat.size();
  s.f.resize(m);
  s.log_f.resize(m);
  s.log_mass.resize(m);
  Eigen::VectorXd row(s.flat.points.cols());
  for (int i = 0; i < m; ++i) {
    row = s.flat.points.row(i);
    s.f[i] = rho.density()(
        std::span<const double>(row.data(), static_cast<size_t>(row.size())));
    s.log_f[i] = s.f[i] > 0.0 ? std::log(s.f[i])
                              : std::numeric_limits<double>::quiet_NaN();
    s.log_mass[i] = std::log(s.flat.masses[i]);
  }
  return s;
}

void require_exact_budget(int alphabet, int n) {
  if (alphabet > kMaxExactAlphabet) {
    throw BudgetError("alphabet " + std::to_string(alphabet) +
                      " exceeds the exact-enumeration cap " +
                      std::to_string(kMaxExactAlphabet) +
                      "; use monte_carlo_typical");
  }
  if (n > kMaxExactBlock) {
    throw BudgetError("block length " + std::to_string(n) +
                      " exceeds the exact-enumeration cap " +
                      std::to_string(kMaxExactBlock) +
                      "; use monte_carlo_typical");
  }
  if (n < 1) throw Error("block length must be >= 1");
}

}  // namespace

TypicalSetSpec make_typical_spec(ProbMeasure source, int n, double delta,
                                 const QuadratureOptions& opts) {
  if (n < 1) throw Error("block length must be >= 1");
  if (!(delta > 0.0)) throw Error("delta must be > 0");
  const double S = entropy(source, opts).value;
  return TypicalSetSpec{std::move(source), n, delta, S};
}

double empirical_rate(const Eigen::MatrixXd& tuple, const ProbMeasure& source) {
  const int n = static_cast<int>(tuple.rows());
  if (n < 1) throw Error("tuple must have at least one row");
  if (source.reference().discrete_support()) {
    const DiscreteSource s = discrete_source(source);
    std::vector<int> counts(static_cast<size_t>(s.flat.size()), 0);
    Eigen::VectorXd row(tuple.cols());
    for (int i = 0; i < n; ++i) {
      row = tuple.row(i);
      const int idx = s.flat.index_of(
          std::span<const double>(row.data(), static_cast<size_t>(row.size())));
      if (s.f[idx] == 0.0) return std::numeric_limits<double>::infinity();
      ++counts[static_cast<size_t>(idx)];
    }
    return detail::type_rate(counts,
                             std::span<const double>(s.log_f.data(),
                                                     static_cast<size_t>(s.log_f.size())),
                             n);
  }
  KahanSum acc;
  Eigen::VectorXd row(tuple.cols());
  for (int i = 0; i < n; ++i) {
    row = tuple.row(i);
    const double f = source.density()(
        std::span<const double>(row.data(), static_cast<size_t>(row.size())));
    if (f == 0.0) return std::numeric_limits<double>::infinity();
    acc.add(std::log(f));
  }
  return -acc.value() / static_cast<double>(n);
}

bool is_typical(const Eigen::MatrixXd& tuple, const TypicalSetSpec& spec) {
  if (static_cast<int>(tuple.rows()) != spec.n) {
    throw Error("tuple has " + std::to_string(tuple.rows()) +
                " rows; spec expects n = " + std::to_string(spec.n));
  }
  const double rate = empirical_rate(tuple, spec.source);
  if (!std::isfinite(rate)) return false;
  return std::fabs(rate - spec.entropy_nats) <= spec.delta;
}

TypicalSetReport exact_typical(const TypicalSetSpec& spec, double epsilon) {
  if (!spec.source.reference().discrete_support()) {
    throw BudgetError(
        "exact_typical requires a finite-support source; use "
        "monte_carlo_typical");
  }
  const DiscreteSource s = discrete_source(spec.source);
  const int m = s.flat.size();
  require_exact_budget(m, spec.n);

  const int n = spec.n;
  KahanSum volume, prob;
  detail::for_each_type(n, m, [&](std::span<const int> counts) {
    // A zero-density atom in the support makes the whole type atypical.
    for (int i = 0; i < m; ++i) {
      if (counts[static_cast<size_t>(i)] > 0 && s.f[i] == 0.0) return;
    }
    const double rate = detail::type_rate(
        counts,
        std::span<const double>(s.log_f.data(), static_cast<size_t>(m)), n);
    if (std::fabs(rate - spec.entropy_nats) > spec.delta) return;
    const double mult = detail::multinomial(n, counts);
    KahanSum lmass;
    for (int i = 0; i < m; ++i) {
      if (counts[static_cast<size_t>(i)] != 0) {
        lmass.add(counts[static_cast<size_t>(i)] * s.log_mass[i]);
      }
    }
    const double seq_mass = std::exp(lmass.value());
    volume.add(mult * seq_mass);
    // rho-mass per sequence: prod (mass_i f_i)^{k_i} = seq_mass e^{-n rate}.
    prob.add(mult * seq_mass * std::exp(-static_cast<double>(n) * rate));
  });

  TypicalSetReport rep;
  rep.n = n;
  rep.delta = spec.delta;
  rep.entropy_nats = spec.entropy_nats;
  rep.prob = Estimate{prob.value(), 0.0, true};
  rep.volume = Estimate{volume.value(), 0.0, true};
  rep.upper_bound = std::exp(n * (spec.entropy_nats + spec.delta));
  rep.lower_bound = (1.0 - epsilon) * std::exp(n * (spec.entropy_nats - spec.delta));
  rep.epsilon = epsilon;
  rep.rate = rep.volume.value > 0.0
                 ? std::log(rep.volume.value) / static_cast<double>(n)
                 : std::numeric_limits<double>::quiet_NaN();
  rep.lower_premise = rep.prob.value >= 1.0 - epsilon;
  rep.mode = "exact";
  return rep;
}

namespace {

struct McChunk {
  std::int64_t draws = 0;
  std::int64_t typical = 0;
  KahanSum weight_sum;
  KahanSum weight_sq_sum;
};

void run_mc_chunk(const TypicalSetSpec& spec, std::int64_t draws,
                  std::uint64_t seed, McChunk& out) {
  Sampler sampler(spec.source);
  Rng rng(seed);
  const int n = spec.n;
  out.draws = draws;

  if (sampler.discrete()) {
    const DiscreteSource s = discrete_source(spec.source);
    std::vector<int> counts(static_cast<size_t>(s.flat.size()), 0);
    for (std::int64_t d = 0; d < draws; ++d) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(sampler.draw_index(rng))];
      const double rate = detail::type_rate(
          counts,
          std::span<const double>(s.log_f.data(),
                                  static_cast<size_t>(s.log_f.size())),
          n);
      if (std::fabs(rate - spec.entropy_nats) <= spec.delta) {
        ++out.typical;
        const double w = std::exp(static_cast<double>(n) * rate);
        out.weight_sum.add(w);
        out.weight_sq_sum.add(w * w);
      }
    }
    return;
  }

  const size_t dim = static_cast<size_t>(sampler.dim());
  std::vector<double> point(dim);
  for (std::int64_t d = 0; d < draws; ++d) {
    KahanSum acc;
    bool dead = false;
    for (int i = 0; i < n; ++i) {
      sampler.draw(rng, point);
      const double f = spec.source.density()(
          std::span<const double>(point.data(), point.size()));
      if (f == 0.0) {
        dead = true;
        break;
      }
      acc.add(std::log(f));
    }
    if (dead) continue;
    const double rate = -acc.value() / static_cast<double>(n);
    if (std::fabs(rate - spec.entropy_nats) <= spec.delta) {
      ++out.typical;
      const double w = std::exp(static_cast<double>(n) * rate);
      out.weight_sum.add(w);
      out.weight_sq_sum.add(w * w);
    }
  }
}

}  // namespace

TypicalSetReport monte_carlo_typical(const TypicalSetSpec& spec,
                                     std::int64_t samples, std::uint64_t seed,
                                     double epsilon, int workers) {
  if (samples < 1000) {
    throw Error("monte_carlo_typical needs at least 1000 samples");
  }
  if (workers < 1) workers = 1;
  std::vector<McChunk> chunks(static_cast<size_t>(workers));
  std::vector<std::int64_t> sizes(static_cast<size_t>(workers),
                                  samples / workers);
  for (std::int64_t r = 0; r < samples % workers; ++r) ++sizes[static_cast<size_t>(r)];

  if (workers == 1) {
    run_mc_chunk(spec, sizes[0], seed, chunks[0]);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        run_mc_chunk(spec, sizes[static_cast<size_t>(w)],
                     seed + static_cast<std::uint64_t>(w),
                     chunks[static_cast<size_t>(w)]);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Deterministic merge in chunk order.
  std::int64_t typical = 0;
  KahanSum wsum, wsq;
  for (const auto& c : chunks) {
    typical += c.typical;
    wsum.add(c.weight_sum.value());
    wsq.add(c.weight_sq_sum.value());
  }
  const double N = static_cast<double>(samples);
  const double p = static_cast<double>(typical) / N;
  const double vol = wsum.value() / N;
  // Sample standard deviations of the indicator and of 1_A w.
  const double var_p =
      std::max(0.0, (static_cast<double>(typical) - N * p * p) / (N - 1.0));
  const double var_w = std::max(0.0, (wsq.value() - N * vol * vol) / (N - 1.0));

  TypicalSetReport rep;
  rep.n = spec.n;
  rep.delta = spec.delta;
  rep.entropy_nats = spec.entropy_nats;
  rep.prob = Estimate{p, std::sqrt(var_p / N), false};
  rep.volume = Estimate{vol, std::sqrt(var_w / N), false};
  rep.upper_bound = std::exp(spec.n * (spec.entropy_nats + spec.delta));
  rep.lower_bound =
      (1.0 - epsilon) * std::exp(spec.n * (spec.entropy_nats - spec.delta));
  rep.epsilon = epsilon;
  rep.zero_hits = typical == 0;
  rep.rate = vol > 0.0 ? std::log(vol) / static_cast<double>(spec.n)
                       : std::numeric_limits<double>::quiet_NaN();
  rep.lower_premise = p >= 1.0 - epsilon;
  rep.mode = "monte-carlo";
  return rep;
}

std::vector<SweepRow> rate_sweep(const ProbMeasure& source,
                                 std::span<const int> ns,
                                 std::span<const double> deltas,
                                 const RateSweepOptions& opts) {
  if (ns.empty() || deltas.empty()) {
    throw Error("rate_sweep needs nonempty n and delta lists");
  }
  std::vector<SweepRow> rows;
  const double S = entropy(source, opts.quad).value;
  for (const double delta : deltas) {
    for (const int n : ns) {
      TypicalSetSpec spec{source, n, delta, S};
      if (n < 1) throw Error("block length must be >= 1");
      if (!(delta > 0.0)) throw Error("delta must be > 0");
      const TypicalSetReport rep =
          opts.monte_carlo
              ? monte_carlo_typical(spec, opts.samples,
                                    opts.seed, opts.epsilon, opts.workers)
              : exact_typical(spec, opts.epsilon);
      SweepRow row;
      row.n = n;
      row.delta = delta;
      row.rate = rep.rate;
      row.entropy_nats = S;
      row.upper_bound = rep.upper_bound;
      row.lower_bound = rep.lower_bound;
      row.prob = rep.prob.value;
      row.rate_in_band = rep.prob.value > 0.0 && std::isfinite(rep.rate) &&
                         std::fabs(rep.rate - S) <= delta;
      rows.push_back(row);
    }
  }
  return rows;
}

SliceRatioReport slice_ratio(const ProbMeasure& rho, const Disintegration& D,
                             int n, double delta,
                             const QuadratureOptions& opts) {
  if (D.kind() != Disintegration::Kind::DiscreteMap &&
      D.kind() != Disintegration::Kind::ProductProjection) {
    throw Error("slice_ratio requires a DiscreteMap or ProductProjection "
                "disintegration");
  }
  if (!rho.reference().discrete_support()) {
    throw Error("slice_ratio requires a finite-support source");
  }
  if (!references_equal(rho.reference(), D.total())) {
    throw Error("slice_ratio: rho's reference is not the disintegration's "
                "total measure");
  }

  const DiscreteSource s = discrete_source(rho);
  const int m = s.flat.size();
  require_exact_budget(m, n);
  const std::vector<int>& T = D.index_map();
  const FlatDiscrete& bf = D.base_flat();
  const int mb = bf.size();

  const double S_joint = entropy(rho, opts).value;
  const ProbMeasure push = pushforward(rho, D, opts);
  const double S_marg = entropy(push, opts).value;
  const ChainRuleReport chain = chain_rule_report(rho, D, opts);

  // Joint typical volume, both as the identity value and grouped by fiber:
  // multinomial(n; k) prod mass_i^{k_i}
  //   = multinomial(n; h) prod_t [ multinomial(h_t; k|_t)
  //        prod_{i in fiber t} (mass_i / xi_t)^{k_i} ] prod_t xi_t^{h_t}.
  KahanSum identity_sum, direct_sum;
  Eigen::VectorXd log_xi(mb);
  for (int t = 0; t < mb; ++t) log_xi[t] = std::log(bf.masses[t]);
  std::vector<int> h(static_cast<size_t>(mb));
  std::vector<std::vector<int>> fiber_counts(static_cast<size_t>(mb));
  detail::for_each_type(n, m, [&](std::span<const int> counts) {
    for (int i = 0; i < m; ++i) {
      if (counts[static_cast<size_t>(i)] > 0 && s.f[i] == 0.0) return;
    }
    const double rate = detail::type_rate(
        counts,
        std::span<const double>(s.log_f.data(), static_cast<size_t>(m)), n);
    if (std::fabs(rate - S_joint) > delta) return;

    KahanSum lmass;
    for (int i = 0; i < m; ++i) {
      if (counts[static_cast<size_t>(i)] != 0) {
        lmass.add(counts[static_cast<size_t>(i)] * s.log_mass[i]);
      }
    }
    identity_sum.add(detail::multinomial(n, counts) * std::exp(lmass.value()));

    std::fill(h.begin(), h.end(), 0);
    for (auto& fc : fiber_counts) fc.clear();
    for (int i = 0; i < m; ++i) {
      const int t = T[static_cast<size_t>(i)];
      h[static_cast<size_t>(t)] += counts[static_cast<size_t>(i)];
      fiber_counts[static_cast<size_t>(t)].push_back(counts[static_cast<size_t>(i)]);
    }
    double term = detail::multinomial(n, h);
    KahanSum lrest;
    for (int t = 0; t < mb; ++t) {
      term *= detail::multinomial(h[static_cast<size_t>(t)],
                                  fiber_counts[static_cast<size_t>(t)]);
      lrest.add(h[static_cast<size_t>(t)] * log_xi[t]);
    }
    for (int i = 0; i < m; ++i) {
      if (counts[static_cast<size_t>(i)] != 0) {
        lrest.add(counts[static_cast<size_t>(i)] *
                  (s.log_mass[i] - log_xi[T[static_cast<size_t>(i)]]));
      }
    }
    direct_sum.add(term * std::exp(lrest.value()));
  });

  const double numerator = identity_sum.value();
  const double direct = direct_sum.value();
  const double residual =
      numerator > 0.0 ? std::fabs(direct - numerator) / numerator
                      : std::fabs(direct - numerator);
  if (residual > 1e-12) {
    throw Error("slice_ratio: fiber-grouped numerator disagrees with the "
                "identity value (relative residual " +
                std::to_string(residual) + ")");
  }

  const TypicalSetSpec marg_spec{push, n, delta, S_marg};
  const TypicalSetReport marg = exact_typical(marg_spec);

  SliceRatioReport rep;
  rep.n = n;
  rep.delta = delta;
  rep.numerator = numerator;
  rep.denominator = marg.volume.value;
  rep.defined = rep.denominator > 0.0;
  rep.log_ratio_rate =
      rep.defined && numerator > 0.0
          ? (std::log(numerator) - std::log(rep.denominator)) /
                static_cast<double>(n)
          : std::numeric_limits<double>::quiet_NaN();
  rep.conditional_term = chain.conditional;
  rep.identity_residual = residual;
  rep.joint_entropy = S_joint;
  rep.marginal_entropy = S_marg;
  return rep;
}

}  // namespace entlab
