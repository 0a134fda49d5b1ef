#include "lazyadv/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace lazyadv {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0 && gamma < 1)) throw InvalidArgument("gamma must lie in (0, 1)");
}

void check_width(Index m) {
  if (m < 1) throw InvalidDimension("width m must be >= 1");
}

double clamped_sqrt(double v) { return std::sqrt(std::max(v, 0.0)); }

void check_unit(const Vector& x) {
  if (std::abs(x.norm() - 1.0) > 1e-9) throw InvalidArgument("x must lie on the unit sphere");
}

BoundContext context_of(const Network& net, double C0, double R = 0.0) {
  return {net.dim(), net.width(), C0, R};
}

}  // namespace

double fvalue_bound(double gamma, Index m, double C0) {
  check_gamma(gamma);
  check_width(m);
  const double L = std::log(2.0 / gamma);
  return std::sqrt(2.0 * L) + 2.0 * L / std::sqrt(static_cast<double>(m)) + C0;
}

double grad_bound(double gamma, Index d, Index m, double C0) {
  check_gamma(gamma);
  check_width(m);
  if (d < 1) throw InvalidDimension("d must be >= 1");
  const double dd = static_cast<double>(d);
  const double mm = static_cast<double>(m);
  const double L4 = std::log(4.0 / gamma);
  const double L8 = std::log(8.0 / gamma);
  const double L8m = std::log(8.0 * mm / gamma);
  const double lead = clamped_sqrt(0.5 - (std::sqrt(2.0 * L4 / mm) + L4 / mm)) *
                      clamped_sqrt(dd - 5.0 * std::sqrt(dd * L8));
  const double spill = std::sqrt((C0 + std::sqrt(L4 / 2.0)) / std::sqrt(mm)) *
                       std::sqrt(dd + 4.0 * std::sqrt(dd * L8m));
  return lead - C0 - spill;
}

double sign_flip_count_bound(double gamma, Index m, double V) {
  check_gamma(gamma);
  check_width(m);
  if (!(V >= 0)) throw InvalidArgument("V must be >= 0");
  const double mm = static_cast<double>(m);
  return V * mm + std::sqrt(mm * std::log(1.0 / gamma) / 2.0);
}

double sign_flip_probability_bound(double R, Index d) {
  if (d < 2) throw InvalidDimension("d must be >= 2");
  if (!(R >= 0)) throw InvalidArgument("R must be >= 0");
  const double dd = static_cast<double>(d);
  return R * std::sqrt(2.0 * std::log(dd)) + 1.0 / dd;
}

double sign_flip_probability_bound_eps(double eps, double R, double V, Index d) {
  if (d < 1) throw InvalidDimension("d must be >= 1");
  if (!(eps > 0 && eps < 2)) throw InvalidArgument("eps must lie in (0, 2)");
  const double dd = static_cast<double>(d);
  return 2.0 * eps * (std::sqrt(dd) + 2.0 * std::sqrt(dd * std::log(2.0 / eps))) + (1.0 + R + eps) * V;
}

double grad_diff_fixed_bound(double gamma, Index d, Index m, double C0, double R) {
  check_gamma(gamma);
  check_width(m);
  if (d < 2) throw InvalidDimension("d must be >= 2");
  const double dd = static_cast<double>(d);
  const double mm = static_cast<double>(m);
  const double L4 = std::log(4.0 / gamma);
  return 2.0 * std::sqrt(L4) * (std::pow(4.0 * R * std::sqrt(std::log(dd)), 0.25) + std::sqrt(L4 / mm)) + C0 +
         3.0 * std::sqrt((C0 + std::sqrt(L4 / 2.0)) / std::sqrt(mm)) *
             std::sqrt(dd + 4.0 * std::sqrt(dd * std::log(8.0 * mm / gamma))) +
         5.0 * (C0 + std::sqrt(L4)) * std::sqrt(std::log(4.0 * mm / gamma));
}

double unif_grad_diff_bound(Index d, Index m, double C0, double C1) {
  check_width(m);
  if (d < 2) throw InvalidDimension("d must be >= 2");
  const double dd = static_cast<double>(d);
  const double lmd = std::log(static_cast<double>(m) * dd);
  const double cbar = std::max(1.0, C0);
  return 9.0 * std::pow(C1 * dd * dd * lmd * lmd * std::sqrt(std::log(dd) / dd), 0.25) +
         15.0 * dd * lmd / std::sqrt(static_cast<double>(m)) + 327.0 * cbar * C0 * std::pow(dd, 0.25);
}

double binomial_slack(double gamma, int trials) {
  if (trials < 1) throw InvalidArgument("need at least one trial");
  return 3.0 * std::sqrt(gamma * (1.0 - gamma) / trials);
}

BoundReport check_fvalue(const Network& net, const Vector& x, double gamma, double C0) {
  BoundReport r;
  r.name = "fvalue";
  r.gamma = gamma;
  r.theoretical = fvalue_bound(gamma, net.width(), C0);
  r.measured = std::abs(forward(net, x));
  r.satisfied = r.measured <= r.theoretical;
  r.context = context_of(net, C0);
  return r;
}

std::pair<double, double> lazy_ball_output_range(const Network& net, const Vector& x, double radius) {
  detail::check_input(net, x);
  if (!(radius >= 0)) throw InvalidArgument("radius must be >= 0");
  const Vector z = net.initial_weights().transpose() * x;
  const double shift = radius * x.norm();
  double hi = 0.0, lo = 0.0;
  for (Index s = 0; s < z.size(); ++s) {
    const double up = std::max(z[s] + shift, 0.0);
    const double down = std::max(z[s] - shift, 0.0);
    if (net.signs()[s] > 0) {
      hi += up;
      lo += down;
    } else {
      hi -= down;
      lo -= up;
    }
  }
  return {lo * net.inv_sqrt_width(), hi * net.inv_sqrt_width()};
}

BoundReport check_fvalue_worst_case(const Network& net, const Vector& x, double gamma, double C0) {
  const auto [lo, hi] =
      lazy_ball_output_range(net, x, C0 / std::sqrt(static_cast<double>(net.width())));
  BoundReport r;
  r.name = "fvalue_worst_case";
  r.gamma = gamma;
  r.theoretical = fvalue_bound(gamma, net.width(), C0);
  r.measured = std::max(hi, -lo);
  r.satisfied = r.measured <= r.theoretical;
  r.context = context_of(net, C0);
  return r;
}

BoundReport check_grad(const Network& net, const Vector& x, double gamma, double C0) {
  BoundReport r;
  r.name = "grad";
  r.gamma = gamma;
  r.theoretical = grad_bound(gamma, net.dim(), net.width(), C0);
  r.vacuous = !(r.theoretical > 0);
  r.measured = input_gradient(net, x).norm();
  r.satisfied = r.vacuous || r.measured >= r.theoretical;
  r.context = context_of(net, C0);
  return r;
}

SignFlipSets sign_flip_sets(const Network& net, const Vector& x, double V, std::optional<double> R,
                            double gamma) {
  detail::check_input(net, x);
  check_unit(x);
  if (!(V >= 0)) throw InvalidArgument("V must be >= 0");
  if (R && !(*R >= 0 && *R <= 0.5)) throw InvalidArgument("R must lie in [0, 1/2]");

  const Matrix& W0 = net.initial_weights();
  const Vector z = W0.transpose() * x;
  SignFlipSets out;
  out.bound_v = sign_flip_count_bound(gamma, net.width(), V);
  for (Index s = 0; s < z.size(); ++s)
    if (-V < z[s] && z[s] <= V) out.s_v_exact.push_back(s);

  if (R) {
    out.bound_v_prime = out.bound_v * (1.0 + *R);
    const double theta = std::asin(*R);
    for (Index s = 0; s < z.size(); ++s) {
      const double nw = W0.col(s).norm();
      if (V == 0.0 || nw == 0.0) continue;
      const double c = V / nw;
      const double phi = std::acos(std::clamp(z[s] / nw, -1.0, 1.0));
      const double lo = std::max(0.0, phi - theta);
      const double hi = std::min(std::numbers::pi, phi + theta);
      if (std::cos(hi) <= c && std::cos(lo) > -c) out.s_v_prime_exact.push_back(s);
    }
  }
  return out;
}

BoundReport check_sign_flip(const Network& net, const Vector& x, double V, double gamma) {
  const SignFlipSets sets = sign_flip_sets(net, x, V, std::nullopt, gamma);
  BoundReport r;
  r.name = "sign_flip";
  r.gamma = gamma;
  r.theoretical = sets.bound_v;
  r.measured = static_cast<double>(sets.s_v_exact.size());
  r.satisfied = r.measured <= r.theoretical;
  r.context = context_of(net, V * std::sqrt(static_cast<double>(net.width())));
  return r;
}

namespace {

/// d x n matrix of perturbations with norm exactly R (on_sphere) or uniform in B(0, R).
Matrix sample_perturbations(Rng& rng, Index d, int n, double R, bool on_sphere) {
  Matrix D(d, n);
  for (int j = 0; j < n; ++j) {
    const double rho = on_sphere ? R : R * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    D.col(j) = rho * sample_unit_sphere(rng, d);
  }
  return D;
}

constexpr int kProbeBatch = 64;

}  // namespace

BoundReport grad_diff_probe(const Network& net, const Vector& x, double R, int n_probes, Rng& rng,
                            double C0, double C1, double gamma) {
  detail::check_input(net, x);
  if (!(R >= 0)) throw InvalidArgument("R must be >= 0");
  if (n_probes < 1) throw InvalidArgument("n_probes must be >= 1");
  const Vector a = net.signs();
  const Vector gate0 = ((net.weights().transpose() * x).array() > 0.0).select(a.array(), 0.0).matrix();
  double worst = 0.0;
  for (int done = 0; done < n_probes; done += kProbeBatch) {
    const int b = std::min(kProbeBatch, n_probes - done);
    Matrix X = sample_perturbations(rng, net.dim(), b, R, false);
    X.colwise() += x;
    const Matrix Z = net.weights().transpose() * X;
    Matrix dgate(Z.rows(), b);
    for (Index j = 0; j < b; ++j)
      dgate.col(j) = (Z.col(j).array() > 0.0).select(a.array(), 0.0).matrix() - gate0;
    const Matrix D = net.weights() * dgate * net.inv_sqrt_width();
    worst = std::max(worst, D.colwise().norm().maxCoeff());
  }
  BoundReport r;
  r.name = "grad_diff";
  r.gamma = gamma;
  r.theoretical = unif_grad_diff_bound(net.dim(), net.width(), C0, C1);
  r.measured = worst;
  r.satisfied = r.measured <= r.theoretical;
  r.context = context_of(net, C0, R);
  r.note = "ratio=" + format_double(worst / std::sqrt(static_cast<double>(net.dim())));
  if (R > C1 / std::sqrt(static_cast<double>(net.dim()))) r.note += "; R exceeds C1/sqrt(d)";
  return r;
}

BoundReport sign_flip_probability_probe(const Network& net, const Vector& x, double R, int n_probes,
                                        Rng& rng) {
  detail::check_input(net, x);
  if (!(R >= 0 && R <= 0.5)) throw InvalidArgument("R must lie in [0, 1/2]");
  if (n_probes < 1) throw InvalidArgument("n_probes must be >= 1");
  const Matrix& W0 = net.initial_weights();
  const Vector z0 = W0.transpose() * x;
  double flips = 0.0;
  for (int done = 0; done < n_probes; done += kProbeBatch) {
    const int b = std::min(kProbeBatch, n_probes - done);
    Matrix X = sample_perturbations(rng, net.dim(), b, R, true);
    X.colwise() += x;
    const Matrix Z = W0.transpose() * X;
    for (Index j = 0; j < Z.cols(); ++j)
      for (Index s = 0; s < Z.rows(); ++s) flips += (Z(s, j) > 0) != (z0[s] > 0);
  }
  BoundReport r;
  r.name = "sign_flip_probability";
  r.gamma = 0.0;
  r.theoretical = sign_flip_probability_bound(R, net.dim());
  r.measured = flips / (static_cast<double>(n_probes) * static_cast<double>(net.width()));
  r.satisfied = r.measured <= r.theoretical;
  r.context = context_of(net, 0.0, R);
  return r;
}

BoundReport robust_error_estimate(const Network& net, const LabeledDataset& data, double R,
                                  const RobustErrorConfig& cfg, double C0) {
  if (data.size() == 0) throw EmptyDataset("robust error needs data");
  if (data.dim() != net.dim()) throw InvalidDimension("dataset and network dimensions differ");
  if (!(R > 0)) throw InvalidArgument("R must be > 0");

  std::size_t errors = 0;
  if (cfg.attack == RobustAttack::pgd) {
    PgdConfig pgd = cfg.pgd;
    pgd.radius = R;
    pgd.stop_on_success = true;
    const PgdBatchResult res = pgd_batch(net, data.inputs, data.labels, pgd);
    errors = static_cast<std::size_t>(std::count(res.success.begin(), res.success.end(), std::uint8_t{1}));
  } else {
    const Vector f = forward_batch(net, data.inputs);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Index col = static_cast<Index>(i);
      if (data.labels[i] * f[col] <= 0.0) {
        ++errors;
        continue;
      }
      const Vector x = data.inputs.col(col);
      const double gn = input_gradient(net, x).norm();
      if (gn == 0.0) continue;
      EtaSearchConfig search = cfg.search;
      search.eta_max = R / gn;
      errors += minimal_eta_search(net, x, search).flipped;
    }
  }
  BoundReport r;
  r.name = "robust_error";
  r.theoretical = 0.9;
  r.measured = static_cast<double>(errors) / static_cast<double>(data.size());
  r.satisfied = r.measured >= r.theoretical;
  r.context = context_of(net, C0, R);
  r.note = cfg.attack == RobustAttack::pgd ? "pgd" : "single_step";
  return r;
}

PowerLawFit scaling_fit(const std::vector<std::pair<double, double>>& pairs) {
  std::set<double> distinct;
  for (const auto& [d, q] : pairs) {
    if (!(d > 0 && q > 0) || !std::isfinite(d) || !std::isfinite(q))
      throw InvalidArgument("scaling fit needs positive finite values");
    distinct.insert(d);
  }
  if (distinct.size() < 4) throw InvalidArgument("scaling fit needs at least 4 distinct d values");

  const auto n = static_cast<Index>(pairs.size());
  Vector lx(n), ly(n);
  for (Index i = 0; i < n; ++i) {
    lx[i] = std::log(pairs[static_cast<std::size_t>(i)].first);
    ly[i] = std::log(pairs[static_cast<std::size_t>(i)].second);
  }
  const double mx = lx.mean(), my = ly.mean();
  const Vector cx = lx.array() - mx, cy = ly.array() - my;
  PowerLawFit fit;
  fit.slope = cx.dot(cy) / cx.squaredNorm();
  fit.intercept = my - fit.slope * mx;
  const double ss_tot = cy.squaredNorm();
  const double ss_res = (cy - fit.slope * cx).squaredNorm();
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

std::vector<LemmaTally> lemma_monte_carlo(const LemmaMonteCarloConfig& cfg) {
  if (cfg.d < 2) throw InvalidDimension("d must be >= 2");
  check_width(cfg.m);
  if (cfg.n_seeds < 1) throw InvalidArgument("need at least one seed");
  if (cfg.gammas.empty() || cfg.C0s.empty()) throw InvalidArgument("need at least one gamma and one C0");
  for (double g : cfg.gammas) check_gamma(g);
  for (double c : cfg.C0s)
    if (!(c >= 0)) throw InvalidArgument("C0 must be >= 0");

  std::vector<LemmaTally> tallies;
  for (const char* lemma : {"fvalue", "sign_flip", "grad"})
    for (double c : cfg.C0s)
      for (double g : cfg.gammas) tallies.push_back({lemma, c, g, 0, 0, 0});
  const std::size_t per_lemma = cfg.C0s.size() * cfg.gammas.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.m));

  for (int seed = 0; seed < cfg.n_seeds; ++seed) {
    Rng rng(derive_seed(cfg.base_seed, static_cast<std::uint64_t>(seed)));
    const Network net = init_network(rng, cfg.d, cfg.m);
    const Vector x = sample_unit_sphere(rng, cfg.d);
    const Matrix& W0 = net.initial_weights();
    const Vector z = W0.transpose() * x;
    const Vector gate0 = (z.array() > 0.0).select(net.signs().array(), 0.0).matrix();
    const Vector g0 = W0 * gate0 * scale;
    const double g0_norm = g0.norm();

    for (std::size_t ci = 0; ci < cfg.C0s.size(); ++ci) {
      const double C0 = cfg.C0s[ci];
      const double V = C0 * scale;
      const auto [lo, hi] = lazy_ball_output_range(net, x, V);
      const double sup_abs_f = std::max(hi, -lo);
      const auto s_v = static_cast<double>(((z.array() > -V) && (z.array() <= V)).count());

      // Gradient at W = W0 - V a_s g^ (column-wise) with g^ the unit initial
      // gradient; needs no copy of W.
      double min_grad = g0_norm;
      if (g0_norm > 0) {
        const Vector ghat = g0 / g0_norm;
        const Vector z1 = z.array() - V * net.signs().array() * ghat.dot(x);
        const Vector gate1 = (z1.array() > 0.0).select(net.signs().array(), 0.0).matrix();
        const auto active = static_cast<double>((z1.array() > 0.0).count());
        const Vector g1 = (W0 * gate1 - V * active * ghat) * scale;
        min_grad = std::min(min_grad, g1.norm());
      }

      for (std::size_t k = 0; k < cfg.gammas.size(); ++k) {
        const double g = cfg.gammas[k];
        const std::size_t slot = ci * cfg.gammas.size() + k;
        LemmaTally& tf = tallies[slot];
        ++tf.trials;
        tf.violations += sup_abs_f > fvalue_bound(g, cfg.m, C0);

        LemmaTally& ts = tallies[per_lemma + slot];
        ++ts.trials;
        ts.violations += s_v > sign_flip_count_bound(g, cfg.m, V);

        LemmaTally& tg = tallies[2 * per_lemma + slot];
        const double gb = grad_bound(g, cfg.d, cfg.m, C0);
        if (!(gb > 0)) {
          ++tg.vacuous;
        } else {
          ++tg.trials;
          tg.violations += min_grad < gb;
        }
      }
    }
  }
  return tallies;
}

CsvTable bound_report_table(const std::vector<BoundReport>& rows) {
  CsvTable t({"name", "gamma", "d", "m", "C0", "R", "theoretical", "measured", "satisfied"});
  for (const BoundReport& r : rows)
    t.add_row({r.name, format_double(r.gamma), std::to_string(r.context.d), std::to_string(r.context.m),
               format_double(r.context.C0), format_double(r.context.R), format_double(r.theoretical),
               format_double(r.measured), r.satisfied ? "true" : "false"});
  return t;
}

}  // namespace lazyadv
