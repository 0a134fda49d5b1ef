#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lazyadv/attacks.hpp"
#include "lazyadv/data.hpp"
#include "lazyadv/io.hpp"
#include "lazyadv/network.hpp"

namespace lazyadv {

struct BoundContext {
  Index d = 0;
  Index m = 0;
  double C0 = 0.0;
  double R = 0.0;
};

/// A measured quantity next to its closed-form bound. `satisfied` is true
/// when the inequality holds in the direction the bound states, or the bound
/// is vacuous.
struct BoundReport {
  std::string name;
  double gamma = 0.0;
  double theoretical = 0.0;
  double measured = 0.0;
  bool satisfied = false;
  bool vacuous = false;
  std::string note;
  BoundContext context;
};

// --- closed forms (natural logarithms throughout) --------------------------

/// sqrt(2 ln(2/g)) + 2 ln(2/g) / sqrt(m) + C0: sup of |f(x)| over the lazy
/// ball B_{2,inf}(W0, C0/sqrt(m)) with probability >= 1 - g.
double fvalue_bound(double gamma, Index m, double C0);

/// Lower bound on ||grad f(x)|| over the lazy ball, probability >= 1 - g.
/// Negative radicands are clamped to zero; a result <= 0 is vacuous.
double grad_bound(double gamma, Index d, Index m, double C0);

/// V m + sqrt(m ln(1/g) / 2): bound on |S_v|.
double sign_flip_count_bound(double gamma, Index m, double V);

/// P(sign(w0.x) != sign(w0.(x + delta))) <= R sqrt(2 ln d) + 1/d for ||delta|| <= R <= 1/2.
double sign_flip_probability_bound(double R, Index d);

/// Per-neuron probability that some delta' within eps of delta and some W in
/// B_{2,inf}(W0, V) change the sign: 2 eps (sqrt(d) + 2 sqrt(d ln(2/eps))) + (1 + R + eps) V.
double sign_flip_probability_bound_eps(double eps, double R, double V, Index d);

/// Fixed-direction gradient-difference bound for ||delta|| <= R <= C1/sqrt(d).
double grad_diff_fixed_bound(double gamma, Index d, Index m, double C0, double R);

/// Uniform gradient-difference bound
/// 9 (C1 d^2 ln^2(md) sqrt(ln d / d))^{1/4} + 15 d ln(md) / sqrt(m) + 327 max(1, C0) C0 d^{1/4}.
double unif_grad_diff_bound(Index d, Index m, double C0, double C1);

/// Allowed Monte-Carlo violation frequency slack: 3 sqrt(g (1 - g) / n).
double binomial_slack(double gamma, int trials);

// --- checks against a concrete network --------------------------------------

/// |f(x)| at the current weights against fvalue_bound.
BoundReport check_fvalue(const Network& net, const Vector& x, double gamma, double C0);

/// Exact [inf, sup] of f(x; a, W) over W in B_{2,inf}(W0, radius). Each
/// neuron moves independently: a_s = +1 units shift by +radius ||x||,
/// a_s = -1 units by -radius ||x|| (reversed for the infimum).
std::pair<double, double> lazy_ball_output_range(const Network& net, const Vector& x, double radius);

/// sup over the lazy ball of |f(x)| against fvalue_bound.
BoundReport check_fvalue_worst_case(const Network& net, const Vector& x, double gamma, double C0);

/// ||grad f(x)|| at the current weights against grad_bound.
BoundReport check_grad(const Network& net, const Vector& x, double gamma, double C0);

struct SignFlipSets {
  std::vector<Index> s_v_exact;
  std::vector<Index> s_v_prime_exact;
  double bound_v = 0.0;
  double bound_v_prime = 0.0;
};

/// Exact sets of neurons whose activation at x (S_v), or at some x + delta
/// with ||delta|| <= R (S_v'), differs from initialization for some W in
/// B_{2,inf}(W0, V). A neuron with z = w_{s,0}.x is in S_v iff -V < z <= V.
/// For S_v' the attainable values of w0.u/(||w0|| ||u||) over u in B(x, R)
/// form the interval [cos(phi + asin R), cos(phi - asin R)] (clipped to
/// [0, pi]) and membership is its intersection with (-V/||w0||, V/||w0||].
/// Requires ||x|| = 1 and R <= 1/2.
SignFlipSets sign_flip_sets(const Network& net, const Vector& x, double V,
                            std::optional<double> R = std::nullopt, double gamma = 0.1);

BoundReport check_sign_flip(const Network& net, const Vector& x, double V, double gamma);

/// max over n_probes uniform delta in B(0, R) of ||grad f(x) - grad f(x + delta)||
/// against unif_grad_diff_bound. A budget above C1/sqrt(d) is flagged in `note`.
BoundReport grad_diff_probe(const Network& net, const Vector& x, double R, int n_probes, Rng& rng,
                            double C0, double C1 = 1.0, double gamma = 0.1);

/// Fraction of the n_probes perturbations (||delta|| = R) that flip the
/// activation of a neuron, averaged over neurons, against sign_flip_probability_bound.
BoundReport sign_flip_probability_probe(const Network& net, const Vector& x, double R, int n_probes,
                                        Rng& rng);

enum class RobustAttack : std::uint8_t { pgd, single_step };

struct RobustErrorConfig {
  RobustAttack attack = RobustAttack::single_step;
  PgdConfig pgd;                 // radius overwritten by R
  EtaSearchConfig search;        // eta_max overwritten by R / ||grad f(x)||
};

/// Attack-based lower estimate of the robust error L_R: an example counts as
/// an error when it is misclassified or the attack misclassifies it within
/// budget R. Satisfied when the estimate reaches 0.9.
BoundReport robust_error_estimate(const Network& net, const LabeledDataset& data, double R,
                                  const RobustErrorConfig& cfg, double C0 = 0.0);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least-squares fit of ln(quantity) = slope ln(d) + intercept.
PowerLawFit scaling_fit(const std::vector<std::pair<double, double>>& pairs);

// --- Monte-Carlo over initializations ----------------------------------------

struct LemmaMonteCarloConfig {
  Index d = 0;
  Index m = 0;
  std::vector<double> C0s{10.0};
  std::vector<double> gammas{0.1};
  int n_seeds = 100;
  std::uint64_t base_seed = 0;
};

/// Violation counts of one lemma at one confidence level.
struct LemmaTally {
  std::string lemma;  // "fvalue", "sign_flip", "grad"
  double C0 = 0.0;
  double gamma = 0.0;
  int trials = 0;      // non-vacuous draws
  int violations = 0;
  int vacuous = 0;

  double frequency() const { return trials > 0 ? static_cast<double>(violations) / trials : 0.0; }
};

/// Independent initializations (one per seed, each with a fresh uniform x on
/// the sphere), shared by every C0. Per draw: worst-case |f| over the lazy
/// ball, |S_v| at V = C0/sqrt(m), and the smallest gradient norm among W0 and
/// the lazy-ball point that pushes every neuron against the initial gradient
/// direction. Tallies are ordered by lemma, then C0, then gamma.
std::vector<LemmaTally> lemma_monte_carlo(const LemmaMonteCarloConfig& cfg);

/// CSV columns: name, gamma, d, m, C0, R, theoretical, measured, satisfied.
CsvTable bound_report_table(const std::vector<BoundReport>& rows);

}  // namespace lazyadv
