#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lazyadv/data.hpp"
#include "lazyadv/network.hpp"

namespace lazyadv {

/// |f| at or below this is a sign tie: never counted as a flip.
inline constexpr double kSignTieTolerance = 1e-12;

enum class AttackStatus : std::uint8_t {
  ok,
  boundary_case,        // |f(x)| <= tie tolerance, no sign to flip
  degenerate_gradient,  // grad f(x) = 0
  no_flip_found,        // search exhausted its budget without a flip
};

std::string_view to_string(AttackStatus s);

/// Per-example attack record. For gradient-step attacks delta = eta * grad f(x);
/// for PGD `eta` is the equivalent step ||delta|| / ||grad f(x)|| and `flipped`
/// reports misclassification y f(x~) <= 0.
struct AttackOutcome {
  double eta = 0.0;
  double delta_norm = 0.0;
  double grad_norm = 0.0;
  double f_before = 0.0;
  double f_after = 0.0;
  bool flipped = false;
  AttackStatus status = AttackStatus::ok;
};

/// True when f_before and f_after have strictly opposite signs, both outside
/// the tie tolerance.
bool is_sign_flip(double f_before, double f_after);

/// One gradient step delta = eta grad f(x) with |eta| = C2 / ||grad f(x)||^2 and
/// sign(eta) = -sign(f(x)). Evaluates f exactly twice; never mutates `net`.
AttackOutcome single_step_attack(const Network& net, const Vector& x, double C2);

struct EtaSearchConfig {
  double eta_max = 10.0;
  double tol = 1e-6;
  int grid_points = 64;
  double grid_span = 1e-8;    // smallest grid point = eta_max * grid_span
  int bisection_steps = 40;   // minimum refinement steps inside the flip cell
};

/// Smallest |eta| in (0, eta_max] whose gradient step flips sign(f). The
/// predicate is evaluated on a geometric grid and the first cell whose right
/// end flips is bisected; no monotonicity in eta is assumed.
AttackOutcome minimal_eta_search(const Network& net, const Vector& x, const EtaSearchConfig& cfg);

/// Sign-flip predicate along the gradient ray, evaluated in O(m) per query
/// from cached pre-activations w_s.x and w_s.grad f(x).
class GradientRay {
 public:
  GradientRay(const Network& net, const Vector& x);

  double f0() const { return f0_; }
  const Vector& gradient() const { return grad_; }
  /// f(x + eta * grad f(x)).
  double value(double eta) const;

 private:
  const Network* net_;
  double f0_ = 0.0;
  Vector grad_;
  Vector pre_;   // w_s . x
  Vector rate_;  // w_s . grad
};

enum class PgdStep : std::uint8_t {
  normalized,  // x~ += alpha * g / ||g||
  plain,       // x~ += alpha * g
};

struct PgdConfig {
  double radius = 0.0;
  int steps = 100;
  double alpha = 0.0;           // <= 0 selects 2.5 * radius / steps
  PgdStep step = PgdStep::plain;
  bool stop_on_success = true;  // freeze an example once it is misclassified

  double step_size() const { return alpha > 0 ? alpha : 2.5 * radius / steps; }
};

struct PgdBatchResult {
  Matrix adversarial;           // d x n
  std::vector<std::uint8_t> success;
};

/// Gradient ascent on ln(1 + exp(-y f)) from x~ = x with projection onto
/// B2(x_i, radius) after every step, for all columns at once.
PgdBatchResult pgd_batch(const Network& net, const Matrix& X, std::span<const std::int8_t> y,
                         const PgdConfig& cfg);

AttackOutcome pgd_attack(const Network& net, const Vector& x, int y, const PgdConfig& cfg);

/// Fraction of examples classified correctly that PGD fails to misclassify.
/// This lower-bounds the true robust accuracy at budget cfg.radius.
double robust_accuracy(const Network& net, const LabeledDataset& data, const PgdConfig& cfg);

/// Fraction of examples with y f(x) > 0.
double clean_accuracy(const Network& net, const LabeledDataset& data);

}  // namespace lazyadv
