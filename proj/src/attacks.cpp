#include "lazyadv/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace lazyadv {

std::string_view to_string(AttackStatus s) {
  switch (s) {
    case AttackStatus::ok: return "ok";
    case AttackStatus::boundary_case: return "boundary_case";
    case AttackStatus::degenerate_gradient: return "degenerate_gradient";
    case AttackStatus::no_flip_found: return "no_flip_found";
  }
  return "unknown";
}

bool is_sign_flip(double f_before, double f_after) {
  if (std::abs(f_before) <= kSignTieTolerance || std::abs(f_after) <= kSignTieTolerance) return false;
  return (f_before > 0) != (f_after > 0);
}

AttackOutcome single_step_attack(const Network& net, const Vector& x, double C2) {
  AttackOutcome out;
  const auto [f, g] = forward_and_gradient(net, x);
  out.f_before = f;
  out.f_after = f;
  out.grad_norm = g.norm();
  if (std::abs(f) <= kSignTieTolerance) {
    out.status = AttackStatus::boundary_case;
    return out;
  }
  if (out.grad_norm == 0.0) {
    out.status = AttackStatus::degenerate_gradient;
    return out;
  }
  out.eta = (f > 0 ? -1.0 : 1.0) * C2 / (out.grad_norm * out.grad_norm);
  out.delta_norm = std::abs(out.eta) * out.grad_norm;
  out.f_after = forward(net, x + out.eta * g);
  out.flipped = is_sign_flip(f, out.f_after);
  return out;
}

GradientRay::GradientRay(const Network& net, const Vector& x) : net_(&net) {
  detail::check_input(net, x);
  pre_ = net.weights().transpose() * x;
  const Vector gate = (pre_.array() > 0.0).select(net.signs().array(), 0.0).matrix();
  f0_ = net.signs().dot(pre_.cwiseMax(0.0)) * net.inv_sqrt_width();
  grad_ = net.weights() * gate * net.inv_sqrt_width();
  rate_ = net.weights().transpose() * grad_;
}

double GradientRay::value(double eta) const {
  return net_->signs().dot((pre_ + eta * rate_).cwiseMax(0.0)) * net_->inv_sqrt_width();
}

AttackOutcome minimal_eta_search(const Network& net, const Vector& x, const EtaSearchConfig& cfg) {
  if (!(cfg.eta_max > 0)) throw InvalidArgument("eta_max must be > 0");
  if (cfg.grid_points < 2 || !(cfg.grid_span > 0 && cfg.grid_span < 1))
    throw InvalidArgument("eta grid needs >= 2 points and a span in (0, 1)");
  const GradientRay ray(net, x);
  AttackOutcome out;
  out.f_before = ray.f0();
  out.f_after = ray.f0();
  out.grad_norm = ray.gradient().norm();
  if (std::abs(ray.f0()) <= kSignTieTolerance) {
    out.status = AttackStatus::boundary_case;
    return out;
  }
  if (out.grad_norm == 0.0) {
    out.status = AttackStatus::degenerate_gradient;
    return out;
  }
  const double dir = ray.f0() > 0 ? -1.0 : 1.0;
  const auto flips = [&](double t) { return is_sign_flip(ray.f0(), ray.value(dir * t)); };

  const int n = cfg.grid_points;
  const auto grid = [&](int k) {
    return cfg.eta_max * std::pow(cfg.grid_span, static_cast<double>(n - 1 - k) / (n - 1));
  };
  int first = -1;
  for (int k = 0; k < n; ++k) {
    if (flips(grid(k))) {
      first = k;
      break;
    }
  }
  double eta_abs = cfg.eta_max;
  if (first < 0) {
    out.status = AttackStatus::no_flip_found;
  } else {
    double lo = first == 0 ? 0.0 : grid(first - 1);
    double hi = first == n - 1 ? cfg.eta_max : grid(first);
    for (int step = 0; step < 200 && (step < cfg.bisection_steps || hi - lo > cfg.tol); ++step) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (flips(mid) ? hi : lo) = mid;
    }
    eta_abs = hi;
  }
  out.eta = dir * eta_abs;
  out.delta_norm = eta_abs * out.grad_norm;
  out.f_after = forward(net, x + out.eta * ray.gradient());
  out.flipped = is_sign_flip(out.f_before, out.f_after);
  return out;
}

PgdBatchResult pgd_batch(const Network& net, const Matrix& X, std::span<const std::int8_t> y,
                         const PgdConfig& cfg) {
  if (!(cfg.radius > 0)) throw InvalidArgument("PGD budget must be > 0");
  if (cfg.steps < 0) throw InvalidArgument("PGD steps must be >= 0");
  detail::check_input(net, X);
  const Index n = X.cols();
  if (static_cast<Index>(y.size()) != n) throw InvalidArgument("labels do not match inputs");
  for (auto yi : y) check_label(yi);

  const double alpha = cfg.step_size();
  PgdBatchResult res{X, std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0)};
  Matrix& Xa = res.adversarial;
  const Matrix& W = net.weights();
  const double scale = net.inv_sqrt_width();

  Matrix Z, gates(net.width(), n), G;
  Vector f;
  for (int step = 0;; ++step) {
    Z.noalias() = W.transpose() * Xa;
    f.noalias() = (Z.cwiseMax(0.0).transpose() * net.signs()) * scale;
    bool all_done = true;
    for (Index i = 0; i < n; ++i) {
      auto& done = res.success[static_cast<std::size_t>(i)];
      if (!done && y[i] * f[i] <= 0.0 && cfg.stop_on_success) done = 1;
      all_done = all_done && done;
    }
    if (step == cfg.steps || all_done) break;

    for (Index i = 0; i < n; ++i)
      gates.col(i) = (Z.col(i).array() > 0.0).select(net.signs().array(), 0.0);
    G.noalias() = W * gates;
    for (Index i = 0; i < n; ++i) {
      if (res.success[static_cast<std::size_t>(i)]) continue;
      const double yi = y[i];
      // d/dx ln(1 + exp(-y f)) = -y sigmoid(-y f) grad f
      const double coef = -yi * sigmoid(-yi * f[i]) * scale;
      auto xi = Xa.col(i);
      if (cfg.step == PgdStep::normalized) {
        const double gn = G.col(i).norm();
        if (gn == 0.0) continue;
        xi += (-yi * alpha / gn) * G.col(i);
      } else {
        xi += (alpha * coef) * G.col(i);
      }
      project_to_ball_inplace(xi, X.col(i), cfg.radius);
    }
  }
  if (!cfg.stop_on_success)
    for (Index i = 0; i < n; ++i) res.success[static_cast<std::size_t>(i)] = y[i] * f[i] <= 0.0;
  return res;
}

AttackOutcome pgd_attack(const Network& net, const Vector& x, int y, const PgdConfig& cfg) {
  const std::int8_t label = static_cast<std::int8_t>(y);
  check_label(y);
  const auto [f, g] = forward_and_gradient(net, x);
  const PgdBatchResult r = pgd_batch(net, x, std::span<const std::int8_t>(&label, 1), cfg);
  AttackOutcome out;
  out.f_before = f;
  out.grad_norm = g.norm();
  out.delta_norm = (r.adversarial.col(0) - x).norm();
  out.eta = out.grad_norm > 0 ? out.delta_norm / out.grad_norm : 0.0;
  out.f_after = forward(net, r.adversarial.col(0));
  out.flipped = r.success[0] != 0;
  if (out.grad_norm == 0.0) out.status = AttackStatus::degenerate_gradient;
  return out;
}

double robust_accuracy(const Network& net, const LabeledDataset& data, const PgdConfig& cfg) {
  if (data.size() == 0) throw EmptyDataset("robust_accuracy needs data");
  PgdConfig c = cfg;
  c.stop_on_success = true;
  const PgdBatchResult r = pgd_batch(net, data.inputs, data.labels, c);
  const auto robust = std::count(r.success.begin(), r.success.end(), std::uint8_t{0});
  return static_cast<double>(robust) / static_cast<double>(data.size());
}

double clean_accuracy(const Network& net, const LabeledDataset& data) {
  if (data.size() == 0) throw EmptyDataset("clean_accuracy needs data");
  const Vector f = forward_batch(net, data.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += data.labels[i] * f[static_cast<Index>(i)] > 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lazyadv
