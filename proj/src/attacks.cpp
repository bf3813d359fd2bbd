#include "hts/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hts {

void AttackConfig::validate() const {
  if (steps < 1) throw ConfigError("attack: steps must be >= 1");
  if (family == AttackFamily::pgd) {
    if (epsilon <= 0.0) throw ConfigError("pgd: epsilon must be > 0");
    if (alpha <= 0.0) throw ConfigError("pgd: alpha must be > 0");
  } else {
    if (epsilon_m <= 1.0) throw ConfigError("mult: epsilon_m must be > 1");
    if (alpha_m <= 1.0) throw ConfigError("mult: alpha_m must be > 1");
  }
}

std::string AttackConfig::name() const {
  std::string s = family == AttackFamily::pgd ? "pgd" : "mult";
  s += norm == AttackNorm::linf ? "_linf" : "_l2";
  return s;
}

AttackConfig pgd_linf_config() { return AttackConfig{}; }

AttackConfig pgd_l2_config() {
  AttackConfig c;
  c.norm = AttackNorm::l2;
  c.epsilon = 1.0;
  c.alpha = 3.0;
  return c;
}

AttackConfig mult_linf_config() {
  AttackConfig c;
  c.family = AttackFamily::mult;
  c.epsilon_m = 1.08;
  c.alpha_m = 1.03;
  return c;
}

AttackConfig mult_l2_config() {
  AttackConfig c = mult_linf_config();
  c.norm = AttackNorm::l2;
  c.epsilon_m = 1.3;
  return c;
}

double linf_dist(const Image& a, const Image& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double l2_dist(const Image& a, const Image& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double grad_l2_norm(const std::vector<double>& g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

// One loss/gradient evaluation: loss of C(transform(x)) and the gradient
// w.r.t. the (transformed) model input.
double loss_and_grad(const SmallCnn& model, const Image& x, int label, const Transform& transform,
                     std::vector<double>& grad_out) {
  Image input = apply(transform, x);
  ad::Tape tape;
  auto g = forward(model, tape, {1, input.channels, input.height, input.width}, input.data,
                   /*input_grad=*/true, /*param_grad=*/false);
  auto loss = tape.softmax_cross_entropy(g.logits, {label});
  double loss_value = loss->values[0];
  tape.backward(loss);
  grad_out = g.input->grad;
  return loss_value;
}

}  // namespace

AttackResult run_attack(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                        const Transform& transform, uint64_t seed) {
  cfg.validate();
  const Image& x0 = ex.image;
  const size_t n = x0.size();

  AttackResult res;
  std::mt19937_64 rng(seed);

  if (cfg.family == AttackFamily::pgd) {
    Image x = x0;
    if (cfg.random_start) {
      std::uniform_real_distribution<double> dist(-cfg.epsilon, cfg.epsilon);
      for (double& v : x.data) v += dist(rng);
      if (cfg.norm == AttackNorm::l2) {
        double d = l2_dist(x, x0);
        if (d > cfg.epsilon) {
          double scale = cfg.epsilon / d;
          for (size_t i = 0; i < n; ++i) x.data[i] = x0.data[i] + (x.data[i] - x0.data[i]) * scale;
        }
      }
      x = clamp_unit(std::move(x));
    }

    std::vector<double> g;
    for (int t = 0; t < cfg.steps; ++t) {
      res.loss_trace.push_back(loss_and_grad(model, x, ex.label, transform, g));
      if (cfg.norm == AttackNorm::linf) {
        for (size_t i = 0; i < n; ++i) {
          double v = x.data[i] + cfg.alpha * sign(g[i]);
          v = std::clamp(v, x0.data[i] - cfg.epsilon, x0.data[i] + cfg.epsilon);
          x.data[i] = std::clamp(v, 0.0, 1.0);
        }
      } else {
        double gn = std::max(grad_l2_norm(g), 1e-12);
        for (size_t i = 0; i < n; ++i) x.data[i] += cfg.alpha * g[i] / gn;
        double d = l2_dist(x, x0);
        if (d > cfg.epsilon) {
          double scale = cfg.epsilon / d;
          for (size_t i = 0; i < n; ++i) x.data[i] = x0.data[i] + (x.data[i] - x0.data[i]) * scale;
        }
        x = clamp_unit(std::move(x));
      }
    }
    res.adversarial = std::move(x);
    double dist = cfg.norm == AttackNorm::linf ? linf_dist(res.adversarial, x0)
                                               : l2_dist(res.adversarial, x0);
    res.constraint_slack = cfg.epsilon - dist;
    return res;
  }

  // Mult: log-domain PGD over the multiplicative factor field r (init 1).
  const double log_alpha = std::log(cfg.alpha_m);
  const double log_eps = std::log(cfg.epsilon_m);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  std::vector<double> log_r(n, 0.0);
  if (cfg.random_start) {
    std::uniform_real_distribution<double> dist(-log_eps, log_eps);
    for (double& v : log_r) v = dist(rng);
    if (cfg.norm == AttackNorm::l2) {
      double d = grad_l2_norm(log_r);
      double budget = log_eps * sqrt_n;
      if (d > budget)
        for (double& v : log_r) v *= budget / d;
    }
  }

  auto apply_factors = [&](Image img) {
    for (size_t i = 0; i < n; ++i) img.data[i] = x0.data[i] * std::exp(log_r[i]);
    return clamp_unit(std::move(img));
  };

  Image x = apply_factors(x0);
  std::vector<double> g;
  for (int t = 0; t < cfg.steps; ++t) {
    res.loss_trace.push_back(loss_and_grad(model, x, ex.label, transform, g));
    if (cfg.norm == AttackNorm::linf) {
      for (size_t i = 0; i < n; ++i) {
        log_r[i] = std::clamp(log_r[i] + log_alpha * sign(g[i]), -log_eps, log_eps);
      }
    } else {
      double gn = std::max(grad_l2_norm(g), 1e-12);
      for (size_t i = 0; i < n; ++i) log_r[i] += log_alpha * g[i] / gn * sqrt_n;
      double d = grad_l2_norm(log_r);
      double budget = log_eps * sqrt_n;
      if (d > budget)
        for (double& v : log_r) v *= budget / d;
    }
    x = apply_factors(x0);
  }
  res.adversarial = std::move(x);
  double slack = log_eps;
  for (size_t i = 0; i < n; ++i) slack = std::min(slack, log_eps - std::abs(log_r[i]));
  res.constraint_slack = slack;
  return res;
}

AttackResult pgd_linf(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                      uint64_t seed) {
  if (cfg.family != AttackFamily::pgd || cfg.norm != AttackNorm::linf) {
    throw ConfigError("pgd_linf: config is " + cfg.name());
  }
  return run_attack(model, ex, cfg, make_identity(), seed);
}

AttackResult pgd_l2(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                    uint64_t seed) {
  if (cfg.family != AttackFamily::pgd || cfg.norm != AttackNorm::l2) {
    throw ConfigError("pgd_l2: config is " + cfg.name());
  }
  return run_attack(model, ex, cfg, make_identity(), seed);
}

AttackResult mult_attack(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                         uint64_t seed) {
  if (cfg.family != AttackFamily::mult) throw ConfigError("mult_attack: config is " + cfg.name());
  return run_attack(model, ex, cfg, make_identity(), seed);
}

AttackResult bpda_attack(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                         const Transform& transform, uint64_t seed) {
  return run_attack(model, ex, cfg, transform, seed);
}

bool constraint_ok(const AttackConfig& cfg, const Image& clean, const Image& adversarial) {
  constexpr double tol = 1e-6;
  for (double v : adversarial.data)
    if (v < -tol || v > 1.0 + tol) return false;

  if (cfg.family == AttackFamily::pgd) {
    double d = cfg.norm == AttackNorm::linf ? linf_dist(adversarial, clean)
                                            : l2_dist(adversarial, clean);
    return d <= cfg.epsilon + tol;
  }
  if (cfg.norm == AttackNorm::linf) {
    for (size_t i = 0; i < clean.size(); ++i) {
      double x0 = clean.data[i];
      if (x0 <= 1e-6) continue;  // near-zero pixels excluded from the ratio test
      double ratio = adversarial.data[i] / x0;
      if (ratio < 1.0 / cfg.epsilon_m - tol || ratio > cfg.epsilon_m + tol) return false;
    }
  }
  return true;
}

}  // namespace hts
