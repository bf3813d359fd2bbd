#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hts/image.hpp"
#include "hts/model.hpp"
#include "hts/transforms.hpp"

namespace hts {

enum class AttackFamily { pgd, mult };
enum class AttackNorm { linf, l2 };

struct AttackConfig {
  AttackFamily family = AttackFamily::pgd;
  AttackNorm norm = AttackNorm::linf;
  double epsilon = 8.0 / 255.0;  // additive budget (pgd)
  double alpha = 3.0 / 255.0;    // additive step (pgd)
  double epsilon_m = 1.08;       // multiplicative budget (mult)
  double alpha_m = 1.03;         // multiplicative step (mult)
  int steps = 5;
  bool random_start = false;

  void validate() const;
  std::string name() const;  // "pgd_linf", "mult_l2", ...
};

AttackConfig pgd_linf_config();   // eps 8/255, alpha 3/255, T=5
AttackConfig pgd_l2_config();     // eps 1.0, alpha 3.0, T=5
AttackConfig mult_linf_config();  // eps_m 1.08, alpha_m 1.03, T=5
AttackConfig mult_l2_config();    // eps_m 1.3, alpha_m 1.03, T=5

struct AttackResult {
  Image adversarial;
  std::vector<double> loss_trace;  // loss at each step's pre-update iterate
  double constraint_slack = 0.0;   // budget minus achieved distance
};

// Shared attack core. Each step evaluates the loss on C(transform(x)) and
// backpropagates through the identity surrogate (gradient w.r.t. the model
// input is used as the gradient w.r.t. x); the update and projection follow
// cfg. With the identity transform this is the plain white-box attack.
AttackResult run_attack(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                        const Transform& transform, uint64_t seed = 0);

AttackResult pgd_linf(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                      uint64_t seed = 0);
AttackResult pgd_l2(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                    uint64_t seed = 0);
AttackResult mult_attack(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                         uint64_t seed = 0);
AttackResult bpda_attack(const SmallCnn& model, const LabeledExample& ex, const AttackConfig& cfg,
                         const Transform& transform, uint64_t seed = 0);

double linf_dist(const Image& a, const Image& b);
double l2_dist(const Image& a, const Image& b);

// Post-hoc ball-membership check (tolerance 1e-6). For mult-linf this is the
// ratio test on pixels with x0 > 1e-6; mult-l2 checks the [0,1] box only.
bool constraint_ok(const AttackConfig& cfg, const Image& clean, const Image& adversarial);

}  // namespace hts
