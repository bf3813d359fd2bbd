#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hts/attacks.hpp"
#include "hts/image.hpp"
#include "hts/model.hpp"
#include "hts/transforms.hpp"

namespace hts {

enum class TrainMode { standard, adversarial };

struct TrainConfig {
  TrainMode mode = TrainMode::standard;
  AttackConfig attack_for_training;  // adversarial mode only
  Transform defense;                 // applied in-loop to every model input
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  uint64_t seed = 0;
  bool verbose = false;
  int jobs = 1;  // per-example attack fan-out within a batch
};

// SGD with momentum on cross-entropy. Standard mode trains on
// defense-transformed clean inputs; adversarial mode attacks each example
// first (BPDA-wrapped when the defense breaks gradients), then transforms.
// Throws on NaN loss. Fixed (seed, data, config) gives identical parameters.
SmallCnn train(SmallCnn model, const std::vector<LabeledExample>& data, const TrainConfig& cfg);

struct EvalRow {
  std::string method;    // defense name
  std::string training;  // "standard" / "adversarial"
  double clean = 0.0;    // accuracies in percent
  double pgd_linf = 0.0;
  double pgd_l2 = 0.0;
  double mult_linf = 0.0;
  double mult_l2 = 0.0;
  double avg_adv = 0.0;
  double avg_all = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  // per-defense averaged feature MSE under PGD-linf
  std::vector<std::pair<std::string, double>> feature_mse;
  size_t ball_violations = 0;  // constraint failures observed while evaluating
  size_t attacked_examples = 0;
};

// One report row: clean accuracy plus one column per attack config. Attacks
// are BPDA-wrapped for gradient-breaking defenses and plain otherwise; every
// generated example is re-checked against its ball constraint.
EvalRow evaluate(const SmallCnn& model, const Transform& defense,
                 const std::vector<LabeledExample>& test, const std::vector<AttackConfig>& attacks,
                 uint64_t seed, int jobs, EvalReport* stats = nullptr);

// Mean over feature coordinates of (F(clean) - F(defense(adversarial)))^2.
// The clean branch is untransformed unless transform_clean_branch is set.
double feature_mse(const SmallCnn& model, const Image& clean, const Image& adversarial,
                   const Transform& defense, bool transform_clean_branch = false);

// Average feature_mse over a test set, adversarial = PGD-linf examples
// generated against (model, defense) with the evaluation protocol.
double average_feature_mse(const SmallCnn& model, const Transform& defense,
                           const std::vector<LabeledExample>& test, const AttackConfig& pgd_cfg,
                           uint64_t seed, int jobs, bool transform_clean_branch = false);

// CSV schema: method,training,clean,pgd_linf,pgd_l2,mult_linf,mult_l2,avg_adv,avg_all
// with two-decimal percentages. Byte-deterministic for a fixed report.
void report_csv(const EvalReport& report, const std::string& path);
std::string report_csv_string(const EvalReport& report);

struct ExperimentConfig {
  std::string dataset = "synthetic";  // "synthetic" or a CIFAR-10 batch path
  size_t train_count = 5000;
  size_t test_count = 1000;
  std::vector<std::string> defenses = {"identity", "halftone"};
  std::vector<std::string> modes = {"standard", "adversarial"};
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int steps = 5;
  bool random_start = true;
  uint64_t seed = 0;
  int jobs = 1;
  bool with_feature_mse = false;
  bool verbose = false;
  std::string checkpoint_dir;  // when set, trained models are saved here
};

// Full grid: trains one model per (defense, mode) -- adversarial mode uses
// PGD-linf for training -- and evaluates all four attack types on each.
EvalReport run_experiment(const ExperimentConfig& cfg);

// Loads cfg.dataset: synthetic generator or CIFAR-10 binary batch.
void load_experiment_data(const ExperimentConfig& cfg, std::vector<LabeledExample>& train_set,
                          std::vector<LabeledExample>& test_set);

std::vector<AttackConfig> standard_attack_suite(int steps, bool random_start);

}  // namespace hts
