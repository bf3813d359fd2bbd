#include "hts/train_eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <thread>

#include "hts/dataset.hpp"

namespace hts {

namespace {

// Deterministic fan-out: fixed chunks of work, results keyed by index, so the
// outcome does not depend on scheduling or on the job count.
void parallel_for(size_t count, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(jobs, static_cast<int>(count));
  pool.reserve(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

void check_binary_inputs(const std::vector<Image>& inputs) {
  for (const Image& img : inputs)
    for (double v : img.data)
      if (v != 0.0 && v != 1.0) {
        throw UsageError("halftone defense fed a non-binary value to the model");
      }
}

std::vector<double> pack_batch(const std::vector<Image>& inputs) {
  std::vector<double> values;
  values.reserve(inputs.size() * inputs[0].size());
  for (const Image& img : inputs) values.insert(values.end(), img.data.begin(), img.data.end());
  return values;
}

}  // namespace

SmallCnn train(SmallCnn model, const std::vector<LabeledExample>& data, const TrainConfig& cfg) {
  if (data.empty()) throw ConfigError("train: empty dataset");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw ConfigError("train: bad epochs/batch size");
  if (cfg.mode == TrainMode::adversarial) cfg.attack_for_training.validate();

  const bool bpda = needs_bpda(cfg.defense.kind);
  const Transform attack_transform = bpda ? cfg.defense : make_identity();

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5u, static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      size_t bn = end - start;

      std::vector<Image> inputs(bn);
      std::vector<int> labels(bn);
      parallel_for(bn, cfg.jobs, [&](size_t k) {
        const LabeledExample& ex = data[order[start + k]];
        labels[k] = ex.label;
        Image x = ex.image;
        if (cfg.mode == TrainMode::adversarial) {
          uint64_t atk_seed = mix_seed(cfg.seed, static_cast<uint64_t>(epoch), order[start + k]);
          x = run_attack(model, ex, cfg.attack_for_training, attack_transform, atk_seed).adversarial;
        }
        inputs[k] = apply(cfg.defense, x);
      });
      if (cfg.defense.kind == TransformKind::halftone) check_binary_inputs(inputs);

      ad::Tape tape;
      auto g = forward(model, tape,
                       {static_cast<int>(bn), inputs[0].channels, inputs[0].height, inputs[0].width},
                       pack_batch(inputs), /*input_grad=*/false, /*param_grad=*/true);
      auto loss = tape.softmax_cross_entropy(g.logits, labels);
      if (!std::isfinite(loss->values[0])) {
        throw std::runtime_error("training diverged: loss " + std::to_string(loss->values[0]) +
                                 " at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss->values[0];
      ++batches;
      tape.backward(loss);

      for (size_t p = 0; p < model.params.size(); ++p) {
        Param& param = model.params[p];
        const auto& grad = g.param_leaves[p]->grad;
        for (size_t i = 0; i < param.values.size(); ++i) {
          param.momentum[i] = cfg.momentum * param.momentum[i] + grad[i];
          param.values[i] -= cfg.learning_rate * param.momentum[i];
        }
      }
    }
    if (cfg.verbose) {
      std::fprintf(stderr, "epoch %d: mean loss %.4f\n", epoch,
                   batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    }
  }
  return model;
}

namespace {

double clean_accuracy(const SmallCnn& model, const Transform& defense,
                      const std::vector<LabeledExample>& test, int jobs) {
  if (test.empty()) return 0.0;
  std::vector<int> correct(test.size(), 0);
  parallel_for(test.size(), jobs, [&](size_t i) {
    Image x = apply(defense, test[i].image);
    correct[i] = predict_class(model, x) == test[i].label ? 1 : 0;
  });
  return 100.0 * std::accumulate(correct.begin(), correct.end(), 0) / static_cast<double>(test.size());
}

}  // namespace

EvalRow evaluate(const SmallCnn& model, const Transform& defense,
                 const std::vector<LabeledExample>& test, const std::vector<AttackConfig>& attacks,
                 uint64_t seed, int jobs, EvalReport* stats) {
  EvalRow row;
  row.method = transform_name(defense.kind);
  row.clean = clean_accuracy(model, defense, test, jobs);

  const Transform attack_transform = needs_bpda(defense.kind) ? defense : make_identity();

  double adv_sum = 0.0;
  for (size_t a = 0; a < attacks.size(); ++a) {
    const AttackConfig& cfg = attacks[a];
    std::vector<int> correct(test.size(), 0);
    std::vector<int> violations(test.size(), 0);
    parallel_for(test.size(), jobs, [&](size_t i) {
      uint64_t atk_seed = mix_seed(seed, a + 1, i);
      AttackResult res = run_attack(model, test[i], cfg, attack_transform, atk_seed);
      if (!constraint_ok(cfg, test[i].image, res.adversarial)) violations[i] = 1;
      Image x = apply(defense, res.adversarial);
      correct[i] = predict_class(model, x) == test[i].label ? 1 : 0;
    });
    double acc = test.empty() ? 0.0
                              : 100.0 * std::accumulate(correct.begin(), correct.end(), 0) /
                                    static_cast<double>(test.size());
    size_t viol = static_cast<size_t>(std::accumulate(violations.begin(), violations.end(), 0));
    if (stats) {
      stats->ball_violations += viol;
      stats->attacked_examples += test.size();
    }
    adv_sum += acc;
    std::string name = cfg.name();
    if (name == "pgd_linf") row.pgd_linf = acc;
    else if (name == "pgd_l2") row.pgd_l2 = acc;
    else if (name == "mult_linf") row.mult_linf = acc;
    else if (name == "mult_l2") row.mult_l2 = acc;
  }
  row.avg_adv = attacks.empty() ? 0.0 : adv_sum / static_cast<double>(attacks.size());
  row.avg_all = (row.clean + adv_sum) / static_cast<double>(attacks.size() + 1);
  return row;
}

double feature_mse(const SmallCnn& model, const Image& clean, const Image& adversarial,
                   const Transform& defense, bool transform_clean_branch) {
  FeatureMap fc = extract_features(model, transform_clean_branch ? apply(defense, clean) : clean);
  FeatureMap fa = extract_features(model, apply(defense, adversarial));
  return feature_mse_value(fc, fa);
}

double average_feature_mse(const SmallCnn& model, const Transform& defense,
                           const std::vector<LabeledExample>& test, const AttackConfig& pgd_cfg,
                           uint64_t seed, int jobs, bool transform_clean_branch) {
  if (test.empty()) return 0.0;
  const Transform attack_transform = needs_bpda(defense.kind) ? defense : make_identity();
  std::vector<double> mses(test.size(), 0.0);
  parallel_for(test.size(), jobs, [&](size_t i) {
    AttackResult res = run_attack(model, test[i], pgd_cfg, attack_transform, mix_seed(seed, 0xfeu, i));
    mses[i] = feature_mse(model, test[i].image, res.adversarial, defense, transform_clean_branch);
  });
  return std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(test.size());
}

std::string report_csv_string(const EvalReport& report) {
  std::string out = "method,training,clean,pgd_linf,pgd_l2,mult_linf,mult_l2,avg_adv,avg_all\n";
  char buf[256];
  for (const EvalRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f\n", r.method.c_str(),
                  r.training.c_str(), r.clean, r.pgd_linf, r.pgd_l2, r.mult_linf, r.mult_l2,
                  r.avg_adv, r.avg_all);
    out += buf;
  }
  return out;
}

void report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << report_csv_string(report);
  if (!out) throw IoError("write failed: " + path);
}

std::vector<AttackConfig> standard_attack_suite(int steps, bool random_start) {
  std::vector<AttackConfig> suite = {pgd_linf_config(), pgd_l2_config(), mult_linf_config(),
                                     mult_l2_config()};
  for (auto& c : suite) {
    c.steps = steps;
    c.random_start = random_start;
  }
  return suite;
}

void load_experiment_data(const ExperimentConfig& cfg, std::vector<LabeledExample>& train_set,
                          std::vector<LabeledExample>& test_set) {
  if (cfg.dataset == "synthetic") {
    // Disjoint seeded streams for the two splits.
    train_set = make_synthetic_dataset(cfg.train_count, mix_seed(cfg.seed, 0x7261u));
    test_set = make_synthetic_dataset(cfg.test_count, mix_seed(cfg.seed, 0x7465u));
  } else {
    auto all = load_cifar10_batch(cfg.dataset, cfg.train_count + cfg.test_count);
    if (all.size() < cfg.train_count + cfg.test_count) {
      throw ConfigError("dataset " + cfg.dataset + " has only " + std::to_string(all.size()) +
                        " records, need " + std::to_string(cfg.train_count + cfg.test_count));
    }
    train_set.assign(all.begin(), all.begin() + static_cast<long>(cfg.train_count));
    test_set.assign(all.begin() + static_cast<long>(cfg.train_count), all.end());
  }
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  std::vector<LabeledExample> train_set, test_set;
  load_experiment_data(cfg, train_set, test_set);

  auto attacks = standard_attack_suite(cfg.steps, cfg.random_start);
  AttackConfig train_attack = pgd_linf_config();  // adversarial training uses PGD-linf
  train_attack.steps = cfg.steps;
  train_attack.random_start = cfg.random_start;

  EvalReport report;
  for (size_t m = 0; m < cfg.modes.size(); ++m) {
    TrainMode mode;
    if (cfg.modes[m] == "standard") mode = TrainMode::standard;
    else if (cfg.modes[m] == "adversarial") mode = TrainMode::adversarial;
    else throw ConfigError("unknown training mode '" + cfg.modes[m] + "'");

    for (size_t d = 0; d < cfg.defenses.size(); ++d) {
      Transform defense = transform_from_name(cfg.defenses[d]);

      TrainConfig tc;
      tc.mode = mode;
      tc.attack_for_training = train_attack;
      tc.defense = defense;
      tc.epochs = cfg.epochs;
      tc.batch_size = cfg.batch_size;
      tc.learning_rate = cfg.learning_rate;
      tc.momentum = cfg.momentum;
      tc.seed = mix_seed(cfg.seed, m, d);
      tc.verbose = cfg.verbose;
      tc.jobs = cfg.jobs;

      SmallCnn model = init_model(mix_seed(cfg.seed, 0x1717u), 10, 3);
      if (cfg.verbose) {
        std::fprintf(stderr, "training %s / %s\n", cfg.defenses[d].c_str(), cfg.modes[m].c_str());
      }
      model = train(std::move(model), train_set, tc);
      if (!cfg.checkpoint_dir.empty()) {
        save_checkpoint(model, cfg.checkpoint_dir + "/" + cfg.defenses[d] + "_" + cfg.modes[m] + ".ckpt");
      }

      EvalRow row = evaluate(model, defense, test_set, attacks, mix_seed(cfg.seed, 0xe7a1u, m * 16 + d),
                             cfg.jobs, &report);
      row.training = cfg.modes[m];
      report.rows.push_back(row);

      if (cfg.with_feature_mse && mode == TrainMode::standard) {
        AttackConfig fm_cfg = train_attack;
        double v = average_feature_mse(model, defense, test_set, fm_cfg,
                                       mix_seed(cfg.seed, 0xf19u, d), cfg.jobs);
        report.feature_mse.emplace_back(cfg.defenses[d], v);
      }
    }
  }
  return report;
}

}  // namespace hts
