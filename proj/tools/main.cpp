// halftone_shield: error-diffusion halftoning defense workbench CLI.
//
// Subcommands: halftone, transform, attack, train, eval, analyze.
// A flat key=value config file (sections per subcommand) can preset any
// experiment option; explicit flags override file values.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hts/config.hpp"
#include "hts/dataset.hpp"
#include "hts/halftone.hpp"
#include "hts/train_eval.hpp"

namespace {

using namespace hts;

uint64_t default_seed() {
  if (const char* env = std::getenv("HALFTONE_SHIELD_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Transform transform_from_flags(const std::string& kind, int kernel_size, double sigma, int quality,
                               int bits, int patch_radius, int search_radius, double h_filter) {
  Transform t = transform_from_name(kind);
  switch (t.kind) {
    case TransformKind::gaussian_blur:
      return make_gaussian_blur(kernel_size, sigma);
    case TransformKind::jpeg_like:
      return make_jpeg_like(quality);
    case TransformKind::bit_depth:
      return make_bit_depth(bits);
    case TransformKind::non_local_means:
      return make_non_local_means(patch_radius, search_radius, h_filter);
    default:
      return t;
  }
}

AttackConfig attack_from_flags(const std::string& family, const std::string& norm, double epsilon,
                               double alpha, double epsilon_m, double alpha_m, int steps,
                               bool random_start) {
  AttackConfig cfg;
  if (family == "pgd") cfg.family = AttackFamily::pgd;
  else if (family == "mult") cfg.family = AttackFamily::mult;
  else throw ConfigError("unknown attack family '" + family + "'");
  if (norm == "linf") cfg.norm = AttackNorm::linf;
  else if (norm == "l2") cfg.norm = AttackNorm::l2;
  else throw ConfigError("unknown attack norm '" + norm + "'");
  cfg.epsilon = epsilon;
  cfg.alpha = alpha;
  cfg.epsilon_m = epsilon_m;
  cfg.alpha_m = alpha_m;
  cfg.steps = steps;
  cfg.random_start = random_start;
  cfg.validate();
  return cfg;
}

// Fills an ExperimentConfig from a config-file section, then lets explicit
// CLI flags override below.
ExperimentConfig experiment_from_config(const ConfigFile& file, const std::string& section,
                                        uint64_t seed, int jobs, bool verbose) {
  ExperimentConfig cfg;
  cfg.dataset = file.get(section, "dataset", cfg.dataset);
  cfg.train_count = static_cast<size_t>(file.get_int(section, "train_count", static_cast<long>(cfg.train_count)));
  cfg.test_count = static_cast<size_t>(file.get_int(section, "test_count", static_cast<long>(cfg.test_count)));
  if (file.has(section, "defenses")) cfg.defenses = split_csv(file.get(section, "defenses", ""));
  if (file.has(section, "modes")) cfg.modes = split_csv(file.get(section, "modes", ""));
  cfg.epochs = static_cast<int>(file.get_int(section, "epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(file.get_int(section, "batch_size", cfg.batch_size));
  cfg.learning_rate = file.get_double(section, "learning_rate", cfg.learning_rate);
  cfg.momentum = file.get_double(section, "momentum", cfg.momentum);
  cfg.steps = static_cast<int>(file.get_int(section, "steps", cfg.steps));
  cfg.random_start = file.get_bool(section, "random_start", cfg.random_start);
  cfg.seed = static_cast<uint64_t>(file.get_int(section, "seed", static_cast<long>(seed)));
  cfg.jobs = static_cast<int>(file.get_int(section, "jobs", jobs));
  cfg.with_feature_mse = file.get_bool(section, "feature_mse", cfg.with_feature_mse);
  cfg.checkpoint_dir = file.get(section, "checkpoint_dir", cfg.checkpoint_dir);
  cfg.verbose = verbose;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"halftone_shield: halftoning defense and attack workbench"};
  app.require_subcommand(1);

  uint64_t seed = default_seed();
  std::string config_path;
  bool verbose = false;
  int jobs = 1;
  app.add_option("--seed", seed, "global RNG seed (env HALFTONE_SHIELD_SEED fallback)");
  app.add_option("--config", config_path, "flat key=value config file with per-subcommand sections");
  app.add_flag("--verbose", verbose, "progress output on stderr");
  app.add_option("--jobs", jobs, "worker parallelism for evaluation fan-out")->check(CLI::PositiveNumber);

  // -- halftone ---------------------------------------------------------
  auto* cmd_halftone = app.add_subcommand("halftone", "Floyd-Steinberg halftone an image");
  std::string ht_in, ht_out;
  cmd_halftone->add_option("--in", ht_in, "input PGM/PPM")->required();
  cmd_halftone->add_option("--out", ht_out, "output PGM/PPM")->required();

  // -- transform --------------------------------------------------------
  auto* cmd_transform = app.add_subcommand("transform", "apply a defense transform to an image");
  std::string tr_kind = "identity", tr_in, tr_out;
  int tr_kernel = 5, tr_quality = 30, tr_bits = 1, tr_pr = 1, tr_sr = 5;
  double tr_sigma = 1.5, tr_h = 0.1;
  cmd_transform->add_option("--kind", tr_kind,
                            "identity|gaussian_blur|non_local_means|jpeg_like|bit_depth|halftone")
      ->required();
  cmd_transform->add_option("--in", tr_in)->required();
  cmd_transform->add_option("--out", tr_out)->required();
  cmd_transform->add_option("--kernel-size", tr_kernel, "blur kernel size (odd)");
  cmd_transform->add_option("--sigma", tr_sigma, "blur sigma");
  cmd_transform->add_option("--quality", tr_quality, "jpeg_like quality 1..100");
  cmd_transform->add_option("--bits", tr_bits, "bit_depth bits >= 1");
  cmd_transform->add_option("--patch-radius", tr_pr, "non_local_means patch radius");
  cmd_transform->add_option("--search-radius", tr_sr, "non_local_means search radius");
  cmd_transform->add_option("--h-filter", tr_h, "non_local_means filtering strength");

  // -- attack -----------------------------------------------------------
  auto* cmd_attack = app.add_subcommand("attack", "generate an adversarial example");
  std::string at_ckpt, at_in, at_out, at_family = "pgd", at_norm = "linf", at_surrogate;
  int at_label = 0, at_steps = 5;
  double at_eps = 8.0 / 255.0, at_alpha = 3.0 / 255.0, at_eps_m = 1.08, at_alpha_m = 1.03;
  bool at_random_start = false;
  cmd_attack->add_option("--checkpoint", at_ckpt, "model checkpoint")->required();
  cmd_attack->add_option("--in", at_in, "clean input image (PPM/PGM)")->required();
  cmd_attack->add_option("--label", at_label, "ground-truth class index")->required();
  cmd_attack->add_option("--out", at_out, "adversarial output image")->required();
  cmd_attack->add_option("--family", at_family, "pgd|mult");
  cmd_attack->add_option("--norm", at_norm, "linf|l2");
  cmd_attack->add_option("--epsilon", at_eps, "pgd budget");
  cmd_attack->add_option("--alpha", at_alpha, "pgd step size");
  cmd_attack->add_option("--epsilon-m", at_eps_m, "mult budget (> 1)");
  cmd_attack->add_option("--alpha-m", at_alpha_m, "mult step (> 1)");
  cmd_attack->add_option("--steps", at_steps, "iterations T");
  cmd_attack->add_flag("--random-start", at_random_start, "start from a random point in the ball");
  cmd_attack->add_option("--surrogate", at_surrogate,
                         "BPDA: forward through this transform, backprop as identity");

  // -- train ------------------------------------------------------------
  auto* cmd_train = app.add_subcommand("train", "train a classifier");
  std::string trn_mode = "standard", trn_defense = "identity", trn_dataset = "synthetic", trn_out;
  size_t trn_count = 5000;
  int trn_epochs = 10, trn_batch = 64, trn_steps = 5;
  double trn_lr = 0.05, trn_momentum = 0.9;
  bool trn_random_start = true;
  cmd_train->add_option("--mode", trn_mode, "standard|adversarial");
  cmd_train->add_option("--defense", trn_defense, "transform applied in-loop");
  cmd_train->add_option("--dataset", trn_dataset, "'synthetic' or CIFAR-10 batch path");
  cmd_train->add_option("--train-count", trn_count, "number of training examples");
  cmd_train->add_option("--epochs", trn_epochs);
  cmd_train->add_option("--batch-size", trn_batch);
  cmd_train->add_option("--lr", trn_lr, "learning rate");
  cmd_train->add_option("--momentum", trn_momentum);
  cmd_train->add_option("--steps", trn_steps, "attack steps for adversarial mode");
  cmd_train->add_option("--random-start", trn_random_start, "random start for the training attack");
  cmd_train->add_option("--out", trn_out, "checkpoint output path")->required();

  // -- eval -------------------------------------------------------------
  auto* cmd_eval = app.add_subcommand("eval", "train + evaluate the defense x attack grid");
  std::string ev_out, ev_dataset, ev_defenses, ev_modes, ev_ckpt_dir;
  long ev_train_count = -1, ev_test_count = -1, ev_epochs = -1;
  bool ev_feature_mse = false;
  cmd_eval->add_option("--out", ev_out, "CSV output path")->required();
  cmd_eval->add_option("--dataset", ev_dataset);
  cmd_eval->add_option("--train-count", ev_train_count);
  cmd_eval->add_option("--test-count", ev_test_count);
  cmd_eval->add_option("--defenses", ev_defenses, "comma-separated defense list");
  cmd_eval->add_option("--modes", ev_modes, "comma-separated: standard,adversarial");
  cmd_eval->add_option("--epochs", ev_epochs);
  cmd_eval->add_option("--checkpoint-dir", ev_ckpt_dir, "save trained models here");
  cmd_eval->add_flag("--feature-mse", ev_feature_mse, "also compute feature-MSE statistics");

  // -- analyze ----------------------------------------------------------
  auto* cmd_analyze = app.add_subcommand("analyze", "per-defense feature-MSE analysis");
  std::string an_out, an_dataset, an_defenses, an_dump_dir;
  long an_train_count = -1, an_test_count = -1, an_epochs = -1;
  bool an_transform_clean = false;
  cmd_analyze->add_option("--out", an_out, "CSV output path (method,feature_mse)")->required();
  cmd_analyze->add_option("--dataset", an_dataset);
  cmd_analyze->add_option("--train-count", an_train_count);
  cmd_analyze->add_option("--test-count", an_test_count);
  cmd_analyze->add_option("--defenses", an_defenses);
  cmd_analyze->add_option("--epochs", an_epochs);
  cmd_analyze->add_option("--dump-dir", an_dump_dir, "write per-defense 8x8 difference maps (PGM)");
  cmd_analyze->add_flag("--transform-clean", an_transform_clean,
                        "pass the clean branch through the defense too");

  // Global flags may appear after the subcommand name.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints usage/help
    return code == 0 ? 0 : 1;
  }

  try {
    ConfigFile file;
    if (!config_path.empty()) file = ConfigFile::parse_file(config_path);

    if (*cmd_halftone) {
      HalftoneResult res = floyd_steinberg(load_ppm(ht_in));
      save_ppm(res.image, ht_out);
      if (verbose) std::fprintf(stderr, "dropped_error = %.9f\n", res.dropped_error);
      return 0;
    }

    if (*cmd_transform) {
      Transform t = transform_from_flags(tr_kind, tr_kernel, tr_sigma, tr_quality, tr_bits, tr_pr,
                                         tr_sr, tr_h);
      save_ppm(apply(t, load_ppm(tr_in)), tr_out);
      return 0;
    }

    if (*cmd_attack) {
      SmallCnn model = load_checkpoint(at_ckpt);
      LabeledExample ex{load_ppm(at_in), at_label};
      AttackConfig cfg = attack_from_flags(at_family, at_norm, at_eps, at_alpha, at_eps_m,
                                           at_alpha_m, at_steps, at_random_start);
      Transform surrogate = at_surrogate.empty() ? make_identity() : transform_from_name(at_surrogate);
      AttackResult res = run_attack(model, ex, cfg, surrogate, seed);
      save_ppm(res.adversarial, at_out);
      std::printf("clean_pred=%d adv_pred=%d final_loss=%.6f slack=%.6g\n",
                  predict_class(model, ex.image), predict_class(model, res.adversarial),
                  res.loss_trace.empty() ? 0.0 : res.loss_trace.back(), res.constraint_slack);
      return 0;
    }

    if (*cmd_train) {
      TrainConfig tc;
      if (trn_mode == "standard") tc.mode = TrainMode::standard;
      else if (trn_mode == "adversarial") tc.mode = TrainMode::adversarial;
      else throw ConfigError("unknown training mode '" + trn_mode + "'");
      tc.defense = transform_from_name(trn_defense);
      tc.attack_for_training = pgd_linf_config();
      tc.attack_for_training.steps = trn_steps;
      tc.attack_for_training.random_start = trn_random_start;
      tc.epochs = trn_epochs;
      tc.batch_size = trn_batch;
      tc.learning_rate = trn_lr;
      tc.momentum = trn_momentum;
      tc.seed = seed;
      tc.verbose = verbose;
      tc.jobs = jobs;

      ExperimentConfig data_cfg;
      data_cfg.dataset = trn_dataset;
      data_cfg.train_count = trn_count;
      data_cfg.test_count = 0;
      data_cfg.seed = seed;
      std::vector<LabeledExample> train_set, test_set;
      load_experiment_data(data_cfg, train_set, test_set);

      SmallCnn model = init_model(mix_seed(seed, 0x1717u), 10, train_set[0].image.channels);
      model = train(std::move(model), train_set, tc);
      save_checkpoint(model, trn_out);
      return 0;
    }

    if (*cmd_eval) {
      ExperimentConfig cfg = experiment_from_config(file, "eval", seed, jobs, verbose);
      if (cmd_eval->count("--dataset")) cfg.dataset = ev_dataset;
      if (cmd_eval->count("--train-count")) cfg.train_count = static_cast<size_t>(ev_train_count);
      if (cmd_eval->count("--test-count")) cfg.test_count = static_cast<size_t>(ev_test_count);
      if (cmd_eval->count("--defenses")) cfg.defenses = split_csv(ev_defenses);
      if (cmd_eval->count("--modes")) cfg.modes = split_csv(ev_modes);
      if (cmd_eval->count("--epochs")) cfg.epochs = static_cast<int>(ev_epochs);
      if (cmd_eval->count("--checkpoint-dir")) cfg.checkpoint_dir = ev_ckpt_dir;
      if (cmd_eval->count("--feature-mse")) cfg.with_feature_mse = true;
      if (app.count("--seed")) cfg.seed = seed;
      if (app.count("--jobs")) cfg.jobs = jobs;

      EvalReport report = run_experiment(cfg);
      report_csv(report, ev_out);
      if (report.ball_violations > 0) {
        std::fprintf(stderr, "warning: %zu attack ball violations\n", report.ball_violations);
        return 2;
      }
      return 0;
    }

    if (*cmd_analyze) {
      ExperimentConfig cfg = experiment_from_config(file, "analyze", seed, jobs, verbose);
      cfg.modes = {"standard"};
      cfg.with_feature_mse = false;  // computed below with the dump option
      // Short analysis schedule by default: with the desk-scale CNN, long
      // standard training inflates the halftone model's feature magnitudes
      // and the clean-vs-binary distribution gap dominates the comparison.
      if (!cmd_analyze->count("--epochs") && !file.has("analyze", "epochs")) cfg.epochs = 2;
      if (cmd_analyze->count("--dataset")) cfg.dataset = an_dataset;
      if (cmd_analyze->count("--train-count")) cfg.train_count = static_cast<size_t>(an_train_count);
      if (cmd_analyze->count("--test-count")) cfg.test_count = static_cast<size_t>(an_test_count);
      if (cmd_analyze->count("--defenses")) cfg.defenses = split_csv(an_defenses);
      if (cmd_analyze->count("--epochs")) cfg.epochs = static_cast<int>(an_epochs);
      if (app.count("--seed")) cfg.seed = seed;
      if (app.count("--jobs")) cfg.jobs = jobs;

      std::vector<LabeledExample> train_set, test_set;
      load_experiment_data(cfg, train_set, test_set);
      AttackConfig pgd = pgd_linf_config();
      pgd.steps = cfg.steps;
      pgd.random_start = cfg.random_start;

      std::string csv = "method,feature_mse\n";
      for (size_t d = 0; d < cfg.defenses.size(); ++d) {
        Transform defense = transform_from_name(cfg.defenses[d]);
        TrainConfig tc;
        tc.mode = TrainMode::standard;
        tc.defense = defense;
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch_size;
        tc.learning_rate = cfg.learning_rate;
        tc.momentum = cfg.momentum;
        tc.seed = mix_seed(cfg.seed, 0u, d);
        tc.verbose = verbose;
        tc.jobs = cfg.jobs;
        SmallCnn model = train(init_model(mix_seed(cfg.seed, 0x1717u), 10, 3), train_set, tc);

        double v = average_feature_mse(model, defense, test_set, pgd, mix_seed(cfg.seed, 0xf19u, d),
                                       cfg.jobs, an_transform_clean);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%.6f\n", cfg.defenses[d].c_str(), v);
        csv += buf;

        if (!an_dump_dir.empty()) {
          // Per-cell mean squared feature difference, rescaled to [0,1].
          const Transform atk_t = needs_bpda(defense.kind) ? defense : make_identity();
          FeatureMap probe = extract_features(model, test_set[0].image);
          std::vector<double> cell(static_cast<size_t>(probe.height) * probe.width, 0.0);
          for (size_t i = 0; i < test_set.size(); ++i) {
            AttackResult res = run_attack(model, test_set[i], pgd, atk_t, mix_seed(cfg.seed, 0xf19u, i));
            FeatureMap fc = extract_features(
                model, an_transform_clean ? apply(defense, test_set[i].image) : test_set[i].image);
            FeatureMap fa = extract_features(model, apply(defense, res.adversarial));
            for (int ch = 0; ch < fc.channels; ++ch)
              for (size_t p = 0; p < cell.size(); ++p) {
                double diff = fc.data[static_cast<size_t>(ch) * cell.size() + p] -
                              fa.data[static_cast<size_t>(ch) * cell.size() + p];
                cell[p] += diff * diff;
              }
          }
          double mx = *std::max_element(cell.begin(), cell.end());
          Image map(probe.height, probe.width, 1);
          for (size_t p = 0; p < cell.size(); ++p) map.data[p] = mx > 0 ? cell[p] / mx : 0.0;
          std::filesystem::create_directories(an_dump_dir);
          save_ppm(map, an_dump_dir + "/" + cfg.defenses[d] + "_diff.pgm");
        }
      }
      std::ofstream out(an_out, std::ios::binary);
      if (!out) throw IoError("cannot open " + an_out + " for writing");
      out << csv;
      return 0;
    }

    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
}
