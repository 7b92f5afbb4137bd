// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors
//
// Acceptance suite: one pass/fail line per criterion. Runs everything by
// default; pass criterion numbers as arguments to run a subset. The CLI
// binary path comes from FLEXIHORIZON_BIN (criteria 10 and 11).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fh/config.hpp"
#include "fh/fdk.hpp"
#include "fh/fsn.hpp"
#include "fh/harness.hpp"
#include "fh/nnet.hpp"
#include "fh/scoring.hpp"
#include "fh/synthdata.hpp"
#include "fh/trajgeo.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fh;
using trajgeo::HorizonSet;
using trajgeo::Point2;
using trajgeo::Trajectory;

int failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

Trajectory random_points(std::mt19937_64& rng, std::size_t n, double box = 10.0) {
  std::uniform_real_distribution<double> u(-box, box);
  Trajectory t;
  t.points.resize(n);
  for (Point2& p : t.points) p = {u(rng), u(rng)};
  return t;
}

Trajectory random_walk(std::mt19937_64& rng, std::size_t n, double box = 10.0,
                       double step = 1.0) {
  std::uniform_real_distribution<double> u(-box, box);
  std::normal_distribution<double> g(0.0, step);
  Trajectory t;
  t.points.resize(n);
  t.points[0] = {u(rng), u(rng)};
  for (std::size_t i = 1; i < n; ++i)
    t.points[i] = {t.points[i - 1].x + g(rng), t.points[i - 1].y + g(rng)};
  return t;
}

// --------------------------------------------------------------------------
// 1. Exact Fréchet distance equals the exhaustive coupling enumeration.
void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> len(1, 6);
  std::size_t checked = 0;
  bool equal = true;
  for (int trial = 0; trial < 500; ++trial) {
    const Trajectory x = random_points(rng, len(rng));
    const Trajectory y = random_points(rng, len(rng));
    if (trajgeo::discrete_frechet(x, y) != trajgeo::brute_force_frechet(x, y)) equal = false;
    ++checked;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%zu pairs, exact equality, %.2f s", checked, seconds);
  report(1, equal && seconds < 10.0, "discrete Fréchet equals the coupling-enumeration oracle",
         detail);
}

// --------------------------------------------------------------------------
// 2. Smooth-kernel convergence at beta = 200 and improvement as beta doubles.
void criterion_2() {
  std::mt19937_64 rng(1002);
  const double betas[4] = {25.0, 50.0, 100.0, 200.0};
  double mean_abs[4] = {0, 0, 0, 0};
  double worst_rel_200 = 0.0;
  const int pairs = 50;
  for (int trial = 0; trial < pairs; ++trial) {
    const Trajectory x = random_walk(rng, 10);
    const Trajectory y = random_walk(rng, 10);
    const double exact = trajgeo::discrete_frechet(x, y);
    for (int b = 0; b < 4; ++b) {
      fdk::FdkParams params;
      params.beta = betas[b];
      params.gamma = 1.0;
      params.delta = 0.1;
      params.epsilon = 0.0;
      const double smooth = fdk::fdk_distance(x, y, params);
      mean_abs[b] += std::fabs(smooth - exact) / pairs;
      if (b == 3) worst_rel_200 = std::max(worst_rel_200, std::fabs(smooth - exact) / exact);
    }
  }
  bool monotone = true;
  for (int b = 1; b < 4; ++b)
    if (mean_abs[b] > mean_abs[b - 1] + 1e-6) monotone = false;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "max rel err %.4f at beta=200; mean abs err %.4f -> %.4f -> %.4f -> %.4f",
                worst_rel_200, mean_abs[0], mean_abs[1], mean_abs[2], mean_abs[3]);
  report(2, worst_rel_200 <= 0.02 && monotone, "FDK converges to the exact Fréchet distance",
         detail);
}

// --------------------------------------------------------------------------
// 3. Gradient correctness: fdk_distance_grad and every fsn_loss block.
fsn::FsnConfig grad_config() {
  fsn::FsnConfig config;
  config.history_len = 6;
  config.horizons = HorizonSet({2, 3});
  config.num_modes = 2;
  config.latent_dim = 8;
  config.encoder_hidden = {8};
  config.apm_hidden = {8};
  config.decoder_hidden = {8, 10};
  config.activation = nnet::Activation::kTanh;
  config.lambda = 0.5;
  return config;
}

synthdata::Sample grad_sample(std::mt19937_64& rng, const fsn::FsnConfig& config) {
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  synthdata::Sample s;
  s.history.points.resize(config.history_len);
  s.history.points[0] = {u(rng), u(rng)};
  for (std::size_t i = 1; i < config.history_len; ++i)
    s.history.points[i] = {s.history.points[i - 1].x + 0.3 + 0.1 * g(rng),
                           s.history.points[i - 1].y + 0.1 * g(rng)};
  s.future.points.resize(3);
  s.future.points[0] = s.history.points.back() + Point2{0.3, 0.0};
  for (std::size_t i = 1; i < 3; ++i)
    s.future.points[i] = s.future.points[i - 1] + Point2{0.3 + 0.05 * g(rng), 0.05 * g(rng)};
  return s;
}

scoring::HorizonLabel grad_label(int f, double q, const HorizonSet& horizons) {
  scoring::HorizonLabel label;
  label.f_gt = f;
  label.q = q;
  label.one_hot.assign(horizons.size(), 0.0);
  label.one_hot[horizons.index_of(f)] = 1.0;
  return label;
}

void criterion_3() {
  // fdk gradient at moderate sharpness on correlated pairs (all gradient
  // coordinates above the double-precision finite-difference noise floor).
  std::mt19937_64 rng(1003);
  fdk::FdkParams params;
  params.beta = 25.0;
  const double step = 1e-5;
  double worst_fdk = 0.0;
  std::normal_distribution<double> jitter(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    Trajectory x = random_walk(rng, 6);
    Trajectory y = x;
    for (Point2& q : y.points) q = q + Point2{jitter(rng), jitter(rng)};
    const std::vector<Point2> analytic = fdk::fdk_distance_grad(x, y, params);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int axis = 0; axis < 2; ++axis) {
        double& coord = axis == 0 ? x.points[i].x : x.points[i].y;
        const double saved = coord;
        coord = saved + step;
        const double up = fdk::fdk_distance(x, y, params);
        coord = saved - step;
        const double down = fdk::fdk_distance(x, y, params);
        coord = saved;
        const double fd = (up - down) / (2.0 * step);
        const double a = axis == 0 ? analytic[i].x : analytic[i].y;
        worst_fdk = std::max(worst_fdk, std::fabs(a - fd) / std::max(1e-8, std::fabs(fd)));
      }
    }
  }

  // fsn_loss parameter blocks, teacher frozen per the stop-gradient design.
  const fsn::FsnConfig config = grad_config();
  double worst_fsn = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    fsn::FsnModel model = fsn::FsnModel::init(config, 2000 + instance);
    std::vector<synthdata::Sample> batch;
    std::vector<scoring::HorizonLabel> labels;
    for (int i = 0; i < 4; ++i) {
      batch.push_back(grad_sample(rng, config));
      labels.push_back(grad_label(config.horizons[i % 2], 0.2 * (i + 1), config.horizons));
    }
    fsn::FsnGradients grads;
    fsn::fsn_batch_loss(model, batch, labels, &grads);
    std::size_t teacher = 0;
    for (std::size_t i = 1; i < labels.size(); ++i)
      if (labels[i].q < labels[teacher].q) teacher = i;
    const nnet::Tensor frozen =
        fsn::decode(fsn::encode(batch[teacher].history, model), labels[teacher].f_gt, model)
            .features;
    auto loss = [&]() {
      const fsn::FsnLossValue parts = fsn::fsn_batch_loss(model, batch, labels);
      std::vector<nnet::Tensor> features;
      std::vector<double> scores;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        features.push_back(
            fsn::decode(fsn::encode(batch[b].history, model), labels[b].f_gt, model).features);
        scores.push_back(labels[b].q);
      }
      features[teacher] = frozen;
      return parts.reg + parts.cls +
             model.config.lambda * fsn::kl_feature_distill(features, scores);
    };
    auto model_blocks = model.param_blocks();
    auto grad_blocks = grads.blocks();
    for (std::size_t blk = 0; blk < model_blocks.size(); ++blk) {
      if (model_blocks[blk].first.rfind("apm", 0) == 0) continue;
      nnet::Tensor& block = *model_blocks[blk].second;
      std::mt19937_64 pick(777 + instance * 31 + blk);
      for (int probe = 0; probe < 6; ++probe) {
        const std::size_t i = pick() % block.size();
        double& coord = block.values[i];
        const double saved = coord;
        coord = saved + step;
        const double up = loss();
        coord = saved - step;
        const double down = loss();
        coord = saved;
        const double fd = (up - down) / (2.0 * step);
        const double a = grad_blocks[blk]->values[i];
        if (std::max(std::fabs(a), std::fabs(fd)) < 1e-6) {
          // below the central-difference resolution: require tight absolute
          // agreement instead of a meaningless relative ratio
          if (std::fabs(a - fd) > 1e-8) worst_fsn = std::max(worst_fsn, 1.0);
          continue;
        }
        worst_fsn = std::max(worst_fsn, std::fabs(a - fd) / std::max(1e-8, std::fabs(fd)));
      }
    }
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max rel err: fdk %.2e, fsn blocks %.2e", worst_fdk,
                worst_fsn);
  report(3, worst_fdk <= 1e-4 && worst_fsn <= 1e-4,
         "analytic gradients match central finite differences", detail);
}

// --------------------------------------------------------------------------
// 4. Closed-form loss values.
void criterion_4() {
  nnet::Tensor uniform6 = nnet::Tensor::vector(std::vector<double>(6, 1.0 / 6.0));
  nnet::Tensor hot = nnet::Tensor::zeros({6});
  hot[2] = 1.0;
  const double ce = nnet::cross_entropy(uniform6, hot);
  const bool ce_ok = std::fabs(ce - std::log(6.0)) <= 1e-9;

  const double h = fdk::huber(0.05, 0.1);
  const bool huber_ok = std::fabs(h - 0.00125) <= 2.3e-19;  // one ulp of the literal

  const HorizonSet horizons({5, 10, 15, 20, 25, 30});
  fsn::ApmOutput out;
  out.horizon_probs = uniform6;
  out.f_soft = 17.5;
  out.f_pred = 5;
  scoring::HorizonLabel label;
  label.f_gt = 20;
  label.one_hot.assign(6, 0.0);
  label.one_hot[3] = 1.0;
  const fsn::ApmLossValue apm = fsn::apm_loss(out, label, horizons);
  const bool apm_ok =
      std::fabs(apm.reg - 6.25) <= 1e-9 && std::fabs(apm.cls - std::log(6.0)) <= 1e-9;

  char detail[160];
  std::snprintf(detail, sizeof(detail), "ce=%.12f (ln6=%.12f), huber=%.20g, apm reg=%.12f", ce,
                std::log(6.0), h, apm.reg);
  report(4, ce_ok && huber_ok && apm_ok, "closed-form loss values", detail);
}

// --------------------------------------------------------------------------
// 5. Scoring semantics by exhaustive enumeration on synthetic score tables.
void criterion_5() {
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const HorizonSet horizons({5, 10, 15, 20, 25, 30});
  bool exact_division = true;
  bool scale_invariant = true;
  bool tie_break = true;

  auto argmin_of = [&horizons](const std::vector<double>& distances) {
    int best_f = 0;
    double best_q = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < distances.size(); ++i) {
      const double q = scoring::step_score(distances[i], horizons[i]);
      if (q < best_q) {
        best_q = q;
        best_f = horizons[i];
      }
    }
    return best_f;
  };

  for (int table = 0; table < 100; ++table) {
    std::vector<double> distances;
    for (std::size_t i = 0; i < horizons.size(); ++i) distances.push_back(u(rng));
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      if (scoring::step_score(distances[i], horizons[i]) !=
          distances[i] / static_cast<double>(horizons[i]))
        exact_division = false;
    }
    const int base = argmin_of(distances);
    for (double scale : {0.5, 2.0, 7.25}) {
      std::vector<double> scaled = distances;
      for (double& d : scaled) d *= scale;
      if (argmin_of(scaled) != base) scale_invariant = false;
    }
  }
  // equal q at every horizon must resolve to the smallest f
  {
    std::vector<double> distances;
    for (std::size_t i = 0; i < horizons.size(); ++i)
      distances.push_back(0.3 * static_cast<double>(horizons[i]));
    if (argmin_of(distances) != 5) tie_break = false;
    std::vector<double> zeros(horizons.size(), 0.0);
    if (argmin_of(zeros) != 5) tie_break = false;
  }
  report(5, exact_division && scale_invariant && tie_break,
         "score kernel: exact division, scale-invariant argmin, smallest-f ties",
         "100 tables x 3 scales, exhaustive enumeration");
}

// --------------------------------------------------------------------------
// 6 + 7. Protocol reproduction on the default synthetic suite.
void criteria_6_and_7() {
  config::RunConfig config;
  config.seed = 7;
  const auto start = std::chrono::steady_clock::now();
  const harness::Split split = harness::prepare_split(config);

  const harness::IrResult ir = harness::run_ir(split, config);
  std::map<int, double> ir_ade;
  for (const harness::MetricsRow& row : ir.table.rows) ir_ade[row.horizon] = row.min_ade;

  bool monotone = true;
  double prev = -1.0;
  for (int f : config.model.horizons.values()) {
    if (ir_ade.at(f) < prev * 0.95) monotone = false;  // 5% slack
    prev = std::max(prev, ir_ade.at(f));
  }
  {
    std::ostringstream detail;
    detail.setf(std::ios::fixed);
    detail.precision(3);
    detail << "IR minADE by horizon:";
    for (int f : config.model.horizons.values()) detail << " " << ir_ade.at(f);
    report(6, monotone, "IR error is non-decreasing in the horizon", detail.str());
  }

  const harness::ItResult it = harness::run_it(split, config);
  const harness::FsnResult fsn_result = harness::run_fsn(split, config, &it);
  std::map<int, double> fsn_ade;
  double adaptive_ade = -1.0;
  for (const harness::MetricsRow& row : fsn_result.table.rows) {
    if (row.method == "fsn") fsn_ade[row.horizon] = row.min_ade;
    if (row.method == "fsn-adaptive") adaptive_ade = row.min_ade;
  }
  int wins = 0;
  for (int f : config.model.horizons.values())
    if (fsn_ade.at(f) <= ir_ade.at(f)) ++wins;
  const bool adaptive_ok = adaptive_ade >= 0.0 && adaptive_ade <= ir_ade.at(30);
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(3);
  detail << wins << "/6 horizons, adaptive " << adaptive_ade << " vs IR@30 " << ir_ade.at(30);
  detail.precision(1);
  detail << ", " << minutes << " min";
  report(7, wins >= 5 && adaptive_ok && minutes < 15.0,
         "FSN matches or beats IR per horizon and adaptively", detail.str());
}

// --------------------------------------------------------------------------
// 8. APM learnability on the separable construction.
void criterion_8() {
  fsn::FsnConfig config;  // default geometry: T=20, horizons {5..30}
  synthdata::GeneratorConfig gen;
  gen.noise_sigma = 0.02;
  const HorizonSet& horizons = config.horizons;
  // label class c is carried by the turn rate visible across the history
  const double rates[6] = {-0.9, -0.5, -0.2, 0.2, 0.5, 0.9};
  std::vector<synthdata::Sample> train, heldout;
  std::vector<scoring::HorizonLabel> train_labels, heldout_labels;
  for (int i = 0; i < 1500; ++i) {
    const int cls = i % 6;
    synthdata::Scenario s;
    s.kind = synthdata::ScenarioKind::kConstantTurn;
    s.speed = 6.0;
    s.turn_rate = rates[cls];
    s.onset = 0;
    s.noise_sigma = gen.noise_sigma;
    s.seed = 50000 + static_cast<std::uint64_t>(i);
    const synthdata::Sample sample = synthdata::simulate(s, gen, "sep-" + std::to_string(i));
    scoring::HorizonLabel label;
    label.f_gt = horizons[static_cast<std::size_t>(cls)];
    label.q = 0.1;
    label.one_hot.assign(horizons.size(), 0.0);
    label.one_hot[static_cast<std::size_t>(cls)] = 1.0;
    if (i < 1200) {
      train.push_back(sample);
      train_labels.push_back(label);
    } else {
      heldout.push_back(sample);
      heldout_labels.push_back(label);
    }
  }
  fsn::FsnModel model = fsn::FsnModel::init(config, 808);
  fsn::TrainOptions options;
  options.epochs = 64;  // pinned by the experiment settings
  options.batch_size = 32;
  options.optim.learning_rate = 5e-4;
  options.optim.weight_decay = 1e-4;
  options.shuffle_seed = 809;
  const fsn::TrainLog log =
      fsn::train_apm(model, train, train_labels, heldout, heldout_labels, options);
  const double accuracy = log.rows.back().accuracy;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "held-out accuracy %.3f after %zu epochs", accuracy,
                options.epochs);
  report(8, accuracy >= 0.9, "APM learns the separable construction", detail);
}

// --------------------------------------------------------------------------
// 9. Exclusivity of the decoder bank.
void criterion_9() {
  const fsn::FsnConfig config = grad_config();
  fsn::FsnModel model = fsn::FsnModel::init(config, 909);
  std::mt19937_64 rng(910);
  std::vector<synthdata::Sample> batch;
  std::vector<scoring::HorizonLabel> labels;
  for (int i = 0; i < 4; ++i) {
    batch.push_back(grad_sample(rng, config));
    labels.push_back(grad_label(2, 0.1 * (i + 1), config.horizons));  // horizon 2 only
  }
  // outputs at other horizons are bitwise unchanged under perturbation
  const fsn::EncoderLatent latent = fsn::encode(batch[0].history, model);
  const fsn::DecodeResult before = fsn::decode(latent, 3, model);
  fsn::FsnModel perturbed = model;
  for (nnet::Tensor& w : perturbed.decoders[0].weights)
    for (double& v : w.values) v += 0.37;
  const fsn::DecodeResult after = fsn::decode(fsn::encode(batch[0].history, perturbed), 3,
                                              perturbed);
  bool bitwise = before.modes.probs == after.modes.probs;
  for (std::size_t k = 0; k < before.modes.trajectories.size(); ++k)
    if (!(before.modes.trajectories[k].points == after.modes.trajectories[k].points))
      bitwise = false;

  // gradients to the inactive sub-network are exactly zero
  fsn::FsnGradients grads;
  fsn::fsn_batch_loss(model, batch, labels, &grads);
  bool zero = true;
  for (const nnet::Tensor& w : grads.decoders[1].weights)
    for (double v : w.values)
      if (v != 0.0) zero = false;
  for (const nnet::Tensor& b : grads.decoders[1].biases)
    for (double v : b.values)
      if (v != 0.0) zero = false;
  bool active_nonzero = false;
  for (const nnet::Tensor& w : grads.decoders[0].weights)
    for (double v : w.values)
      if (v != 0.0) active_nonzero = true;
  report(9, bitwise && zero && active_nonzero,
         "decoder sub-networks are exclusive in outputs and gradients",
         bitwise ? "bitwise equality and exact zero gradients" : "output leak detected");
}

// --------------------------------------------------------------------------
// 10 + 11. CLI-level reproducibility and the ablation table (reduced scale).
std::string run_cli(const std::string& binary, const std::string& args) {
  const std::string out = (fs::temp_directory_path() / "fh_acc_cli.txt").string();
  const std::string command = binary + " " + args + " >" + out + " 2>&1";
  const int status = std::system(command.c_str());
  std::ifstream f(out);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (status != 0) return "EXIT-NONZERO\n" + ss.str();
  return ss.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kReducedFlags =
    " --set dataset.n_train=120 --set dataset.n_val=40 --set optim.epochs=4"
    " --set optim.batch=16 --set scoring.oracle=true --seed 21";

void criterion_10(const std::string& binary) {
  const fs::path dir_a = fs::temp_directory_path() / "fh_acc_run_a";
  const fs::path dir_b = fs::temp_directory_path() / "fh_acc_run_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  run_cli(binary, "train --protocol fsn" + std::string(kReducedFlags) + " --out-dir " +
                      dir_a.string());
  run_cli(binary, "train --protocol fsn" + std::string(kReducedFlags) + " --out-dir " +
                      dir_b.string());
  bool identical = true;
  std::string mismatch = "byte-identical checkpoints and reports";
  const char* files[] = {"fsn.ckpt",        "apm-log.csv",       "fsn-log.csv",
                         "fsn-metrics.csv", "fsn-histogram.csv", "labels.jsonl"};
  for (const char* name : files) {
    const std::string a = slurp(dir_a / name);
    const std::string b = slurp(dir_b / name);
    if (a.empty() || a != b) {
      identical = false;
      mismatch = std::string("mismatch or missing: ") + name;
    }
  }
  report(10, identical, "repeated fsn training is byte-identical", mismatch);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

void criterion_11(const std::string& binary) {
  const fs::path dir = fs::temp_directory_path() / "fh_acc_ablate";
  fs::remove_all(dir);
  const std::string stdout_text =
      run_cli(binary, "ablate" + std::string(kReducedFlags) + " --out-dir " + dir.string());

  // four-configuration table
  std::size_t rows = 0;
  bool has_header = stdout_text.find("score_kernel,kl,") != std::string::npos;
  for (const std::string& want : {std::string("fde,off"), std::string("ade,off"),
                                  std::string("fdk,off"), std::string("fdk,on")})
    if (stdout_text.find(want) != std::string::npos) ++rows;

  // KL-off logs: l_kl identically zero and total exactly reg + cls per epoch
  bool logs_ok = true;
  for (const char* name :
       {"ablation-fde-nokl-log.csv", "ablation-ade-nokl-log.csv", "ablation-fdk-nokl-log.csv"}) {
    std::ifstream f(dir / name);
    if (!f) {
      logs_ok = false;
      continue;
    }
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> cols;
      bool first = true;
      while (std::getline(ss, cell, ',')) {
        if (first) {
          first = false;
          continue;
        }
        cols.push_back(std::strtod(cell.c_str(), nullptr));
      }
      if (cols.size() < 4 || cols[2] != 0.0 || cols[3] != cols[0] + cols[1]) logs_ok = false;
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%zu/4 rows, header %s, KL-off logs %s", rows,
                has_header ? "ok" : "missing", logs_ok ? "exact" : "violated");
  report(11, rows == 4 && has_header && logs_ok, "ablation grid shape and KL-off log identity",
         detail);
  fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&selected](int criterion) {
    return selected.empty() || selected.count(criterion) > 0;
  };
  const char* binary_env = std::getenv("FLEXIHORIZON_BIN");

  if (wanted(1)) criterion_1();
  if (wanted(2)) criterion_2();
  if (wanted(3)) criterion_3();
  if (wanted(4)) criterion_4();
  if (wanted(5)) criterion_5();
  if (wanted(6) || wanted(7)) criteria_6_and_7();
  if (wanted(8)) criterion_8();
  if (wanted(9)) criterion_9();
  if (wanted(10) || wanted(11)) {
    if (binary_env == nullptr) {
      report(10, false, "repeated fsn training is byte-identical", "FLEXIHORIZON_BIN not set");
      report(11, false, "ablation grid shape and KL-off log identity", "FLEXIHORIZON_BIN not set");
    } else {
      if (wanted(10)) criterion_10(binary_env);
      if (wanted(11)) criterion_11(binary_env);
    }
  }
  if (failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", failures);
  return 1;
}
