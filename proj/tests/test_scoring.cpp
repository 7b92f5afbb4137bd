// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fh/scoring.hpp"
#include "fh/synthdata.hpp"

using namespace fh;
using scoring::HorizonLabel;
using scoring::ScoreKernel;
using scoring::ScoreTable;
using trajgeo::HorizonSet;
using trajgeo::ModeSet;
using trajgeo::Point2;
using trajgeo::Trajectory;

namespace {

Trajectory straight(std::size_t n, double step = 1.0, Point2 start = {0, 0}) {
  Trajectory t;
  t.points.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    t.points[i] = {start.x + step * static_cast<double>(i), start.y};
  return t;
}

ModeSet single_mode(Trajectory t) {
  ModeSet m;
  m.trajectories = {std::move(t)};
  m.probs = {1.0};
  return m;
}

Trajectory offset_prefix(const Trajectory& gt, std::size_t n, double dy) {
  Trajectory t = gt.prefix(n);
  for (Point2& p : t.points) p.y += dy;
  return t;
}

}  // namespace

TEST_CASE("step score") {
  CHECK(scoring::step_score(0.0, 5) == 0.0);
  CHECK(scoring::step_score(3.0, 30) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(scoring::step_score(3.0, 30) == 3.0 / 30.0);  // bitwise reproducible division
  CHECK_THROWS_AS(scoring::step_score(1.0, 0), fh::InvalidInput);
  // homogeneity: q halves when f doubles
  const double d = 1.7;
  CHECK(scoring::step_score(d, 20) == doctest::Approx(scoring::step_score(d, 10) / 2.0));
}

TEST_CASE("best horizon") {
  const fdk::FdkParams params;
  const Trajectory gt = straight(30);

  SUBCASE("single horizon is always chosen") {
    const HorizonSet h({5});
    std::map<int, ModeSet> preds;
    preds.emplace(5, single_mode(offset_prefix(gt, 5, 3.0)));
    const auto [label, table] = scoring::best_horizon(preds, gt, params, h);
    CHECK(label.f_gt == 5);
    CHECK(table.entries.size() == 1);
    CHECK(table.entries[0].score == table.entries[0].distance / 5.0);
  }
  SUBCASE("perfect long prediction beats an imperfect short one") {
    const HorizonSet h({5, 10});
    std::map<int, ModeSet> preds;
    preds.emplace(5, single_mode(offset_prefix(gt, 5, 1.0)));
    preds.emplace(10, single_mode(gt.prefix(10)));
    const auto [label, table] = scoring::best_horizon(preds, gt, params, h);
    CHECK(label.f_gt == 10);
    CHECK(label.q == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(label.one_hot == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("argmin matches exhaustive enumeration on hand-built mode sets") {
    const HorizonSet h({5, 10, 15});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::map<int, ModeSet> preds;
      for (int f : h.values()) {
        ModeSet m;
        for (int k = 0; k < 3; ++k)
          m.trajectories.push_back(offset_prefix(gt, static_cast<std::size_t>(f), u(rng)));
        m.probs = {0.3, 0.4, 0.3};
        preds.emplace(f, std::move(m));
      }
      const auto [label, table] = scoring::best_horizon(preds, gt, params, h);
      // independent enumeration
      int expect_f = 0;
      double expect_q = 1e300;
      for (int f : h.values()) {
        double d = 1e300;
        for (const Trajectory& mode : preds.at(f).trajectories)
          d = std::min(d, fdk::fdk_distance(mode, gt.prefix(static_cast<std::size_t>(f)), params));
        const double q = d / f;
        if (q < expect_q) {
          expect_q = q;
          expect_f = f;
        }
      }
      CHECK(label.f_gt == expect_f);
      CHECK(label.q == expect_q);
    }
  }
  SUBCASE("errors") {
    const HorizonSet h({5, 10});
    std::map<int, ModeSet> missing;
    missing.emplace(5, single_mode(gt.prefix(5)));
    CHECK_THROWS_AS(scoring::best_horizon(missing, gt, params, h), fh::InvalidInput);
    std::map<int, ModeSet> too_long;
    too_long.emplace(5, single_mode(gt.prefix(5)));
    too_long.emplace(10, single_mode(gt.prefix(10)));
    CHECK_THROWS_AS(scoring::best_horizon(too_long, straight(8), params, h), fh::InvalidInput);
  }
}

TEST_CASE("score kernels") {
  const Trajectory gt = straight(10);
  const Trajectory pred = offset_prefix(gt, 10, 2.0);
  const fdk::FdkParams params;
  const HorizonSet h({10});
  for (ScoreKernel kernel : {ScoreKernel::kFdk, ScoreKernel::kFrechetExact, ScoreKernel::kAde,
                             ScoreKernel::kFde}) {
    std::map<int, ModeSet> preds;
    preds.emplace(10, single_mode(pred));
    const auto [label, table] = scoring::best_horizon(preds, gt, params, h, kernel);
    // constant 2 m offset: the hard kernels see exactly 2 m, the smooth one
    // sits within its beta=100 smoothing bias
    const double tol = kernel == ScoreKernel::kFdk ? 0.1 : 1e-9;
    CHECK(table.entries[0].distance == doctest::Approx(2.0).epsilon(tol));
  }
  CHECK(scoring::score_kernel_from_string("ade") == ScoreKernel::kAde);
  CHECK(scoring::to_string(ScoreKernel::kFrechetExact) == "frechet");
  CHECK_THROWS_AS(scoring::score_kernel_from_string("nope"), fh::ConfigError);
}

TEST_CASE("single-point futures make the endpoint kernels coincide") {
  // length-1 trajectories reduce both the final-displacement and Fréchet
  // kernels to the same endpoint distance
  const fdk::FdkParams params;
  const HorizonSet h({1});
  const Trajectory gt = straight(4);
  std::map<int, ModeSet> preds;
  ModeSet m;
  m.trajectories = {offset_prefix(gt, 1, 2.5)};
  m.probs = {1.0};
  preds.emplace(1, std::move(m));
  const auto fde_result = scoring::best_horizon(preds, gt, params, h, ScoreKernel::kFde);
  const auto frechet_result =
      scoring::best_horizon(preds, gt, params, h, ScoreKernel::kFrechetExact);
  CHECK(fde_result.second.entries[0].distance == frechet_result.second.entries[0].distance);
}

TEST_CASE("tie breaking toward the smallest horizon") {
  const fdk::FdkParams params;
  const Trajectory gt = straight(30);
  const HorizonSet h({5, 10, 15});
  std::map<int, ModeSet> perfect;
  for (int f : h.values()) perfect.emplace(f, single_mode(gt.prefix(static_cast<std::size_t>(f))));
  const auto [label, table] = scoring::best_horizon(perfect, gt, params, h);
  CHECK(label.f_gt == 5);  // all-zero scores tie toward the smallest f
}

TEST_CASE("argmin scale invariance") {
  // Scaling every distance by the same positive constant preserves the argmin.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  const HorizonSet h({5, 10, 15, 20, 25, 30});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> distances;
    for (std::size_t i = 0; i < h.size(); ++i) distances.push_back(u(rng));
    auto argmin = [&h](const std::vector<double>& ds) {
      int best_f = 0;
      double best_q = 1e300;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const double q = scoring::step_score(ds[i], h[i]);
        if (q < best_q) {
          best_q = q;
          best_f = h[i];
        }
      }
      return best_f;
    };
    const int base = argmin(distances);
    for (double scale : {2.0, 0.25, 3.7}) {
      std::vector<double> scaled = distances;
      for (double& d : scaled) d *= scale;
      CHECK(argmin(scaled) == base);
    }
  }
}

TEST_CASE("label dataset") {
  const fdk::FdkParams params;
  const HorizonSet h({5, 10});
  const Trajectory gt = straight(30);

  SUBCASE("empty agent list gives an empty label set") {
    const auto out = scoring::label_dataset({}, {}, {}, params, h);
    CHECK(out.labels.empty());
    CHECK(out.class_counts.at(5) == 0);
  }
  SUBCASE("per-agent labels match best_horizon") {
    std::vector<std::map<int, ModeSet>> preds(2);
    preds[0].emplace(5, single_mode(gt.prefix(5)));
    preds[0].emplace(10, single_mode(offset_prefix(gt, 10, 4.0)));
    preds[1].emplace(5, single_mode(offset_prefix(gt, 5, 4.0)));
    preds[1].emplace(10, single_mode(gt.prefix(10)));
    const std::vector<Trajectory> gts = {gt, gt};
    const std::vector<std::string> ids = {"a0", "a1"};
    const auto out = scoring::label_dataset(preds, gts, ids, params, h);
    REQUIRE(out.labels.size() == 2);
    CHECK(out.labels[0].f_gt == 5);
    CHECK(out.labels[1].f_gt == 10);
    CHECK(out.labels[0].agent_id == "a0");
    CHECK(out.class_counts.at(5) == 1);
    CHECK(out.class_counts.at(10) == 1);
  }
  SUBCASE("missing horizon raises") {
    std::vector<std::map<int, ModeSet>> preds(1);
    preds[0].emplace(5, single_mode(gt.prefix(5)));
    const std::vector<Trajectory> gts = {gt};
    const std::vector<std::string> ids = {"a0"};
    CHECK_THROWS_AS(scoring::label_dataset(preds, gts, ids, params, h), fh::InvalidInput);
  }
}

TEST_CASE("smooth and exact scoring agree on most labels at high sharpness") {
  // Swapping the smooth kernel for the exact Fréchet distance may move
  // values, but at beta = 200 the argmin label moves on under 5% of agents.
  fh::synthdata::GeneratorConfig gen;
  const auto samples = fh::synthdata::generate(120, gen, 31);
  const HorizonSet horizons({5, 10, 15, 20, 25, 30});
  fdk::FdkParams params;
  params.beta = 200.0;
  std::vector<std::map<int, ModeSet>> preds;
  std::vector<Trajectory> gts;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    preds.push_back(fh::synthdata::oracle_predictor(samples[i], horizons, 4, 1.0, 500 + i));
    gts.push_back(samples[i].future);
    ids.push_back(samples[i].agent_id);
  }
  const auto smooth =
      scoring::label_dataset(preds, gts, ids, params, horizons, ScoreKernel::kFdk);
  const auto exact =
      scoring::label_dataset(preds, gts, ids, params, horizons, ScoreKernel::kFrechetExact);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (smooth.labels[i].f_gt != exact.labels[i].f_gt) ++moved;
  CHECK(static_cast<double>(moved) / samples.size() < 0.05);
}

TEST_CASE("labels jsonl round trip and parse errors") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "fh_test_labels.jsonl").string();
  const fdk::FdkParams params;
  const HorizonSet h({5, 10});
  const Trajectory gt = straight(30);
  std::vector<std::map<int, ModeSet>> preds(2);
  for (auto& p : preds) {
    p.emplace(5, single_mode(gt.prefix(5)));
    p.emplace(10, single_mode(offset_prefix(gt, 10, 1.0)));
  }
  const std::vector<Trajectory> gts = {gt, gt};
  const std::vector<std::string> ids = {"a0", "a1"};
  const auto out = scoring::label_dataset(preds, gts, ids, params, h);
  scoring::write_labels_jsonl(path, out);
  const auto loaded = scoring::read_labels_jsonl(path, h);
  REQUIRE(loaded.labels.size() == 2);
  CHECK(loaded.labels[0].f_gt == out.labels[0].f_gt);
  CHECK(loaded.labels[0].q == out.labels[0].q);
  CHECK(loaded.tables[1].entries[1].distance == out.tables[1].entries[1].distance);
  CHECK(loaded.class_counts == out.class_counts);

  // corrupt one line and expect a ParseError carrying the line number
  std::ofstream f(path, std::ios::app);
  f << "{\"agent_id\": \"a2\", \"f_gt\": \n";
  f.close();
  try {
    scoring::read_labels_jsonl(path, h);
    FAIL("expected ParseError");
  } catch (const fh::ParseError& e) {
    CHECK(e.line_number == 3);
  }
  fs::remove(path);
}
