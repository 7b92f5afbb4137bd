// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "fh/errors.hpp"
#include "fh/nnet.hpp"

namespace fh::synthdata {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Deterministic standard normal from explicit generator draws (Box-Muller).
double gauss(std::mt19937_64& rng) {
  double u1 = nnet::uniform_unit(rng());
  const double u2 = nnet::uniform_unit(rng());
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

struct KinematicState {
  double x = 0.0, y = 0.0;
  double heading = 0.0;
};

}  // namespace

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "constant-velocity") return ScenarioKind::kConstantVelocity;
  if (name == "constant-turn") return ScenarioKind::kConstantTurn;
  if (name == "lane-change") return ScenarioKind::kLaneChange;
  if (name == "stop-and-go") return ScenarioKind::kStopAndGo;
  if (name == "late-maneuver") return ScenarioKind::kLateManeuver;
  throw ConfigError("unknown scenario kind: " + name);
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kConstantVelocity: return "constant-velocity";
    case ScenarioKind::kConstantTurn: return "constant-turn";
    case ScenarioKind::kLaneChange: return "lane-change";
    case ScenarioKind::kStopAndGo: return "stop-and-go";
    case ScenarioKind::kLateManeuver: return "late-maneuver";
  }
  return "constant-velocity";
}

Sample simulate(const Scenario& scenario, const GeneratorConfig& config,
                const std::string& agent_id) {
  if (scenario.speed < 0.0) throw InvalidInput("scenario speed must be non-negative");
  if (scenario.onset >= config.future_len)
    throw InvalidInput("maneuver onset must lie within the future length");
  if (scenario.noise_sigma < 0.0) throw InvalidInput("noise sigma must be non-negative");

  std::mt19937_64 rng(scenario.seed);
  KinematicState state;
  state.x = 100.0 * nnet::uniform_unit(rng()) - 50.0;
  state.y = 100.0 * nnet::uniform_unit(rng()) - 50.0;
  state.heading = 2.0 * kPi * nnet::uniform_unit(rng());

  const std::size_t total = config.history_len + config.future_len;
  const std::size_t maneuver_start = config.history_len + scenario.onset;
  std::vector<trajgeo::Point2> points(total);
  points[0] = {state.x, state.y};
  for (std::size_t step = 0; step + 1 < total; ++step) {
    double turn = 0.0;
    double speed = scenario.speed;
    switch (scenario.kind) {
      case ScenarioKind::kConstantVelocity:
        break;
      case ScenarioKind::kConstantTurn:
        turn = scenario.turn_rate;
        break;
      case ScenarioKind::kLaneChange:
        // S-shaped heading excursion over 10 steps; net heading change zero.
        if (step >= maneuver_start && step < maneuver_start + 10) {
          const double u = static_cast<double>(step - maneuver_start) / 10.0;
          turn = scenario.turn_rate * std::sin(2.0 * kPi * u);
        }
        break;
      case ScenarioKind::kStopAndGo:
        if (step >= maneuver_start && step < maneuver_start + 4) {
          speed = scenario.speed * (1.0 - static_cast<double>(step - maneuver_start + 1) / 4.0);
        } else if (step >= maneuver_start + 4 && step < maneuver_start + 9) {
          speed = 0.0;
        } else if (step >= maneuver_start + 9 && step < maneuver_start + 13) {
          speed = scenario.speed * (static_cast<double>(step - maneuver_start - 9 + 1) / 4.0);
        }
        break;
      case ScenarioKind::kLateManeuver:
        if (step >= maneuver_start) turn = scenario.turn_rate;
        break;
    }
    state.heading += turn * config.dt;
    state.x += speed * std::cos(state.heading) * config.dt;
    state.y += speed * std::sin(state.heading) * config.dt;
    points[step + 1] = {state.x, state.y};
  }

  Sample sample;
  sample.agent_id = agent_id;
  sample.kind = scenario.kind;
  sample.history.dt = config.dt;
  sample.future.dt = config.dt;
  sample.history.points.assign(points.begin(),
                               points.begin() + static_cast<std::ptrdiff_t>(config.history_len));
  sample.future.points.assign(points.begin() + static_cast<std::ptrdiff_t>(config.history_len),
                              points.end());
  for (trajgeo::Point2& p : sample.history.points) {
    p.x += scenario.noise_sigma * gauss(rng);
    p.y += scenario.noise_sigma * gauss(rng);
  }
  return sample;
}

std::vector<Sample> generate(std::size_t n, const GeneratorConfig& config, std::uint64_t seed) {
  if (config.mixture.size() != 5) throw ConfigError("scenario mixture needs 5 weights");
  double total_weight = 0.0;
  for (double w : config.mixture) {
    if (w < 0.0) throw ConfigError("scenario mixture weights must be non-negative");
    total_weight += w;
  }
  if (!(total_weight > 0.0)) throw ConfigError("scenario mixture must have positive total weight");

  std::mt19937_64 rng(seed);
  auto uniform_in = [&rng](double lo, double hi) {
    return lo + (hi - lo) * nnet::uniform_unit(rng());
  };
  // Clamped onset draw in [lo, hi); always consumes one generator draw and
  // degrades gracefully when the future is too short for the nominal window.
  const std::size_t future = config.future_len;
  auto onset_between = [&rng, future](std::size_t lo, std::size_t hi) {
    const double draw = nnet::uniform_unit(rng());
    lo = std::min(lo, future > 0 ? future - 1 : 0);
    if (hi <= lo + 1 || hi > future) hi = std::min(future, lo + 1);
    if (hi <= lo + 1) return lo;
    return lo + static_cast<std::size_t>(draw * static_cast<double>(hi - lo));
  };
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = total_weight * nnet::uniform_unit(rng());
    std::size_t kind_index = 0;
    double acc = 0.0;
    for (std::size_t k = 0; k < config.mixture.size(); ++k) {
      acc += config.mixture[k];
      if (pick < acc || k + 1 == config.mixture.size()) {
        kind_index = k;
        break;
      }
    }
    Scenario s;
    s.kind = static_cast<ScenarioKind>(kind_index);
    s.noise_sigma = config.noise_sigma;
    switch (s.kind) {
      case ScenarioKind::kConstantVelocity:
        s.speed = uniform_in(3.0, 12.0);
        s.onset = 0;
        break;
      case ScenarioKind::kConstantTurn:
        s.speed = uniform_in(3.0, 10.0);
        s.turn_rate = (nnet::uniform_unit(rng()) < 0.5 ? -1.0 : 1.0) * uniform_in(0.15, 0.5);
        s.onset = 0;
        break;
      case ScenarioKind::kLaneChange:
        s.speed = uniform_in(5.0, 12.0);
        s.turn_rate = (nnet::uniform_unit(rng()) < 0.5 ? -1.0 : 1.0) * uniform_in(0.5, 1.0);
        s.onset = onset_between(3, future >= 12 ? future - 9 : future);
        break;
      case ScenarioKind::kStopAndGo:
        s.speed = uniform_in(3.0, 9.0);
        s.onset = onset_between(3, future >= 13 ? future - 10 : future);
        break;
      case ScenarioKind::kLateManeuver:
        s.speed = uniform_in(4.0, 10.0);
        s.turn_rate = (nnet::uniform_unit(rng()) < 0.5 ? -1.0 : 1.0) * uniform_in(0.9, 1.6);
        s.onset = onset_between(4, future >= 6 ? future - 2 : future);
        break;
    }
    s.seed = rng();
    std::ostringstream id;
    id << "agent-" << i;
    samples.push_back(simulate(s, config, id.str()));
  }
  return samples;
}

std::map<int, ModeSet> oracle_predictor(const Sample& sample, const HorizonSet& horizons,
                                        std::size_t num_modes, double noise_scale,
                                        std::uint64_t seed) {
  if (num_modes == 0) throw InvalidInput("oracle predictor needs at least one mode");
  std::mt19937_64 rng(seed);
  std::map<int, ModeSet> out;
  for (int f : horizons.values()) {
    if (static_cast<std::size_t>(f) > sample.future.size())
      throw InvalidInput("horizon exceeds future length");
    ModeSet modes;
    modes.probs.assign(num_modes, 1.0 / static_cast<double>(num_modes));
    for (std::size_t k = 0; k < num_modes; ++k) {
      Trajectory t = sample.future.prefix(static_cast<std::size_t>(f));
      for (std::size_t step = 0; step < t.size(); ++step) {
        const double sigma = noise_scale * static_cast<double>(step + 1) * t.dt;
        t.points[step].x += sigma * gauss(rng);
        t.points[step].y += sigma * gauss(rng);
      }
      modes.trajectories.push_back(std::move(t));
    }
    out.emplace(f, std::move(modes));
  }
  return out;
}

namespace {

nlohmann::json points_to_json(const Trajectory& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const trajgeo::Point2& p : t.points) arr.push_back({p.x, p.y});
  return arr;
}

Trajectory points_from_json(const nlohmann::json& arr, double dt) {
  Trajectory t;
  t.dt = dt;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2) throw InvalidInput("point must be a [x, y] pair");
    t.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return t;
}

bool has_gz_extension(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

void write_file(const std::string& path, const std::string& contents) {
  if (has_gz_extension(path)) {
    gzFile gz = gzopen(path.c_str(), "wb");
    if (gz == nullptr) throw ArtifactError("cannot open for writing: " + path);
    const int written = gzwrite(gz, contents.data(), static_cast<unsigned>(contents.size()));
    gzclose(gz);
    if (written != static_cast<int>(contents.size()))
      throw ArtifactError("gzip write failed: " + path);
    return;
  }
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw ArtifactError("cannot open for writing: " + path);
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw ArtifactError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  if (has_gz_extension(path)) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw ArtifactError("cannot open: " + path);
    std::string contents;
    char buffer[1 << 16];
    int got;
    while ((got = gzread(gz, buffer, sizeof(buffer))) > 0) contents.append(buffer, got);
    gzclose(gz);
    if (got < 0) throw ArtifactError("gzip read failed: " + path);
    return contents;
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

void write_jsonl(std::span<const Sample> samples, const std::string& path) {
  std::string out;
  for (const Sample& s : samples) {
    nlohmann::json rec = {{"agent_id", s.agent_id},
                          {"kind", to_string(s.kind)},
                          {"dt", s.history.dt},
                          {"history", points_to_json(s.history)},
                          {"future", points_to_json(s.future)}};
    out += rec.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<Sample> read_jsonl(const std::string& path) {
  const std::string contents = read_file(path);
  std::vector<Sample> samples;
  std::istringstream stream(contents);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(stream, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      const nlohmann::json rec = nlohmann::json::parse(line);
      Sample s;
      s.agent_id = rec.at("agent_id").get<std::string>();
      s.kind = scenario_kind_from_string(rec.at("kind").get<std::string>());
      const double dt = rec.at("dt").get<double>();
      if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
      s.history = points_from_json(rec.at("history"), dt);
      s.future = points_from_json(rec.at("future"), dt);
      samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_number, e.what());
    } catch (const InvalidInput& e) {
      throw ParseError(path, line_number, e.what());
    } catch (const ConfigError& e) {
      throw ParseError(path, line_number, e.what());
    }
  }
  return samples;
}

}  // namespace fh::synthdata
