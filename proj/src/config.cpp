// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#include "fh/config.hpp"

#include <fstream>
#include <sstream>

#include "fh/errors.hpp"

namespace fh::config {

namespace {

std::uint64_t fnv1a_str(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + key + ": " + value);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": " + value);
}

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const std::string& part : split_commas(value))
    out.push_back(static_cast<int>(parse_u64(key, part)));
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const std::string& part : split_commas(value))
    out.push_back(static_cast<std::size_t>(parse_u64(key, part)));
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& part : split_commas(value)) out.push_back(parse_double(key, part));
  return out;
}

}  // namespace

std::uint64_t RunConfig::sub_seed(const std::string& name) const {
  return splitmix64(seed ^ fnv1a_str(name));
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " + assignment);
  const std::string full_key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = full_key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override must look like section.key=value: " + assignment);
  const std::string section = full_key.substr(0, dot);
  const std::string key = full_key.substr(dot + 1);

  if (section == "dataset") {
    if (key == "path") dataset_path = value;
    else if (key == "n_train") train_size = parse_u64(full_key, value);
    else if (key == "n_val") val_size = parse_u64(full_key, value);
    else if (key == "t") {
      generator.history_len = parse_u64(full_key, value);
      model.history_len = generator.history_len;
    }
    else if (key == "f") generator.future_len = parse_u64(full_key, value);
    else if (key == "dt") generator.dt = parse_double(full_key, value);
    else if (key == "noise_sigma") generator.noise_sigma = parse_double(full_key, value);
    else if (key == "mixture") generator.mixture = parse_double_list(full_key, value);
    else throw ConfigError("unknown config key: " + full_key);
  } else if (section == "horizons") {
    if (key == "set") model.horizons = trajgeo::HorizonSet(parse_int_list(full_key, value));
    else throw ConfigError("unknown config key: " + full_key);
  } else if (section == "fdk") {
    if (key == "beta") model.fdk.beta = parse_double(full_key, value);
    else if (key == "gamma") model.fdk.gamma = parse_double(full_key, value);
    else if (key == "delta") model.fdk.delta = parse_double(full_key, value);
    else if (key == "epsilon") model.fdk.epsilon = parse_double(full_key, value);
    else throw ConfigError("unknown config key: " + full_key);
  } else if (section == "model") {
    if (key == "modes") model.num_modes = parse_u64(full_key, value);
    else if (key == "latent_dim") model.latent_dim = parse_u64(full_key, value);
    else if (key == "encoder_hidden") model.encoder_hidden = parse_size_list(full_key, value);
    else if (key == "apm_hidden") model.apm_hidden = parse_size_list(full_key, value);
    else if (key == "decoder_hidden") model.decoder_hidden = parse_size_list(full_key, value);
    else if (key == "activation") model.activation = nnet::activation_from_string(value);
    else if (key == "regression") model.regression = fsn::regression_from_string(value);
    else if (key == "huber_delta") model.huber_delta = parse_double(full_key, value);
    else if (key == "lambda") model.lambda = parse_double(full_key, value);
    else if (key == "freeze_encoder") freeze_encoder = parse_bool(full_key, value);
    else throw ConfigError("unknown config key: " + full_key);
  } else if (section == "optim") {
    if (key == "lr") optim.learning_rate = parse_double(full_key, value);
    else if (key == "weight_decay") optim.weight_decay = parse_double(full_key, value);
    else if (key == "beta1") optim.beta1 = parse_double(full_key, value);
    else if (key == "beta2") optim.beta2 = parse_double(full_key, value);
    else if (key == "epochs") epochs = parse_u64(full_key, value);
    else if (key == "batch") batch_size = parse_u64(full_key, value);
    else if (key == "balanced") balanced_classes = parse_bool(full_key, value);
    else if (key == "dense") dense_horizons = parse_bool(full_key, value);
    else throw ConfigError("unknown config key: " + full_key);
  } else if (section == "scoring") {
    if (key == "kernel") score_kernel = scoring::score_kernel_from_string(value);
    else if (key == "oracle") oracle_labels = parse_bool(full_key, value);
    else if (key == "oracle_noise") oracle_noise = parse_double(full_key, value);
    else if (key == "label_modes") label_modes = parse_u64(full_key, value);
    else throw ConfigError("unknown config key: " + full_key);
  } else if (section == "eval") {
    if (key == "miss_threshold") miss_threshold = parse_double(full_key, value);
    else throw ConfigError("unknown config key: " + full_key);
  } else if (section == "run") {
    if (key == "seed") seed = parse_u64(full_key, value);
    else if (key == "outdir") outdir = value;
    else if (key == "protocol") protocol = value;
    else throw ConfigError("unknown config key: " + full_key);
  } else {
    throw ConfigError("unknown config section: " + section);
  }
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  RunConfig config;
  std::string line;
  std::string section;
  std::size_t line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw ParseError(path, line_number, "malformed section header: " + text);
      section = text.substr(1, text.size() - 2);
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(path, line_number, "expected key=value: " + text);
    if (section.empty()) throw ParseError(path, line_number, "key outside any section: " + text);
    try {
      config.apply_override(section + "." + trim(text.substr(0, eq)) + "=" +
                            trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(path, line_number, e.what());
    }
  }
  return config;
}

void RunConfig::validate() const {
  model.validate();
  if (model.horizons.max() > static_cast<int>(generator.future_len))
    throw ConfigError("largest horizon exceeds the future length");
  if (generator.history_len != model.history_len)
    throw ConfigError("dataset history length and model history length differ");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(miss_threshold > 0.0)) throw ConfigError("miss threshold must be positive");
  if (protocol != "it" && protocol != "ir" && protocol != "fsn" && protocol != "apm")
    throw ConfigError("unknown protocol: " + protocol);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["dataset"] = {{"path", dataset_path},
                  {"n_train", train_size},
                  {"n_val", val_size},
                  {"t", generator.history_len},
                  {"f", generator.future_len},
                  {"dt", generator.dt},
                  {"noise_sigma", generator.noise_sigma},
                  {"mixture", generator.mixture}};
  j["horizons"] = model.horizons.values();
  j["fdk"] = {{"beta", model.fdk.beta},
              {"gamma", model.fdk.gamma},
              {"delta", model.fdk.delta},
              {"epsilon", model.fdk.epsilon}};
  j["model"] = {{"modes", model.num_modes},
                {"latent_dim", model.latent_dim},
                {"encoder_hidden", model.encoder_hidden},
                {"apm_hidden", model.apm_hidden},
                {"decoder_hidden", model.decoder_hidden},
                {"activation", nnet::to_string(model.activation)},
                {"regression", fsn::to_string(model.regression)},
                {"huber_delta", model.huber_delta},
                {"lambda", model.lambda},
                {"freeze_encoder", freeze_encoder}};
  j["optim"] = {{"lr", optim.learning_rate},
                {"weight_decay", optim.weight_decay},
                {"beta1", optim.beta1},
                {"beta2", optim.beta2},
                {"epochs", epochs},
                {"batch", batch_size},
                {"balanced", balanced_classes},
                {"dense", dense_horizons}};
  j["scoring"] = {{"kernel", scoring::to_string(score_kernel)},
                  {"oracle", oracle_labels},
                  {"oracle_noise", oracle_noise},
                  {"label_modes", label_modes}};
  j["eval"] = {{"miss_threshold", miss_threshold}};
  j["run"] = {{"seed", seed}, {"outdir", outdir}, {"protocol", protocol}};
  return j;
}

}  // namespace fh::config
