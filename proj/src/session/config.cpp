// Copyright 2026 The Branchtune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "branchtune/session/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace branchtune::session {

using nlohmann::json;

std::string_view to_string(TunerMode mode) {
  switch (mode) {
    case TunerMode::kMltuner: return "mltuner";
    case TunerMode::kFullrun: return "fullrun";
    case TunerMode::kHalving: return "halving";
    case TunerMode::kFixed: return "fixed";
  }
  return "?";
}

std::optional<TunerMode> parse_tuner_mode(std::string_view text) {
  if (text == "mltuner") return TunerMode::kMltuner;
  if (text == "fullrun") return TunerMode::kFullrun;
  if (text == "halving") return TunerMode::kHalving;
  if (text == "fixed") return TunerMode::kFixed;
  return std::nullopt;
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

// Rejects keys outside `allowed` so typos in configs and overrides surface.
void check_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(std::string(section) + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) fail("unknown key '" + std::string(section) + "." + item.key() + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    fail(std::string("bad value for '") + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, std::optional<T>& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  T value{};
  read(obj, key, value);
  out = value;
}

std::string read_string(const json& obj, const char* key, std::string fallback) {
  read(obj, key, fallback);
  return fallback;
}

TunableSetting read_setting(const json& obj) {
  if (!obj.is_object()) fail("a tunable setting must be an object of numbers");
  TunableSetting out;
  for (const auto& item : obj.items()) {
    if (!item.value().is_number()) fail("tunable '" + item.key() + "' must be a number");
    out[item.key()] = item.value().get<double>();
  }
  return out;
}

TunableSpec read_tunable(const json& obj) {
  check_keys(obj, "search_space[]", {"name", "kind", "values", "lo", "hi"});
  const std::string name = read_string(obj, "name", "");
  const std::string kind = read_string(obj, "kind", "");
  TunableSpec spec;
  if (kind == "discrete") {
    std::vector<double> values;
    read(obj, "values", values);
    spec = TunableSpec::discrete(name, std::move(values));
  } else if (kind == "linear" || kind == "log") {
    double lo = 0.0, hi = 0.0;
    read(obj, "lo", lo);
    read(obj, "hi", hi);
    spec = kind == "log" ? TunableSpec::log(name, lo, hi) : TunableSpec::linear(name, lo, hi);
  } else {
    fail("tunable '" + name + "' has unknown kind '" + kind + "'");
  }
  spec.validate();
  return spec;
}

void apply_override(json& root, const Override& override) {
  const auto& [path, text] = override;
  if (path.empty()) fail("empty override key");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail("bad override key '" + path + "'");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t index = 0;
      try {
        index = std::stoul(part);
      } catch (const std::exception&) {
        fail("override '" + path + "': '" + part + "' is not an index");
      }
      if (index >= node->size()) fail("override '" + path + "': index out of range");
      next = &(*node)[index];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) fail("override '" + path + "' descends into a non-object");
      next = &(*node)[part];
    }
    if (dot == std::string::npos) {
      *next = std::move(value);
      return;
    }
    node = next;
    start = dot + 1;
  }
}

}  // namespace

void SessionConfig::validate() const {
  if (workers < 1) fail("trainer.workers must be positive");
  if (max_staleness < 0) fail("trainer.max_staleness must be non-negative");
  for (const auto& [name, role] : binding)
    if (!space.find(name)) fail("binding names '" + name + "', which is not in the search space");
  const bool needs_space = tuner.mode != TunerMode::kFixed;
  if (needs_space && space.size() == 0) fail("search_space is empty");
  if (tuner.mode == TunerMode::kFixed && !space.contains(tuner.fixed_setting))
    fail("fixed mode needs a complete setting of the search space in tuner.fixed_setting");
  if (tuner.mode == TunerMode::kMltuner && !tuner.initial_tuning && !space.contains(tuner.fixed_setting))
    fail("tuner.initial_tuning=false needs a complete tuner.fixed_setting");
  if (tuner.plateau_window < 1) fail("tuner.plateau_window must be positive");
  if (tuner.max_epochs < 1) fail("tuner.max_epochs must be positive");
  if (tuner.fullrun_settings < 1) fail("tuner.fullrun.settings must be positive");
  const int n = tuner.halving.settings;
  if (n < 1 || (n & (n - 1)) != 0) fail("tuner.halving.settings must be a power of two");
  if (tuner.halving.initial_budget < 0 || tuner.halving.initial_budget % n != 0)
    fail("tuner.halving.initial_budget must be a non-negative multiple of the bracket size");
}

SessionConfig parse_config(std::string_view json_text, const std::vector<Override>& overrides, bool check) {
  json root = json::parse(json_text, nullptr, false);
  if (root.is_discarded()) fail("config is not valid JSON");
  if (!root.is_object()) fail("config must be a JSON object");
  for (const auto& o : overrides) apply_override(root, o);
  check_keys(root, "config", {"task", "optimizer", "trainer", "search_space", "binding", "searcher", "tuner",
                              "seed", "deterministic", "transport", "output"});

  SessionConfig cfg;
  if (root.contains("task")) {
    const json& t = root["task"];
    check_keys(t, "task", {"kind", "samples", "features", "rows", "cols", "rank", "noise", "separation",
                           "condition", "seed", "loss_threshold"});
    const std::string kind = read_string(t, "kind", std::string(sim::to_string(cfg.task.kind)));
    auto parsed = sim::parse_task_kind(kind);
    if (!parsed) fail("unknown task kind '" + kind + "'");
    cfg.task.kind = *parsed;
    read(t, "samples", cfg.task.samples);
    read(t, "features", cfg.task.features);
    read(t, "rows", cfg.task.rows);
    read(t, "cols", cfg.task.cols);
    read(t, "rank", cfg.task.rank);
    read(t, "noise", cfg.task.noise);
    read(t, "separation", cfg.task.separation);
    read(t, "condition", cfg.task.condition);
    read(t, "seed", cfg.task.seed);
    read(t, "loss_threshold", cfg.task.loss_threshold);
  }
  if (root.contains("optimizer")) {
    const json& o = root["optimizer"];
    check_keys(o, "optimizer", {"kind", "beta1", "beta2", "rms_decay", "epsilon", "dampened_momentum"});
    const std::string kind = read_string(o, "kind", std::string(sim::to_string(cfg.optimizer.kind)));
    auto parsed = sim::parse_optimizer_kind(kind);
    if (!parsed) fail("unknown optimizer kind '" + kind + "'");
    cfg.optimizer.kind = *parsed;
    read(o, "beta1", cfg.optimizer.beta1);
    read(o, "beta2", cfg.optimizer.beta2);
    read(o, "rms_decay", cfg.optimizer.rms_decay);
    read(o, "epsilon", cfg.optimizer.epsilon);
    read(o, "dampened_momentum", cfg.optimizer.dampened_momentum);
  }
  if (root.contains("trainer")) {
    const json& t = root["trainer"];
    check_keys(t, "trainer", {"workers", "max_staleness", "overhead", "per_sample", "learning_rate", "momentum",
                              "batch_size", "staleness"});
    read(t, "workers", cfg.workers);
    read(t, "max_staleness", cfg.max_staleness);
    read(t, "overhead", cfg.time.overhead);
    read(t, "per_sample", cfg.time.per_sample);
    read(t, "learning_rate", cfg.root.learning_rate);
    read(t, "momentum", cfg.root.momentum);
    read(t, "batch_size", cfg.root.batch_size);
    read(t, "staleness", cfg.root.staleness);
  }
  if (root.contains("search_space")) {
    const json& s = root["search_space"];
    if (!s.is_array()) fail("search_space must be a list");
    std::vector<TunableSpec> dims;
    for (const auto& d : s) dims.push_back(read_tunable(d));
    cfg.space = SearchSpace(std::move(dims));
  }
  if (root.contains("binding")) {
    const json& b = root["binding"];
    if (!b.is_object()) fail("binding must be an object");
    for (const auto& item : b.items()) {
      if (!item.value().is_string()) fail("binding for '" + item.key() + "' must be a role name");
      auto role = sim::parse_tunable_role(item.value().get<std::string>());
      if (!role) fail("unknown role '" + item.value().get<std::string>() + "'");
      cfg.binding[item.key()] = *role;
    }
  }
  if (root.contains("searcher")) {
    const json& s = root["searcher"];
    check_keys(s, "searcher", {"algorithm", "grid_points"});
    const std::string algo = read_string(s, "algorithm", std::string(to_string(cfg.algorithm)));
    auto parsed = parse_search_algorithm(algo);
    if (!parsed) fail("unknown searcher '" + algo + "'");
    cfg.algorithm = *parsed;
    read(s, "grid_points", cfg.grid_points);
  }
  if (root.contains("tuner")) {
    const json& t = root["tuner"];
    check_keys(t, "tuner", {"mode", "initial_tuning", "fixed_setting", "retune", "max_retunes",
                            "first_retune_max_trials", "plateau_window", "plateau_tolerance", "stop_at_threshold",
                            "max_epochs", "trial_time_floor", "trial_time_cap_epochs", "fullrun", "halving"});
    TunerOptions& o = cfg.tuner;
    const std::string mode = read_string(t, "mode", std::string(to_string(o.mode)));
    auto parsed = parse_tuner_mode(mode);
    if (!parsed) fail("unknown tuner mode '" + mode + "'");
    o.mode = *parsed;
    read(t, "initial_tuning", o.initial_tuning);
    if (t.contains("fixed_setting")) o.fixed_setting = read_setting(t["fixed_setting"]);
    read(t, "retune", o.retune);
    read(t, "max_retunes", o.max_retunes);
    read(t, "first_retune_max_trials", o.first_retune_max_trials);
    read(t, "plateau_window", o.plateau_window);
    read(t, "plateau_tolerance", o.plateau_tolerance);
    read(t, "stop_at_threshold", o.stop_at_threshold);
    read(t, "max_epochs", o.max_epochs);
    read(t, "trial_time_floor", o.trial_time_floor);
    read(t, "trial_time_cap_epochs", o.trial_time_cap_epochs);
    if (t.contains("fullrun")) {
      check_keys(t["fullrun"], "tuner.fullrun", {"settings"});
      read(t["fullrun"], "settings", o.fullrun_settings);
    }
    if (t.contains("halving")) {
      const json& h = t["halving"];
      check_keys(h, "tuner.halving", {"settings", "initial_budget", "clock_cap", "use_training_loss"});
      read(h, "settings", o.halving.settings);
      read(h, "initial_budget", o.halving.initial_budget);
      read(h, "clock_cap", o.halving.clock_cap);
      read(h, "use_training_loss", o.halving.use_training_loss);
    }
  }
  read(root, "seed", cfg.seed);
  read(root, "deterministic", cfg.deterministic);
  const std::string transport = read_string(root, "transport", "record");
  if (transport == "record") cfg.transport = TransportKind::kRecord;
  else if (transport == "inprocess") cfg.transport = TransportKind::kInProcess;
  else fail("unknown transport '" + transport + "'");
  if (root.contains("output")) {
    check_keys(root["output"], "output", {"dir"});
    read(root["output"], "dir", cfg.output_dir);
  }
  if (check) cfg.validate();
  return cfg;
}

SessionConfig load_config(const std::string& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

sim::TrainerConfig trainer_config(const SessionConfig& config) {
  sim::TrainerConfig out;
  out.workers = config.workers;
  out.binding = config.binding;
  out.optimizer = config.optimizer;
  out.time = config.time;
  out.root = config.root;
  out.max_staleness = config.max_staleness;
  out.stream_seed = config.seed;
  out.deterministic = config.deterministic;
  return out;
}

}  // namespace branchtune::session
