// Copyright (c) 2026 The Cauliflow Authors
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

#include "cauliflow/cli/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include <spdlog/spdlog.h>

#include "cauliflow/common/error.h"
#include "commands.h"

#ifndef CAULIFLOW_VERSION
#define CAULIFLOW_VERSION "unknown"
#endif

namespace cauliflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFile = "manifest.json";

// Options that steer the run but are not part of its resolved config.
bool IsMetaOption(const std::string& name) {
  return name == "help" || name == "config" || name == "from-manifest";
}

json ReadJson(const std::string& path, const std::string& what) {
  std::ifstream is(path);
  if (!is) throw IoError(what + " not found: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(what + " " + path + " is not valid JSON: " + e.what());
  }
}

std::string ValueText(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) out += (out.empty() ? "" : ",") + ValueText(item, key);
    return out;
  }
  throw ConfigError("config key '" + key + "' has an unsupported value " + v.dump());
}

// "--key value" argument pairs for every entry of a config object.
std::vector<std::string> ConfigArgs(const json& object, const CLI::App& sub,
                                    const std::string& source) {
  if (!object.is_object()) throw ConfigError(source + " must hold a JSON object");
  std::vector<std::string> args;
  for (const auto& [key, value] : object.items()) {
    if (IsMetaOption(key) || sub.get_option_no_throw("--" + key) == nullptr) {
      throw ConfigError(source + ": '" + key + "' is not an option of " + sub.get_name());
    }
    args.push_back("--" + key);
    args.push_back(ValueText(value, key));
  }
  return args;
}

// Value following `flag` in args (either "--flag v" or "--flag=v").
std::string FindValue(const std::vector<std::string>& args, const std::string& flag) {
  std::string found;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) found = args[i + 1];
    if (args[i].rfind(flag + "=", 0) == 0) found = args[i].substr(flag.size() + 1);
  }
  return found;
}

std::map<std::string, std::string> Resolved(const CLI::App& sub) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (IsMetaOption(name) || name == "out") continue;
    out[name] = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
  }
  return out;
}

// The output directory is left out so that identical runs give identical trees.
void WriteManifest(const CLI::App& sub, uint64_t seed, const std::string& out) {
  json manifest;
  manifest["program"] = "cauliflow";
  manifest["version"] = CAULIFLOW_VERSION;
  manifest["command"] = sub.get_name();
  manifest["seed"] = seed;
  json options = json::object();
  for (const auto& [k, v] : Resolved(sub)) options[k] = v;
  manifest["options"] = options;
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = fs::relative(entry.path(), out).generic_string();
    if (rel != kManifestFile) files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  manifest["outputs"] = files;
  std::ofstream os(fs::path(out) / kManifestFile);
  if (!os) throw IoError("cannot write manifest in " + out);
  os << manifest.dump(2) << '\n';
}

struct Registry {
  uint64_t seed = 1;
  std::string out;
  std::string config;
  std::string manifest;
  GenDataOptions gen;
  DurOptions dur;
  DurOptions durp;
  PhrasingOptions phrasing;
  FlowOptions flow;
  PredictOptions predict;
  EvaluateOptions evaluate;
  TemperatureSweepOptions sweep_t;
  RateSweepOptions sweep_r;
  std::map<std::string, std::function<int()>> actions;
};

CLI::App* AddCommand(CLI::App& app, Registry& r, const std::string& name,
                     const std::string& description, bool needs_out = true) {
  CLI::App* sub = app.add_subcommand(name, description);
  sub->add_option("--config", r.config, "JSON file of option values; flags win");
  sub->add_option("--from-manifest", r.manifest, "Rerun with the options of a manifest.json");
  sub->add_option("--seed", r.seed, "Seed for all randomness");
  auto* out = sub->add_option("--out", r.out, "Output directory");
  if (!needs_out) out->description("Optional output directory");
  return sub;
}

void AddDurOptions(CLI::App* sub, DurOptions& o) {
  sub->add_option("--data", o.data, "Directory with train/ and dev/ corpora");
  sub->add_option("--epochs", o.epochs);
  sub->add_option("--batch-size", o.batch_size);
  sub->add_option("--lr", o.learning_rate, "Adam learning rate");
  sub->add_option("--clip", o.clip_norm, "Gradient norm clip (0 disables)");
  sub->add_option("--embed-dim", o.embed_dim, "Phoneme encoder width");
  sub->add_option("--conv-layers", o.conv_layers);
  sub->add_option("--dilations", o.dilations, "Residual layer dilations, comma-separated");
  sub->add_option("--pause-threshold", o.pause_threshold, "Pause threshold in frames");
}

void Register(CLI::App& app, Registry& r) {
  CLI::App* sub = AddCommand(app, r, "gen-data", "Generate a synthetic corpus");
  sub->add_option("--spec", r.gen.spec, "Generator spec JSON (default spec otherwise)");
  sub->add_option("--train", r.gen.train, "Training utterances");
  sub->add_option("--dev", r.gen.dev, "Development utterances");
  sub->add_option("--test", r.gen.test, "Test utterances");
  r.actions["gen-data"] = [&r] { return GenData(r.gen, r.seed, r.out); };

  sub = AddCommand(app, r, "train-dur", "Train the L2 duration baseline");
  AddDurOptions(sub, r.dur);
  r.actions["train-dur"] = [&r] { return TrainDur(r.dur, false, r.seed, r.out); };

  sub = AddCommand(app, r, "train-durp", "Train the pause-label conditioned baseline");
  AddDurOptions(sub, r.durp);
  r.actions["train-durp"] = [&r] { return TrainDur(r.durp, true, r.seed, r.out); };

  sub = AddCommand(app, r, "train-phrasing", "Train the word-level pause classifier");
  sub->add_option("--data", r.phrasing.data, "Directory with train/ and dev/ corpora");
  sub->add_option("--epochs", r.phrasing.epochs);
  sub->add_option("--batch-size", r.phrasing.batch_size);
  sub->add_option("--lr", r.phrasing.learning_rate);
  sub->add_option("--clip", r.phrasing.clip_norm);
  sub->add_option("--hidden", r.phrasing.hidden);
  sub->add_option("--dilations", r.phrasing.dilations);
  sub->add_option("--pause-threshold", r.phrasing.pause_threshold);
  sub->add_option("--beta", r.phrasing.beta, "F-beta weight for threshold selection");
  r.actions["train-phrasing"] = [&r] { return TrainPhrasing(r.phrasing, r.seed, r.out); };

  sub = AddCommand(app, r, "train-flow", "Train the conditional flow");
  sub->add_option("--data", r.flow.data, "Directory with train/ and dev/ corpora");
  sub->add_option("--epochs", r.flow.epochs);
  sub->add_option("--batch-size", r.flow.batch_size);
  sub->add_option("--lr", r.flow.learning_rate);
  sub->add_option("--clip", r.flow.clip_norm);
  sub->add_option("--steps", r.flow.steps, "Flow steps K");
  sub->add_option("--group", r.flow.group, "Squeeze group g");
  sub->add_option("--cond-channels", r.flow.cond_channels);
  sub->add_option("--hidden", r.flow.hidden, "Coupling conditioner width");
  sub->add_option("--embed-dim", r.flow.embed_dim);
  sub->add_option("--conv-layers", r.flow.conv_layers);
  sub->add_option("--dilations", r.flow.dilations);
  r.actions["train-flow"] = [&r] { return TrainFlow(r.flow, r.seed, r.out); };

  sub = AddCommand(app, r, "predict", "Predict durations for a corpus split");
  sub->add_option("--model", r.predict.model, "Checkpoint of a flow, Dur or Dur+P model");
  sub->add_option("--phrasing", r.predict.phrasing, "Phrasing checkpoint (Dur+P only)");
  sub->add_option("--data", r.predict.data, "Corpus directory of prompts");
  sub->add_option("--temperature", r.predict.temperature, "Prior temperature (flow only)");
  sub->add_option("--rs", r.predict.rs, "Speech-rate control (flow only)");
  sub->add_option("--rp", r.predict.rp, "Pause-rate control (flow only)");
  r.actions["predict"] = [&r] { return Predict(r.predict, r.seed, r.out); };

  sub = AddCommand(app, r, "evaluate", "Compare predicted with target durations");
  sub->add_option("--predicted", r.evaluate.predicted, "Corpus directory of predictions");
  sub->add_option("--target", r.evaluate.target, "Corpus directory of targets");
  sub->add_option("--pause-threshold", r.evaluate.pause_threshold);
  sub->add_option("--beta", r.evaluate.beta);
  sub->add_option("--percentile", r.evaluate.percentile);
  r.actions["evaluate"] = [&r] { return Evaluate(r.evaluate, r.out); };

  sub = AddCommand(app, r, "sweep-temperature", "Metrics of flow samples across temperatures");
  sub->add_option("--model", r.sweep_t.model, "Flow checkpoint");
  sub->add_option("--data", r.sweep_t.data, "Corpus directory of prompts and targets");
  sub->add_option("--values", r.sweep_t.values, "Temperatures, comma-separated");
  sub->add_option("--pause-threshold", r.sweep_t.pause_threshold);
  sub->add_option("--percentile", r.sweep_t.percentile);
  r.actions["sweep-temperature"] = [&r] { return SweepTemperature(r.sweep_t, r.seed, r.out); };

  sub = AddCommand(app, r, "sweep-rate", "Speech/pause rate control response and pause nesting");
  sub->add_option("--model", r.sweep_r.model, "Flow checkpoint");
  sub->add_option("--data", r.sweep_r.data, "Corpus directory of prompts");
  sub->add_option("--kind", r.sweep_r.kind, "rs, rp or both");
  sub->add_option("--rs-values", r.sweep_r.rs_values);
  sub->add_option("--rp-values", r.sweep_r.rp_values);
  sub->add_option("--nesting-values", r.sweep_r.nesting_values,
                  "rp values for the pause nesting run at temperature 0 (empty skips)");
  sub->add_option("--temperature", r.sweep_r.temperature);
  sub->add_option("--prompts", r.sweep_r.prompts, "Use the first N prompts (0 = all)");
  sub->add_option("--spec", r.sweep_r.spec, "Generator spec for planted break sites");
  sub->add_option("--pause-threshold", r.sweep_r.pause_threshold);
  r.actions["sweep-rate"] = [&r] { return SweepRate(r.sweep_r, r.seed, r.out); };

  AddCommand(app, r, "selftest", "Run the invariant checks", false);
  r.actions["selftest"] = [&r] { return SelfTest(r.out); };
}

// Splices config-file and manifest options in front of the user's flags.
std::vector<std::string> Expand(const std::vector<std::string>& args, CLI::App& app) {
  if (args.empty()) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;
  std::vector<std::string> injected;
  const std::string manifest = FindValue(args, "--from-manifest");
  if (!manifest.empty()) {
    json m = ReadJson(manifest, "manifest");
    if (m.value("command", "") != sub->get_name()) {
      throw ConfigError(manifest + " records a '" + m.value("command", "") + "' run, not " +
                        sub->get_name());
    }
    auto more = ConfigArgs(m.value("options", json::object()), *sub, manifest);
    injected.insert(injected.end(), more.begin(), more.end());
  }
  const std::string config = FindValue(args, "--config");
  if (!config.empty()) {
    auto more = ConfigArgs(ReadJson(config, "config file"), *sub, config);
    injected.insert(injected.end(), more.begin(), more.end());
  }
  std::vector<std::string> out{args[0]};
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

int ExitFor(const std::exception& e, int code) {
  spdlog::error("{}", e.what());
  return code;
}

}  // namespace

int Run(const std::vector<std::string>& args) {
  CLI::App app{"Duration modelling with a conditional normalising flow", "cauliflow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CAULIFLOW_VERSION);
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);
  Registry r;
  Register(app, r);
  try {
    std::vector<std::string> expanded = Expand(args, app);
    std::reverse(expanded.begin(), expanded.end());
    try {
      app.parse(expanded);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kOk : kUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const bool needs_out = name != "selftest";
    if (needs_out && r.out.empty()) throw ConfigError("--out is required");
    if (!r.out.empty()) fs::create_directories(r.out);
    const int code = r.actions.at(name)();
    if (!r.out.empty() && code == kOk) WriteManifest(*sub, r.seed, r.out);
    return code;
  } catch (const IoError& e) {
    return ExitFor(e, kMissingInput);
  } catch (const ConfigError& e) {
    return ExitFor(e, kConfigInvalid);
  } catch (const CorpusError& e) {
    return ExitFor(e, kDataInvalid);
  } catch (const ShapeError& e) {
    return ExitFor(e, kDataInvalid);
  } catch (const TrainingError& e) {
    return ExitFor(e, kDiverged);
  } catch (const NumericError& e) {
    return ExitFor(e, kDiverged);
  } catch (const fs::filesystem_error& e) {
    return ExitFor(e, kMissingInput);
  } catch (const std::exception& e) {
    return ExitFor(e, kSelfTestFailed);
  }
}

}  // namespace cauliflow::cli
