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

#include "commands.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "cauliflow/autodiff/checkpoint.h"
#include "cauliflow/baselines/dur.h"
#include "cauliflow/baselines/phrasing.h"
#include "cauliflow/checks/invariants.h"
#include "cauliflow/cli/cli.h"
#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"
#include "cauliflow/corpus/stats.h"
#include "cauliflow/flow/sample.h"
#include "cauliflow/flow/train.h"
#include "cauliflow/metrics/metrics.h"
#include "cauliflow/metrics/sweeps.h"
#include "cauliflow/synthdata/generator.h"
#include "cauliflow/synthdata/oracle.h"

namespace cauliflow::cli {

namespace fs = std::filesystem;
using corpus::FormatDouble;

namespace {

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("cannot write " + path.string());
}

std::vector<std::string> SplitList(const std::string& text, const std::string& what) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw ConfigError(what + ": empty element in '" + text + "'");
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError(what + " must not be empty");
  return out;
}

std::vector<double> ParseDoubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& s : SplitList(text, what)) {
    try {
      out.push_back(corpus::ParseDouble(s));
    } catch (const Error&) {
      throw ConfigError(what + ": '" + s + "' is not a number");
    }
  }
  return out;
}

std::vector<int> ParseInts(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (double v : ParseDoubles(text, what)) {
    if (v != static_cast<int>(v) || v < 1) {
      throw ConfigError(what + ": expected positive integers, got '" + text + "'");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::optional<double> ParseOptional(const std::string& text, const std::string& what) {
  if (text.empty()) return std::nullopt;
  return ParseDoubles(text, what).at(0);
}

void RequireFile(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::exists(path)) throw IoError(what + " not found: " + path);
}

corpus::Corpus LoadSplit(const std::string& dir, bool relaxed = false) {
  RequireFile(dir, "corpus directory");
  corpus::ValidationOptions options;
  if (relaxed) options.require_positive_phonemes = false;
  return corpus::LoadCorpus(dir, options);
}

struct TrainDev {
  corpus::Corpus train;
  corpus::Corpus dev;
};

TrainDev LoadTrainDev(const std::string& root) {
  RequireFile(root, "data directory");
  return {LoadSplit((fs::path(root) / "train").string()),
          LoadSplit((fs::path(root) / "dev").string())};
}

std::string ModelKind(const ad::Checkpoint& ck) {
  auto it = ck.metadata.find("kind");
  if (it == ck.metadata.end()) throw CorpusError("checkpoint does not name its model kind");
  return it->second;
}

std::unique_ptr<flow::CauliflowModel> LoadFlow(const std::string& path) {
  RequireFile(path, "model checkpoint");
  ad::Checkpoint ck = ad::LoadCheckpoint(path);
  if (ModelKind(ck) != "cauliflow-flow") {
    throw ConfigError(path + " holds a '" + ModelKind(ck) + "' model; this command needs a flow");
  }
  return flow::CauliflowModel::FromCheckpoint(ck);
}

std::vector<corpus::Utterance> Head(const std::vector<corpus::Utterance>& utts, std::size_t n) {
  if (n == 0 || n >= utts.size()) return utts;
  return {utts.begin(), utts.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace

int GenData(const GenDataOptions& o, uint64_t seed, const std::string& out) {
  synth::GeneratorSpec spec = synth::GeneratorSpec::Default();
  if (!o.spec.empty()) {
    RequireFile(o.spec, "generator spec");
    spec = synth::LoadSpec(o.spec);
  }
  spec.seed = seed;
  spec.Validate();
  synth::GeneratedCorpus gen = synth::GenerateCorpus(spec, {o.train, o.dev, o.test});
  synth::SaveGenerated(out, spec, gen);
  spdlog::info("wrote {} / {} / {} utterances to {}", o.train, o.dev, o.test, out);
  return kOk;
}

int TrainDur(const DurOptions& o, bool pause_input, uint64_t seed, const std::string& out) {
  TrainDev data = LoadTrainDev(o.data);
  cond::EncoderConfig enc;
  enc.embed_dim = o.embed_dim;
  enc.conv_layers = o.conv_layers;
  enc.dilations = ParseInts(o.dilations, "--dilations");
  baselines::DurModel model(enc, data.train.inventory, pause_input, seed);
  baselines::DurTrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.learning_rate;
  tc.clip_norm = o.clip_norm;
  tc.seed = seed;
  tc.pause_threshold = o.pause_threshold;
  std::ostringstream csv;
  csv << "epoch,train_mse,dev_mse\n";
  auto result = baselines::TrainDur(&model, data.train, data.dev, tc, [&](const baselines::DurEpoch& e) {
    spdlog::info("epoch {} train {:.4f} dev {:.4f}", e.epoch, e.train_mse, e.dev_mse);
    csv << e.epoch << ',' << FormatDouble(e.train_mse) << ',' << FormatDouble(e.dev_mse) << '\n';
  });
  spdlog::info("best dev MSE {:.4f} at epoch {}", result.best_dev_mse, result.best_epoch);
  ad::SaveCheckpoint((fs::path(out) / "model.ckpt").string(), model.ToCheckpoint());
  WriteText(fs::path(out) / "training.csv", csv.str());
  return kOk;
}

int TrainPhrasing(const PhrasingOptions& o, uint64_t seed, const std::string& out) {
  TrainDev data = LoadTrainDev(o.data);
  baselines::PhrasingConfig pc;
  pc.hidden = o.hidden;
  pc.dilations = ParseInts(o.dilations, "--dilations");
  baselines::PhrasingClassifier model(pc, data.train.word_feature_dim, seed);
  baselines::PhrasingTrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.learning_rate;
  tc.clip_norm = o.clip_norm;
  tc.seed = seed;
  tc.pause_threshold = o.pause_threshold;
  std::ostringstream csv;
  csv << "epoch,train_bce,dev_bce\n";
  baselines::TrainPhrasing(&model, data.train, data.dev, tc, [&](const baselines::PhrasingEpoch& e) {
    spdlog::info("epoch {} train {:.4f} dev {:.4f}", e.epoch, e.train_bce, e.dev_bce);
    csv << e.epoch << ',' << FormatDouble(e.train_bce) << ',' << FormatDouble(e.dev_bce) << '\n';
  });
  std::vector<double> p;
  std::vector<int> y;
  auto probs = model.Probabilities(data.dev.utterances, data.dev);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    auto labels = corpus::ExtractPauseLabels(data.dev.utterances[i], o.pause_threshold);
    p.insert(p.end(), probs[i].begin(), probs[i].end());
    y.insert(y.end(), labels.begin(), labels.end());
  }
  baselines::ThresholdChoice choice = baselines::SelectThreshold(p, y, o.beta);
  model.set_threshold(choice.threshold);
  spdlog::info("threshold {:.2f} (dev F {:.4f})", choice.threshold, choice.f);
  ad::SaveCheckpoint((fs::path(out) / "phrasing.ckpt").string(), model.ToCheckpoint());
  WriteText(fs::path(out) / "training.csv", csv.str());
  WriteText(fs::path(out) / "threshold.txt", "threshold " + FormatDouble(choice.threshold) +
                                                 "\ndev_fbeta " + FormatDouble(choice.f) +
                                                 "\ndev_auc " + FormatDouble(baselines::Auc(p, y)) +
                                                 "\n");
  return kOk;
}

int TrainFlow(const FlowOptions& o, uint64_t seed, const std::string& out) {
  TrainDev data = LoadTrainDev(o.data);
  flow::FlowConfig fc;
  fc.steps = o.steps;
  fc.group = o.group;
  fc.cond_channels = o.cond_channels;
  fc.hidden = o.hidden;
  fc.encoder.embed_dim = o.embed_dim;
  fc.encoder.conv_layers = o.conv_layers;
  fc.encoder.dilations = ParseInts(o.dilations, "--dilations");
  fc.Validate();
  flow::CauliflowModel model(fc, data.train.inventory, data.train.word_feature_dim,
                             data.train.speaker_dim, seed);
  flow::FlowTrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.learning_rate;
  tc.clip_norm = o.clip_norm;
  tc.seed = seed;
  std::ostringstream csv;
  csv << "epoch,train_nll,dev_nll\n";
  auto result = flow::TrainFlow(&model, data.train, data.dev, tc, [&](const flow::EpochRecord& e) {
    spdlog::info("epoch {} train {:.4f} dev {:.4f}", e.epoch, e.train_nll, e.dev_nll);
    csv << e.epoch << ',' << FormatDouble(e.train_nll) << ',' << FormatDouble(e.dev_nll) << '\n';
  });
  spdlog::info("best dev NLL {:.4f} at epoch {} (initial {:.4f})", result.best_dev_nll,
               result.best_epoch, result.initial_dev_nll);
  ad::SaveCheckpoint((fs::path(out) / "model.ckpt").string(), model.ToCheckpoint());
  WriteText(fs::path(out) / "training.csv", csv.str());
  return kOk;
}

int Predict(const PredictOptions& o, uint64_t seed, const std::string& out) {
  RequireFile(o.model, "model checkpoint");
  ad::Checkpoint ck = ad::LoadCheckpoint(o.model);
  corpus::Corpus data = LoadSplit(o.data);
  const std::string kind = ModelKind(ck);
  metrics::RateOverrides overrides{ParseOptional(o.rs, "--rs"), ParseOptional(o.rp, "--rp")};
  std::vector<corpus::Utterance> predicted;
  if (kind == "cauliflow-flow") {
    auto model = flow::CauliflowModel::FromCheckpoint(ck);
    predicted = flow::SampleUtterances(*model, data.utterances, data, o.temperature, overrides, seed);
  } else {
    if (overrides.rs || overrides.rp) throw ConfigError("--rs/--rp apply to flow models only");
    auto model = baselines::DurModel::FromCheckpoint(ck);
    if (model->pause_input()) {
      RequireFile(o.phrasing, "--phrasing checkpoint");
      auto classifier = baselines::PhrasingClassifier::FromCheckpoint(ad::LoadCheckpoint(o.phrasing));
      auto labels = classifier->Decide(data.utterances, data);
      predicted = model->Predict(data.utterances, &labels);
    } else {
      predicted = model->Predict(data.utterances);
    }
  }
  corpus::Corpus result = data;
  result.utterances = std::move(predicted);
  corpus::SaveCorpus(out, result);
  spdlog::info("predicted {} utterances with a '{}' model", result.utterances.size(), kind);
  return kOk;
}

int Evaluate(const EvaluateOptions& o, const std::string& out) {
  corpus::Corpus predicted = LoadSplit(o.predicted, true);
  corpus::Corpus target = LoadSplit(o.target);
  metrics::ReportOptions ro{o.pause_threshold, o.beta, o.percentile};
  metrics::MetricReport report = metrics::Evaluate(predicted.utterances, target.utterances, ro);
  const std::string text = report.ToText();
  std::ostringstream table;
  table << "metric,value\n";
  std::istringstream lines(text);
  for (std::string key, value; lines >> key >> value;) table << key << ',' << value << '\n';
  WriteText(fs::path(out) / "report.txt", text);
  WriteText(fs::path(out) / "report.csv", table.str());
  using metrics::TokenFilter;
  WriteText(fs::path(out) / "histogram_pause.csv",
            metrics::HistogramCsv(metrics::CollectDurations(predicted.utterances, TokenFilter::kPauseCapable),
                                  metrics::CollectDurations(target.utterances, TokenFilter::kPauseCapable)));
  WriteText(fs::path(out) / "histogram_nonpause.csv",
            metrics::HistogramCsv(metrics::CollectDurations(predicted.utterances, TokenFilter::kPhoneme),
                                  metrics::CollectDurations(target.utterances, TokenFilter::kPhoneme)));
  std::fputs(text.c_str(), stdout);
  return kOk;
}

int SweepTemperature(const TemperatureSweepOptions& o, uint64_t seed, const std::string& out) {
  auto model = LoadFlow(o.model);
  corpus::Corpus data = LoadSplit(o.data);
  std::vector<double> values = ParseDoubles(o.values, "--values");
  metrics::ReportOptions ro;
  ro.threshold = o.pause_threshold;
  ro.percentile = o.percentile;
  std::ostringstream csv;
  bool header = false;
  for (double t : values) {
    auto predicted = flow::SampleUtterances(*model, data.utterances, data, t, {}, seed);
    std::istringstream lines(metrics::Evaluate(predicted, data.utterances, ro).ToText());
    std::vector<std::pair<std::string, std::string>> row;
    for (std::string key, value; lines >> key >> value;) row.emplace_back(key, value);
    if (!header) {
      csv << "temperature";
      for (const auto& kv : row) csv << ',' << kv.first;
      csv << '\n';
      header = true;
    }
    csv << FormatDouble(t);
    for (const auto& kv : row) csv << ',' << kv.second;
    csv << '\n';
    spdlog::info("T={} done", t);
  }
  WriteText(fs::path(out) / "sweep_temperature.csv", csv.str());
  std::fputs(csv.str().c_str(), stdout);
  return kOk;
}

int SweepRate(const RateSweepOptions& o, uint64_t seed, const std::string& out) {
  if (o.kind != "rs" && o.kind != "rp" && o.kind != "both") {
    throw ConfigError("--kind must be rs, rp or both");
  }
  auto model = LoadFlow(o.model);
  corpus::Corpus data = LoadSplit(o.data);
  const auto prompts = Head(data.utterances, o.prompts);
  metrics::Sampler sampler = flow::MakeSampler(*model, data);
  std::ostringstream summary;
  auto sweep = [&](metrics::RateKind kind, const std::string& values, const std::string& name) {
    auto response = metrics::MeasureRateResponse(sampler, prompts, kind,
                                                 ParseDoubles(values, "--" + name + "-values"),
                                                 o.temperature, seed, o.pause_threshold);
    WriteText(fs::path(out) / ("rate_" + name + ".csv"), response.ToCsv());
    summary << name << "_correlation " << FormatDouble(response.Correlation()) << '\n'
            << name << "_mean_abs_requested " << FormatDouble(response.MeanAbsRequested()) << '\n'
            << name << "_mean_abs_delta " << FormatDouble(response.MeanAbsDelta()) << '\n';
  };
  if (o.kind != "rp") sweep(metrics::RateKind::kSpeech, o.rs_values, "rs");
  if (o.kind != "rs") sweep(metrics::RateKind::kPause, o.rp_values, "rp");
  if (o.kind != "rs" && !o.nesting_values.empty()) {
    std::vector<std::set<std::size_t>> sites;
    std::vector<std::vector<double>> suitability;
    const fs::path latents = fs::path(o.data) / synth::kLatentsFile;
    fs::path spec_path = o.spec.empty() ? fs::path(o.data).parent_path() / synth::kSpecFile
                                        : fs::path(o.spec);
    if (fs::exists(latents) && fs::exists(spec_path)) {
      synth::GeneratorSpec spec = synth::LoadSpec(spec_path.string());
      auto all = synth::LoadLatents(latents.string());
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (i >= all.size() || all[i].id != prompts[i].id) {
          throw CorpusError("latents do not follow the utterance order of " + o.data);
        }
        sites.push_back(synth::PlantedSites(prompts[i], all[i]));
        suitability.push_back(synth::Suitability(spec, prompts[i], all[i]));
      }
    } else if (!o.spec.empty()) {
      throw IoError("latents not found: " + latents.string());
    }
    auto nesting = metrics::MeasurePauseNesting(sampler, prompts,
                                                ParseDoubles(o.nesting_values, "--nesting-values"),
                                                0.0, seed, sites, suitability, o.pause_threshold);
    WriteText(fs::path(out) / "nesting.csv", nesting.ToCsv());
    summary << "nesting_min_containment " << FormatDouble(nesting.MinContainment()) << '\n'
            << "nesting_final_increment " << FormatDouble(nesting.FinalIncrement()) << '\n'
            << "nesting_within_sites " << FormatDouble(nesting.within_sites) << '\n'
            << "nesting_order_agreement " << FormatDouble(nesting.order_agreement) << '\n';
  }
  WriteText(fs::path(out) / "summary.txt", summary.str());
  std::fputs(summary.str().c_str(), stdout);
  return kOk;
}

int SelfTest(const std::string& out) {
  std::ostringstream report;
  bool ok = true;
  for (const checks::CheckResult& r : checks::RunSelfTest()) {
    report << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  std::fputs(report.str().c_str(), stdout);
  if (!out.empty()) WriteText(fs::path(out) / "selftest.txt", report.str());
  return ok ? kOk : kSelfTestFailed;
}

}  // namespace cauliflow::cli
