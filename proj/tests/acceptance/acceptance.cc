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

// End-to-end acceptance run. Generates a corpus, trains every model through
// the command-line pipeline and prints one PASS/FAIL line per criterion.
// Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "cauliflow/autodiff/checkpoint.h"
#include "cauliflow/checks/invariants.h"
#include "cauliflow/cli/cli.h"
#include "cauliflow/corpus/io.h"
#include "cauliflow/flow/flow.h"
#include "cauliflow/flow/sample.h"

namespace fs = std::filesystem;
using namespace cauliflow;

namespace {

constexpr const char* kSeed = "2026";
constexpr const char* kTrainUtterances = "10000";
constexpr const char* kFlowEpochs = "4";
constexpr const char* kFlowLearningRate = "3e-3";
constexpr const char* kBaselineEpochs = "4";
constexpr const char* kPhrasingEpochs = "12";
constexpr std::size_t kNestingPrompts = 50;
constexpr std::size_t kVariabilitySamples = 10;

struct Outcome {
  int id;
  std::string name;
  bool passed;
  std::string detail;
};

std::vector<Outcome> outcomes;

void Record(int id, const std::string& name, bool passed, const std::string& detail) {
  outcomes.push_back({id, name, passed, detail});
  std::printf("%s %2d. %s: %s\n", passed ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string Fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// Sends the commands' own stdout (reports, logs) to a log file so that the
// criterion lines stay readable.
class QuietStdout {
 public:
  explicit QuietStdout(const fs::path& log) {
    std::fflush(stdout);
    saved_ = dup(STDOUT_FILENO);
    int fd = open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      dup2(fd, STDOUT_FILENO);
      close(fd);
    }
  }
  ~QuietStdout() {
    std::fflush(stdout);
    dup2(saved_, STDOUT_FILENO);
    close(saved_);
  }
  QuietStdout(const QuietStdout&) = delete;
  QuietStdout& operator=(const QuietStdout&) = delete;

 private:
  int saved_ = -1;
};

class Stage {
 public:
  explicit Stage(fs::path root) : root_(std::move(root)) {}

  // Runs one CLI command writing into root/name; aborts the run on failure.
  std::string Run(const std::string& name, std::vector<std::string> args) {
    const fs::path out = root_ / name;
    args.insert(args.end(), {"--seed", kSeed, "--out", out.string()});
    const auto t0 = std::chrono::steady_clock::now();
    int code = 0;
    {
      QuietStdout quiet(root_ / "commands.log");
      code = cli::Run(args);
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "stage %s finished in %.1fs (exit %d)\n", name.c_str(), s, code);
    if (code != cli::kOk) {
      std::fprintf(stderr, "stage %s failed with exit code %d\n", name.c_str(), code);
      std::exit(2);
    }
    stages_.push_back({name, args.front()});
    return out.string();
  }

  const fs::path& root() const { return root_; }
  const std::vector<std::pair<std::string, std::string>>& stages() const { return stages_; }

 private:
  fs::path root_;
  std::vector<std::pair<std::string, std::string>> stages_;
};

std::string Slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::map<std::string, std::string> Tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = Slurp(e.path());
  }
  return out;
}

// Rows of a CSV as column -> value maps.
std::vector<std::map<std::string, double>> ReadCsv(const fs::path& path) {
  std::istringstream is(Slurp(path));
  std::string line;
  std::getline(is, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    for (std::string cell; std::getline(h, cell, ',');) header.push_back(cell);
  }
  std::vector<std::map<std::string, double>> rows;
  while (std::getline(is, line)) {
    std::istringstream r(line);
    std::map<std::string, double> row;
    std::size_t i = 0;
    for (std::string cell; std::getline(r, cell, ',') && i < header.size(); ++i) {
      row[header[i]] = std::strtod(cell.c_str(), nullptr);
    }
    rows.push_back(row);
  }
  return rows;
}

// metric -> value from an evaluate report.
std::map<std::string, double> ReadReport(const std::string& dir) {
  std::map<std::string, double> out;
  std::istringstream is(Slurp(fs::path(dir) / "report.txt"));
  for (std::string key, value; is >> key >> value;) out[key] = std::strtod(value.c_str(), nullptr);
  return out;
}

std::map<std::string, double> ReadSummary(const fs::path& path) {
  std::map<std::string, double> out;
  std::istringstream is(Slurp(path));
  for (std::string key, value; is >> key >> value;) out[key] = std::strtod(value.c_str(), nullptr);
  return out;
}

// Strictly monotone in the given direction except for at most one tie.
bool MonotoneWithOneTie(const std::vector<double>& v, bool increasing, std::string* why) {
  int ties = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double step = increasing ? v[i] - v[i - 1] : v[i - 1] - v[i];
    if (step < 0) {
      *why = "reversal at step " + std::to_string(i);
      return false;
    }
    if (step == 0) ++ties;
  }
  if (ties > 1) {
    *why = std::to_string(ties) + " ties";
    return false;
  }
  return true;
}

std::string Join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + Fmt(x);
  return s;
}

void InvariantCriteria() {
  auto show = [](int id, const std::string& name, const checks::CheckResult& r) {
    Record(id, name, r.passed, r.detail);
  };
  show(1, "flow invertibility", checks::FlowRoundTrip());
  show(2, "log-det exactness", checks::FlowLogDet());
  show(3, "density normalisation", checks::FlowDensity());
  const auto ops = checks::OpGradients();
  const auto nll = checks::FlowNllGradient();
  Record(4, "gradient correctness", ops.passed && nll.passed, ops.detail + "; " + nll.detail);
  show(11, "metric oracle equivalence", checks::MetricOracles());
}

void ModelComparison(const std::map<std::string, double>& dur, const std::map<std::string, double>& durp,
                     const std::map<std::string, double>& flow) {
  const double fp = flow.at("jsd_pause"), pp = durp.at("jsd_pause"), dp = dur.at("jsd_pause");
  const double fn = flow.at("jsd_nonpause"), pn = durp.at("jsd_nonpause"), dn = dur.at("jsd_nonpause");
  const bool pause_ok = pp - fp > 0.02 && dp - pp > 0.02;
  const bool nonpause_ok = pn - fn > 0.005 && dn - pn > 0.005;
  Record(5, "JSD ordering", pause_ok && nonpause_ok,
         "pause flow/durp/dur " + Fmt(fp) + " " + Fmt(pp) + " " + Fmt(dp) + "; non-pause " +
             Fmt(fn) + " " + Fmt(pn) + " " + Fmt(dn));

  const double gain = durp.at("word_f") - dur.at("word_f");
  Record(6, "word-boundary phrasing gain", gain >= 20.0 && dur.at("word_recall") < 15.0,
         "F durp " + Fmt(durp.at("word_f")) + " vs dur " + Fmt(dur.at("word_f")) + ", dur recall " +
             Fmt(dur.at("word_recall")));

  const bool precision_ok = flow.at("punct_precision") >= durp.at("punct_precision") - 1.0;
  const bool recall_ok = durp.at("punct_recall") >= flow.at("punct_recall") - 1.0;
  Record(7, "punctuation precision/recall trade-off", precision_ok && recall_ok,
         "precision flow " + Fmt(flow.at("punct_precision")) + " durp " +
             Fmt(durp.at("punct_precision")) + "; recall durp " + Fmt(durp.at("punct_recall")) +
             " flow " + Fmt(flow.at("punct_recall")));
}

void TemperatureTrend(const std::string& dir) {
  std::vector<double> l1, jsd;
  for (const auto& row : ReadCsv(fs::path(dir) / "sweep_temperature.csv")) {
    l1.push_back(row.at("percentile_l1"));
    jsd.push_back(row.at("jsd_pause"));
  }
  std::string why_l1 = "ok", why_jsd = "ok";
  const bool l1_ok = MonotoneWithOneTie(l1, true, &why_l1);
  const bool jsd_ok = MonotoneWithOneTie(jsd, false, &why_jsd);
  Record(8, "temperature trend", l1_ok && jsd_ok,
         "p99 L1 [" + Join(l1) + "] " + why_l1 + "; JSD pause [" + Join(jsd) + "] " + why_jsd);
}

void RateControl(const std::string& rate_dir, const std::string& nesting_dir) {
  const auto s = ReadSummary(fs::path(rate_dir) / "summary.txt");
  const bool rs_ok = s.at("rs_correlation") >= 0.9 && s.at("rs_mean_abs_delta") <= s.at("rs_mean_abs_requested");
  const bool rp_ok = s.at("rp_correlation") >= 0.9 && s.at("rp_mean_abs_delta") <= s.at("rp_mean_abs_requested");
  Record(9, "rate control", rs_ok && rp_ok,
         "rs r=" + Fmt(s.at("rs_correlation")) + " |delta| " + Fmt(s.at("rs_mean_abs_delta")) + " <= " +
             Fmt(s.at("rs_mean_abs_requested")) + "; rp r=" + Fmt(s.at("rp_correlation")) + " |delta| " +
             Fmt(s.at("rp_mean_abs_delta")) + " <= " + Fmt(s.at("rp_mean_abs_requested")));

  const auto n = ReadSummary(fs::path(nesting_dir) / "summary.txt");
  std::vector<double> counts;
  for (const auto& row : ReadCsv(fs::path(nesting_dir) / "nesting.csv")) counts.push_back(row.at("mean_pauses"));
  double largest_step = 0.0;
  for (std::size_t i = 1; i < counts.size(); ++i) largest_step = std::max(largest_step, counts[i] - counts[i - 1]);
  // Saturation: nearly all pauses sit on planted sites and the last step adds
  // at most half as many pauses as the largest step did.
  const bool contained = n.at("nesting_min_containment") >= 0.9;
  const bool saturated = n.at("nesting_within_sites") >= 0.9 &&
                         n.at("nesting_final_increment") <= 0.5 * largest_step;
  Record(10, "pause insertion at T=0", contained && saturated,
         "min containment " + Fmt(n.at("nesting_min_containment")) + ", mean pauses [" + Join(counts) +
             "], within planted sites " + Fmt(n.at("nesting_within_sites")));
}

void Variability(const std::string& model_path, const std::string& test_dir) {
  auto model = flow::CauliflowModel::FromCheckpoint(ad::LoadCheckpoint(model_path));
  corpus::Corpus test = corpus::LoadCorpus(test_dir);
  const corpus::Utterance* prompt = &test.utterances.front();
  for (const auto& u : test.utterances) {
    if (u.NumWords() >= 8) {
      prompt = &u;
      break;
    }
  }
  auto draw = [&](double t) {
    std::vector<std::vector<double>> out;
    for (uint64_t s = 0; s < kVariabilitySamples; ++s) {
      out.push_back(flow::SampleUtterances(*model, {*prompt}, test, t, {}, 100 + s).front().Durations());
    }
    return out;
  };
  const auto hot = draw(1.0);
  std::set<std::vector<std::size_t>> placements;
  for (const auto& d : hot) {
    std::vector<std::size_t> pauses;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (corpus::IsPauseCapable(prompt->tokens[i].kind) && d[i] >= corpus::kDefaultPauseThreshold) {
        pauses.push_back(i);
      }
    }
    placements.insert(pauses);
  }
  std::size_t varying = 0;
  const std::size_t n = prompt->tokens.size();
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0, sq = 0.0;
    for (const auto& d : hot) mean += d[i] / hot.size();
    for (const auto& d : hot) sq += (d[i] - mean) * (d[i] - mean);
    if (sq > 0.0) ++varying;
  }
  const double varying_fraction = static_cast<double>(varying) / n;
  const auto cold = draw(0.0);
  bool identical = true;
  for (const auto& d : cold) identical = identical && d == cold.front();
  Record(12, "variability", placements.size() >= 2 && varying_fraction >= 0.95 && identical,
         "prompt " + prompt->id + ": " + std::to_string(placements.size()) +
             " pause placements at T=1, " + Fmt(100.0 * varying_fraction) +
             "% tokens vary, T=0 samples identical: " + (identical ? "yes" : "no"));
}

void Determinism(const Stage& stage) {
  std::string failed;
  std::size_t checked = 0;
  for (const auto& [name, command] : stage.stages()) {
    const fs::path original = stage.root() / name;
    const fs::path rerun = stage.root() / "rerun" / name;
    fs::remove_all(rerun);
    QuietStdout quiet(stage.root() / "commands.log");
    const int code = cli::Run({command, "--from-manifest", (original / "manifest.json").string(), "--out",
                               rerun.string()});
    ++checked;
    if (code != cli::kOk || Tree(original) != Tree(rerun)) failed += (failed.empty() ? "" : ", ") + name;
  }
  Record(13, "determinism from manifests", failed.empty(),
         std::to_string(checked) + " pipelines rerun" + (failed.empty() ? "" : "; differing: " + failed));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "cauliflow_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  InvariantCriteria();

  Stage stage(root);
  const std::string data = stage.Run("data", {"gen-data", "--train", kTrainUtterances});
  const std::string test = data + "/test";
  const std::string dur = stage.Run("dur", {"train-dur", "--data", data, "--epochs", kBaselineEpochs});
  const std::string durp = stage.Run("durp", {"train-durp", "--data", data, "--epochs", kBaselineEpochs});
  const std::string phrasing =
      stage.Run("phrasing", {"train-phrasing", "--data", data, "--epochs", kPhrasingEpochs});
  const std::string flow = stage.Run("flow", {"train-flow", "--data", data, "--epochs", kFlowEpochs,
                                                  "--lr", kFlowLearningRate});

  const std::string dur_pred = stage.Run("dur_pred", {"predict", "--model", dur + "/model.ckpt", "--data", test});
  const std::string durp_pred =
      stage.Run("durp_pred", {"predict", "--model", durp + "/model.ckpt", "--phrasing",
                              phrasing + "/phrasing.ckpt", "--data", test});
  const std::string flow_pred = stage.Run(
      "flow_pred", {"predict", "--model", flow + "/model.ckpt", "--data", test, "--temperature", "0.7"});
  const auto dur_report =
      ReadReport(stage.Run("dur_eval", {"evaluate", "--predicted", dur_pred, "--target", test}));
  const auto durp_report =
      ReadReport(stage.Run("durp_eval", {"evaluate", "--predicted", durp_pred, "--target", test}));
  const auto flow_report =
      ReadReport(stage.Run("flow_eval", {"evaluate", "--predicted", flow_pred, "--target", test}));
  ModelComparison(dur_report, durp_report, flow_report);

  TemperatureTrend(stage.Run("sweep_temperature", {"sweep-temperature", "--model", flow + "/model.ckpt",
                                                   "--data", test, "--values", "0.3,0.5,0.7,1.0"}));
  const std::string rate = stage.Run("sweep_rate", {"sweep-rate", "--model", flow + "/model.ckpt", "--data",
                                                    test, "--nesting-values", ""});
  const std::string nesting =
      stage.Run("nesting", {"sweep-rate", "--model", flow + "/model.ckpt", "--data", test, "--kind", "rp",
                            "--prompts", std::to_string(kNestingPrompts)});
  RateControl(rate, nesting);

  Variability(flow + "/model.ckpt", test);
  Determinism(stage);

  std::size_t failed = 0;
  for (const auto& o : outcomes) failed += o.passed ? 0 : 1;
  std::printf("%zu of %zu criteria passed\n", outcomes.size() - failed, outcomes.size());
  return failed == 0 ? 0 : 1;
}
