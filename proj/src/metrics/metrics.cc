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

#include "cauliflow/metrics/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"

namespace cauliflow::metrics {

using corpus::TokenKind;
using corpus::Utterance;

namespace {

void CheckAligned(const std::vector<Utterance>& predicted,
                  const std::vector<Utterance>& target) {
  if (predicted.size() != target.size()) {
    throw CorpusError("predicted and target sets differ in size: " +
                      std::to_string(predicted.size()) + " vs " +
                      std::to_string(target.size()));
  }
  for (std::size_t u = 0; u < target.size(); ++u) {
    const Utterance& p = predicted[u];
    const Utterance& t = target[u];
    bool same = p.id == t.id && p.tokens.size() == t.tokens.size();
    for (std::size_t i = 0; same && i < t.tokens.size(); ++i) {
      same = p.tokens[i].kind == t.tokens[i].kind;
    }
    if (!same) {
      throw CorpusError("utterance " + t.id + ": prediction " + p.id +
                        " does not share its token structure");
    }
  }
}

void Count(bool predicted, bool target, MatchCounts* c) {
  if (predicted && target) ++c->tp;
  else if (predicted) ++c->fp;
  else if (target) ++c->fn;
}

Prf Percent(Prf p) { return {100.0 * p.precision, 100.0 * p.recall, 100.0 * p.f}; }

}  // namespace

Prf Fbeta(double tp, double fp, double fn, double beta) {
  Prf r;
  if (tp + fp > 0) r.precision = tp / (tp + fp);
  if (tp + fn > 0) r.recall = tp / (tp + fn);
  double b2 = beta * beta;
  double denom = b2 * r.precision + r.recall;
  if (denom > 0) r.f = (1.0 + b2) * r.precision * r.recall / denom;
  return r;
}

PauseEventSet PauseEvents(const std::vector<Utterance>& utterances, double threshold) {
  PauseEventSet events;
  for (std::size_t u = 0; u < utterances.size(); ++u) {
    const auto& tokens = utterances[u].tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].duration_frames < threshold) continue;
      if (tokens[i].kind == TokenKind::kPunctuation) {
        events.punctuation.emplace_back(u, i);
      } else if (tokens[i].kind == TokenKind::kWordBoundary) {
        events.word_boundary.emplace_back(u, i);
      }
    }
  }
  return events;
}

PauseMatch MatchPauses(const std::vector<Utterance>& predicted,
                       const std::vector<Utterance>& target, double threshold) {
  CheckAligned(predicted, target);
  PauseMatch m;
  for (std::size_t u = 0; u < target.size(); ++u) {
    for (std::size_t i = 0; i < target[u].tokens.size(); ++i) {
      const auto& t = target[u].tokens[i];
      if (!corpus::IsPauseCapable(t.kind)) continue;
      bool p_pause = predicted[u].tokens[i].duration_frames >= threshold;
      bool t_pause = t.duration_frames >= threshold;
      Count(p_pause, t_pause,
            t.kind == TokenKind::kPunctuation ? &m.punctuation : &m.word_boundary);
    }
  }
  return m;
}

std::vector<double> DurationHistogram(const std::vector<double>& durations) {
  std::vector<double> h(kHistogramFrames + 2, 0.0);
  if (durations.empty()) return h;
  for (double d : durations) {
    double r = std::round(d);
    std::size_t bin = r <= 0 ? 0
                      : r > static_cast<double>(kHistogramFrames)
                          ? kHistogramFrames + 1
                          : static_cast<std::size_t>(r);
    h[bin] += 1.0;
  }
  double n = static_cast<double>(durations.size());
  for (double& v : h) v /= n;
  return h;
}

double JsdFromHistograms(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ShapeError("histograms differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    double a = p[i] > 0 ? p[i] * std::log(p[i] / m) : 0.0;
    double b = q[i] > 0 ? q[i] * std::log(q[i] / m) : 0.0;
    // a + b is commutative, so the result is exactly symmetric.
    total += 0.5 * (a + b);
  }
  return std::max(0.0, total);
}

double Jsd(const std::vector<double>& predicted, const std::vector<double>& target) {
  if (predicted.empty() || target.empty()) {
    throw CorpusError("JSD needs at least one duration on each side");
  }
  return JsdFromHistograms(DurationHistogram(predicted), DurationHistogram(target));
}

std::vector<double> CollectDurations(const std::vector<Utterance>& utterances,
                                     TokenFilter filter) {
  std::vector<double> out;
  for (const Utterance& u : utterances) {
    for (const auto& t : u.tokens) {
      bool keep = filter == TokenFilter::kPauseCapable ? corpus::IsPauseCapable(t.kind)
                                                       : t.kind == TokenKind::kPhoneme;
      if (keep) out.push_back(t.duration_frames);
    }
  }
  return out;
}

double PauseRate(const std::vector<Utterance>& utterances, double threshold) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Utterance& u : utterances) {
    int s = u.CountPauses(threshold);
    if (s == 0) continue;
    sum += static_cast<double>(u.NumWords()) / s;
    ++n;
  }
  if (n == 0) throw CorpusError("pause rate is undefined: no utterance contains a pause");
  return sum / static_cast<double>(n);
}

double SpeechRate(const std::vector<Utterance>& utterances) {
  if (utterances.empty()) throw CorpusError("speech rate of an empty set");
  double sum = 0.0;
  for (const Utterance& u : utterances) {
    double seconds = u.DurationSeconds();
    if (!(seconds > 0)) throw CorpusError("utterance " + u.id + " has zero duration");
    sum += u.NumWords() / seconds;
  }
  return sum / static_cast<double>(utterances.size());
}

double PercentileL1(const std::vector<double>& predicted,
                    const std::vector<double>& target, double q) {
  if (predicted.size() != target.size()) {
    throw ShapeError("percentile error needs aligned sequences");
  }
  if (predicted.empty()) throw CorpusError("percentile error of an empty set");
  if (!(q > 0.0 && q <= 100.0)) throw ConfigError("percentile must lie in (0, 100]");
  std::vector<double> err(predicted.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(predicted[i] - target[i]);
  std::sort(err.begin(), err.end());
  const std::size_t n = err.size();
  std::size_t rank = static_cast<std::size_t>(std::floor(q * static_cast<double>(n) / 100.0)) + 1;
  return err[std::min(rank, n) - 1];
}

MetricReport Evaluate(const std::vector<Utterance>& predicted,
                      const std::vector<Utterance>& target, const ReportOptions& options) {
  CheckAligned(predicted, target);
  MetricReport r;
  r.jsd_pause = Jsd(CollectDurations(predicted, TokenFilter::kPauseCapable),
                    CollectDurations(target, TokenFilter::kPauseCapable));
  r.jsd_nonpause = Jsd(CollectDurations(predicted, TokenFilter::kPhoneme),
                       CollectDurations(target, TokenFilter::kPhoneme));
  PauseMatch m = MatchPauses(predicted, target, options.threshold);
  auto prf = [&](const MatchCounts& c) {
    return Percent(Fbeta(static_cast<double>(c.tp), static_cast<double>(c.fp),
                         static_cast<double>(c.fn), options.beta));
  };
  r.punctuation = prf(m.punctuation);
  r.word_boundary = prf(m.word_boundary);
  auto rate_or_nan = [&](const std::vector<Utterance>& u) {
    try {
      return PauseRate(u, options.threshold);
    } catch (const CorpusError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  r.pause_rate = rate_or_nan(predicted);
  r.target_pause_rate = rate_or_nan(target);
  r.speech_rate = SpeechRate(predicted);
  r.target_speech_rate = SpeechRate(target);
  std::vector<double> pd, td;
  for (std::size_t u = 0; u < target.size(); ++u) {
    for (std::size_t i = 0; i < target[u].tokens.size(); ++i) {
      pd.push_back(predicted[u].tokens[i].duration_frames);
      td.push_back(target[u].tokens[i].duration_frames);
    }
  }
  r.percentile = options.percentile;
  r.percentile_l1 = PercentileL1(pd, td, options.percentile);
  return r;
}

std::map<std::string, double> MetricReport::ToMap() const {
  return {{"jsd_pause", jsd_pause},
          {"jsd_nonpause", jsd_nonpause},
          {"punct_precision", punctuation.precision},
          {"punct_recall", punctuation.recall},
          {"punct_f", punctuation.f},
          {"word_precision", word_boundary.precision},
          {"word_recall", word_boundary.recall},
          {"word_f", word_boundary.f},
          {"pause_rate", pause_rate},
          {"target_pause_rate", target_pause_rate},
          {"speech_rate", speech_rate},
          {"target_speech_rate", target_speech_rate},
          {"percentile", percentile},
          {"percentile_l1", percentile_l1}};
}

std::string MetricReport::ToText() const {
  static const char* kOrder[] = {
      "jsd_pause",       "jsd_nonpause",  "punct_precision", "punct_recall",
      "punct_f",         "word_precision", "word_recall",    "word_f",
      "pause_rate",      "target_pause_rate", "speech_rate", "target_speech_rate",
      "percentile",      "percentile_l1"};
  auto values = ToMap();
  std::ostringstream os;
  for (const char* key : kOrder) os << key << ' ' << corpus::FormatDouble(values.at(key)) << '\n';
  return os.str();
}

std::string HistogramCsv(const std::vector<double>& predicted,
                         const std::vector<double>& target) {
  std::vector<double> p = DurationHistogram(predicted);
  std::vector<double> t = DurationHistogram(target);
  std::ostringstream os;
  os << "frames,predicted,target\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i <= kHistogramFrames) os << i;
    else os << '>' << kHistogramFrames;
    os << ',' << corpus::FormatDouble(p[i]) << ',' << corpus::FormatDouble(t[i]) << '\n';
  }
  return os.str();
}

}  // namespace cauliflow::metrics
