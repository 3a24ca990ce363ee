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

#include "cauliflow/metrics/sweeps.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "cauliflow/common/error.h"
#include "cauliflow/corpus/io.h"
#include "cauliflow/metrics/metrics.h"

namespace cauliflow::metrics {

using corpus::FormatDouble;
using corpus::Utterance;

namespace {

double MeasureRate(const std::vector<Utterance>& utts, RateKind kind, double threshold) {
  return kind == RateKind::kSpeech ? SpeechRate(utts) : PauseRate(utts, threshold);
}

std::set<std::size_t> PausePositions(const Utterance& u, double threshold) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    if (corpus::IsPauseCapable(u.tokens[i].kind) && u.tokens[i].duration_frames >= threshold) {
      out.insert(i);
    }
  }
  return out;
}

}  // namespace

double Pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ShapeError("correlation needs two aligned series of length >= 2");
  }
  double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double RateResponse::Correlation() const {
  std::vector<double> req, got;
  for (const RatePoint& p : points) {
    req.push_back(p.requested);
    got.push_back(p.delta);
  }
  return Pearson(req, got);
}

double RateResponse::MeanAbsRequested() const {
  double s = 0;
  for (const RatePoint& p : points) s += std::abs(p.requested);
  return points.empty() ? 0.0 : s / static_cast<double>(points.size());
}

double RateResponse::MeanAbsDelta() const {
  double s = 0;
  for (const RatePoint& p : points) s += std::abs(p.delta);
  return points.empty() ? 0.0 : s / static_cast<double>(points.size());
}

std::string RateResponse::ToCsv() const {
  std::ostringstream os;
  os << (kind == RateKind::kSpeech ? "requested_rs" : "requested_rp")
     << ",measured_rate,delta\n";
  for (const RatePoint& p : points) {
    os << FormatDouble(p.requested) << ',' << FormatDouble(p.measured_rate) << ','
       << FormatDouble(p.delta) << '\n';
  }
  return os.str();
}

RateResponse MeasureRateResponse(const Sampler& sampler,
                                 const std::vector<Utterance>& prompts, RateKind kind,
                                 const std::vector<double>& values, double temperature,
                                 uint64_t seed, double threshold) {
  RateResponse r;
  r.kind = kind;
  RateOverrides none{0.0, 0.0};
  r.baseline_rate = MeasureRate(sampler(prompts, none, temperature, seed), kind, threshold);
  for (double v : values) {
    RateOverrides o = none;
    if (kind == RateKind::kSpeech) o.rs = v;
    else o.rp = v;
    double rate = MeasureRate(sampler(prompts, o, temperature, seed), kind, threshold);
    r.points.push_back({v, rate, rate - r.baseline_rate});
  }
  return r;
}

double NestingReport::MinContainment() const {
  if (containment.empty()) return 1.0;
  return *std::min_element(containment.begin(), containment.end());
}

double NestingReport::FinalIncrement() const {
  if (mean_pauses.size() < 2) return 0.0;
  return mean_pauses.back() - mean_pauses[mean_pauses.size() - 2];
}

std::string NestingReport::ToCsv() const {
  std::ostringstream os;
  os << "rp,mean_pauses,containment_from_previous\n";
  for (std::size_t i = 0; i < rp_values.size(); ++i) {
    os << FormatDouble(rp_values[i]) << ',' << FormatDouble(mean_pauses[i]) << ',';
    if (i > 0) os << FormatDouble(containment[i - 1]);
    os << '\n';
  }
  return os.str();
}

NestingReport MeasurePauseNesting(const Sampler& sampler,
                                  const std::vector<Utterance>& prompts,
                                  const std::vector<double>& rp_values, double temperature,
                                  uint64_t seed,
                                  const std::vector<std::set<std::size_t>>& sites,
                                  const std::vector<std::vector<double>>& suitability,
                                  double threshold) {
  if (!sites.empty() && sites.size() != prompts.size()) {
    throw ShapeError("one site set per prompt expected");
  }
  if (!suitability.empty() && suitability.size() != prompts.size()) {
    throw ShapeError("one suitability vector per prompt expected");
  }
  NestingReport report;
  report.rp_values = rp_values;
  std::vector<std::vector<std::set<std::size_t>>> history;  // [step][prompt]
  for (double rp : rp_values) {
    RateOverrides o{0.0, rp};
    std::vector<Utterance> out = sampler(prompts, o, temperature, seed);
    std::vector<std::set<std::size_t>> sets;
    double total = 0;
    for (const Utterance& u : out) {
      sets.push_back(PausePositions(u, threshold));
      total += static_cast<double>(sets.back().size());
    }
    report.mean_pauses.push_back(prompts.empty() ? 0.0 : total / static_cast<double>(prompts.size()));
    history.push_back(std::move(sets));
  }
  for (std::size_t s = 1; s < history.size(); ++s) {
    std::size_t contained = 0;
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      const auto& prev = history[s - 1][p];
      const auto& cur = history[s][p];
      if (std::includes(cur.begin(), cur.end(), prev.begin(), prev.end())) ++contained;
    }
    report.containment.push_back(
        prompts.empty() ? 1.0 : static_cast<double>(contained) / static_cast<double>(prompts.size()));
  }
  if (!sites.empty() && !history.empty()) {
    std::size_t inside = 0, total = 0;
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      for (std::size_t pos : history.back()[p]) {
        ++total;
        if (sites[p].count(pos)) ++inside;
      }
    }
    report.within_sites = total == 0 ? 1.0 : static_cast<double>(inside) / static_cast<double>(total);
  }
  if (!suitability.empty() && !history.empty()) {
    std::size_t agree = 0;
    const std::size_t never = std::numeric_limits<std::size_t>::max();
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      std::map<std::size_t, std::size_t> first;  // token -> first step pausing
      for (std::size_t s = 0; s < history.size(); ++s) {
        for (std::size_t pos : history[s][p]) first.emplace(pos, s);
      }
      const auto& score = suitability[p];
      bool ok = true;
      for (std::size_t a = 0; ok && a < score.size(); ++a) {
        for (std::size_t b = 0; ok && b < score.size(); ++b) {
          if (!(score[a] > score[b])) continue;
          std::size_t fa = first.count(a) ? first[a] : never;
          std::size_t fb = first.count(b) ? first[b] : never;
          if (fa > fb) ok = false;
        }
      }
      if (ok) ++agree;
    }
    report.order_agreement =
        prompts.empty() ? 1.0 : static_cast<double>(agree) / static_cast<double>(prompts.size());
  }
  return report;
}

}  // namespace cauliflow::metrics
