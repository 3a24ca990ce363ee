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

#ifndef CAULIFLOW_CLI_COMMANDS_H_
#define CAULIFLOW_CLI_COMMANDS_H_

#include <cstdint>
#include <string>

namespace cauliflow::cli {

struct GenDataOptions {
  std::string spec;
  std::size_t train = 2000;
  std::size_t dev = 200;
  std::size_t test = 200;
};

struct DurOptions {
  std::string data;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  double clip_norm = 5.0;
  std::size_t embed_dim = 24;
  std::size_t conv_layers = 3;
  std::string dilations = "1,2,4,8";
  double pause_threshold = 4.0;
};

struct PhrasingOptions {
  std::string data;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  double clip_norm = 5.0;
  std::size_t hidden = 32;
  std::string dilations = "1,2";
  double pause_threshold = 4.0;
  double beta = 0.25;
};

struct FlowOptions {
  std::string data;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  std::size_t steps = 6;
  std::size_t group = 4;
  std::size_t cond_channels = 16;
  std::size_t hidden = 32;
  std::size_t embed_dim = 24;
  std::size_t conv_layers = 3;
  std::string dilations = "1,2,4,8";
};

struct PredictOptions {
  std::string model;
  std::string phrasing;
  std::string data;
  double temperature = 0.7;
  std::string rs;
  std::string rp;
};

struct EvaluateOptions {
  std::string predicted;
  std::string target;
  double pause_threshold = 4.0;
  double beta = 0.25;
  double percentile = 99.0;
};

struct TemperatureSweepOptions {
  std::string model;
  std::string data;
  std::string values = "0,0.3,0.5,0.7,1";
  double pause_threshold = 4.0;
  double percentile = 99.0;
};

struct RateSweepOptions {
  std::string model;
  std::string data;
  std::string kind = "both";
  std::string rs_values = "-0.6,-0.4,-0.2,0,0.2,0.4,0.6";
  std::string rp_values = "-6,-4,-2,0,2,4,6";
  std::string nesting_values = "10,6,3,0,-3,-6";
  double temperature = 0.7;
  std::size_t prompts = 0;
  std::string spec;
  double pause_threshold = 4.0;
};

// Each command writes its artifacts into `out` and returns an exit code.
int GenData(const GenDataOptions& o, uint64_t seed, const std::string& out);
int TrainDur(const DurOptions& o, bool pause_input, uint64_t seed, const std::string& out);
int TrainPhrasing(const PhrasingOptions& o, uint64_t seed, const std::string& out);
int TrainFlow(const FlowOptions& o, uint64_t seed, const std::string& out);
int Predict(const PredictOptions& o, uint64_t seed, const std::string& out);
int Evaluate(const EvaluateOptions& o, const std::string& out);
int SweepTemperature(const TemperatureSweepOptions& o, uint64_t seed, const std::string& out);
int SweepRate(const RateSweepOptions& o, uint64_t seed, const std::string& out);
// `out` may be empty.
int SelfTest(const std::string& out);

}  // namespace cauliflow::cli

#endif  // CAULIFLOW_CLI_COMMANDS_H_
