// Copyright 2026 The fedcrypt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flat key=value run configuration, run manifests and metrics CSV.
//
// A config is one `key = value` pair per line; `#` starts a comment. Unknown
// keys, duplicate keys and malformed values are rejected with their line
// number. RenderRunConfig() writes every key explicitly, so a manifest is
// itself a valid config that reproduces the run.

#ifndef FEDCRYPT_CONFIG_H_
#define FEDCRYPT_CONFIG_H_

#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "absl/status/statusor.h"
#include "fedcrypt/fedcore.h"
#include "fedcrypt/learner.h"

namespace fedcrypt {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kSeedEnvVar = "FEDCRYPT_SEED";

enum class DataKind { kSynth, kIdx };

struct DataSource {
  DataKind kind = DataKind::kSynth;
  BlobOptions blobs;  // clients is taken from FedConfig::num_clients
  std::string idx_train_images;
  std::string idx_train_labels;
  std::string idx_test_images;
  std::string idx_test_labels;
  int idx_classes = 0;  // 0: infer from labels
};

struct RunConfig {
  FedConfig fed;
  DataSource data;
  bool insecure_test_mode = false;

  // Cross-field checks (key size policy, data source completeness). Shape
  // fields of fed.model are filled in by LoadRunData.
  absl::Status Validate() const;
};

absl::StatusOr<RunConfig> ParseRunConfig(std::string_view text);
absl::StatusOr<RunConfig> LoadRunConfig(const std::string& path);
std::string RenderRunConfig(const RunConfig& cfg);

// Builds the per-client shards and test set, and fixes the model's feature
// and class counts from the data.
absl::StatusOr<FederatedData> LoadRunData(RunConfig& cfg);

// Locale-independent shortest round-trip formatting; "inf" for infinity.
std::string FormatDouble(double v);

inline constexpr std::string_view kMetricsHeader =
    "round_index,train_accuracy,eval_accuracy,loss,epsilon,delta,wall_ms";

void WriteMetricsCsv(std::span<const RoundRecord> records, std::ostream& out);

// One parameter per line.
void WriteModel(std::span<const double> params, std::ostream& out);

}  // namespace fedcrypt

#endif  // FEDCRYPT_CONFIG_H_
