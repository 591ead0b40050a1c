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

// Small trainable models over flat parameter vectors, local SGD, and the
// datasets that feed them (synthetic Gaussian blobs and IDX archives).

#ifndef FEDCRYPT_LEARNER_H_
#define FEDCRYPT_LEARNER_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcrypt/random.h"

namespace fedcrypt {

struct Dataset {
  int num_features = 0;
  int num_classes = 0;
  std::vector<double> features;  // row-major, size() x num_features
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
  std::span<const double> row(size_t i) const {
    return {features.data() + i * num_features,
            static_cast<size_t>(num_features)};
  }
  absl::Status Validate() const;
};

// Concatenates shards that share feature and class counts.
Dataset Concatenate(std::span<const Dataset> parts);

enum class Architecture { kLogistic, kMlp };
std::string_view ArchitectureName(Architecture arch);
absl::StatusOr<Architecture> ParseArchitecture(std::string_view name);

inline constexpr int kDefaultHiddenUnits = 32;
inline constexpr int kDefaultBatchSize = 32;

// Parameter layout, flat:
//   logistic: W (C x F), b (C)
//   mlp:      W1 (H x F), b1 (H), W2 (C x H), b2 (C), tanh hidden units
struct ModelSpec {
  Architecture arch = Architecture::kLogistic;
  int num_features = 0;
  int num_classes = 0;
  int hidden = kDefaultHiddenUnits;

  size_t NumParameters() const;
  absl::Status Validate() const;
};

// Seeded uniform(-0.05, 0.05) initialisation.
std::vector<double> InitialParameters(const ModelSpec& spec,
                                      RandomStream& rng);

// Class scores (logits) for one example.
void Logits(const ModelSpec& spec, std::span<const double> params,
            std::span<const double> x, std::span<double> logits);

// Mean cross-entropy over the selected examples. When grad is nonempty it
// receives the gradient of that mean with respect to params.
double LossAndGradient(const ModelSpec& spec, std::span<const double> params,
                       const Dataset& data, std::span<const size_t> batch,
                       std::span<double> grad);

// Mean cross-entropy over the whole dataset.
double MeanLoss(const ModelSpec& spec, std::span<const double> params,
                const Dataset& data);

struct SgdOptions {
  int epochs = 1;
  double learning_rate = 0.1;
  int batch_size = kDefaultBatchSize;
};

struct LocalUpdate {
  std::vector<double> delta;  // theta_new - theta_old
  bool empty_shard = false;   // set when there was nothing to train on
};

// Mini-batch SGD from params on shard; the shard is reshuffled from rng at
// every epoch. params is left untouched.
LocalUpdate SgdLocal(const ModelSpec& spec, std::span<const double> params,
                     const Dataset& shard, const SgdOptions& options,
                     RandomStream& rng);

// Fraction of argmax-correct predictions. Errors on an empty dataset.
absl::StatusOr<double> Evaluate(const ModelSpec& spec,
                                std::span<const double> params,
                                const Dataset& data);

struct BlobOptions {
  int clients = 10;
  int per_client = 100;
  int classes = 4;
  int features = 20;
  double spread = 0.1;
  // 0 gives IID shards; 1 gives single-class shards (class = client % C).
  double skew = 0.0;
  int test_size = 1000;
};

struct BlobTask {
  std::vector<Dataset> clients;
  Dataset test;
};

// Gaussian class blobs with centres in [0.2, 0.8]^F, features clamped to
// [0, 1]. Deterministic given the stream.
absl::StatusOr<BlobTask> SynthBlobs(const BlobOptions& options,
                                    RandomStream& rng);

// IDX archives: 4-byte big-endian magic (0x00000803 images, 0x00000801
// labels), big-endian uint32 dimensions, then row-major unsigned bytes.
// Pixels are scaled to [0, 1]. Label values define the class count unless
// num_classes > 0.
absl::StatusOr<Dataset> LoadIdx(const std::string& images_path,
                                const std::string& labels_path,
                                int num_classes = 0);
absl::StatusOr<Dataset> ParseIdx(std::string_view images,
                                 std::string_view labels,
                                 int num_classes = 0);

// Splits a dataset into M contiguous, near-equal shards.
std::vector<Dataset> PartitionContiguous(const Dataset& data, int shards);

}  // namespace fedcrypt

#endif  // FEDCRYPT_LEARNER_H_
