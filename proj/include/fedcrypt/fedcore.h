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

// Federated averaging with distributed noise and encrypted aggregation.
//
// One round:
//   1. the server draws K of the M clients without replacement;
//   2. each participant runs local SGD and transforms its update
//        clip (L2, bound S) -> Gaussian noise (std sigma / sqrt(K))
//        -> Poisson quantisation (offsetless counts) -> mod 2^b
//        -> slot packing -> encryption;
//   3. the server multiplies the ciphertexts slot-wise (it holds only the
//      public key);
//   4. the aggregate goes to every client, which decrypts, reduces each slot
//      mod 2^b, computes (s * count) / K + mu and adds the result to its model.
//
// Every random draw comes from a stream derived from (seed, purpose, round,
// client), so runs are reproducible and client work can run in any order.

#ifndef FEDCRYPT_FEDCORE_H_
#define FEDCRYPT_FEDCORE_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcrypt/accountant.h"
#include "fedcrypt/he.h"
#include "fedcrypt/learner.h"
#include "fedcrypt/quantizer.h"
#include "fedcrypt/sampling.h"

namespace fedcrypt {

// Which parts of the client transform are active. Quantisation implies
// encrypted (or mock-encrypted) aggregation; without it, updates are
// averaged in plaintext, which is only meant for baselines.
struct ProtectionFlags {
  bool clip = true;
  bool noise = true;
  bool quantize = true;
};

struct FedConfig {
  int num_clients = 50;    // M
  int participants = 10;   // K
  int rounds = 30;         // T
  double sigma = 1.0;      // std of the aggregated noise
  double clip_s = 1.0;     // S
  double delta = 1e-5;
  int max_moment_order = kDefaultMaxMomentOrder;
  double quant_scale = kDefaultQuantScale;
  int plaintext_bits = kDefaultPlaintextBits;
  int guard_bits = kDefaultGuardBits;
  int local_epochs = 1;
  double learning_rate = 0.1;
  int batch_size = kDefaultBatchSize;
  uint64_t master_seed = 1;
  BackendKind backend = BackendKind::kPaillier;
  int key_bits = kDefaultKeyBits;
  GaussianAlgorithm sampler = GaussianAlgorithm::kZiggurat;
  ProtectionFlags protection;
  ModelSpec model;

  absl::Status Validate() const;
  // q = K / M.
  PrivacyParams Privacy() const;
  // Offset from the clipping bound and the declared sampler bound.
  QuantConfig Quant() const;
  double SigmaIndividual() const;
};

enum class Execution { kSerial, kParallel };

struct ClientState {
  int id = 0;
  const Dataset* shard = nullptr;
  std::vector<double> model;
};

// Holds what an honest-but-curious server may see: the public operations
// and the bundles it receives. It has no decryption capability.
class Server {
 public:
  explicit Server(std::shared_ptr<const PublicOps> public_ops)
      : public_ops_(std::move(public_ops)) {}

  void Receive(CiphertextBundle bundle) {
    received_.push_back(std::move(bundle));
  }
  size_t pending() const { return received_.size(); }
  // Slot-wise homomorphic sum of everything received; clears the inbox.
  absl::StatusOr<CiphertextBundle> Aggregate(Execution exec);

 private:
  std::shared_ptr<const PublicOps> public_ops_;
  std::vector<CiphertextBundle> received_;
};

// Uniform K-subset of [0, M), sorted. Deterministic in (seed, round).
absl::StatusOr<std::vector<int>> SelectParticipants(uint64_t master_seed,
                                                    int round, int num_clients,
                                                    int participants);

// u * min(1, S / ||u||_2).
std::vector<double> ClipUpdate(std::span<const double> update, double clip_s);

// Local SGD, then clip and noise as enabled: the real-valued message before
// quantisation.
absl::StatusOr<std::vector<double>> NoisedUpdate(const ClientState& client,
                                                 const FedConfig& cfg,
                                                 int round);

// Layout for the configured backend and model size.
absl::StatusOr<SlotLayout> LayoutFor(const FedConfig& cfg,
                                     const PublicOps& ops);

// Full client pipeline through encryption.
absl::StatusOr<CiphertextBundle> ClientRound(const ClientState& client,
                                             const FedConfig& cfg, int round,
                                             const PublicOps& ops,
                                             const SlotLayout& layout);

// Client pipeline for all participants; results in participant order.
absl::StatusOr<std::vector<CiphertextBundle>> RunClientRounds(
    std::span<const ClientState> clients, std::span<const int> participants,
    const FedConfig& cfg, int round, const PublicOps& ops,
    const SlotLayout& layout, Execution exec);

// Sums bundles slot-wise. The serial path adds bundle by bundle; the
// parallel path splits the work by ciphertext index.
absl::StatusOr<CiphertextBundle> ServerAggregate(
    const PublicOps& ops, std::span<const CiphertextBundle> bundles,
    Execution exec = Execution::kSerial);

// Client side: decrypt, unpack, reduce mod 2^b, dequantise.
absl::StatusOr<std::vector<double>> DecodeAggregate(
    const SecretOps& ops, const CiphertextBundle& aggregate,
    const QuantConfig& quant, int participants);

// Decodes the aggregate once and adds the averaged update to every
// client's model.
absl::Status ApplyRound(std::span<ClientState> clients,
                        const CiphertextBundle& aggregate,
                        const SecretOps& ops, const FedConfig& cfg);

struct RoundRecord {
  int round = 0;  // 1-based
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
  double loss = 0.0;
  double epsilon = 0.0;  // +inf when noise is disabled
  double delta = 0.0;
  double wall_ms = 0.0;
};

struct FederatedData {
  std::vector<Dataset> clients;  // one shard per client, size M
  Dataset test;
};

struct TrainingResult {
  std::vector<RoundRecord> records;
  std::vector<double> final_model;
  CiphertextBundle last_aggregate;  // empty when no encrypted round ran
};

absl::StatusOr<TrainingResult> RunTraining(const FedConfig& cfg,
                                           const FederatedData& data,
                                           Execution exec = Execution::kParallel);

}  // namespace fedcrypt

#endif  // FEDCRYPT_FEDCORE_H_
