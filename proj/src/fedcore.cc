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

#include "fedcrypt/fedcore.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "absl/strings/str_cat.h"

namespace fedcrypt {
namespace {

absl::Status FirstError(std::span<const absl::Status> statuses) {
  for (const absl::Status& s : statuses) {
    if (!s.ok()) return s;
  }
  return absl::OkStatus();
}

void AddInPlace(std::span<double> model, std::span<const double> update) {
  for (size_t i = 0; i < model.size(); ++i) model[i] += update[i];
}

// Plaintext average of real-valued updates, in participant order.
std::vector<double> AveragePlain(std::span<const std::vector<double>> updates) {
  std::vector<double> avg(updates.front().size(), 0.0);
  for (const auto& u : updates) {
    for (size_t i = 0; i < avg.size(); ++i) avg[i] += u[i];
  }
  const double k = static_cast<double>(updates.size());
  for (double& v : avg) v /= k;
  return avg;
}

}  // namespace

absl::Status FedConfig::Validate() const {
  if (num_clients < 1) return absl::InvalidArgumentError("M must be >= 1");
  if (participants < 1 || participants > num_clients) {
    return absl::InvalidArgumentError(absl::StrCat(
        "K must satisfy 1 <= K <= M (K=", participants, ", M=", num_clients,
        ")"));
  }
  if (rounds < 0) return absl::InvalidArgumentError("T must be >= 0");
  if (!(clip_s > 0.0)) return absl::InvalidArgumentError("S must be > 0");
  if (protection.noise && !(sigma > 0.0)) {
    return absl::InvalidArgumentError("sigma must be > 0 when noise is on");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must lie in (0, 1)");
  }
  if (max_moment_order < 1) {
    return absl::InvalidArgumentError("max moment order must be >= 1");
  }
  if (local_epochs < 1) {
    return absl::InvalidArgumentError("local_epochs must be >= 1");
  }
  if (!(learning_rate >= 0.0)) {
    return absl::InvalidArgumentError("learning_rate must be >= 0");
  }
  if (batch_size < 0) return absl::InvalidArgumentError("batch_size < 0");
  if (absl::Status s = model.Validate(); !s.ok()) return s;
  if (protection.quantize) {
    if (!protection.clip) {
      return absl::InvalidArgumentError(
          "quantisation needs clipping: the offset is derived from S");
    }
    if (absl::Status s = Quant().Validate(); !s.ok()) return s;
    if (guard_bits < RequiredGuardBits(participants)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "guard_bits=", guard_bits, " too small for K=", participants));
    }
    if (key_bits < kMinKeyBits) {
      return absl::InvalidArgumentError(
          absl::StrCat("key_bits must be >= ", kMinKeyBits));
    }
  }
  return absl::OkStatus();
}

PrivacyParams FedConfig::Privacy() const {
  PrivacyParams p;
  p.sigma = sigma;
  p.clip_s = clip_s;
  p.q = static_cast<double>(participants) / num_clients;
  p.rounds = std::max(rounds, 1);
  p.delta = delta;
  p.moment_orders.resize(max_moment_order);
  std::iota(p.moment_orders.begin(), p.moment_orders.end(), 1);
  return p;
}

double FedConfig::SigmaIndividual() const {
  return protection.noise ? PerParticipantStd(sigma, participants) : 0.0;
}

QuantConfig FedConfig::Quant() const {
  QuantConfig q;
  q.scale = quant_scale;
  q.bits = plaintext_bits;
  q.offset_steps = -OffsetSteps(clip_s, SigmaIndividual(),
                                DeclaredBound(sampler), quant_scale);
  return q;
}

absl::StatusOr<CiphertextBundle> Server::Aggregate(Execution exec) {
  absl::StatusOr<CiphertextBundle> out =
      ServerAggregate(*public_ops_, received_, exec);
  received_.clear();
  return out;
}

absl::StatusOr<std::vector<int>> SelectParticipants(uint64_t master_seed,
                                                    int round, int num_clients,
                                                    int participants) {
  if (participants < 0 || participants > num_clients) {
    return absl::InvalidArgumentError(absl::StrCat(
        "cannot select K=", participants, " of M=", num_clients, " clients"));
  }
  RandomStream rng = RandomStream::Derive(
      master_seed, StreamPurpose::kSelection, static_cast<uint64_t>(round), 0);
  std::vector<int> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first K positions are a uniform K-subset.
  for (int i = 0; i < participants; ++i) {
    const uint64_t span = static_cast<uint64_t>(num_clients - i);
    std::uniform_int_distribution<uint64_t> pick(0, span - 1);
    std::swap(ids[i], ids[i + pick(rng)]);
  }
  ids.resize(participants);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> ClipUpdate(std::span<const double> update, double clip_s) {
  double sq = 0.0;
  for (double v : update) sq += v * v;
  const double norm = std::sqrt(sq);
  std::vector<double> out(update.begin(), update.end());
  if (norm > clip_s) {
    const double factor = clip_s / norm;
    for (double& v : out) v *= factor;
  }
  return out;
}

absl::StatusOr<std::vector<double>> NoisedUpdate(const ClientState& client,
                                                 const FedConfig& cfg,
                                                 int round) {
  if (client.shard == nullptr) {
    return absl::FailedPreconditionError("client has no data shard");
  }
  const uint64_t r = static_cast<uint64_t>(round);
  const uint64_t id = static_cast<uint64_t>(client.id);
  RandomStream sgd_rng = RandomStream::Derive(
      cfg.master_seed, StreamPurpose::kLocalSgd, r, id);
  LocalUpdate local =
      SgdLocal(cfg.model, client.model, *client.shard,
               SgdOptions{cfg.local_epochs, cfg.learning_rate, cfg.batch_size},
               sgd_rng);
  std::vector<double> u = cfg.protection.clip
                              ? ClipUpdate(local.delta, cfg.clip_s)
                              : std::move(local.delta);
  if (cfg.protection.noise) {
    RandomStream noise_rng =
        RandomStream::Derive(cfg.master_seed, StreamPurpose::kNoise, r, id);
    const GaussianSampler sampler(cfg.sampler);
    const double std = cfg.SigmaIndividual();
    for (double& v : u) v = sampler.Sample(noise_rng, v, std);
  }
  return u;
}

absl::StatusOr<SlotLayout> LayoutFor(const FedConfig& cfg,
                                     const PublicOps& ops) {
  return MakeSlotLayout(ops.plaintext_bits(), cfg.plaintext_bits,
                        cfg.guard_bits, cfg.participants,
                        cfg.model.NumParameters());
}

absl::StatusOr<CiphertextBundle> ClientRound(const ClientState& client,
                                             const FedConfig& cfg, int round,
                                             const PublicOps& ops,
                                             const SlotLayout& layout) {
  absl::StatusOr<std::vector<double>> u = NoisedUpdate(client, cfg, round);
  if (!u.ok()) return u.status();
  const uint64_t r = static_cast<uint64_t>(round);
  const uint64_t id = static_cast<uint64_t>(client.id);
  RandomStream quant_rng =
      RandomStream::Derive(cfg.master_seed, StreamPurpose::kQuantize, r, id);
  // Counts come back already reduced mod 2^b.
  absl::StatusOr<std::vector<uint64_t>> counts =
      PoissonQuantizeVector(*u, cfg.Quant(), quant_rng);
  if (!counts.ok()) return counts.status();
  RandomStream enc_rng =
      RandomStream::Derive(cfg.master_seed, StreamPurpose::kEncrypt, r, id);
  return EncryptCounts(ops, *counts, layout, cfg.participants, enc_rng);
}

absl::StatusOr<std::vector<CiphertextBundle>> RunClientRounds(
    std::span<const ClientState> clients, std::span<const int> participants,
    const FedConfig& cfg, int round, const PublicOps& ops,
    const SlotLayout& layout, Execution exec) {
  const int k = static_cast<int>(participants.size());
  std::vector<CiphertextBundle> bundles(k);
  std::vector<absl::Status> statuses(k);
  auto one = [&](int i) {
    absl::StatusOr<CiphertextBundle> b =
        ClientRound(clients[participants[i]], cfg, round, ops, layout);
    if (b.ok()) {
      bundles[i] = *std::move(b);
    } else {
      statuses[i] = b.status();
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < k; ++i) one(i);
  } else {
    for (int i = 0; i < k; ++i) one(i);
  }
  if (absl::Status s = FirstError(statuses); !s.ok()) return s;
  return bundles;
}

absl::StatusOr<CiphertextBundle> ServerAggregate(
    const PublicOps& ops, std::span<const CiphertextBundle> bundles,
    Execution exec) {
  if (bundles.empty()) {
    return absl::InvalidArgumentError("nothing to aggregate");
  }
  const SlotLayout& layout = bundles.front().layout;
  for (const CiphertextBundle& b : bundles) {
    if (!(b.layout == layout) ||
        b.ciphertexts.size() != layout.num_plaintexts()) {
      return absl::InvalidArgumentError("bundles have mismatched layouts");
    }
  }
  const size_t n = layout.num_plaintexts();
  CiphertextBundle out;
  out.layout = layout;

  if (exec == Execution::kSerial) {
    out.ciphertexts = bundles.front().ciphertexts;
    for (size_t b = 1; b < bundles.size(); ++b) {
      for (size_t j = 0; j < n; ++j) {
        const Ciphertext pair[2] = {out.ciphertexts[j],
                                    bundles[b].ciphertexts[j]};
        absl::StatusOr<Ciphertext> sum = ops.Add(pair);
        if (!sum.ok()) return sum.status();
        out.ciphertexts[j] = *std::move(sum);
      }
    }
    return out;
  }

  out.ciphertexts.resize(n);
  std::vector<absl::Status> statuses(n);
#pragma omp parallel for schedule(dynamic)
  for (size_t j = 0; j < n; ++j) {
    std::vector<Ciphertext> column;
    column.reserve(bundles.size());
    for (const CiphertextBundle& b : bundles) column.push_back(b.ciphertexts[j]);
    absl::StatusOr<Ciphertext> sum = ops.Add(column);
    if (sum.ok()) {
      out.ciphertexts[j] = *std::move(sum);
    } else {
      statuses[j] = sum.status();
    }
  }
  if (absl::Status s = FirstError(statuses); !s.ok()) return s;
  return out;
}

absl::StatusOr<std::vector<double>> DecodeAggregate(
    const SecretOps& ops, const CiphertextBundle& aggregate,
    const QuantConfig& quant, int participants) {
  absl::StatusOr<std::vector<uint64_t>> sums = DecryptCounts(ops, aggregate);
  if (!sums.ok()) return sums.status();
  const std::vector<uint64_t> reduced = ModReduce(
      std::span<const uint64_t>(*sums), quant.modulus());
  return DequantizeAggregate(reduced, quant, participants);
}

absl::Status ApplyRound(std::span<ClientState> clients,
                        const CiphertextBundle& aggregate,
                        const SecretOps& ops, const FedConfig& cfg) {
  absl::StatusOr<std::vector<double>> avg =
      DecodeAggregate(ops, aggregate, cfg.Quant(), cfg.participants);
  if (!avg.ok()) return avg.status();
  for (ClientState& c : clients) {
    if (c.model.size() != avg->size()) {
      return absl::FailedPreconditionError("model size mismatch");
    }
    AddInPlace(c.model, *avg);
  }
  return absl::OkStatus();
}

absl::StatusOr<TrainingResult> RunTraining(const FedConfig& cfg,
                                           const FederatedData& data,
                                           Execution exec) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  if (static_cast<int>(data.clients.size()) != cfg.num_clients) {
    return absl::InvalidArgumentError(absl::StrCat(
        "expected ", cfg.num_clients, " client shards, got ",
        data.clients.size()));
  }
  for (const Dataset& d : data.clients) {
    if (d.num_features != cfg.model.num_features ||
        d.num_classes > cfg.model.num_classes) {
      return absl::InvalidArgumentError(
          "client shard does not match the model shape");
    }
  }
  if (data.test.size() == 0) {
    return absl::InvalidArgumentError("evaluation set is empty");
  }

  // Every client draws the same initialisation from the shared seed.
  std::vector<ClientState> clients(cfg.num_clients);
  for (int k = 0; k < cfg.num_clients; ++k) {
    RandomStream init_rng =
        RandomStream::Derive(cfg.master_seed, StreamPurpose::kInit, 0, 0);
    clients[k] = ClientState{k, &data.clients[k],
                             InitialParameters(cfg.model, init_rng)};
  }

  TrainingResult result;
  if (cfg.rounds == 0) {
    result.final_model = clients.front().model;
    return result;
  }

  std::optional<MomentProfile> per_round;
  if (cfg.protection.noise) {
    absl::StatusOr<MomentProfile> p = exec == Execution::kParallel
                                          ? PerRoundProfileParallel(cfg.Privacy())
                                          : PerRoundProfile(cfg.Privacy());
    if (!p.ok()) return p.status();
    per_round = *std::move(p);
  }

  Backend backend;
  SlotLayout layout;
  if (cfg.protection.quantize) {
    RandomStream key_rng =
        RandomStream::Derive(cfg.master_seed, StreamPurpose::kKeygen, 0, 0);
    absl::StatusOr<Backend> b = MakeBackend(cfg.backend, cfg.key_bits, key_rng);
    if (!b.ok()) return b.status();
    backend = *std::move(b);
    absl::StatusOr<SlotLayout> l = LayoutFor(cfg, *backend.public_ops);
    if (!l.ok()) return l.status();
    layout = *l;
  }

  const Dataset train = Concatenate(data.clients);
  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto start = std::chrono::steady_clock::now();
    absl::StatusOr<std::vector<int>> chosen = SelectParticipants(
        cfg.master_seed, round, cfg.num_clients, cfg.participants);
    if (!chosen.ok()) return chosen.status();

    if (cfg.protection.quantize) {
      Server server(backend.public_ops);
      absl::StatusOr<std::vector<CiphertextBundle>> bundles = RunClientRounds(
          clients, *chosen, cfg, round, *backend.public_ops, layout, exec);
      if (!bundles.ok()) return bundles.status();
      for (CiphertextBundle& b : *bundles) server.Receive(std::move(b));
      absl::StatusOr<CiphertextBundle> aggregate = server.Aggregate(exec);
      if (!aggregate.ok()) return aggregate.status();
      if (absl::Status s =
              ApplyRound(clients, *aggregate, *backend.secret_ops, cfg);
          !s.ok()) {
        return s;
      }
      result.last_aggregate = *std::move(aggregate);
    } else {
      std::vector<std::vector<double>> updates(chosen->size());
      std::vector<absl::Status> statuses(chosen->size());
      const int k = static_cast<int>(chosen->size());
#pragma omp parallel for schedule(dynamic) if (exec == Execution::kParallel)
      for (int i = 0; i < k; ++i) {
        absl::StatusOr<std::vector<double>> u =
            NoisedUpdate(clients[(*chosen)[i]], cfg, round);
        if (u.ok()) {
          updates[i] = *std::move(u);
        } else {
          statuses[i] = u.status();
        }
      }
      if (absl::Status s = FirstError(statuses); !s.ok()) return s;
      const std::vector<double> avg = AveragePlain(updates);
      for (ClientState& c : clients) AddInPlace(c.model, avg);
    }

    const std::vector<double>& model = clients.front().model;
    RoundRecord rec;
    rec.round = round;
    absl::StatusOr<double> train_acc = Evaluate(cfg.model, model, train);
    if (!train_acc.ok()) return train_acc.status();
    absl::StatusOr<double> eval_acc = Evaluate(cfg.model, model, data.test);
    if (!eval_acc.ok()) return eval_acc.status();
    rec.train_accuracy = *train_acc;
    rec.eval_accuracy = *eval_acc;
    rec.loss = MeanLoss(cfg.model, model, train);
    rec.delta = cfg.delta;
    if (per_round.has_value()) {
      absl::StatusOr<MomentProfile> total = Compose(*per_round, round);
      if (!total.ok()) return total.status();
      rec.epsilon = EpsilonForDelta(*total, cfg.delta);
    } else {
      rec.epsilon = std::numeric_limits<double>::infinity();
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    result.records.push_back(rec);
  }
  result.final_model = clients.front().model;
  return result;
}

}  // namespace fedcrypt
