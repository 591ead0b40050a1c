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

#include "fedcrypt/learner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "fedcrypt/sampling.h"

namespace fedcrypt {
namespace {

constexpr uint32_t kIdxImageMagic = 0x00000803;
constexpr uint32_t kIdxLabelMagic = 0x00000801;

// Softmax in place; returns log-sum-exp of the input.
double Softmax(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return m + std::log(sum);
}

// Forward pass; hidden receives tanh activations for the MLP.
void Forward(const ModelSpec& spec, std::span<const double> p,
             std::span<const double> x, std::span<double> hidden,
             std::span<double> logits) {
  const int f = spec.num_features;
  const int c = spec.num_classes;
  if (spec.arch == Architecture::kLogistic) {
    const double* w = p.data();
    const double* b = p.data() + static_cast<size_t>(c) * f;
    for (int k = 0; k < c; ++k) {
      double acc = b[k];
      for (int j = 0; j < f; ++j) acc += w[k * f + j] * x[j];
      logits[k] = acc;
    }
    return;
  }
  const int h = spec.hidden;
  const double* w1 = p.data();
  const double* b1 = w1 + static_cast<size_t>(h) * f;
  const double* w2 = b1 + h;
  const double* b2 = w2 + static_cast<size_t>(c) * h;
  for (int u = 0; u < h; ++u) {
    double acc = b1[u];
    for (int j = 0; j < f; ++j) acc += w1[u * f + j] * x[j];
    hidden[u] = std::tanh(acc);
  }
  for (int k = 0; k < c; ++k) {
    double acc = b2[k];
    for (int u = 0; u < h; ++u) acc += w2[k * h + u] * hidden[u];
    logits[k] = acc;
  }
}

uint32_t ReadBigEndian32(std::string_view bytes, size_t offset) {
  uint32_t v = 0;
  for (size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<uint8_t>(bytes[offset + i]);
  }
  return v;
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct IdxHeader {
  std::vector<uint32_t> dims;
  size_t payload_offset = 0;
};

absl::StatusOr<IdxHeader> ParseIdxHeader(std::string_view bytes,
                                         uint32_t magic, int rank,
                                         const char* what) {
  if (bytes.size() < 4) {
    return absl::OutOfRangeError(
        absl::StrCat("truncated IDX ", what, " file: no magic number"));
  }
  const uint32_t got = ReadBigEndian32(bytes, 0);
  if (got != magic) {
    return absl::InvalidArgumentError(absl::StrCat(
        "bad IDX ", what, " magic 0x", absl::Hex(got, absl::kZeroPad8),
        ", expected 0x", absl::Hex(magic, absl::kZeroPad8)));
  }
  IdxHeader header;
  header.payload_offset = 4 + 4 * static_cast<size_t>(rank);
  if (bytes.size() < header.payload_offset) {
    return absl::OutOfRangeError(
        absl::StrCat("truncated IDX ", what, " file: incomplete header"));
  }
  size_t expected = 1;
  for (int i = 0; i < rank; ++i) {
    header.dims.push_back(ReadBigEndian32(bytes, 4 + 4 * i));
    expected *= header.dims.back();
  }
  if (bytes.size() < header.payload_offset + expected) {
    return absl::OutOfRangeError(absl::StrCat(
        "truncated IDX ", what, " file: expected ", expected,
        " payload bytes, found ", bytes.size() - header.payload_offset));
  }
  return header;
}

}  // namespace

absl::Status Dataset::Validate() const {
  if (num_features < 1 || num_classes < 1) {
    return absl::InvalidArgumentError("dataset needs features and classes");
  }
  if (features.size() != labels.size() * num_features) {
    return absl::InvalidArgumentError("feature/label lengths disagree");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      return absl::InvalidArgumentError(
          absl::StrCat("label ", y, " outside [0, ", num_classes, ")"));
    }
  }
  return absl::OkStatus();
}

Dataset Concatenate(std::span<const Dataset> parts) {
  Dataset out;
  if (parts.empty()) return out;
  out.num_features = parts.front().num_features;
  out.num_classes = parts.front().num_classes;
  for (const Dataset& d : parts) {
    out.features.insert(out.features.end(), d.features.begin(),
                        d.features.end());
    out.labels.insert(out.labels.end(), d.labels.begin(), d.labels.end());
  }
  return out;
}

std::string_view ArchitectureName(Architecture arch) {
  return arch == Architecture::kLogistic ? "logistic" : "mlp";
}

absl::StatusOr<Architecture> ParseArchitecture(std::string_view name) {
  if (name == "logistic") return Architecture::kLogistic;
  if (name == "mlp") return Architecture::kMlp;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown model '", std::string(name), "' (expected logistic or mlp)"));
}

size_t ModelSpec::NumParameters() const {
  const size_t f = num_features;
  const size_t c = num_classes;
  if (arch == Architecture::kLogistic) return c * f + c;
  const size_t h = hidden;
  return h * f + h + c * h + c;
}

absl::Status ModelSpec::Validate() const {
  if (num_features < 1 || num_classes < 2) {
    return absl::InvalidArgumentError(
        "model needs >= 1 feature and >= 2 classes");
  }
  if (arch == Architecture::kMlp && hidden < 1) {
    return absl::InvalidArgumentError("mlp needs >= 1 hidden unit");
  }
  return absl::OkStatus();
}

std::vector<double> InitialParameters(const ModelSpec& spec,
                                      RandomStream& rng) {
  std::vector<double> p(spec.NumParameters());
  for (double& v : p) v = -0.05 + 0.1 * rng.NextDouble();
  return p;
}

void Logits(const ModelSpec& spec, std::span<const double> params,
            std::span<const double> x, std::span<double> logits) {
  std::vector<double> hidden(spec.arch == Architecture::kMlp ? spec.hidden
                                                             : 0);
  Forward(spec, params, x, hidden, logits);
}

double LossAndGradient(const ModelSpec& spec, std::span<const double> params,
                       const Dataset& data, std::span<const size_t> batch,
                       std::span<double> grad) {
  const int f = spec.num_features;
  const int c = spec.num_classes;
  const int h = spec.arch == Architecture::kMlp ? spec.hidden : 0;
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;

  std::vector<double> hidden(h);
  std::vector<double> probs(c);
  std::vector<double> back(h);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (size_t idx : batch) {
    std::span<const double> x = data.row(idx);
    const int y = data.labels[idx];
    Forward(spec, params, x, hidden, probs);
    const double logit_y = probs[y];
    loss += Softmax(probs) - logit_y;
    if (!want_grad) continue;
    probs[y] -= 1.0;  // dL/dlogits

    if (spec.arch == Architecture::kLogistic) {
      double* gw = grad.data();
      double* gb = grad.data() + static_cast<size_t>(c) * f;
      for (int k = 0; k < c; ++k) {
        const double d = probs[k] * inv_n;
        for (int j = 0; j < f; ++j) gw[k * f + j] += d * x[j];
        gb[k] += d;
      }
      continue;
    }
    const double* w2 = params.data() + static_cast<size_t>(h) * f + h;
    double* gw1 = grad.data();
    double* gb1 = gw1 + static_cast<size_t>(h) * f;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + static_cast<size_t>(c) * h;
    std::fill(back.begin(), back.end(), 0.0);
    for (int k = 0; k < c; ++k) {
      const double d = probs[k] * inv_n;
      for (int u = 0; u < h; ++u) {
        gw2[k * h + u] += d * hidden[u];
        back[u] += d * w2[k * h + u];
      }
      gb2[k] += d;
    }
    for (int u = 0; u < h; ++u) {
      const double d = back[u] * (1.0 - hidden[u] * hidden[u]);
      for (int j = 0; j < f; ++j) gw1[u * f + j] += d * x[j];
      gb1[u] += d;
    }
  }
  return loss * inv_n;
}

double MeanLoss(const ModelSpec& spec, std::span<const double> params,
                const Dataset& data) {
  std::vector<size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return LossAndGradient(spec, params, data, all, {});
}

LocalUpdate SgdLocal(const ModelSpec& spec, std::span<const double> params,
                     const Dataset& shard, const SgdOptions& options,
                     RandomStream& rng) {
  LocalUpdate update;
  update.delta.assign(params.size(), 0.0);
  if (shard.size() == 0) {
    update.empty_shard = true;
    return update;
  }
  // The delta is accumulated directly so that a single step yields exactly
  // -lr * gradient.
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> grad(params.size());
  std::vector<size_t> order(shard.size());
  std::iota(order.begin(), order.end(), 0);
  const size_t batch_size =
      options.batch_size > 0 ? static_cast<size_t>(options.batch_size)
                             : shard.size();
  const bool full_batch = batch_size >= shard.size();
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (!full_batch) std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += batch_size) {
      const size_t end = std::min(order.size(), start + batch_size);
      std::span<const size_t> batch(order.data() + start, end - start);
      LossAndGradient(spec, theta, shard, batch, grad);
      for (size_t i = 0; i < theta.size(); ++i) {
        update.delta[i] -= options.learning_rate * grad[i];
        theta[i] = params[i] + update.delta[i];
      }
    }
  }
  return update;
}

absl::StatusOr<double> Evaluate(const ModelSpec& spec,
                                std::span<const double> params,
                                const Dataset& data) {
  if (data.size() == 0) {
    return absl::InvalidArgumentError("cannot evaluate on an empty dataset");
  }
  std::vector<double> hidden(spec.arch == Architecture::kMlp ? spec.hidden
                                                             : 0);
  std::vector<double> logits(spec.num_classes);
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    Forward(spec, params, data.row(i), hidden, logits);
    const int pred = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (pred == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

absl::StatusOr<BlobTask> SynthBlobs(const BlobOptions& options,
                                    RandomStream& rng) {
  if (options.clients < 1 || options.per_client < 0 || options.classes < 2 ||
      options.features < 1 || options.test_size < 0) {
    return absl::InvalidArgumentError("blob sizes must be positive");
  }
  if (!(options.spread >= 0.0) || !(options.skew >= 0.0 && options.skew <= 1.0)) {
    return absl::InvalidArgumentError(
        "spread must be >= 0 and skew in [0, 1]");
  }
  const int c = options.classes;
  const int f = options.features;
  std::vector<double> centres(static_cast<size_t>(c) * f);
  for (double& v : centres) v = 0.2 + 0.6 * rng.NextDouble();

  const GaussianSampler gauss;
  auto draw = [&](int label, Dataset& out) {
    out.labels.push_back(label);
    for (int j = 0; j < f; ++j) {
      const double v =
          gauss.Sample(rng, centres[static_cast<size_t>(label) * f + j],
                       options.spread);
      out.features.push_back(std::clamp(v, 0.0, 1.0));
    }
  };
  auto empty = [&] {
    Dataset d;
    d.num_features = f;
    d.num_classes = c;
    return d;
  };

  BlobTask task;
  task.clients.reserve(options.clients);
  for (int k = 0; k < options.clients; ++k) {
    Dataset shard = empty();
    const int dominant = k % c;
    for (int i = 0; i < options.per_client; ++i) {
      const bool skewed = rng.NextDouble() < options.skew;
      const int label =
          skewed ? dominant : static_cast<int>(rng.NextU64() % c);
      draw(label, shard);
    }
    task.clients.push_back(std::move(shard));
  }
  task.test = empty();
  for (int i = 0; i < options.test_size; ++i) {
    draw(static_cast<int>(rng.NextU64() % c), task.test);
  }
  return task;
}

absl::StatusOr<Dataset> ParseIdx(std::string_view images,
                                 std::string_view labels, int num_classes) {
  absl::StatusOr<IdxHeader> ih = ParseIdxHeader(images, kIdxImageMagic, 3,
                                                "image");
  if (!ih.ok()) return ih.status();
  absl::StatusOr<IdxHeader> lh = ParseIdxHeader(labels, kIdxLabelMagic, 1,
                                                "label");
  if (!lh.ok()) return lh.status();
  const size_t count = ih->dims[0];
  if (lh->dims[0] != count) {
    return absl::FailedPreconditionError(
        absl::StrCat("IDX count mismatch: ", count, " images but ",
                     lh->dims[0], " labels"));
  }
  Dataset data;
  data.num_features = static_cast<int>(ih->dims[1] * ih->dims[2]);
  data.features.resize(count * data.num_features);
  for (size_t i = 0; i < data.features.size(); ++i) {
    data.features[i] =
        static_cast<uint8_t>(images[ih->payload_offset + i]) / 255.0;
  }
  int max_label = 0;
  data.labels.resize(count);
  for (size_t i = 0; i < count; ++i) {
    data.labels[i] = static_cast<uint8_t>(labels[lh->payload_offset + i]);
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  if (absl::Status s = data.Validate(); !s.ok()) return s;
  return data;
}

absl::StatusOr<Dataset> LoadIdx(const std::string& images_path,
                                const std::string& labels_path,
                                int num_classes) {
  absl::StatusOr<std::string> images = ReadFile(images_path);
  if (!images.ok()) return images.status();
  absl::StatusOr<std::string> labels = ReadFile(labels_path);
  if (!labels.ok()) return labels.status();
  return ParseIdx(*images, *labels, num_classes);
}

std::vector<Dataset> PartitionContiguous(const Dataset& data, int shards) {
  std::vector<Dataset> out(shards);
  const size_t n = data.size();
  const size_t f = data.num_features;
  for (int k = 0; k < shards; ++k) {
    const size_t begin = n * k / shards;
    const size_t end = n * (k + 1) / shards;
    Dataset& d = out[k];
    d.num_features = data.num_features;
    d.num_classes = data.num_classes;
    d.labels.assign(data.labels.begin() + begin, data.labels.begin() + end);
    d.features.assign(data.features.begin() + begin * f,
                      data.features.begin() + end * f);
  }
  return out;
}

}  // namespace fedcrypt
