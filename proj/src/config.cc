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

#include "fedcrypt/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"

namespace fedcrypt {
namespace {

absl::string_view Sv(std::string_view v) { return {v.data(), v.size()}; }
std::string_view StdSv(absl::string_view v) { return {v.data(), v.size()}; }

absl::Status ParseInt(std::string_view v, int& out) {
  if (!absl::SimpleAtoi(Sv(v), &out)) {
    return absl::InvalidArgumentError(absl::StrCat("expected an integer, got '", Sv(v), "'"));
  }
  return absl::OkStatus();
}

absl::Status ParseU64(std::string_view v, uint64_t& out) {
  if (!absl::SimpleAtoi(Sv(v), &out)) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected an unsigned integer, got '", Sv(v), "'"));
  }
  return absl::OkStatus();
}

absl::Status ParseReal(std::string_view v, double& out) {
  if (!absl::SimpleAtod(Sv(v), &out) || !std::isfinite(out)) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected a finite number, got '", Sv(v), "'"));
  }
  return absl::OkStatus();
}

absl::Status ParseBool(std::string_view v, bool& out) {
  if (!absl::SimpleAtob(Sv(v), &out)) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected true or false, got '", Sv(v), "'"));
  }
  return absl::OkStatus();
}

template <typename T>
absl::Status Assign(absl::StatusOr<T> parsed, T& out) {
  if (!parsed.ok()) return parsed.status();
  out = *parsed;
  return absl::OkStatus();
}

using Setter = std::function<absl::Status(RunConfig&, std::string_view)>;

// Key order here is the manifest order.
const std::vector<std::pair<std::string, Setter>>& Setters() {
  static const auto* setters = new std::vector<std::pair<std::string, Setter>>{
      {"clients", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.num_clients); }},
      {"participants", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.participants); }},
      {"rounds", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.rounds); }},
      {"sigma", [](RunConfig& c, std::string_view v) { return ParseReal(v, c.fed.sigma); }},
      {"clip", [](RunConfig& c, std::string_view v) { return ParseReal(v, c.fed.clip_s); }},
      {"delta", [](RunConfig& c, std::string_view v) { return ParseReal(v, c.fed.delta); }},
      {"max_order", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.max_moment_order); }},
      {"scale", [](RunConfig& c, std::string_view v) { return ParseReal(v, c.fed.quant_scale); }},
      {"bits", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.plaintext_bits); }},
      {"guard_bits", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.guard_bits); }},
      {"local_epochs", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.local_epochs); }},
      {"learning_rate", [](RunConfig& c, std::string_view v) { return ParseReal(v, c.fed.learning_rate); }},
      {"batch_size", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.batch_size); }},
      {"seed", [](RunConfig& c, std::string_view v) { return ParseU64(v, c.fed.master_seed); }},
      {"backend", [](RunConfig& c, std::string_view v) { return Assign(ParseBackend(v), c.fed.backend); }},
      {"key_bits", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.key_bits); }},
      {"insecure_test_mode", [](RunConfig& c, std::string_view v) { return ParseBool(v, c.insecure_test_mode); }},
      {"sampler", [](RunConfig& c, std::string_view v) { return Assign(ParseGaussianAlgorithm(v), c.fed.sampler); }},
      {"model", [](RunConfig& c, std::string_view v) { return Assign(ParseArchitecture(v), c.fed.model.arch); }},
      {"hidden", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.fed.model.hidden); }},
      {"clip_enabled", [](RunConfig& c, std::string_view v) { return ParseBool(v, c.fed.protection.clip); }},
      {"noise_enabled", [](RunConfig& c, std::string_view v) { return ParseBool(v, c.fed.protection.noise); }},
      {"quantize_enabled", [](RunConfig& c, std::string_view v) { return ParseBool(v, c.fed.protection.quantize); }},
      {"dataset", [](RunConfig& c, std::string_view v) -> absl::Status {
         if (v == "synth") {
           c.data.kind = DataKind::kSynth;
         } else if (v == "idx") {
           c.data.kind = DataKind::kIdx;
         } else {
           return absl::InvalidArgumentError(
               absl::StrCat("dataset must be synth or idx, got '", Sv(v), "'"));
         }
         return absl::OkStatus();
       }},
      {"synth_per_client", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.data.blobs.per_client); }},
      {"synth_classes", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.data.blobs.classes); }},
      {"synth_features", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.data.blobs.features); }},
      {"synth_spread", [](RunConfig& c, std::string_view v) { return ParseReal(v, c.data.blobs.spread); }},
      {"synth_skew", [](RunConfig& c, std::string_view v) { return ParseReal(v, c.data.blobs.skew); }},
      {"synth_test_size", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.data.blobs.test_size); }},
      {"idx_train_images", [](RunConfig& c, std::string_view v) { c.data.idx_train_images = std::string(v); return absl::OkStatus(); }},
      {"idx_train_labels", [](RunConfig& c, std::string_view v) { c.data.idx_train_labels = std::string(v); return absl::OkStatus(); }},
      {"idx_test_images", [](RunConfig& c, std::string_view v) { c.data.idx_test_images = std::string(v); return absl::OkStatus(); }},
      {"idx_test_labels", [](RunConfig& c, std::string_view v) { c.data.idx_test_labels = std::string(v); return absl::OkStatus(); }},
      {"idx_classes", [](RunConfig& c, std::string_view v) { return ParseInt(v, c.data.idx_classes); }},
  };
  return *setters;
}

std::string Bool(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string FormatDouble(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

absl::Status RunConfig::Validate() const {
  FedConfig shaped = fed;
  if (data.kind == DataKind::kSynth) {
    shaped.model.num_features = data.blobs.features;
    shaped.model.num_classes = data.blobs.classes;
  } else if (shaped.model.num_features < 1 || shaped.model.num_classes < 2) {
    // The real shape is only known once the IDX files are read.
    shaped.model.num_features = 1;
    shaped.model.num_classes = 2;
  }
  if (absl::Status s = shaped.Validate(); !s.ok()) return s;
  if (fed.protection.quantize && fed.backend == BackendKind::kPaillier &&
      fed.key_bits < kMinSecureKeyBits && !insecure_test_mode) {
    return absl::InvalidArgumentError(absl::StrCat(
        "key_bits=", fed.key_bits, " is below ", kMinSecureKeyBits,
        "; set insecure_test_mode = true to allow it"));
  }
  if (data.kind == DataKind::kIdx &&
      (data.idx_train_images.empty() || data.idx_train_labels.empty() ||
       data.idx_test_images.empty() || data.idx_test_labels.empty())) {
    return absl::InvalidArgumentError(
        "dataset = idx needs idx_train_images, idx_train_labels, "
        "idx_test_images and idx_test_labels");
  }
  return absl::OkStatus();
}

absl::StatusOr<RunConfig> ParseRunConfig(std::string_view text) {
  std::map<std::string_view, const Setter*> by_key;
  for (const auto& [key, setter] : Setters()) by_key[key] = &setter;

  RunConfig cfg;
  std::set<std::string> seen;
  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(Sv(text), '\n')) {
    ++line_no;
    if (size_t hash = line.find('#'); hash != absl::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": expected key = value"));
    }
    const std::string key(absl::StripAsciiWhitespace(line.substr(0, eq)));
    const std::string_view value =
        StdSv(absl::StripAsciiWhitespace(line.substr(eq + 1)));
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": unknown key '", key, "'"));
    }
    if (!seen.insert(key).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": duplicate key '", key, "'"));
    }
    if (absl::Status s = (*it->second)(cfg, value); !s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": ", key, ": ", s.message()));
    }
  }
  cfg.data.blobs.clients = cfg.fed.num_clients;
  return cfg;
}

absl::StatusOr<RunConfig> LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseRunConfig(buf.str());
}

std::string RenderRunConfig(const RunConfig& c) {
  const FedConfig& f = c.fed;
  const DataSource& d = c.data;
  const std::map<std::string, std::string> values = {
      {"clients", absl::StrCat(f.num_clients)},
      {"participants", absl::StrCat(f.participants)},
      {"rounds", absl::StrCat(f.rounds)},
      {"sigma", FormatDouble(f.sigma)},
      {"clip", FormatDouble(f.clip_s)},
      {"delta", FormatDouble(f.delta)},
      {"max_order", absl::StrCat(f.max_moment_order)},
      {"scale", FormatDouble(f.quant_scale)},
      {"bits", absl::StrCat(f.plaintext_bits)},
      {"guard_bits", absl::StrCat(f.guard_bits)},
      {"local_epochs", absl::StrCat(f.local_epochs)},
      {"learning_rate", FormatDouble(f.learning_rate)},
      {"batch_size", absl::StrCat(f.batch_size)},
      {"seed", absl::StrCat(f.master_seed)},
      {"backend", std::string(BackendName(f.backend))},
      {"key_bits", absl::StrCat(f.key_bits)},
      {"insecure_test_mode", Bool(c.insecure_test_mode)},
      {"sampler", std::string(GaussianAlgorithmName(f.sampler))},
      {"model", std::string(ArchitectureName(f.model.arch))},
      {"hidden", absl::StrCat(f.model.hidden)},
      {"clip_enabled", Bool(f.protection.clip)},
      {"noise_enabled", Bool(f.protection.noise)},
      {"quantize_enabled", Bool(f.protection.quantize)},
      {"dataset", d.kind == DataKind::kSynth ? "synth" : "idx"},
      {"synth_per_client", absl::StrCat(d.blobs.per_client)},
      {"synth_classes", absl::StrCat(d.blobs.classes)},
      {"synth_features", absl::StrCat(d.blobs.features)},
      {"synth_spread", FormatDouble(d.blobs.spread)},
      {"synth_skew", FormatDouble(d.blobs.skew)},
      {"synth_test_size", absl::StrCat(d.blobs.test_size)},
      {"idx_train_images", d.idx_train_images},
      {"idx_train_labels", d.idx_train_labels},
      {"idx_test_images", d.idx_test_images},
      {"idx_test_labels", d.idx_test_labels},
      {"idx_classes", absl::StrCat(d.idx_classes)},
  };
  std::string out = absl::StrCat("# fedcrypt ", Sv(kVersion), " run manifest\n");
  for (const auto& [key, setter] : Setters()) {
    const std::string& v = values.at(key);
    // Empty paths are omitted; an empty value would not parse back.
    if (v.empty()) continue;
    absl::StrAppend(&out, key, " = ", v, "\n");
  }
  return out;
}

absl::StatusOr<FederatedData> LoadRunData(RunConfig& cfg) {
  FederatedData data;
  if (cfg.data.kind == DataKind::kSynth) {
    BlobOptions opts = cfg.data.blobs;
    opts.clients = cfg.fed.num_clients;
    RandomStream rng =
        RandomStream::Derive(cfg.fed.master_seed, StreamPurpose::kData, 0, 0);
    absl::StatusOr<BlobTask> task = SynthBlobs(opts, rng);
    if (!task.ok()) return task.status();
    data.clients = std::move(task->clients);
    data.test = std::move(task->test);
    cfg.fed.model.num_features = opts.features;
    cfg.fed.model.num_classes = opts.classes;
  } else {
    absl::StatusOr<Dataset> train =
        LoadIdx(cfg.data.idx_train_images, cfg.data.idx_train_labels,
                cfg.data.idx_classes);
    if (!train.ok()) return train.status();
    const int classes = cfg.data.idx_classes > 0 ? cfg.data.idx_classes
                                                 : train->num_classes;
    absl::StatusOr<Dataset> test = LoadIdx(
        cfg.data.idx_test_images, cfg.data.idx_test_labels, classes);
    if (!test.ok()) return test.status();
    train->num_classes = classes;
    data.clients = PartitionContiguous(*train, cfg.fed.num_clients);
    data.test = *std::move(test);
    cfg.fed.model.num_features = train->num_features;
    cfg.fed.model.num_classes = classes;
  }
  return data;
}

void WriteMetricsCsv(std::span<const RoundRecord> records, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const RoundRecord& r : records) {
    out << r.round << ',' << FormatDouble(r.train_accuracy) << ','
        << FormatDouble(r.eval_accuracy) << ',' << FormatDouble(r.loss) << ','
        << FormatDouble(r.epsilon) << ',' << FormatDouble(r.delta) << ','
        << FormatDouble(r.wall_ms) << '\n';
  }
}

void WriteModel(std::span<const double> params, std::ostream& out) {
  for (double p : params) out << FormatDouble(p) << '\n';
}

}  // namespace fedcrypt
