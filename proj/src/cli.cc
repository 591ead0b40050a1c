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

#include "fedcrypt/cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "fedcrypt/accountant.h"
#include "fedcrypt/config.h"
#include "fedcrypt/fedcore.h"
#include "fedcrypt/he.h"
#include "fedcrypt/sampling.h"

namespace fedcrypt {
namespace {

absl::string_view Sv(std::string_view v) { return {v.data(), v.size()}; }

struct AccountantArgs {
  double sigma = 0.0;
  double clip_s = 1.0;
  std::optional<int> participants;
  std::optional<int> clients;
  std::optional<double> q;
  int rounds = 1;
  double delta = 1e-5;
  int max_order = kDefaultMaxMomentOrder;
  std::optional<double> chi;
  bool csv = false;
};

struct BoundsArgs {
  int n_bits = kDefaultSourceBits;
  double x_tail = kZigguratTailRounded;
};

struct KeygenArgs {
  int bits = kDefaultKeyBits;
  std::string out_prefix;
  std::optional<uint64_t> seed;
  bool insecure = false;
};

struct RunArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::string> backend;
  bool serial = false;
};

struct SweepArgs {
  std::string sigma_range;
  double clip_s = 1.0;
  std::optional<int> participants;
  std::optional<int> clients;
  std::optional<int> rounds;
  double delta = 1e-5;
  int max_order = kDefaultMaxMomentOrder;
  std::optional<std::string> config_path;
  std::optional<std::string> out_path;
  bool serial = false;
};

absl::StatusOr<double> SamplingRatio(std::optional<double> q,
                                     std::optional<int> participants,
                                     std::optional<int> clients) {
  if (q.has_value()) return *q;
  if (!participants.has_value() || !clients.has_value()) {
    return absl::InvalidArgumentError("give --q, or both -K and -M");
  }
  if (*clients < 1 || *participants < 1 || *participants > *clients) {
    return absl::InvalidArgumentError("need 1 <= K <= M");
  }
  return static_cast<double>(*participants) / *clients;
}

std::vector<int> OrdersUpTo(int max_order) {
  std::vector<int> orders;
  for (int l = 1; l <= max_order; ++l) orders.push_back(l);
  return orders;
}

absl::StatusOr<double> EpsilonAtSigma(double sigma, const PrivacyParams& base) {
  PrivacyParams p = base;
  p.sigma = sigma;
  return EpsilonFor(p);
}

absl::Status DoAccountant(const AccountantArgs& a, std::ostream& out) {
  absl::StatusOr<double> q = SamplingRatio(a.q, a.participants, a.clients);
  if (!q.ok()) return q.status();
  PrivacyParams params;
  params.sigma = a.sigma;
  params.clip_s = a.clip_s;
  params.q = *q;
  params.rounds = a.rounds;
  params.delta = a.delta;
  params.moment_orders = OrdersUpTo(a.max_order);
  if (absl::Status s = params.Validate(); !s.ok()) return s;

  struct Row {
    std::string view;
    double sigma;
    double epsilon;
  };
  std::vector<Row> rows;
  absl::StatusOr<double> eps = EpsilonFor(params);
  if (!eps.ok()) return eps.status();
  rows.push_back({"end_user", a.sigma, *eps});
  if (a.participants.has_value()) {
    absl::StatusOr<double> sp = ParticipantViewSigma(a.sigma, *a.participants);
    if (!sp.ok()) return sp.status();
    absl::StatusOr<double> e = EpsilonAtSigma(*sp, params);
    if (!e.ok()) return e.status();
    rows.push_back({"participant", *sp, *e});
  }
  if (a.chi.has_value()) {
    absl::StatusOr<double> sc = CollusionAdjustedSigma(a.sigma, *a.chi);
    if (!sc.ok()) return sc.status();
    absl::StatusOr<double> e = EpsilonAtSigma(*sc, params);
    if (!e.ok()) return e.status();
    rows.push_back({"collusion", *sc, *e});
  }

  if (a.csv) {
    out << "view,sigma,q,rounds,delta,epsilon\n";
    for (const Row& r : rows) {
      out << r.view << ',' << FormatDouble(r.sigma) << ','
          << FormatDouble(params.q) << ',' << params.rounds << ','
          << FormatDouble(params.delta) << ',' << FormatDouble(r.epsilon)
          << '\n';
    }
    return absl::OkStatus();
  }
  out << "q = " << FormatDouble(params.q) << "\n"
      << "rounds = " << params.rounds << "\n"
      << "delta = " << FormatDouble(params.delta) << "\n";
  for (const Row& r : rows) {
    out << "epsilon_" << r.view << " = " << FormatDouble(r.epsilon)
        << "  (sigma = " << FormatDouble(r.sigma) << ")\n";
  }
  return absl::OkStatus();
}

absl::Status DoBounds(const BoundsArgs& a, std::ostream& out) {
  out << "algorithm,n_bits,bound\n";
  for (GaussianAlgorithm alg :
       {GaussianAlgorithm::kBoxMullerCartesian,
        GaussianAlgorithm::kBoxMullerPolar, GaussianAlgorithm::kZiggurat}) {
    SamplerBoundSpec spec{.algorithm = alg, .n_bits = a.n_bits, .x_tail = {}};
    if (alg == GaussianAlgorithm::kZiggurat) spec.x_tail = a.x_tail;
    absl::StatusOr<double> b = SamplerBound(spec);
    if (!b.ok()) return b.status();
    out << GaussianAlgorithmName(alg) << ',' << a.n_bits << ','
        << FormatDouble(*b) << '\n';
  }
  return absl::OkStatus();
}

absl::Status WriteFile(const std::filesystem::path& path,
                       std::string_view contents) {
  std::ofstream f(path, std::ios::binary);
  f << contents;
  f.close();
  if (!f) return absl::InternalError(absl::StrCat("cannot write ", path.string()));
  return absl::OkStatus();
}

absl::Status DoKeygen(const KeygenArgs& a, std::ostream& out) {
  if (a.bits < kMinSecureKeyBits && !a.insecure) {
    return absl::InvalidArgumentError(absl::StrCat(
        "refusing to generate a ", a.bits, "-bit key (minimum ",
        kMinSecureKeyBits, "); pass --insecure-test-mode for test keys"));
  }
  uint64_t seed;
  if (a.seed.has_value()) {
    seed = *a.seed;
  } else {
    std::random_device rd;
    seed = (static_cast<uint64_t>(rd()) << 32) ^ rd();
  }
  RandomStream rng = RandomStream::Derive(seed, StreamPurpose::kKeygen, 0, 0);
  absl::StatusOr<PaillierKeyPair> kp = GeneratePaillierKeyPair(a.bits, rng);
  if (!kp.ok()) return kp.status();
  const std::string pub = a.out_prefix + ".pub";
  const std::string sec = a.out_prefix + ".sec";
  if (absl::Status s = WriteFile(pub, SerializePublicKey(kp->public_key));
      !s.ok()) {
    return s;
  }
  if (absl::Status s = WriteFile(sec, SerializeSecretKey(kp->secret_key));
      !s.ok()) {
    return s;
  }
  out << "wrote " << pub << " and " << sec << " ("
      << mpz_sizeinbase(kp->public_key.n.get_mpz_t(), 2) << "-bit modulus)\n";
  return absl::OkStatus();
}

// Applies FEDCRYPT_SEED, if set.
absl::Status ApplySeedOverride(RunConfig& cfg) {
  const char* env = std::getenv(std::string(kSeedEnvVar).c_str());
  if (env == nullptr) return absl::OkStatus();
  uint64_t seed;
  if (!absl::SimpleAtoi(env, &seed)) {
    return absl::InvalidArgumentError(
        absl::StrCat(Sv(kSeedEnvVar), " must be an unsigned integer, got '", env, "'"));
  }
  cfg.fed.master_seed = seed;
  return absl::OkStatus();
}

absl::StatusOr<RunConfig> ReadConfig(const std::string& path) {
  absl::StatusOr<RunConfig> cfg = LoadRunConfig(path);
  if (!cfg.ok()) {
    if (absl::IsNotFound(cfg.status())) {
      return absl::InvalidArgumentError(cfg.status().message());
    }
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": ", cfg.status().message()));
  }
  if (absl::Status s = ApplySeedOverride(*cfg); !s.ok()) return s;
  return cfg;
}

absl::Status DoRun(const RunArgs& a, std::ostream& out) {
  absl::StatusOr<RunConfig> cfg = ReadConfig(a.config_path);
  if (!cfg.ok()) return cfg.status();
  if (a.backend.has_value()) {
    absl::StatusOr<BackendKind> kind = ParseBackend(*a.backend);
    if (!kind.ok()) return kind.status();
    cfg->fed.backend = *kind;
  }
  if (absl::Status s = cfg->Validate(); !s.ok()) return s;
  absl::StatusOr<FederatedData> data = LoadRunData(*cfg);
  if (!data.ok()) {
    // Bad shapes in the data are a runtime failure, not a config error.
    if (absl::IsInvalidArgument(data.status())) {
      return absl::FailedPreconditionError(data.status().message());
    }
    return data.status();
  }
  if (absl::Status s = cfg->fed.Validate(); !s.ok()) return s;

  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    return absl::InternalError(absl::StrCat("cannot create ", a.out_dir, ": ",
                                            ec.message()));
  }
  absl::StatusOr<TrainingResult> result = RunTraining(
      cfg->fed, *data, a.serial ? Execution::kSerial : Execution::kParallel);
  if (!result.ok()) {
    if (absl::IsInvalidArgument(result.status())) {
      return absl::InternalError(result.status().message());
    }
    return result.status();
  }

  std::ostringstream metrics;
  WriteMetricsCsv(result->records, metrics);
  std::ostringstream model;
  WriteModel(result->final_model, model);
  if (absl::Status s = WriteFile(dir / "metrics.csv", metrics.str()); !s.ok()) {
    return s;
  }
  if (absl::Status s = WriteFile(dir / "manifest.cfg", RenderRunConfig(*cfg));
      !s.ok()) {
    return s;
  }
  if (absl::Status s = WriteFile(dir / "model.txt", model.str()); !s.ok()) {
    return s;
  }
  if (!result->last_aggregate.ciphertexts.empty()) {
    if (absl::Status s = WriteFile(dir / "aggregate.fccb",
                                   SerializeBundle(result->last_aggregate));
        !s.ok()) {
      return s;
    }
  }
  if (result->records.empty()) {
    out << "rounds = 0\n";
  } else {
    const RoundRecord& last = result->records.back();
    out << "rounds = " << last.round << "\n"
        << "eval_accuracy = " << FormatDouble(last.eval_accuracy) << "\n"
        << "epsilon = " << FormatDouble(last.epsilon) << "\n"
        << "delta = " << FormatDouble(last.delta) << "\n";
  }
  out << "outputs in " << dir.string() << "\n";
  return absl::OkStatus();
}

absl::StatusOr<std::vector<double>> ParseRange(std::string_view text) {
  const size_t dots = text.find("..");
  if (dots == std::string_view::npos) {
    double v;
    if (!absl::SimpleAtod(Sv(text), &v)) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad sigma range '", Sv(text), "'; expected lo..hi[:step]"));
    }
    return std::vector<double>{v};
  }
  std::string_view lo_s = text.substr(0, dots);
  std::string_view rest = text.substr(dots + 2);
  std::string_view hi_s = rest;
  std::string_view step_s = "1";
  if (size_t colon = rest.find(':'); colon != std::string_view::npos) {
    hi_s = rest.substr(0, colon);
    step_s = rest.substr(colon + 1);
  }
  double lo, hi, step;
  if (!absl::SimpleAtod(Sv(lo_s), &lo) || !absl::SimpleAtod(Sv(hi_s), &hi) ||
      !absl::SimpleAtod(Sv(step_s), &step) || !(step > 0) || hi < lo) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad sigma range '", Sv(text), "'; expected lo..hi[:step]"));
  }
  std::vector<double> values;
  for (int i = 0;; ++i) {
    const double v = lo + i * step;
    if (v > hi + 1e-9 * std::max(1.0, std::abs(hi))) break;
    values.push_back(v);
  }
  return values;
}

absl::Status DoSweep(const SweepArgs& a, std::ostream& out) {
  absl::StatusOr<std::vector<double>> sigmas = ParseRange(a.sigma_range);
  if (!sigmas.ok()) return sigmas.status();

  std::optional<RunConfig> cfg;
  std::optional<FederatedData> data;
  std::optional<int> participants = a.participants;
  std::optional<int> clients = a.clients;
  std::optional<int> rounds = a.rounds;
  double clip_s = a.clip_s;
  double delta = a.delta;
  int max_order = a.max_order;
  if (a.config_path.has_value()) {
    absl::StatusOr<RunConfig> c = ReadConfig(*a.config_path);
    if (!c.ok()) return c.status();
    if (absl::Status s = c->Validate(); !s.ok()) return s;
    absl::StatusOr<FederatedData> d = LoadRunData(*c);
    if (!d.ok()) return absl::FailedPreconditionError(d.status().message());
    cfg = *std::move(c);
    data = *std::move(d);
    participants = cfg->fed.participants;
    clients = cfg->fed.num_clients;
    rounds = cfg->fed.rounds;
    clip_s = cfg->fed.clip_s;
    delta = cfg->fed.delta;
    max_order = cfg->fed.max_moment_order;
  }
  if (!rounds.has_value()) {
    return absl::InvalidArgumentError("give -T or --config");
  }
  absl::StatusOr<double> q = SamplingRatio(std::nullopt, participants, clients);
  if (!q.ok()) return q.status();

  PrivacyParams base;
  base.clip_s = clip_s;
  base.q = *q;
  base.rounds = std::max(*rounds, 1);
  base.delta = delta;
  base.moment_orders = OrdersUpTo(max_order);

  std::ostringstream csv;
  csv << "sigma,epsilon_end_user,epsilon_participant";
  if (cfg.has_value()) csv << ",eval_accuracy";
  csv << '\n';
  for (double sigma : *sigmas) {
    base.sigma = sigma;
    if (absl::Status s = base.Validate(); !s.ok()) return s;
    absl::StatusOr<double> eps = EpsilonFor(base);
    if (!eps.ok()) return eps.status();
    absl::StatusOr<double> sp = ParticipantViewSigma(sigma, *participants);
    double eps_p = std::numeric_limits<double>::infinity();
    if (sp.ok() && *sp > 0) {
      absl::StatusOr<double> e = EpsilonAtSigma(*sp, base);
      if (!e.ok()) return e.status();
      eps_p = *e;
    }
    csv << FormatDouble(sigma) << ',' << FormatDouble(*eps) << ','
        << FormatDouble(eps_p);
    if (cfg.has_value()) {
      FedConfig fed = cfg->fed;
      fed.sigma = sigma;
      absl::StatusOr<TrainingResult> r = RunTraining(
          fed, *data, a.serial ? Execution::kSerial : Execution::kParallel);
      if (!r.ok()) return absl::InternalError(r.status().message());
      csv << ','
          << FormatDouble(r->records.empty() ? 0.0
                                             : r->records.back().eval_accuracy);
    }
    csv << '\n';
  }
  if (a.out_path.has_value()) return WriteFile(*a.out_path, csv.str());
  out << csv.str();
  return absl::OkStatus();
}

}  // namespace

int ExitCodeFor(const absl::Status& status) {
  if (status.ok()) return kExitOk;
  if (absl::IsInvalidArgument(status)) return kExitValidation;
  return kExitRuntime;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Federated learning with distributed noise and encrypted "
               "aggregation",
               "fedcrypt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  AccountantArgs acc;
  CLI::App* acc_cmd =
      app.add_subcommand("accountant", "Privacy loss for given parameters");
  acc_cmd->add_option("--sigma", acc.sigma, "Std of the aggregated noise")
      ->required();
  acc_cmd->add_option("-S,--S,--clip", acc.clip_s, "Clipping bound");
  acc_cmd->add_option("-K,--K,--participants", acc.participants,
                      "Participants per round");
  acc_cmd->add_option("-M,--M,--clients", acc.clients, "Total clients");
  acc_cmd->add_option("--q", acc.q, "Sampling ratio (instead of K/M)");
  acc_cmd->add_option("-T,--T,--rounds", acc.rounds, "Rounds");
  acc_cmd->add_option("--delta", acc.delta, "Target delta");
  acc_cmd->add_option("--max-order", acc.max_order, "Largest moment order");
  acc_cmd->add_option("--chi", acc.chi, "Colluding fraction of participants");
  acc_cmd->add_flag("--csv", acc.csv, "CSV output");

  BoundsArgs bounds;
  CLI::App* bounds_cmd =
      app.add_subcommand("bounds", "Worst-case magnitude of each sampler");
  bounds_cmd->add_option("--n-bits", bounds.n_bits, "Uniform source bits");
  bounds_cmd->add_option("--x-tail", bounds.x_tail, "Ziggurat tail start");

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Train from a config file");
  run_cmd->add_option("config", run.config_path, "key=value config")
      ->required();
  run_cmd->add_option("-o,--out-dir", run.out_dir, "Output directory");
  run_cmd->add_option("--backend", run.backend, "paillier or mock");
  run_cmd->add_flag("--serial", run.serial, "Disable OpenMP kernels");

  KeygenArgs keygen;
  CLI::App* keygen_cmd =
      app.add_subcommand("keygen", "Generate a Paillier key pair");
  keygen_cmd->add_option("--bits", keygen.bits, "Modulus bits");
  keygen_cmd->add_option("-o,--out", keygen.out_prefix,
                         "Writes PREFIX.pub and PREFIX.sec")
      ->required();
  keygen_cmd->add_option("--seed", keygen.seed, "Deterministic key seed");
  keygen_cmd->add_flag("--insecure-test-mode", keygen.insecure,
                       "Allow keys below 1024 bits");

  SweepArgs sweep;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Privacy (and accuracy) over a sigma range");
  sweep_cmd->add_option("--sigma", sweep.sigma_range, "lo..hi[:step]")
      ->required();
  sweep_cmd->add_option("-S,--S,--clip", sweep.clip_s, "Clipping bound");
  sweep_cmd->add_option("-K,--K,--participants", sweep.participants,
                        "Participants per round");
  sweep_cmd->add_option("-M,--M,--clients", sweep.clients, "Total clients");
  sweep_cmd->add_option("-T,--T,--rounds", sweep.rounds, "Rounds");
  sweep_cmd->add_option("--delta", sweep.delta, "Target delta");
  sweep_cmd->add_option("--max-order", sweep.max_order,
                        "Largest moment order");
  sweep_cmd->add_option("--config", sweep.config_path,
                        "Also train at each sigma with this config");
  sweep_cmd->add_option("--out", sweep.out_path, "CSV output file");
  sweep_cmd->add_flag("--serial", sweep.serial, "Disable OpenMP kernels");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  absl::Status status;
  if (acc_cmd->parsed()) {
    status = DoAccountant(acc, out);
  } else if (bounds_cmd->parsed()) {
    status = DoBounds(bounds, out);
  } else if (run_cmd->parsed()) {
    status = DoRun(run, out);
  } else if (keygen_cmd->parsed()) {
    status = DoKeygen(keygen, out);
  } else if (sweep_cmd->parsed()) {
    status = DoSweep(sweep, out);
  }
  if (!status.ok()) err << "error: " << status.message() << "\n";
  return ExitCodeFor(status);
}

}  // namespace fedcrypt
