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

#include "fedcrypt/he.h"

#include <algorithm>
#include <bit>
#include <utility>

#include "absl/strings/str_cat.h"

namespace fedcrypt {
namespace {

constexpr int kKeygenAttempts = 64;
constexpr int kPrimalityReps = 40;
constexpr std::string_view kPublicKeyMagic = "FCPK";
constexpr std::string_view kSecretKeyMagic = "FCSK";
constexpr std::string_view kBundleMagic = "FCCB";
constexpr uint8_t kFormatVersion = 1;

size_t BitLength(const BigInt& v) {
  return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
}

// Uniform integer with the given number of random bits.
BigInt RandomBits(RandomStream& rng, int bits) {
  const int words = (bits + 63) / 64;
  std::vector<uint64_t> buf(words);
  for (auto& w : buf) w = rng.NextU64();
  if (bits % 64 != 0) buf.back() &= (uint64_t{1} << (bits % 64)) - 1;
  BigInt out;
  mpz_import(out.get_mpz_t(), buf.size(), -1, sizeof(uint64_t), 0, 0,
             buf.data());
  return out;
}

BigInt RandomPrime(RandomStream& rng, int bits) {
  BigInt candidate = RandomBits(rng, bits);
  // Top two bits set so that the product of two such primes has 2*bits bits.
  mpz_setbit(candidate.get_mpz_t(), bits - 1);
  mpz_setbit(candidate.get_mpz_t(), bits - 2);
  mpz_setbit(candidate.get_mpz_t(), 0);
  BigInt prime;
  mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
  return prime;
}

void AppendU32(uint32_t v, std::string& out) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

void AppendU64(uint64_t v, std::string& out) {
  AppendU32(static_cast<uint32_t>(v >> 32), out);
  AppendU32(static_cast<uint32_t>(v), out);
}

absl::StatusOr<uint32_t> ReadU32(std::string_view& in) {
  if (in.size() < 4) return absl::DataLossError("truncated integer field");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<uint8_t>(in[i]);
  in.remove_prefix(4);
  return v;
}

absl::StatusOr<uint64_t> ReadU64(std::string_view& in) {
  absl::StatusOr<uint32_t> hi = ReadU32(in);
  if (!hi.ok()) return hi.status();
  absl::StatusOr<uint32_t> lo = ReadU32(in);
  if (!lo.ok()) return lo.status();
  return (uint64_t{*hi} << 32) | *lo;
}

void AppendHeader(std::string_view magic, std::string& out) {
  out.append(magic);
  out.push_back(static_cast<char>(kFormatVersion));
}

absl::Status ReadHeader(std::string_view magic, std::string_view& in) {
  if (in.size() < magic.size() + 1 || in.substr(0, magic.size()) != magic) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad magic: expected '", std::string(magic), "'"));
  }
  if (static_cast<uint8_t>(in[magic.size()]) != kFormatVersion) {
    return absl::InvalidArgumentError("unsupported format version");
  }
  in.remove_prefix(magic.size() + 1);
  return absl::OkStatus();
}

absl::Status ExpectConsumed(std::string_view in) {
  if (!in.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat(in.size(), " trailing bytes after payload"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<PaillierKeyPair> PaillierKeyPairFromPrimes(const BigInt& p,
                                                          const BigInt& q) {
  if (p == q) return absl::InvalidArgumentError("p and q must be distinct");
  if (mpz_probab_prime_p(p.get_mpz_t(), kPrimalityReps) == 0 ||
      mpz_probab_prime_p(q.get_mpz_t(), kPrimalityReps) == 0) {
    return absl::InvalidArgumentError("p and q must be prime");
  }
  const BigInt n = p * q;
  const BigInt p1 = p - 1;
  const BigInt q1 = q - 1;
  BigInt phi = p1 * q1;
  BigInt gcd;
  mpz_gcd(gcd.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
  if (gcd != 1) return absl::InvalidArgumentError("gcd(n, phi(n)) != 1");

  PaillierKeyPair keys;
  keys.public_key.n = n;
  keys.public_key.g = n + 1;
  keys.public_key.n_squared = n * n;
  keys.secret_key.n = n;
  keys.secret_key.n_squared = keys.public_key.n_squared;
  mpz_lcm(keys.secret_key.lambda.get_mpz_t(), p1.get_mpz_t(), q1.get_mpz_t());
  // With g = n + 1, L(g^lambda mod n^2) = lambda mod n.
  if (mpz_invert(keys.secret_key.mu.get_mpz_t(),
                 keys.secret_key.lambda.get_mpz_t(), n.get_mpz_t()) == 0) {
    return absl::InvalidArgumentError("lambda is not invertible mod n");
  }
  return keys;
}

absl::StatusOr<PaillierKeyPair> GeneratePaillierKeyPair(int key_bits,
                                                        RandomStream& rng) {
  if (key_bits < kMinKeyBits || key_bits % 2 != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "key_bits must be even and >= ", kMinKeyBits, ", got ", key_bits));
  }
  for (int attempt = 0; attempt < kKeygenAttempts; ++attempt) {
    const BigInt p = RandomPrime(rng, key_bits / 2);
    const BigInt q = RandomPrime(rng, key_bits / 2);
    if (p == q) continue;
    const BigInt n = p * q;
    if (BitLength(n) != static_cast<size_t>(key_bits)) continue;
    absl::StatusOr<PaillierKeyPair> keys = PaillierKeyPairFromPrimes(p, q);
    if (keys.ok()) return keys;
  }
  return absl::InternalError(absl::StrCat("failed to generate a ", key_bits,
                                          "-bit key after ", kKeygenAttempts,
                                          " attempts"));
}

int RequiredGuardBits(int max_summands) {
  if (max_summands <= 1) return 0;
  return std::bit_width(static_cast<unsigned>(max_summands - 1));
}

absl::StatusOr<SlotLayout> MakeSlotLayout(int plaintext_bits, int slot_bits,
                                          int guard_bits, int max_summands,
                                          size_t dimension) {
  if (slot_bits < 1 || slot_bits > 62 || guard_bits < 0 ||
      slot_bits + guard_bits > 63) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid slot geometry: slot_bits=", slot_bits,
                     " guard_bits=", guard_bits));
  }
  if (guard_bits < RequiredGuardBits(max_summands)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "guard_bits=", guard_bits, " cannot absorb a ", max_summands,
        "-way sum; need ", RequiredGuardBits(max_summands)));
  }
  SlotLayout layout;
  layout.slot_bits = slot_bits;
  layout.guard_bits = guard_bits;
  layout.slots = plaintext_bits / layout.width();
  layout.dimension = dimension;
  if (layout.slots < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("a ", layout.width(), "-bit slot does not fit in ",
                     plaintext_bits, " plaintext bits"));
  }
  return layout;
}

absl::StatusOr<std::vector<PackedPlaintext>> Pack(
    std::span<const uint64_t> counts, const SlotLayout& layout,
    int max_summands) {
  if (layout.guard_bits < RequiredGuardBits(max_summands)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "guard_bits=", layout.guard_bits, " too small for ", max_summands,
        " summands"));
  }
  if (counts.size() != layout.dimension) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected ", layout.dimension, " counts, got ",
                     counts.size()));
  }
  const uint64_t limit = uint64_t{1} << layout.slot_bits;
  std::vector<PackedPlaintext> out(layout.num_plaintexts());
  for (size_t j = 0; j < out.size(); ++j) {
    PackedPlaintext& pt = out[j];
    pt.slot_bits = layout.slot_bits;
    pt.guard_bits = layout.guard_bits;
    pt.slots = layout.slots;
    const size_t begin = j * layout.slots;
    const size_t end = std::min(counts.size(), begin + layout.slots);
    // Highest slot first so each step is shift-then-add.
    for (size_t i = end; i-- > begin;) {
      if (counts[i] >= limit) {
        return absl::InvalidArgumentError(
            absl::StrCat("count ", counts[i], " at index ", i,
                         " exceeds the ", layout.slot_bits, "-bit slot"));
      }
      pt.value <<= layout.width();
      pt.value += BigInt(static_cast<unsigned long>(counts[i]));
    }
  }
  return out;
}

std::vector<uint64_t> Unpack(std::span<const PackedPlaintext> plaintexts,
                             const SlotLayout& layout) {
  std::vector<uint64_t> out;
  out.reserve(layout.dimension);
  const uint64_t mask = (uint64_t{1} << layout.width()) - 1;
  for (const PackedPlaintext& pt : plaintexts) {
    BigInt rest = pt.value;
    for (int i = 0; i < layout.slots && out.size() < layout.dimension; ++i) {
      BigInt field = rest & BigInt(static_cast<unsigned long>(mask));
      out.push_back(field.get_ui());
      rest >>= layout.width();
    }
  }
  return out;
}

std::string_view BackendName(BackendKind kind) {
  return kind == BackendKind::kPaillier ? "paillier" : "mock";
}

absl::StatusOr<BackendKind> ParseBackend(std::string_view name) {
  if (name == "paillier") return BackendKind::kPaillier;
  if (name == "mock") return BackendKind::kMock;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown backend '", std::string(name), "' (expected paillier or mock)"));
}

PaillierPublicOps::PaillierPublicOps(PaillierPublicKey key)
    : key_(std::move(key)) {}

int PaillierPublicOps::plaintext_bits() const {
  return static_cast<int>(BitLength(key_.n)) - 1;
}

absl::StatusOr<Ciphertext> PaillierPublicOps::Encrypt(
    const BigInt& m, RandomStream& rng) const {
  if (m < 0 || m >= key_.n) {
    return absl::InvalidArgumentError("plaintext out of range [0, n)");
  }
  const int bits = static_cast<int>(BitLength(key_.n));
  BigInt r;
  BigInt gcd;
  for (;;) {
    r = RandomBits(rng, bits);
    if (r == 0 || r >= key_.n) continue;
    mpz_gcd(gcd.get_mpz_t(), r.get_mpz_t(), key_.n.get_mpz_t());
    if (gcd == 1) break;
  }
  // g^m = (1 + n)^m = 1 + m n (mod n^2).
  BigInt gm = (1 + m * key_.n) % key_.n_squared;
  BigInt rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), key_.n.get_mpz_t(),
           key_.n_squared.get_mpz_t());
  return Ciphertext{(gm * rn) % key_.n_squared};
}

absl::StatusOr<Ciphertext> PaillierPublicOps::Add(
    std::span<const Ciphertext> ciphertexts) const {
  if (ciphertexts.empty()) {
    return absl::InvalidArgumentError("cannot add an empty ciphertext list");
  }
  BigInt acc = 1;
  for (const Ciphertext& c : ciphertexts) {
    if (c.value < 0 || c.value >= key_.n_squared) {
      return absl::InvalidArgumentError("ciphertext out of range [0, n^2)");
    }
    acc = (acc * c.value) % key_.n_squared;
  }
  return Ciphertext{std::move(acc)};
}

PaillierSecretOps::PaillierSecretOps(PaillierSecretKey key)
    : key_(std::move(key)) {}

absl::StatusOr<BigInt> PaillierSecretOps::Decrypt(const Ciphertext& c) const {
  if (c.value < 0 || c.value >= key_.n_squared) {
    return absl::InvalidArgumentError("malformed ciphertext: not in [0, n^2)");
  }
  BigInt u;
  mpz_powm(u.get_mpz_t(), c.value.get_mpz_t(), key_.lambda.get_mpz_t(),
           key_.n_squared.get_mpz_t());
  BigInt l = (u - 1) / key_.n;
  return BigInt((l * key_.mu) % key_.n);
}

MockPublicOps::MockPublicOps(int key_bits) : key_bits_(key_bits) {
  mpz_ui_pow_ui(modulus_.get_mpz_t(), 2, key_bits);
  modulus_ -= 1;
}

absl::StatusOr<Ciphertext> MockPublicOps::Encrypt(const BigInt& m,
                                                  RandomStream& /*rng*/) const {
  if (m < 0 || m >= modulus_) {
    return absl::InvalidArgumentError("plaintext out of range [0, n)");
  }
  return Ciphertext{m};
}

absl::StatusOr<Ciphertext> MockPublicOps::Add(
    std::span<const Ciphertext> ciphertexts) const {
  if (ciphertexts.empty()) {
    return absl::InvalidArgumentError("cannot add an empty ciphertext list");
  }
  BigInt acc = 0;
  for (const Ciphertext& c : ciphertexts) {
    if (c.value < 0 || c.value >= modulus_) {
      return absl::InvalidArgumentError("ciphertext out of range [0, n)");
    }
    acc += c.value;
  }
  return Ciphertext{acc % modulus_};
}

MockSecretOps::MockSecretOps(int key_bits) {
  mpz_ui_pow_ui(modulus_.get_mpz_t(), 2, key_bits);
  modulus_ -= 1;
}

absl::StatusOr<BigInt> MockSecretOps::Decrypt(const Ciphertext& c) const {
  if (c.value < 0 || c.value >= modulus_) {
    return absl::InvalidArgumentError("malformed ciphertext: not in [0, n)");
  }
  return c.value;
}

absl::StatusOr<Backend> MakeBackend(BackendKind kind, int key_bits,
                                    RandomStream& rng) {
  if (key_bits < kMinKeyBits) {
    return absl::InvalidArgumentError(
        absl::StrCat("key_bits must be >= ", kMinKeyBits));
  }
  if (kind == BackendKind::kMock) {
    return Backend{std::make_shared<MockPublicOps>(key_bits),
                   std::make_shared<MockSecretOps>(key_bits)};
  }
  absl::StatusOr<PaillierKeyPair> keys = GeneratePaillierKeyPair(key_bits, rng);
  if (!keys.ok()) return keys.status();
  return Backend{
      std::make_shared<PaillierPublicOps>(std::move(keys->public_key)),
      std::make_shared<PaillierSecretOps>(std::move(keys->secret_key))};
}

absl::StatusOr<CiphertextBundle> EncryptCounts(
    const PublicOps& ops, std::span<const uint64_t> counts,
    const SlotLayout& layout, int max_summands, RandomStream& rng) {
  if (layout.slots * layout.width() > ops.plaintext_bits()) {
    return absl::InvalidArgumentError("layout exceeds plaintext capacity");
  }
  absl::StatusOr<std::vector<PackedPlaintext>> packed =
      Pack(counts, layout, max_summands);
  if (!packed.ok()) return packed.status();
  CiphertextBundle bundle;
  bundle.layout = layout;
  bundle.ciphertexts.reserve(packed->size());
  for (const PackedPlaintext& pt : *packed) {
    absl::StatusOr<Ciphertext> c = ops.Encrypt(pt.value, rng);
    if (!c.ok()) return c.status();
    bundle.ciphertexts.push_back(*std::move(c));
  }
  return bundle;
}

absl::StatusOr<std::vector<uint64_t>> DecryptCounts(
    const SecretOps& ops, const CiphertextBundle& bundle) {
  if (bundle.ciphertexts.size() != bundle.layout.num_plaintexts()) {
    return absl::InvalidArgumentError(
        "bundle ciphertext count does not match its layout");
  }
  std::vector<PackedPlaintext> plaintexts;
  plaintexts.reserve(bundle.ciphertexts.size());
  for (const Ciphertext& c : bundle.ciphertexts) {
    absl::StatusOr<BigInt> m = ops.Decrypt(c);
    if (!m.ok()) return m.status();
    plaintexts.push_back(PackedPlaintext{*std::move(m),
                                         bundle.layout.slot_bits,
                                         bundle.layout.guard_bits,
                                         bundle.layout.slots});
  }
  return Unpack(plaintexts, bundle.layout);
}

void AppendBigInt(const BigInt& value, std::string& out) {
  size_t count = 0;
  std::vector<unsigned char> bytes((BitLength(value) + 7) / 8);
  if (!bytes.empty()) {
    mpz_export(bytes.data(), &count, 1, 1, 1, 0, value.get_mpz_t());
  }
  AppendU32(static_cast<uint32_t>(count), out);
  out.append(reinterpret_cast<const char*>(bytes.data()), count);
}

absl::StatusOr<BigInt> ReadBigInt(std::string_view& in) {
  absl::StatusOr<uint32_t> len = ReadU32(in);
  if (!len.ok()) return len.status();
  if (in.size() < *len) return absl::DataLossError("truncated big integer");
  BigInt value = 0;
  if (*len > 0) {
    mpz_import(value.get_mpz_t(), *len, 1, 1, 1, 0, in.data());
  }
  in.remove_prefix(*len);
  return value;
}

std::string SerializePublicKey(const PaillierPublicKey& key) {
  std::string out;
  AppendHeader(kPublicKeyMagic, out);
  AppendBigInt(key.n, out);
  AppendBigInt(key.g, out);
  return out;
}

absl::StatusOr<PaillierPublicKey> ParsePublicKey(std::string_view bytes) {
  if (absl::Status s = ReadHeader(kPublicKeyMagic, bytes); !s.ok()) return s;
  PaillierPublicKey key;
  absl::StatusOr<BigInt> n = ReadBigInt(bytes);
  if (!n.ok()) return n.status();
  absl::StatusOr<BigInt> g = ReadBigInt(bytes);
  if (!g.ok()) return g.status();
  if (absl::Status s = ExpectConsumed(bytes); !s.ok()) return s;
  if (*g != *n + 1) return absl::InvalidArgumentError("expected g = n + 1");
  key.n = *n;
  key.g = *g;
  key.n_squared = key.n * key.n;
  return key;
}

std::string SerializeSecretKey(const PaillierSecretKey& key) {
  std::string out;
  AppendHeader(kSecretKeyMagic, out);
  AppendBigInt(key.n, out);
  AppendBigInt(key.lambda, out);
  AppendBigInt(key.mu, out);
  return out;
}

absl::StatusOr<PaillierSecretKey> ParseSecretKey(std::string_view bytes) {
  if (absl::Status s = ReadHeader(kSecretKeyMagic, bytes); !s.ok()) return s;
  PaillierSecretKey key;
  for (BigInt* field : {&key.n, &key.lambda, &key.mu}) {
    absl::StatusOr<BigInt> v = ReadBigInt(bytes);
    if (!v.ok()) return v.status();
    *field = *std::move(v);
  }
  if (absl::Status s = ExpectConsumed(bytes); !s.ok()) return s;
  key.n_squared = key.n * key.n;
  return key;
}

std::string SerializeBundle(const CiphertextBundle& bundle) {
  std::string out;
  AppendHeader(kBundleMagic, out);
  AppendU32(static_cast<uint32_t>(bundle.layout.slot_bits), out);
  AppendU32(static_cast<uint32_t>(bundle.layout.guard_bits), out);
  AppendU32(static_cast<uint32_t>(bundle.layout.slots), out);
  AppendU64(bundle.layout.dimension, out);
  AppendU32(static_cast<uint32_t>(bundle.ciphertexts.size()), out);
  for (const Ciphertext& c : bundle.ciphertexts) AppendBigInt(c.value, out);
  return out;
}

absl::StatusOr<CiphertextBundle> ParseBundle(std::string_view bytes) {
  if (absl::Status s = ReadHeader(kBundleMagic, bytes); !s.ok()) return s;
  CiphertextBundle bundle;
  absl::StatusOr<uint32_t> slot_bits = ReadU32(bytes);
  absl::StatusOr<uint32_t> guard_bits =
      slot_bits.ok() ? ReadU32(bytes) : slot_bits;
  absl::StatusOr<uint32_t> slots = guard_bits.ok() ? ReadU32(bytes) : guard_bits;
  if (!slots.ok()) return slots.status();
  absl::StatusOr<uint64_t> dimension = ReadU64(bytes);
  if (!dimension.ok()) return dimension.status();
  absl::StatusOr<uint32_t> count = ReadU32(bytes);
  if (!count.ok()) return count.status();
  bundle.layout = SlotLayout{static_cast<int>(*slot_bits),
                             static_cast<int>(*guard_bits),
                             static_cast<int>(*slots), *dimension};
  if (bundle.layout.slots < 1 ||
      *count != bundle.layout.num_plaintexts()) {
    return absl::InvalidArgumentError("bundle layout and count disagree");
  }
  bundle.ciphertexts.reserve(*count);
  for (uint32_t i = 0; i < *count; ++i) {
    absl::StatusOr<BigInt> v = ReadBigInt(bytes);
    if (!v.ok()) return v.status();
    bundle.ciphertexts.push_back(Ciphertext{*std::move(v)});
  }
  if (absl::Status s = ExpectConsumed(bytes); !s.ok()) return s;
  return bundle;
}

}  // namespace fedcrypt
