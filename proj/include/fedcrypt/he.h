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

// Additively homomorphic aggregation of packed quantised counts.
//
// Counts are packed into big-integer plaintexts as fixed-width bit fields
// (slot_bits of value plus guard_bits of carry headroom), encrypted under
// Paillier, and summed by ciphertext multiplication. Guard bits keep a K-way
// slot sum from carrying into the neighbouring slot; the per-slot reduction
// mod 2^slot_bits happens client-side after decryption.
//
// Public operations (encrypt, add) and secret operations (decrypt) live in
// separate interfaces so that the server side only ever holds the former.

#ifndef FEDCRYPT_HE_H_
#define FEDCRYPT_HE_H_

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcrypt/random.h"

namespace fedcrypt {

using BigInt = mpz_class;

inline constexpr int kDefaultKeyBits = 2048;
inline constexpr int kMinKeyBits = 64;
inline constexpr int kMinSecureKeyBits = 1024;
inline constexpr int kDefaultSlotBits = 26;
inline constexpr int kDefaultGuardBits = 10;

struct PaillierPublicKey {
  BigInt n;
  BigInt g;  // n + 1
  BigInt n_squared;
};

struct PaillierSecretKey {
  BigInt n;
  BigInt lambda;  // lcm(p - 1, q - 1)
  BigInt mu;      // lambda^-1 mod n
  BigInt n_squared;
};

struct PaillierKeyPair {
  PaillierPublicKey public_key;
  PaillierSecretKey secret_key;
};

// Random primes p, q of key_bits / 2 bits each with n = pq of exactly
// key_bits bits. Deterministic in the stream.
absl::StatusOr<PaillierKeyPair> GeneratePaillierKeyPair(int key_bits,
                                                        RandomStream& rng);
// Builds a key from given distinct primes; intended for tiny test keys.
absl::StatusOr<PaillierKeyPair> PaillierKeyPairFromPrimes(const BigInt& p,
                                                          const BigInt& q);

struct Ciphertext {
  BigInt value;
  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

// Bit-field layout shared by every plaintext of a bundle.
struct SlotLayout {
  int slot_bits = kDefaultSlotBits;
  int guard_bits = kDefaultGuardBits;
  int slots = 1;          // slots per plaintext
  size_t dimension = 0;   // total number of packed values

  int width() const { return slot_bits + guard_bits; }
  size_t num_plaintexts() const {
    return (dimension + slots - 1) / static_cast<size_t>(slots);
  }
  friend bool operator==(const SlotLayout&, const SlotLayout&) = default;
};

// Smallest guard width that absorbs a K_max-way sum: ceil(log2(K_max)).
int RequiredGuardBits(int max_summands);

// Fits as many slots as possible below 2^(plaintext_bits). Errors if the
// guard is too narrow for max_summands or not even one slot fits.
absl::StatusOr<SlotLayout> MakeSlotLayout(int plaintext_bits, int slot_bits,
                                          int guard_bits, int max_summands,
                                          size_t dimension);

struct PackedPlaintext {
  BigInt value;
  int slot_bits = 0;
  int guard_bits = 0;
  int slots = 0;
};

// Slot i of plaintext j holds counts[j * slots + i] at bit offset
// i * width(). Every count must be < 2^slot_bits.
absl::StatusOr<std::vector<PackedPlaintext>> Pack(
    std::span<const uint64_t> counts, const SlotLayout& layout,
    int max_summands);

// Inverse of Pack over the full field width (value + guard), so sums of
// packed plaintexts unpack to slot-wise sums.
std::vector<uint64_t> Unpack(std::span<const PackedPlaintext> plaintexts,
                             const SlotLayout& layout);

struct CiphertextBundle {
  std::vector<Ciphertext> ciphertexts;
  SlotLayout layout;
};

enum class BackendKind { kPaillier, kMock };
std::string_view BackendName(BackendKind kind);
absl::StatusOr<BackendKind> ParseBackend(std::string_view name);

// Operations available without the secret key.
class PublicOps {
 public:
  virtual ~PublicOps() = default;
  // Plaintexts must be < 2^plaintext_bits() (and < n).
  virtual int plaintext_bits() const = 0;
  virtual absl::StatusOr<Ciphertext> Encrypt(const BigInt& m,
                                             RandomStream& rng) const = 0;
  // Dec(Add(c_1..c_k)) = sum m_i mod n.
  virtual absl::StatusOr<Ciphertext> Add(
      std::span<const Ciphertext> ciphertexts) const = 0;
};

class SecretOps {
 public:
  virtual ~SecretOps() = default;
  virtual absl::StatusOr<BigInt> Decrypt(const Ciphertext& c) const = 0;
};

class PaillierPublicOps final : public PublicOps {
 public:
  explicit PaillierPublicOps(PaillierPublicKey key);
  int plaintext_bits() const override;
  absl::StatusOr<Ciphertext> Encrypt(const BigInt& m,
                                     RandomStream& rng) const override;
  absl::StatusOr<Ciphertext> Add(
      std::span<const Ciphertext> ciphertexts) const override;
  const PaillierPublicKey& key() const { return key_; }

 private:
  PaillierPublicKey key_;
};

class PaillierSecretOps final : public SecretOps {
 public:
  explicit PaillierSecretOps(PaillierSecretKey key);
  absl::StatusOr<BigInt> Decrypt(const Ciphertext& c) const override;

 private:
  PaillierSecretKey key_;
};

// Plaintext pass-through with the Paillier functional contract: the
// "ciphertext" is the plaintext and Add is integer addition mod the same
// n-sized modulus. For equivalence tests and fast runs.
class MockPublicOps final : public PublicOps {
 public:
  explicit MockPublicOps(int key_bits);
  int plaintext_bits() const override { return key_bits_ - 1; }
  absl::StatusOr<Ciphertext> Encrypt(const BigInt& m,
                                     RandomStream& rng) const override;
  absl::StatusOr<Ciphertext> Add(
      std::span<const Ciphertext> ciphertexts) const override;

 private:
  int key_bits_;
  BigInt modulus_;
};

class MockSecretOps final : public SecretOps {
 public:
  explicit MockSecretOps(int key_bits);
  absl::StatusOr<BigInt> Decrypt(const Ciphertext& c) const override;

 private:
  BigInt modulus_;
};

struct Backend {
  std::shared_ptr<const PublicOps> public_ops;
  std::shared_ptr<const SecretOps> secret_ops;
};

// Paillier keys are drawn from rng; the mock draws nothing.
absl::StatusOr<Backend> MakeBackend(BackendKind kind, int key_bits,
                                    RandomStream& rng);

// Packs and encrypts a count vector.
absl::StatusOr<CiphertextBundle> EncryptCounts(
    const PublicOps& ops, std::span<const uint64_t> counts,
    const SlotLayout& layout, int max_summands, RandomStream& rng);

// Decrypts and unpacks to per-slot sums (not yet reduced mod 2^slot_bits).
absl::StatusOr<std::vector<uint64_t>> DecryptCounts(
    const SecretOps& ops, const CiphertextBundle& bundle);

// Serialisation: every big integer is a 4-byte big-endian length followed by
// that many big-endian magnitude bytes. See docs/formats.md.
void AppendBigInt(const BigInt& value, std::string& out);
absl::StatusOr<BigInt> ReadBigInt(std::string_view& in);

std::string SerializePublicKey(const PaillierPublicKey& key);
absl::StatusOr<PaillierPublicKey> ParsePublicKey(std::string_view bytes);
std::string SerializeSecretKey(const PaillierSecretKey& key);
absl::StatusOr<PaillierSecretKey> ParseSecretKey(std::string_view bytes);
std::string SerializeBundle(const CiphertextBundle& bundle);
absl::StatusOr<CiphertextBundle> ParseBundle(std::string_view bytes);

}  // namespace fedcrypt

#endif  // FEDCRYPT_HE_H_
