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

#include <random>
#include <vector>

#include "fedcrypt/random.h"
#include "gtest/gtest.h"

namespace fedcrypt {
namespace {

size_t Bits(const BigInt& v) { return mpz_sizeinbase(v.get_mpz_t(), 2); }

PaillierKeyPair TinyKey() {
  absl::StatusOr<PaillierKeyPair> kp = PaillierKeyPairFromPrimes(11, 13);
  EXPECT_TRUE(kp.ok()) << kp.status();
  return *kp;
}

PaillierKeyPair TestKey(int bits, uint64_t seed) {
  RandomStream rng(seed);
  absl::StatusOr<PaillierKeyPair> kp = GeneratePaillierKeyPair(bits, rng);
  EXPECT_TRUE(kp.ok()) << kp.status();
  return *kp;
}

TEST(PaillierTest, TinyKeyRoundTripsEveryPlaintext) {
  const PaillierKeyPair kp = TinyKey();
  EXPECT_EQ(kp.public_key.n, 143);
  PaillierPublicOps pub(kp.public_key);
  PaillierSecretOps sec(kp.secret_key);
  RandomStream rng(1);
  for (int m = 0; m < 143; ++m) {
    absl::StatusOr<Ciphertext> c = pub.Encrypt(m, rng);
    ASSERT_TRUE(c.ok());
    absl::StatusOr<BigInt> back = sec.Decrypt(*c);
    ASSERT_TRUE(back.ok());
    EXPECT_EQ(*back, m);
  }
  EXPECT_FALSE(pub.Encrypt(143, rng).ok());
  EXPECT_FALSE(pub.Encrypt(-1, rng).ok());
}

TEST(PaillierTest, RejectsBadPrimes) {
  EXPECT_FALSE(PaillierKeyPairFromPrimes(11, 11).ok());
  EXPECT_FALSE(PaillierKeyPairFromPrimes(11, 15).ok());
}

TEST(PaillierTest, KeygenSizeAndDeterminism) {
  const PaillierKeyPair a = TestKey(2048, 5);
  EXPECT_EQ(Bits(a.public_key.n), 2048u);
  EXPECT_EQ(a.public_key.g, a.public_key.n + 1);
  const PaillierKeyPair b = TestKey(2048, 5);
  EXPECT_EQ(a.public_key.n, b.public_key.n);
  EXPECT_EQ(a.secret_key.lambda, b.secret_key.lambda);
  const PaillierKeyPair c = TestKey(2048, 6);
  EXPECT_NE(a.public_key.n, c.public_key.n);
  for (int bits : {64, 66, 128, 512}) {
    EXPECT_EQ(Bits(TestKey(bits, bits).public_key.n), static_cast<size_t>(bits));
  }
  RandomStream rng(1);
  EXPECT_FALSE(GeneratePaillierKeyPair(32, rng).ok());
  EXPECT_FALSE(GeneratePaillierKeyPair(65, rng).ok());
}

TEST(PaillierTest, EncryptionIsRandomised) {
  const PaillierKeyPair kp = TestKey(256, 2);
  PaillierPublicOps pub(kp.public_key);
  PaillierSecretOps sec(kp.secret_key);
  RandomStream rng(3);
  const Ciphertext a = *pub.Encrypt(42, rng);
  const Ciphertext b = *pub.Encrypt(42, rng);
  EXPECT_NE(a.value, b.value);
  EXPECT_EQ(*sec.Decrypt(a), 42);
  EXPECT_EQ(*sec.Decrypt(b), 42);
  EXPECT_EQ(*sec.Decrypt(*pub.Encrypt(0, rng)), 0);
}

TEST(PaillierTest, AdditionDecryptsToSum) {
  const PaillierKeyPair kp = TestKey(256, 4);
  PaillierPublicOps pub(kp.public_key);
  PaillierSecretOps sec(kp.secret_key);
  RandomStream rng(5);
  gmp_randclass draw(gmp_randinit_mt);
  draw.seed(7);
  const BigInt half = kp.public_key.n / 2;
  for (int i = 0; i < 1000; ++i) {
    const BigInt a = draw.get_z_range(half);
    const BigInt b = draw.get_z_range(half);
    const std::vector<Ciphertext> cs = {*pub.Encrypt(a, rng),
                                        *pub.Encrypt(b, rng)};
    absl::StatusOr<Ciphertext> sum = pub.Add(cs);
    ASSERT_TRUE(sum.ok());
    ASSERT_EQ(*sec.Decrypt(*sum), a + b);
  }
  const std::vector<Ciphertext> one = {*pub.Encrypt(99, rng)};
  EXPECT_EQ(*sec.Decrypt(*pub.Add(one)), 99);
  EXPECT_FALSE(pub.Add({}).ok());
}

TEST(PaillierTest, RejectsMalformedCiphertext) {
  const PaillierKeyPair kp = TinyKey();
  PaillierSecretOps sec(kp.secret_key);
  EXPECT_FALSE(sec.Decrypt(Ciphertext{143 * 143}).ok());
  EXPECT_FALSE(sec.Decrypt(Ciphertext{-1}).ok());
}

TEST(PackTest, TwoSlotExample) {
  const SlotLayout layout{.slot_bits = 4, .guard_bits = 2, .slots = 2,
                          .dimension = 2};
  const std::vector<uint64_t> counts = {3, 5};
  absl::StatusOr<std::vector<PackedPlaintext>> packed = Pack(counts, layout, 4);
  ASSERT_TRUE(packed.ok()) << packed.status();
  ASSERT_EQ(packed->size(), 1u);
  EXPECT_EQ((*packed)[0].value, 323);
  EXPECT_EQ(Unpack(*packed, layout), counts);
}

TEST(PackTest, Errors) {
  const SlotLayout layout{.slot_bits = 4, .guard_bits = 2, .slots = 2,
                          .dimension = 2};
  const std::vector<uint64_t> ok = {3, 5};
  EXPECT_FALSE(Pack(ok, layout, 5).ok());  // needs 3 guard bits
  const std::vector<uint64_t> too_big = {16, 0};
  EXPECT_FALSE(Pack(too_big, layout, 4).ok());
  const std::vector<uint64_t> wrong_size = {1, 2, 3};
  EXPECT_FALSE(Pack(wrong_size, layout, 4).ok());
}

TEST(PackTest, GuardBitsAndLayout) {
  EXPECT_EQ(RequiredGuardBits(1), 0);
  EXPECT_EQ(RequiredGuardBits(2), 1);
  EXPECT_EQ(RequiredGuardBits(4), 2);
  EXPECT_EQ(RequiredGuardBits(5), 3);
  EXPECT_EQ(RequiredGuardBits(1000), 10);
  EXPECT_EQ(RequiredGuardBits(1024), 10);
  EXPECT_EQ(RequiredGuardBits(1025), 11);

  absl::StatusOr<SlotLayout> layout = MakeSlotLayout(2047, 26, 10, 1000, 1000);
  ASSERT_TRUE(layout.ok());
  EXPECT_EQ(layout->slots, 2047 / 36);
  EXPECT_EQ(layout->num_plaintexts(), (1000 + 55) / 56);
  EXPECT_FALSE(MakeSlotLayout(2047, 26, 9, 1000, 1000).ok());
  EXPECT_FALSE(MakeSlotLayout(30, 26, 10, 1000, 1000).ok());
}

TEST(PackTest, RoundTripProperty) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 100'000; ++trial) {
    const int slot_bits = 1 + gen() % 30;
    const int guard_bits = gen() % 8;
    const int slots = 1 + gen() % 8;
    const size_t dim = 1 + gen() % 20;
    const SlotLayout layout{.slot_bits = slot_bits, .guard_bits = guard_bits,
                            .slots = slots, .dimension = dim};
    std::vector<uint64_t> v(dim);
    for (uint64_t& x : v) x = gen() & ((uint64_t{1} << slot_bits) - 1);
    absl::StatusOr<std::vector<PackedPlaintext>> packed =
        Pack(v, layout, 1 << guard_bits);
    ASSERT_TRUE(packed.ok()) << packed.status();
    ASSERT_EQ(packed->size(), layout.num_plaintexts());
    ASSERT_EQ(Unpack(*packed, layout), v) << "trial " << trial;
  }
}

TEST(PackTest, SlotwiseAdditivity) {
  std::mt19937_64 gen(17);
  const SlotLayout layout{.slot_bits = 12, .guard_bits = 1, .slots = 5,
                          .dimension = 23};
  for (int trial = 0; trial < 10'000; ++trial) {
    std::vector<uint64_t> u(23), v(23), expected(23);
    for (int i = 0; i < 23; ++i) {
      u[i] = gen() % 4096;
      v[i] = gen() % 4096;
      expected[i] = u[i] + v[i];
    }
    std::vector<PackedPlaintext> pu = *Pack(u, layout, 2);
    const std::vector<PackedPlaintext> pv = *Pack(v, layout, 2);
    for (size_t j = 0; j < pu.size(); ++j) pu[j].value += pv[j].value;
    ASSERT_EQ(Unpack(pu, layout), expected);
  }
}

TEST(AggregateTest, ThousandOnesWithTenGuardBits) {
  const PaillierKeyPair kp = TestKey(512, 8);
  PaillierPublicOps pub(kp.public_key);
  PaillierSecretOps sec(kp.secret_key);
  absl::StatusOr<SlotLayout> layout =
      MakeSlotLayout(pub.plaintext_bits(), 26, 10, 1000, 14);
  ASSERT_TRUE(layout.ok());
  RandomStream rng(9);
  const std::vector<uint64_t> ones(14, 1);
  std::vector<Ciphertext> column;
  for (int k = 0; k < 1000; ++k) {
    absl::StatusOr<CiphertextBundle> b =
        EncryptCounts(pub, ones, *layout, 1000, rng);
    ASSERT_TRUE(b.ok());
    ASSERT_EQ(b->ciphertexts.size(), 1u);
    column.push_back(b->ciphertexts[0]);
  }
  CiphertextBundle total{.ciphertexts = {*pub.Add(column)}, .layout = *layout};
  absl::StatusOr<std::vector<uint64_t>> sums = DecryptCounts(sec, total);
  ASSERT_TRUE(sums.ok());
  EXPECT_EQ(*sums, std::vector<uint64_t>(14, 1000));
}

TEST(BackendTest, MockMatchesPaillierOnSums) {
  RandomStream key_rng(10);
  absl::StatusOr<Backend> paillier =
      MakeBackend(BackendKind::kPaillier, 512, key_rng);
  absl::StatusOr<Backend> mock = MakeBackend(BackendKind::kMock, 512, key_rng);
  ASSERT_TRUE(paillier.ok() && mock.ok());
  EXPECT_EQ(paillier->public_ops->plaintext_bits(),
            mock->public_ops->plaintext_bits());
  std::mt19937_64 gen(11);
  const size_t dim = 300;
  std::vector<std::vector<uint64_t>> inputs(10, std::vector<uint64_t>(dim));
  for (auto& v : inputs) {
    for (uint64_t& x : v) x = gen() % (uint64_t{1} << 26);
  }
  std::vector<std::vector<uint64_t>> results;
  for (const Backend* backend : {&*paillier, &*mock}) {
    absl::StatusOr<SlotLayout> layout = MakeSlotLayout(
        backend->public_ops->plaintext_bits(), 26, 10, 10, dim);
    ASSERT_TRUE(layout.ok());
    RandomStream rng(12);
    std::vector<CiphertextBundle> bundles;
    for (const auto& v : inputs) {
      bundles.push_back(
          *EncryptCounts(*backend->public_ops, v, *layout, 10, rng));
    }
    CiphertextBundle total{.layout = *layout};
    for (size_t j = 0; j < layout->num_plaintexts(); ++j) {
      std::vector<Ciphertext> column;
      for (const auto& b : bundles) column.push_back(b.ciphertexts[j]);
      total.ciphertexts.push_back(*backend->public_ops->Add(column));
    }
    results.push_back(*DecryptCounts(*backend->secret_ops, total));
  }
  EXPECT_EQ(results[0], results[1]);
  for (size_t i = 0; i < dim; ++i) {
    uint64_t expected = 0;
    for (const auto& v : inputs) expected += v[i];
    ASSERT_EQ(results[0][i], expected);
  }
}

TEST(BackendTest, NamesRoundTrip) {
  for (BackendKind kind : {BackendKind::kPaillier, BackendKind::kMock}) {
    EXPECT_EQ(*ParseBackend(BackendName(kind)), kind);
  }
  EXPECT_FALSE(ParseBackend("bfv").ok());
}

TEST(SerializationTest, BigIntEncoding) {
  std::string out;
  AppendBigInt(BigInt(0x0102), out);
  EXPECT_EQ(out, std::string("\x00\x00\x00\x02\x01\x02", 6));
  out.clear();
  AppendBigInt(BigInt(0), out);
  EXPECT_EQ(out, std::string("\x00\x00\x00\x00", 4));
  std::string_view in = out;
  absl::StatusOr<BigInt> zero = ReadBigInt(in);
  ASSERT_TRUE(zero.ok());
  EXPECT_EQ(*zero, 0);
  EXPECT_TRUE(in.empty());
  std::string_view truncated("\x00\x00\x00\x05\x01", 5);
  EXPECT_FALSE(ReadBigInt(truncated).ok());
}

TEST(SerializationTest, KeysRoundTrip) {
  const PaillierKeyPair kp = TestKey(1024, 14);
  absl::StatusOr<PaillierPublicKey> pub =
      ParsePublicKey(SerializePublicKey(kp.public_key));
  ASSERT_TRUE(pub.ok());
  EXPECT_EQ(pub->n, kp.public_key.n);
  EXPECT_EQ(pub->g, kp.public_key.g);
  EXPECT_EQ(pub->n_squared, kp.public_key.n_squared);
  absl::StatusOr<PaillierSecretKey> sec =
      ParseSecretKey(SerializeSecretKey(kp.secret_key));
  ASSERT_TRUE(sec.ok());
  EXPECT_EQ(sec->lambda, kp.secret_key.lambda);
  EXPECT_EQ(sec->mu, kp.secret_key.mu);
  EXPECT_EQ(sec->n, kp.secret_key.n);

  EXPECT_FALSE(ParsePublicKey(SerializeSecretKey(kp.secret_key)).ok());
  std::string bad = SerializePublicKey(kp.public_key);
  bad[4] = 9;  // version byte
  EXPECT_FALSE(ParsePublicKey(bad).ok());
  EXPECT_FALSE(ParsePublicKey(SerializePublicKey(kp.public_key).substr(0, 20)).ok());
}

TEST(SerializationTest, BundleRoundTrip) {
  const PaillierKeyPair kp = TestKey(256, 15);
  PaillierPublicOps pub(kp.public_key);
  absl::StatusOr<SlotLayout> layout =
      MakeSlotLayout(pub.plaintext_bits(), 26, 4, 10, 40);
  ASSERT_TRUE(layout.ok());
  RandomStream rng(16);
  std::vector<uint64_t> v(40);
  for (size_t i = 0; i < v.size(); ++i) v[i] = i * 1000;
  absl::StatusOr<CiphertextBundle> b = EncryptCounts(pub, v, *layout, 10, rng);
  ASSERT_TRUE(b.ok());
  absl::StatusOr<CiphertextBundle> back = ParseBundle(SerializeBundle(*b));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->layout, b->layout);
  EXPECT_EQ(back->ciphertexts, b->ciphertexts);
  const std::string bytes = SerializeBundle(*b);
  EXPECT_FALSE(ParseBundle(bytes.substr(0, bytes.size() - 1)).ok());
  EXPECT_FALSE(ParseBundle(bytes + "x").ok());
}

}  // namespace
}  // namespace fedcrypt
