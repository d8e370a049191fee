#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include "mgsim/detection.hpp"
#include "mgsim/ledger.hpp"

using namespace mgsim;

namespace {

const KeyRing kKeys;

Payload steady_payload(double v = 315.0) { return {v, 14.0, 0.5, 315.0, 0.0, 0.0, 0.0, 0.0}; }

std::vector<Block> build_chain(std::size_t blocks, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Block> chain{genesis_block()};
  for (std::size_t h = 1; h < blocks; ++h) {
    const AgentId producer = h % 4;
    Payload p = steady_payload();
    p.v_out += u(rng);
    p.i_pu += 0.01 * u(rng);
    const auto tx = make_transaction(producer, h, h * 1e-3, p, kKeys);
    chain.push_back(seal_block({tx}, chain.back().hash, h, producer, h * 1e-3));
  }
  return chain;
}

// Every byte of a block that feeds its serialization or stored hash.
std::vector<std::span<std::uint8_t>> tamperable_bytes(Block& b) {
  auto view = [](auto& x, std::size_t n = sizeof(x)) {
    return std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(&x), n);
  };
  std::vector<std::span<std::uint8_t>> fields{view(b.height), std::span<std::uint8_t>(b.prev_hash),
                                              view(b.timestamp), view(b.producer, 4), std::span<std::uint8_t>(b.hash)};
  for (auto& tx : b.txs) {
    fields.push_back(view(tx.agent, 4));
    fields.push_back(view(tx.round));
    fields.push_back(view(tx.t));
    for (double* d : {&tx.payload.v_out, &tx.payload.i_amp, &tx.payload.i_pu, &tx.payload.v_bar, &tx.payload.dv1,
                      &tx.payload.delta, &tx.payload.dm1_prev, &tx.payload.dm2_prev})
      fields.push_back(view(*d));
    fields.push_back(std::span<std::uint8_t>(tx.signature));
  }
  return fields;
}

}  // namespace

TEST(Transaction, DeterministicSerializationAndSignature) {
  const auto a = make_transaction(1, 3, 0.003, steady_payload(), kKeys);
  const auto b = make_transaction(1, 3, 0.003, steady_payload(), kKeys);
  EXPECT_EQ(transaction_bytes(a), transaction_bytes(b));
  EXPECT_EQ(a.signature, b.signature);
  EXPECT_TRUE(kKeys.verify(a));
  EXPECT_FALSE(KeyRing(99).verify(a));
}

TEST(Transaction, NonFinitePayloadRejected) {
  auto p = steady_payload();
  p.dv1 = std::numeric_limits<double>::quiet_NaN();
  try {
    make_transaction(0, 1, 0.0, p, kKeys);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinitePayload);
  }
}

TEST(Transaction, RoundRegressionRejected) {
  for (std::uint64_t r : {4u, 5u}) {
    try {
      make_transaction(0, r, 0.0, steady_payload(), kKeys, 5);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::StaleRound);
    }
  }
  EXPECT_NO_THROW(make_transaction(0, 6, 0.0, steady_payload(), kKeys, 5));
}

TEST(Seal, MiningDelaySetsDeliveryTime) {
  const auto tx = make_transaction(0, 1, 1.0, steady_payload(), kKeys);
  const auto g = genesis_block();
  EXPECT_EQ(seal_block({tx}, g.hash, 1, 0, 1.0, 0.0).timestamp, 1.0);
  EXPECT_NEAR(seal_block({tx}, g.hash, 1, 0, 1.0, 0.425).timestamp, 1.425, 1e-12);
}

TEST(Seal, IdenticalContentIdenticalDigest) {
  const auto tx = make_transaction(2, 9, 0.5, steady_payload(), kKeys);
  const auto g = genesis_block();
  EXPECT_EQ(seal_block({tx}, g.hash, 1, 2, 0.5).hash, seal_block({tx}, g.hash, 1, 2, 0.5).hash);
}

TEST(Seal, EmptyBlockRejected) {
  try {
    seal_block({}, genesis_block().hash, 1, 0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyBlock);
  }
}

TEST(Hash, EveryBitFlipChangesDigest) {
  const auto chain = build_chain(2, 1);
  const Bytes body = block_bytes(chain[1]);
  const Digest d = sha256(body);
  for (std::size_t i = 0; i < body.size(); ++i)
    for (int bit = 0; bit < 8; ++bit) {
      Bytes m = body;
      m[i] ^= static_cast<std::uint8_t>(1u << bit);
      ASSERT_NE(sha256(m), d) << "byte " << i << " bit " << bit;
    }
}

TEST(Hash, IdenticalBlocksIdenticalDigests) {
  const auto a = build_chain(5, 3), b = build_chain(5, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(hash_block(a[i]), hash_block(b[i]));
}

TEST(Hash, PinnedEmptyBlockVector) {
  EXPECT_EQ(to_hex(genesis_block().hash), "d4817aa5497628e7c77e6b606107042bbba3130888c5f47a375e6179be789fbb");
}

TEST(Hash, PinnedSingleTransactionVector) {
  const Payload p = Payload::from_values(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  const auto tx = make_transaction(2, 7, 0.5, p, KeyRing(0x6d6773696dULL));
  EXPECT_EQ(to_hex(tx.signature), "37e8f412daef3e7807b52802c6df58dc23bf950b4a8fca587b47d3c83ec7c9e8");
  const auto b = seal_block({tx}, genesis_block().hash, 1, 2, 0.5);
  EXPECT_EQ(to_hex(b.hash), "fc1efb3b613713073a0f74daedc95857203e771a2662f80d108d715bf4fc8be1");
}

TEST(Hash, HexRoundTrip) {
  const auto d = genesis_block().hash;
  EXPECT_EQ(digest_from_hex(to_hex(d)), d);
  EXPECT_THROW(digest_from_hex("abc"), Error);
}

TEST(Validate, PrevHashMismatch) {
  Replica r;
  const auto tx = make_transaction(0, 1, 0.0, steady_payload(), kKeys);
  Digest wrong{};
  wrong[0] = 1;
  const auto b = seal_block({tx}, wrong, 1, 0, 0.0);
  const auto v = validate_block(3, b, r, kKeys);
  EXPECT_EQ(v.decision, Decision::Reject);
  EXPECT_EQ(v.reason, Reason::HashMismatch);
}

TEST(Validate, PhysicsViolationAndCleanPath) {
  const auto g = build_graph(2, {{0, 1, 1.0}});
  DetectionParams dp;
  Replica r;
  // Contract: substitute the producer's dv1 into the committed view and
  // evaluate the voltage metric over its neighborhood.
  auto contract = [&](const Block& b) {
    Vector dv1{0.0, 0.0}, ipu{0.5, 0.5};
    dv1[b.producer] = b.txs.front().payload.dv1;
    return neighborhood_check(dv1, ipu, g, b.producer, dp).violation();
  };
  auto bad = steady_payload();
  bad.dv1 = 0.2;
  const auto b_bad = seal_block({make_transaction(0, 1, 0.0, bad, kKeys)}, r.tip().hash, 1, 0, 0.0);
  const auto v_bad = validate_block(1, b_bad, r, kKeys, contract);
  EXPECT_EQ(v_bad.decision, Decision::Reject);
  EXPECT_EQ(v_bad.reason, Reason::PhysicsViolation);

  const auto b_ok = seal_block({make_transaction(0, 1, 0.0, steady_payload(), kKeys)}, r.tip().hash, 1, 0, 0.0);
  const auto v_ok = validate_block(1, b_ok, r, kKeys, contract);
  EXPECT_EQ(v_ok.decision, Decision::Accept);
  EXPECT_EQ(v_ok.reason, Reason::Ok);
}

TEST(Validate, StaleRoundAndBadSignature) {
  Replica r;
  const auto b1 = seal_block({make_transaction(0, 5, 0.0, steady_payload(), kKeys)}, r.tip().hash, 1, 0, 0.0);
  r.append(b1);
  const auto b2 = seal_block({make_transaction(0, 5, 0.0, steady_payload(), kKeys)}, r.tip().hash, 2, 0, 0.0);
  EXPECT_EQ(validate_block(1, b2, r, kKeys).reason, Reason::StaleRound);
  auto tx = make_transaction(0, 6, 0.0, steady_payload(), kKeys);
  tx.payload.v_out += 1.0;
  const auto b3 = seal_block({tx}, r.tip().hash, 2, 0, 0.0);
  EXPECT_EQ(validate_block(1, b3, r, kKeys).reason, Reason::HashMismatch);
}

TEST(Commit, MajorityRule) {
  auto votes = [](std::initializer_list<bool> accepts) {
    std::vector<Verdict> v;
    AgentId k = 0;
    for (bool a : accepts) v.push_back({k++, {}, a ? Decision::Accept : Decision::Reject, Reason::Ok});
    return v;
  };
  EXPECT_TRUE(commit_round(votes({true, true, true, false}), 4).committed);
  EXPECT_FALSE(commit_round(votes({true, true, false, false}), 4).committed);
  const auto partial = commit_round(votes({true, true}), 4);
  EXPECT_FALSE(partial.committed);
  EXPECT_EQ(partial.missing, 2u);
}

TEST(VerifyChain, CleanChain) {
  const auto chain = build_chain(20, 5);
  EXPECT_FALSE(verify_chain(chain).has_value());
}

TEST(VerifyChain, PayloadByteAtHeightFive) {
  auto chain = build_chain(20, 5);
  reinterpret_cast<std::uint8_t*>(&chain[5].txs[0].payload.i_amp)[3] ^= 0x40;
  EXPECT_EQ(verify_chain(chain), std::optional<std::uint64_t>(5));
}

TEST(VerifyChain, GenesisTamper) {
  auto chain = build_chain(20, 5);
  chain[0].timestamp = 1.0;
  EXPECT_EQ(verify_chain(chain), std::optional<std::uint64_t>(0));
}

TEST(VerifyChain, RandomSingleByteTampersAreLocalized) {
  std::mt19937_64 rng(8);
  const auto clean = build_chain(100, 9);
  ASSERT_FALSE(verify_chain(clean).has_value());
  std::size_t located = 0;
  const std::size_t trials = 1000;
  for (std::size_t t = 0; t < trials; ++t) {
    auto chain = clean;
    const std::size_t h = std::uniform_int_distribution<std::size_t>(0, chain.size() - 1)(rng);
    auto fields = tamperable_bytes(chain[h]);
    auto& f = fields[std::uniform_int_distribution<std::size_t>(0, fields.size() - 1)(rng)];
    f[std::uniform_int_distribution<std::size_t>(0, f.size() - 1)(rng)] ^=
        static_cast<std::uint8_t>(std::uniform_int_distribution<int>(1, 255)(rng));
    if (verify_chain(chain) == std::optional<std::uint64_t>(h)) ++located;
  }
  EXPECT_EQ(located, trials);
}

TEST(Dump, JsonRoundTrip) {
  const auto chain = build_chain(10, 2);
  std::stringstream ss;
  write_dump(ss, chain);
  const auto back = read_dump(ss);
  EXPECT_EQ(back, chain);
  EXPECT_FALSE(verify_chain(back).has_value());
}

TEST(Dump, MalformedLine) {
  std::stringstream ss("{\"height\": 0}\n");
  try {
    read_dump(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
}
