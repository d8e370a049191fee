#pragma once

// Per-agent hash-chained ledger. Blocks carry one producer's transactions for
// a communication round; digests are SHA-256 over a canonical little-endian
// serialization and transaction signatures are HMAC-SHA256 under a per-agent
// key.
//
// Canonical transaction bytes (signature excluded):
//   u32 agent | u64 round | f64 t | u32 n | f64 payload[n]
// Canonical block bytes (hash excluded):
//   u64 height | 32B prev_hash | f64 timestamp | u32 producer | u32 tx_count |
//   per tx: transaction bytes | 32B signature

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "json.hpp"
#include "mgsim/core.hpp"

namespace mgsim {

using Digest = std::array<std::uint8_t, 32>;
using Bytes = std::vector<std::uint8_t>;

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
    throw Error(ErrorKind::IoError, "SHA-256 failed");
  return d;
}

inline Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Digest d{};
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), d.data(),
            &len) ||
      len != 32)
    throw Error(ErrorKind::IoError, "HMAC-SHA256 failed");
  return d;
}

inline std::string to_hex(std::span<const std::uint8_t> d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(d.size() * 2);
  for (auto b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

inline Digest digest_from_hex(const std::string& hex) {
  if (hex.size() != 64) throw Error(ErrorKind::ParseError, "digest must be 64 hex chars");
  Digest d{};
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorKind::ParseError, std::string("bad hex digit '") + c + "'");
  };
  for (std::size_t i = 0; i < 32; ++i) d[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return d;
}

class ByteWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    std::array<std::uint8_t, sizeof(T)> raw;
    std::memcpy(raw.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }
  void put(std::span<const std::uint8_t> raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }

  const Bytes& bytes() const noexcept { return bytes_; }
  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

// What an agent publishes each round. Field order is the serialization order.
struct Payload {
  double v_out = 0.0;     // measured terminal voltage (V)
  double i_amp = 0.0;     // output current (A)
  double i_pu = 0.0;      // output current / I_max
  double v_bar = 0.0;     // observer estimate (V)
  double dv1 = 0.0;       // voltage correction (V)
  double delta = 0.0;     // current mismatch (pu)
  double dm1_prev = 0.0;  // previous-round detection metrics
  double dm2_prev = 0.0;

  static constexpr std::size_t kSize = 8;

  std::array<double, kSize> values() const {
    return {v_out, i_amp, i_pu, v_bar, dv1, delta, dm1_prev, dm2_prev};
  }
  static Payload from_values(std::span<const double> v) {
    if (v.size() != kSize) throw Error(ErrorKind::DimensionMismatch, "payload needs 8 values");
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
  }
  bool operator==(const Payload&) const = default;
};

struct Transaction {
  AgentId agent = 0;
  std::uint64_t round = 0;
  double t = 0.0;
  Payload payload;
  Digest signature{};

  bool operator==(const Transaction&) const = default;
};

inline void write_tx_body(ByteWriter& w, const Transaction& tx) {
  w.put(static_cast<std::uint32_t>(tx.agent));
  w.put(tx.round);
  w.put(tx.t);
  w.put(static_cast<std::uint32_t>(Payload::kSize));
  for (double v : tx.payload.values()) w.put(v);
}

inline Bytes transaction_bytes(const Transaction& tx) {
  ByteWriter w;
  write_tx_body(w, tx);
  return w.take();
}

// Emulated identity keys: each agent's key is derived from a run secret.
class KeyRing {
 public:
  explicit KeyRing(std::uint64_t secret = 0x6d6773696dULL) : secret_(secret) {}

  Bytes key(AgentId agent) const {
    ByteWriter w;
    w.put(secret_);
    w.put(static_cast<std::uint32_t>(agent));
    Digest d = sha256(w.bytes());
    return {d.begin(), d.end()};
  }

  Digest sign(const Transaction& tx) const { return hmac_sha256(key(tx.agent), transaction_bytes(tx)); }
  bool verify(const Transaction& tx) const { return sign(tx) == tx.signature; }

 private:
  std::uint64_t secret_;
};

// Packages and signs a payload. `last_round` is the agent's previous round,
// if any; rounds must strictly increase.
inline Transaction make_transaction(AgentId agent, std::uint64_t round, double t, const Payload& payload,
                                    const KeyRing& keys, std::optional<std::uint64_t> last_round = {}) {
  const auto vals = payload.values();
  if (!all_finite(vals) || !std::isfinite(t))
    throw Error(ErrorKind::NonFinitePayload, "agent " + std::to_string(agent) + " round " + std::to_string(round));
  if (last_round && round <= *last_round)
    throw Error(ErrorKind::StaleRound, "round " + std::to_string(round) + " <= " + std::to_string(*last_round));
  Transaction tx{agent, round, t, payload, {}};
  tx.signature = keys.sign(tx);
  return tx;
}

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  double timestamp = 0.0;
  AgentId producer = 0;
  std::vector<Transaction> txs;
  Digest hash{};

  bool operator==(const Block&) const = default;
};

inline Bytes block_bytes(const Block& b) {
  ByteWriter w;
  w.put(b.height);
  w.put(b.prev_hash);
  w.put(b.timestamp);
  w.put(static_cast<std::uint32_t>(b.producer));
  w.put(static_cast<std::uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) {
    write_tx_body(w, tx);
    w.put(tx.signature);
  }
  return w.take();
}

inline Digest hash_block(const Block& b) { return sha256(block_bytes(b)); }

inline Block genesis_block() {
  Block g;
  g.hash = hash_block(g);
  return g;
}

// Seals at `t_seal`; the block becomes deliverable `mining_delay` later and
// carries that instant as its timestamp.
inline Block seal_block(std::vector<Transaction> txs, const Digest& prev_hash, std::uint64_t height,
                        AgentId producer, double t_seal, double mining_delay = 0.0) {
  if (txs.empty()) throw Error(ErrorKind::EmptyBlock, "producer " + std::to_string(producer));
  if (!(mining_delay >= 0.0)) throw Error(ErrorKind::InvalidParams, "mining delay must be >= 0");
  Block b{height, prev_hash, t_seal + mining_delay, producer, std::move(txs), {}};
  b.hash = hash_block(b);
  return b;
}

// Lowest height whose stored hash, height or linkage is wrong.
inline std::optional<std::uint64_t> verify_chain(std::span<const Block> chain) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Block& b = chain[i];
    const Digest expected_prev = i == 0 ? Digest{} : chain[i - 1].hash;
    if (b.height != i || b.prev_hash != expected_prev || hash_block(b) != b.hash) return i;
  }
  return std::nullopt;
}

enum class Decision { Accept, Reject };
enum class Reason { Ok, HashMismatch, PhysicsViolation, StaleRound };

inline const char* to_string(Reason r) {
  switch (r) {
    case Reason::Ok: return "ok";
    case Reason::HashMismatch: return "hash_mismatch";
    case Reason::PhysicsViolation: return "physics_violation";
    case Reason::StaleRound: return "stale_round";
  }
  return "?";
}

struct Verdict {
  AgentId voter = 0;
  Digest block_ref{};
  Decision decision = Decision::Reject;
  Reason reason = Reason::HashMismatch;
};

// One agent's copy of the chain plus the per-producer round high-water marks.
class Replica {
 public:
  Replica() : chain_{genesis_block()} {}

  const std::vector<Block>& chain() const noexcept { return chain_; }
  const Block& tip() const { return chain_.back(); }
  std::uint64_t next_height() const { return chain_.size(); }

  std::optional<std::uint64_t> last_round(AgentId agent) const {
    auto it = rounds_.find(agent);
    if (it == rounds_.end()) return std::nullopt;
    return it->second;
  }

  // Structural checks: linkage, recomputed hash, signatures, round order.
  Reason check_structure(const Block& b, const KeyRing& keys) const {
    if (b.prev_hash != tip().hash || b.height != next_height() || hash_block(b) != b.hash)
      return Reason::HashMismatch;
    for (const auto& tx : b.txs) {
      if (tx.agent != b.producer || !keys.verify(tx)) return Reason::HashMismatch;
      if (auto last = last_round(tx.agent); last && tx.round <= *last) return Reason::StaleRound;
    }
    return Reason::Ok;
  }

  void append(const Block& b) {
    chain_.push_back(b);
    for (const auto& tx : b.txs) rounds_[tx.agent] = tx.round;
  }

  bool operator==(const Replica& o) const { return chain_ == o.chain_; }

 private:
  std::vector<Block> chain_;
  std::map<AgentId, std::uint64_t> rounds_;
};

// Structural validation followed by the physics contract, a predicate that
// returns true when the block's payload violates it.
template <class Contract>
Verdict validate_block(AgentId voter, const Block& b, const Replica& local, const KeyRing& keys,
                       Contract&& violates) {
  Verdict v{voter, b.hash, Decision::Reject, local.check_structure(b, keys)};
  if (v.reason != Reason::Ok) return v;
  if (violates(b)) {
    v.reason = Reason::PhysicsViolation;
    return v;
  }
  v.decision = Decision::Accept;
  return v;
}

inline Verdict validate_block(AgentId voter, const Block& b, const Replica& local, const KeyRing& keys) {
  return validate_block(voter, b, local, keys, [](const Block&) { return false; });
}

struct CommitOutcome {
  bool committed = false;
  std::size_t accepts = 0;
  std::size_t rejects = 0;
  std::size_t missing = 0;
};

// Majority rule: commit iff accepts > rejects. Ties reject and missing votes
// count against.
inline CommitOutcome commit_round(std::span<const Verdict> verdicts, std::size_t voters) {
  CommitOutcome o;
  for (const auto& v : verdicts) (v.decision == Decision::Accept ? o.accepts : o.rejects)++;
  o.missing = voters > verdicts.size() ? voters - verdicts.size() : 0;
  o.rejects += o.missing;
  o.committed = o.accepts > o.rejects;
  return o;
}

// Line-delimited JSON dump, one block per line.
inline nlohmann::json block_to_json(const Block& b) {
  nlohmann::json txs = nlohmann::json::array();
  for (const auto& tx : b.txs) {
    const auto vals = tx.payload.values();
    txs.push_back({{"agent", tx.agent},
                   {"round", tx.round},
                   {"t", tx.t},
                   {"payload", std::vector<double>(vals.begin(), vals.end())},
                   {"signature", to_hex(tx.signature)}});
  }
  return {{"height", b.height},         {"producer", b.producer},         {"timestamp", b.timestamp},
          {"prev_hash", to_hex(b.prev_hash)}, {"hash", to_hex(b.hash)}, {"txs", std::move(txs)}};
}

inline Block block_from_json(const nlohmann::json& j) {
  try {
    Block b;
    b.height = j.at("height").get<std::uint64_t>();
    b.producer = j.at("producer").get<AgentId>();
    b.timestamp = j.at("timestamp").get<double>();
    b.prev_hash = digest_from_hex(j.at("prev_hash").get<std::string>());
    b.hash = digest_from_hex(j.at("hash").get<std::string>());
    for (const auto& t : j.at("txs")) {
      Transaction tx;
      tx.agent = t.at("agent").get<AgentId>();
      tx.round = t.at("round").get<std::uint64_t>();
      tx.t = t.at("t").get<double>();
      tx.payload = Payload::from_values(t.at("payload").get<std::vector<double>>());
      tx.signature = digest_from_hex(t.at("signature").get<std::string>());
      b.txs.push_back(std::move(tx));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

inline void write_dump(std::ostream& os, std::span<const Block> chain) {
  for (const auto& b : chain) os << block_to_json(b).dump() << '\n';
}

inline std::vector<Block> read_dump(std::istream& is) {
  std::vector<Block> chain;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(n) + ": " + e.what());
    }
    chain.push_back(block_from_json(j));
  }
  return chain;
}

inline std::vector<Block> read_dump_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return read_dump(in);
}

}  // namespace mgsim
