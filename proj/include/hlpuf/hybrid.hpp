#pragma once

// Hybrid PUF (classical responses encoded into BB84/MUB states) and the
// hybrid locked PUF, whose lock releases the second half of the response
// only after verifying the first half by measurement.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hlpuf/cpuf.hpp"
#include "hlpuf/qstate.hpp"
#include "hlpuf/random.hpp"

namespace hlpuf::hybrid {

using qstate::PureState;

class EncodingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SchemeKind { BB84, MUB4, MUB8 };

/// Block layout: each block holds `value_bits` value bits followed by
/// `basis_bits` basis bits, both most-significant first. The basis field
/// selects one of the first 2^basis_bits bases of the family.
struct EncodingScheme {
  SchemeKind kind;
  int value_bits;
  int basis_bits;

  int bits_per_block() const { return value_bits + basis_bits; }
  int qubits_per_block() const { return value_bits; }
  int dim() const { return 1 << value_bits; }
  const qstate::MubFamily& family() const;
  std::string name() const;

  /// Number of blocks in one half of an out_bits-wide response. Throws
  /// EncodingError unless out_bits is divisible by 2 * bits_per_block.
  int blocks_per_half(int out_bits) const;
};

EncodingScheme bb84_scheme();
EncodingScheme mub4_scheme();
EncodingScheme mub8_scheme();
EncodingScheme scheme_from_string(const std::string& name);

/// Split of one block's bits into (value index, basis index).
struct BlockSymbol {
  int value;
  int basis;
};

BlockSymbol block_symbol(std::span<const std::uint8_t> bits, const EncodingScheme& scheme);
Bits block_bits(BlockSymbol symbol, const EncodingScheme& scheme);

/// Encodes one block. BB84 (value, basis): (0,0)->|0>, (1,0)->|1>,
/// (0,1)->|+>, (1,1)->|->.
PureState encode_block(std::span<const std::uint8_t> bits, const EncodingScheme& scheme);

enum class Role { First, Second };

struct HalfResponse {
  Role role;
  std::vector<PureState> states;
  Bits classical_bits;  // kept by the server; empty on anything the device emits
};

/// Encodes a sequence of blocks.
std::vector<PureState> encode_bits(std::span<const std::uint8_t> bits, const EncodingScheme& scheme);

/// Bits of the requested half of a 4m-wide response.
std::span<const std::uint8_t> half_bits(std::span<const std::uint8_t> response, Role role);

/// Measures every received block in the basis named by `expected_bits` and
/// compares the outcome with the expected value. A wrong block count fails.
bool verify_by_measurement(std::span<const std::uint8_t> expected_bits,
                           std::span<const PureState> received,
                           const EncodingScheme& scheme, Rng& rng);

class HpufDevice {
 public:
  HpufDevice(std::shared_ptr<const cpuf::CpufModel> cpuf, EncodingScheme scheme);

  const cpuf::CpufModel& cpuf() const { return *cpuf_; }
  std::shared_ptr<const cpuf::CpufModel> cpuf_ptr() const { return cpuf_; }
  const EncodingScheme& scheme() const { return scheme_; }
  int n() const { return cpuf_->n(); }
  int blocks_per_half() const { return scheme_.blocks_per_half(cpuf_->out_bits()); }

  /// Fresh states for both halves. The device holds the classical
  /// description, so every call yields new copies.
  std::pair<HalfResponse, HalfResponse> eval(std::span<const std::uint8_t> challenge) const;
  /// Only one half, built from the same single CPUF evaluation.
  HalfResponse eval_half(std::span<const std::uint8_t> challenge, Role role) const;

 private:
  std::shared_ptr<const cpuf::CpufModel> cpuf_;
  EncodingScheme scheme_;
};

/// nullopt is the abort symbol: verification failed and nothing is released.
using LockOutput = std::optional<HalfResponse>;

class HlpufDevice {
 public:
  explicit HlpufDevice(HpufDevice hpuf);

  HlpufDevice(const HlpufDevice&) = delete;
  HlpufDevice& operator=(const HlpufDevice&) = delete;

  const HpufDevice& hpuf() const { return hpuf_; }
  /// Number of lock-passing queries so far.
  std::uint64_t query_log() const;

  /// Verifies `incoming` against the device's own first half; on success
  /// returns fresh second-half states, otherwise the abort symbol.
  LockOutput lock_query(std::span<const std::uint8_t> challenge, std::span<const PureState> incoming,
                        Rng& rng);

 private:
  HpufDevice hpuf_;
  mutable std::mutex mutex_;
  std::uint64_t query_log_ = 0;
};

/// Server side: encodes the requested half of a stored CRP.
HalfResponse server_encode(std::span<const std::uint8_t> response, Role role, const EncodingScheme& scheme);

enum class Verdict { Accept, Reject };

Verdict server_verify(const HalfResponse& expected, std::span<const PureState> received,
                      const EncodingScheme& scheme, Rng& rng);

}  // namespace hlpuf::hybrid
