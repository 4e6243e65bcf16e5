#include "hlpuf/hybrid.hpp"

namespace hlpuf::hybrid {

const qstate::MubFamily& EncodingScheme::family() const {
  switch (kind) {
    case SchemeKind::BB84: return qstate::bb84_family();
    case SchemeKind::MUB4: return qstate::mub4_family();
    case SchemeKind::MUB8: return qstate::mub8_family();
  }
  throw EncodingError("unknown scheme");
}

std::string EncodingScheme::name() const {
  switch (kind) {
    case SchemeKind::BB84: return "bb84";
    case SchemeKind::MUB4: return "mub4";
    case SchemeKind::MUB8: return "mub8";
  }
  return "unknown";
}

int EncodingScheme::blocks_per_half(int out_bits) const {
  const int half_block = 2 * bits_per_block();
  if (out_bits <= 0 || out_bits % half_block != 0) {
    throw EncodingError("out_bits = " + std::to_string(out_bits) + " is not a multiple of " +
                        std::to_string(half_block) + " for scheme " + name());
  }
  return out_bits / half_block;
}

EncodingScheme bb84_scheme() { return {SchemeKind::BB84, 1, 1}; }
EncodingScheme mub4_scheme() { return {SchemeKind::MUB4, 2, 2}; }
EncodingScheme mub8_scheme() { return {SchemeKind::MUB8, 3, 3}; }

EncodingScheme scheme_from_string(const std::string& name) {
  if (name == "bb84") return bb84_scheme();
  if (name == "mub4") return mub4_scheme();
  if (name == "mub8") return mub8_scheme();
  throw EncodingError("unknown encoding scheme '" + name + "'");
}

BlockSymbol block_symbol(std::span<const std::uint8_t> bits, const EncodingScheme& scheme) {
  if (static_cast<int>(bits.size()) != scheme.bits_per_block()) {
    throw EncodingError("block has " + std::to_string(bits.size()) + " bits, scheme " + scheme.name() +
                        " needs " + std::to_string(scheme.bits_per_block()));
  }
  BlockSymbol sym{0, 0};
  for (int i = 0; i < scheme.value_bits; ++i) sym.value = (sym.value << 1) | bits[static_cast<std::size_t>(i)];
  for (int i = 0; i < scheme.basis_bits; ++i) {
    sym.basis = (sym.basis << 1) | bits[static_cast<std::size_t>(scheme.value_bits + i)];
  }
  return sym;
}

Bits block_bits(BlockSymbol symbol, const EncodingScheme& scheme) {
  Bits out(static_cast<std::size_t>(scheme.bits_per_block()));
  for (int i = 0; i < scheme.value_bits; ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((symbol.value >> (scheme.value_bits - 1 - i)) & 1);
  }
  for (int i = 0; i < scheme.basis_bits; ++i) {
    out[static_cast<std::size_t>(scheme.value_bits + i)] =
        static_cast<std::uint8_t>((symbol.basis >> (scheme.basis_bits - 1 - i)) & 1);
  }
  return out;
}

PureState encode_block(std::span<const std::uint8_t> bits, const EncodingScheme& scheme) {
  for (auto b : bits) {
    if (b > 1) throw EncodingError("block bits must be 0 or 1");
  }
  const BlockSymbol sym = block_symbol(bits, scheme);
  return scheme.family().state(static_cast<std::size_t>(sym.basis), sym.value);
}

std::vector<PureState> encode_bits(std::span<const std::uint8_t> bits, const EncodingScheme& scheme) {
  const auto width = static_cast<std::size_t>(scheme.bits_per_block());
  if (bits.size() % width != 0) throw EncodingError("bit count is not a whole number of blocks");
  std::vector<PureState> states;
  states.reserve(bits.size() / width);
  for (std::size_t off = 0; off < bits.size(); off += width) {
    states.push_back(encode_block(bits.subspan(off, width), scheme));
  }
  return states;
}

std::span<const std::uint8_t> half_bits(std::span<const std::uint8_t> response, Role role) {
  if (response.size() % 2 != 0) throw EncodingError("response width must be even");
  const std::size_t half = response.size() / 2;
  return role == Role::First ? response.first(half) : response.subspan(half);
}

bool verify_by_measurement(std::span<const std::uint8_t> expected_bits, std::span<const PureState> received,
                           const EncodingScheme& scheme, Rng& rng) {
  const auto width = static_cast<std::size_t>(scheme.bits_per_block());
  if (expected_bits.size() % width != 0) throw EncodingError("expected bits are not a whole number of blocks");
  if (received.size() != expected_bits.size() / width) return false;
  const auto& family = scheme.family();
  // Every block is measured even after a mismatch, as the hardware would.
  bool all_match = true;
  for (std::size_t j = 0; j < received.size(); ++j) {
    if (received[j].dim() != scheme.dim()) {
      all_match = false;
      continue;
    }
    const BlockSymbol sym = block_symbol(expected_bits.subspan(j * width, width), scheme);
    const auto outcome = qstate::measure(received[j], family.basis(static_cast<std::size_t>(sym.basis)), rng);
    all_match = all_match && outcome.index == sym.value;
  }
  return all_match;
}

// ---------------------------------------------------------------------------

HpufDevice::HpufDevice(std::shared_ptr<const cpuf::CpufModel> cpuf, EncodingScheme scheme)
    : cpuf_(std::move(cpuf)), scheme_(scheme) {
  if (!cpuf_) throw EncodingError("HPUF needs a CPUF");
  scheme_.blocks_per_half(cpuf_->out_bits());  // validates the width
}

std::pair<HalfResponse, HalfResponse> HpufDevice::eval(std::span<const std::uint8_t> challenge) const {
  const Bits y = cpuf_->eval(challenge);
  return {HalfResponse{Role::First, encode_bits(half_bits(y, Role::First), scheme_), {}},
          HalfResponse{Role::Second, encode_bits(half_bits(y, Role::Second), scheme_), {}}};
}

HalfResponse HpufDevice::eval_half(std::span<const std::uint8_t> challenge, Role role) const {
  const Bits y = cpuf_->eval(challenge);
  return HalfResponse{role, encode_bits(half_bits(y, role), scheme_), {}};
}

HlpufDevice::HlpufDevice(HpufDevice hpuf) : hpuf_(std::move(hpuf)) {}

std::uint64_t HlpufDevice::query_log() const {
  std::lock_guard lock(mutex_);
  return query_log_;
}

LockOutput HlpufDevice::lock_query(std::span<const std::uint8_t> challenge, std::span<const PureState> incoming,
                                   Rng& rng) {
  std::lock_guard lock(mutex_);
  const Bits y = hpuf_.cpuf().eval(challenge);
  const auto first = half_bits(y, Role::First);
  if (!verify_by_measurement(first, incoming, hpuf_.scheme(), rng)) return std::nullopt;
  ++query_log_;
  return HalfResponse{Role::Second, encode_bits(half_bits(y, Role::Second), hpuf_.scheme()), {}};
}

HalfResponse server_encode(std::span<const std::uint8_t> response, Role role, const EncodingScheme& scheme) {
  scheme.blocks_per_half(static_cast<int>(response.size()));
  const auto bits = half_bits(response, role);
  return HalfResponse{role, encode_bits(bits, scheme), Bits(bits.begin(), bits.end())};
}

Verdict server_verify(const HalfResponse& expected, std::span<const PureState> received,
                      const EncodingScheme& scheme, Rng& rng) {
  return verify_by_measurement(expected.classical_bits, received, scheme, rng) ? Verdict::Accept
                                                                              : Verdict::Reject;
}

}  // namespace hlpuf::hybrid
