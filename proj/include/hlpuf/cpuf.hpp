#pragma once

// Classical PUF emulators: additive-delay arbiter chains, k-XOR composition
// and an ideal biased random function.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlpuf/random.hpp"

namespace hlpuf::cpuf {

class CpufError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parity features of an arbiter chain: phi_i = prod_{j>=i} (1 - 2 c_j),
/// with a trailing constant 1. Length n + 1.
std::vector<double> feature_transform(std::span<const std::uint8_t> challenge);

/// Writes the features into `out` (size n + 1) without allocating.
void feature_transform_into(std::span<const std::uint8_t> challenge, std::span<double> out);

/// Single additive-delay arbiter chain. Response 1 iff the delay
/// difference <weights, phi(c)> is negative.
class ArbiterChain {
 public:
  ArbiterChain(int n, std::vector<double> weights);
  /// Weights i.i.d. N(0,1).
  static ArbiterChain random(int n, Rng& rng);

  int n() const { return n_; }
  const std::vector<double>& weights() const { return weights_; }

  double delay(std::span<const double> features) const;
  std::uint8_t eval_features(std::span<const double> features) const {
    return delay(features) < 0.0 ? 1 : 0;
  }

 private:
  int n_;
  std::vector<double> weights_;
};

class XorArbiterPuf {
 public:
  explicit XorArbiterPuf(std::vector<ArbiterChain> chains);
  static XorArbiterPuf random(int n, int k, Rng& rng);

  int n() const { return chains_.front().n(); }
  int k() const { return static_cast<int>(chains_.size()); }
  const std::vector<ArbiterChain>& chains() const { return chains_; }

  std::uint8_t eval_features(std::span<const double> features) const;

 private:
  std::vector<ArbiterChain> chains_;
};

/// Keyed pseudo-random function thresholded at p: every output bit is 0 with
/// probability p, independently across bits and challenges.
class IdealBiasedPuf {
 public:
  IdealBiasedPuf(int n, double p, std::uint64_t seed);

  int n() const { return n_; }
  double p() const { return p_; }
  std::uint64_t seed() const { return seed_; }

  std::uint8_t eval_bit(std::span<const std::uint8_t> challenge, int bit_index) const;

 private:
  int n_;
  double p_;
  std::uint64_t seed_;
};

enum class Kind { Arbiter, XorArbiter, IdealBiased };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);

/// Construction parameters of a CPUF. Arbiter is XorArbiter with k = 1.
struct ModelSpec {
  Kind kind = Kind::XorArbiter;
  int n = 32;
  int k = 1;
  int out_bits = 1;
  std::uint64_t seed = 0;
  double p = 0.5;           // IdealBiased only
  double flip_noise = 0.0;  // response flip probability for eval_noisy
};

/// A CPUF with `out_bits` outputs; each output bit is an independent
/// single-bit PUF instance with its own sub-seed.
class CpufModel {
 public:
  explicit CpufModel(const ModelSpec& spec);
  /// Arbiter models with explicit weights, indexed [output bit][chain].
  CpufModel(const ModelSpec& spec, std::vector<XorArbiterPuf> per_bit);

  const ModelSpec& spec() const { return spec_; }
  int n() const { return spec_.n; }
  int out_bits() const { return spec_.out_bits; }
  Kind kind() const { return spec_.kind; }
  /// Arbiter weights per output bit; empty for the ideal kind.
  const std::vector<XorArbiterPuf>& arbiters() const { return arbiters_; }

  /// Throws CpufError on a challenge length mismatch.
  Bits eval(std::span<const std::uint8_t> challenge) const;
  std::uint8_t eval_bit(std::span<const std::uint8_t> challenge, int bit_index) const;
  /// Bit evaluation on precomputed parity features (arbiter kinds only).
  std::uint8_t eval_bit_features(std::span<const double> features, int bit_index) const;

  /// eval followed by independent flips at spec().flip_noise.
  Bits eval_noisy(std::span<const std::uint8_t> challenge, Rng& rng) const;

 private:
  void check_challenge(std::span<const std::uint8_t> challenge) const;

  ModelSpec spec_;
  std::vector<XorArbiterPuf> arbiters_;
  std::vector<IdealBiasedPuf> ideals_;
};

struct QualityMetrics {
  double bias_estimate;   // max over bits of the majority-value frequency
  double inter_distance;  // mean fractional Hamming distance to a sibling model
  double intra_distance;  // repeated evaluation distance, 0 when noiseless
};

/// Throws CpufError if sample_count < 100. The sibling for inter_distance is
/// built from the same spec with a seed drawn from `rng`.
QualityMetrics quality_metrics(const CpufModel& model, int sample_count, Rng& rng);

/// Versioned line-oriented text format. Weights are written with 17
/// significant digits so a reload reproduces every response bit.
void save_model(const CpufModel& model, std::ostream& out);
CpufModel load_model(std::istream& in);

}  // namespace hlpuf::cpuf
