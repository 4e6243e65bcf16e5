#include "hlpuf/cpuf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace hlpuf::cpuf {

namespace {

constexpr const char* kFormatHeader = "hlpuf-cpuf v1";
constexpr std::uint64_t kBitStream = 0x6269742d73656564ULL;      // "bit-seed"
constexpr std::uint64_t kSiblingStream = 0x7369626c696e6721ULL;  // "sibling!"

void check_bits(std::span<const std::uint8_t> challenge) {
  for (auto b : challenge) {
    if (b > 1) throw CpufError("challenge bits must be 0 or 1");
  }
}

}  // namespace

std::vector<double> feature_transform(std::span<const std::uint8_t> challenge) {
  std::vector<double> out(challenge.size() + 1);
  feature_transform_into(challenge, out);
  return out;
}

void feature_transform_into(std::span<const std::uint8_t> challenge, std::span<double> out) {
  if (out.size() != challenge.size() + 1) throw CpufError("feature buffer must have n+1 entries");
  check_bits(challenge);
  double acc = 1.0;
  out.back() = 1.0;
  for (std::size_t i = challenge.size(); i-- > 0;) {
    acc *= challenge[i] ? -1.0 : 1.0;
    out[i] = acc;
  }
}

// ---------------------------------------------------------------------------

ArbiterChain::ArbiterChain(int n, std::vector<double> weights) : n_(n), weights_(std::move(weights)) {
  if (n < 1) throw CpufError("arbiter chain needs n >= 1");
  if (weights_.size() != static_cast<std::size_t>(n) + 1) {
    throw CpufError("arbiter chain needs n+1 weights");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw CpufError("arbiter weights must be finite");
  }
}

ArbiterChain ArbiterChain::random(int n, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(n) + 1);
  for (auto& x : w) x = rng.normal();
  return ArbiterChain(n, std::move(w));
}

double ArbiterChain::delay(std::span<const double> features) const {
  if (features.size() != weights_.size()) throw CpufError("feature length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) acc += weights_[i] * features[i];
  return acc;
}

XorArbiterPuf::XorArbiterPuf(std::vector<ArbiterChain> chains) : chains_(std::move(chains)) {
  if (chains_.empty()) throw CpufError("XOR PUF needs k >= 1 chains");
  for (const auto& c : chains_) {
    if (c.n() != chains_.front().n()) throw CpufError("XOR PUF chains must share n");
  }
}

XorArbiterPuf XorArbiterPuf::random(int n, int k, Rng& rng) {
  if (k < 1) throw CpufError("XOR PUF needs k >= 1 chains");
  std::vector<ArbiterChain> chains;
  chains.reserve(static_cast<std::size_t>(k));
  for (int l = 0; l < k; ++l) chains.push_back(ArbiterChain::random(n, rng));
  return XorArbiterPuf(std::move(chains));
}

std::uint8_t XorArbiterPuf::eval_features(std::span<const double> features) const {
  std::uint8_t r = 0;
  for (const auto& c : chains_) r ^= c.eval_features(features);
  return r;
}

IdealBiasedPuf::IdealBiasedPuf(int n, double p, std::uint64_t seed) : n_(n), p_(p), seed_(seed) {
  if (n < 1) throw CpufError("ideal PUF needs n >= 1");
  if (!(p >= 0.5 && p <= 1.0)) throw CpufError("ideal PUF bias p must lie in [0.5, 1]");
}

std::uint8_t IdealBiasedPuf::eval_bit(std::span<const std::uint8_t> challenge, int bit_index) const {
  // Hash the challenge 64 bits at a time under the key, then threshold.
  std::uint64_t h = mix64(seed_ ^ (static_cast<std::uint64_t>(bit_index) * 0xd1b54a32d192ed03ULL));
  std::uint64_t word = 0;
  int filled = 0;
  for (auto b : challenge) {
    word = (word << 1) | b;
    if (++filled == 64) {
      h = mix64(h ^ word);
      word = 0;
      filled = 0;
    }
  }
  h = mix64(h ^ word ^ (static_cast<std::uint64_t>(filled) << 56));
  h = mix64(h + static_cast<std::uint64_t>(challenge.size()));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < p_ ? 0 : 1;
}

// ---------------------------------------------------------------------------

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::Arbiter: return "arbiter";
    case Kind::XorArbiter: return "xor_arbiter";
    case Kind::IdealBiased: return "ideal";
  }
  return "unknown";
}

Kind kind_from_string(const std::string& name) {
  if (name == "arbiter") return Kind::Arbiter;
  if (name == "xor_arbiter" || name == "xor") return Kind::XorArbiter;
  if (name == "ideal") return Kind::IdealBiased;
  throw CpufError("unknown CPUF kind '" + name + "'");
}

CpufModel::CpufModel(const ModelSpec& spec) : spec_(spec) {
  if (spec_.n < 1) throw CpufError("n must be >= 1");
  if (spec_.out_bits < 1) throw CpufError("out_bits must be >= 1");
  if (!(spec_.flip_noise >= 0.0 && spec_.flip_noise <= 1.0)) throw CpufError("flip_noise outside [0,1]");
  if (spec_.kind == Kind::Arbiter) spec_.k = 1;
  for (int b = 0; b < spec_.out_bits; ++b) {
    const std::uint64_t sub_seed = derive_seed(spec_.seed, kBitStream, static_cast<std::uint64_t>(b));
    if (spec_.kind == Kind::IdealBiased) {
      ideals_.emplace_back(spec_.n, spec_.p, sub_seed);
    } else {
      Rng rng(sub_seed);
      arbiters_.push_back(XorArbiterPuf::random(spec_.n, spec_.k, rng));
    }
  }
}

CpufModel::CpufModel(const ModelSpec& spec, std::vector<XorArbiterPuf> per_bit)
    : spec_(spec), arbiters_(std::move(per_bit)) {
  if (spec_.kind == Kind::IdealBiased) throw CpufError("explicit weights require an arbiter kind");
  if (static_cast<int>(arbiters_.size()) != spec_.out_bits) throw CpufError("one XOR PUF per output bit required");
  for (const auto& a : arbiters_) {
    if (a.n() != spec_.n || a.k() != spec_.k) throw CpufError("XOR PUF shape differs from spec");
  }
}

void CpufModel::check_challenge(std::span<const std::uint8_t> challenge) const {
  if (static_cast<int>(challenge.size()) != spec_.n) {
    throw CpufError("challenge length " + std::to_string(challenge.size()) + " != n = " +
                    std::to_string(spec_.n));
  }
  check_bits(challenge);
}

std::uint8_t CpufModel::eval_bit(std::span<const std::uint8_t> challenge, int bit_index) const {
  check_challenge(challenge);
  if (bit_index < 0 || bit_index >= spec_.out_bits) throw CpufError("output bit index out of range");
  if (spec_.kind == Kind::IdealBiased) return ideals_[static_cast<std::size_t>(bit_index)].eval_bit(challenge, bit_index);
  const auto features = feature_transform(challenge);
  return arbiters_[static_cast<std::size_t>(bit_index)].eval_features(features);
}

std::uint8_t CpufModel::eval_bit_features(std::span<const double> features, int bit_index) const {
  if (spec_.kind == Kind::IdealBiased) throw CpufError("ideal PUF has no feature representation");
  return arbiters_.at(static_cast<std::size_t>(bit_index)).eval_features(features);
}

Bits CpufModel::eval(std::span<const std::uint8_t> challenge) const {
  check_challenge(challenge);
  Bits out(static_cast<std::size_t>(spec_.out_bits));
  if (spec_.kind == Kind::IdealBiased) {
    for (int b = 0; b < spec_.out_bits; ++b) out[static_cast<std::size_t>(b)] = ideals_[static_cast<std::size_t>(b)].eval_bit(challenge, b);
    return out;
  }
  const auto features = feature_transform(challenge);
  for (int b = 0; b < spec_.out_bits; ++b) out[static_cast<std::size_t>(b)] = arbiters_[static_cast<std::size_t>(b)].eval_features(features);
  return out;
}

Bits CpufModel::eval_noisy(std::span<const std::uint8_t> challenge, Rng& rng) const {
  Bits out = eval(challenge);
  if (spec_.flip_noise > 0.0) {
    for (auto& b : out) b ^= rng.bernoulli(spec_.flip_noise) ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------

QualityMetrics quality_metrics(const CpufModel& model, int sample_count, Rng& rng) {
  if (sample_count < 100) throw CpufError("quality metrics need at least 100 samples");
  ModelSpec sibling_spec = model.spec();
  sibling_spec.seed = derive_seed(rng.next_u64(), kSiblingStream);
  const CpufModel sibling(sibling_spec);

  const auto width = static_cast<std::size_t>(model.out_bits());
  std::vector<long> zeros(width, 0);
  long differing = 0;
  for (int s = 0; s < sample_count; ++s) {
    const Bits c = rng.bits(static_cast<std::size_t>(model.n()));
    const Bits a = model.eval(c);
    const Bits b = sibling.eval(c);
    for (std::size_t i = 0; i < width; ++i) {
      zeros[i] += a[i] == 0;
      differing += a[i] != b[i];
    }
  }
  double bias = 0.0;
  for (long z : zeros) {
    const double f0 = static_cast<double>(z) / sample_count;
    bias = std::max({bias, f0, 1.0 - f0});
  }
  const double inter = static_cast<double>(differing) / (static_cast<double>(sample_count) * static_cast<double>(width));
  return {bias, inter, 0.0};
}

void save_model(const CpufModel& model, std::ostream& out) {
  const auto& s = model.spec();
  out << kFormatHeader << '\n';
  out << "kind " << to_string(s.kind) << '\n';
  out << "n " << s.n << '\n';
  out << "k " << s.k << '\n';
  out << "out_bits " << s.out_bits << '\n';
  out << "seed " << s.seed << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", s.p);
  out << "p " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", s.flip_noise);
  out << "flip_noise " << buf << '\n';
  for (std::size_t b = 0; b < model.arbiters().size(); ++b) {
    const auto& chains = model.arbiters()[b].chains();
    for (std::size_t l = 0; l < chains.size(); ++l) {
      out << "weights " << b << ' ' << l;
      for (double w : chains[l].weights()) {
        std::snprintf(buf, sizeof buf, "%.17g", w);
        out << ' ' << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

CpufModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kFormatHeader) throw CpufError("not an hlpuf-cpuf v1 file");
  ModelSpec spec;
  std::vector<std::vector<std::vector<double>>> weights;  // [bit][chain]
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end") {
      ended = true;
      break;
    }
    if (key == "kind") {
      std::string v;
      ls >> v;
      spec.kind = kind_from_string(v);
    } else if (key == "n") {
      ls >> spec.n;
    } else if (key == "k") {
      ls >> spec.k;
    } else if (key == "out_bits") {
      ls >> spec.out_bits;
    } else if (key == "seed") {
      ls >> spec.seed;
    } else if (key == "p") {
      std::string v;
      ls >> v;
      spec.p = std::stod(v);
    } else if (key == "flip_noise") {
      std::string v;
      ls >> v;
      spec.flip_noise = std::stod(v);
    } else if (key == "weights") {
      std::size_t b = 0, l = 0;
      ls >> b >> l;
      if (weights.size() <= b) weights.resize(b + 1);
      if (weights[b].size() <= l) weights[b].resize(l + 1);
      std::string tok;
      while (ls >> tok) weights[b][l].push_back(std::stod(tok));
    } else {
      throw CpufError("unknown model file key '" + key + "'");
    }
    if (ls.fail() && !ls.eof()) throw CpufError("malformed model line: " + line);
  }
  if (!ended) throw CpufError("model file truncated (missing 'end')");
  if (spec.kind == Kind::IdealBiased) {
    if (!weights.empty()) throw CpufError("ideal model must not carry weights");
    return CpufModel(spec);
  }
  if (spec.kind == Kind::Arbiter) spec.k = 1;
  std::vector<XorArbiterPuf> per_bit;
  for (auto& chains_w : weights) {
    std::vector<ArbiterChain> chains;
    for (auto& w : chains_w) chains.emplace_back(spec.n, std::move(w));
    per_bit.emplace_back(std::move(chains));
  }
  return CpufModel(spec, std::move(per_bit));
}

}  // namespace hlpuf::cpuf
