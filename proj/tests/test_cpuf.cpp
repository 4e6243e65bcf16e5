#include <sstream>
#include <vector>

#include "doctest.h"
#include "hlpuf/cpuf.hpp"
#include "stat_helpers.hpp"

using namespace hlpuf;
using namespace hlpuf::cpuf;

namespace {

Bits bits_of(std::initializer_list<int> values) {
  Bits out;
  for (int v : values) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

}  // namespace

TEST_CASE("feature_transform") {
  CHECK(feature_transform(bits_of({0, 0, 0, 0})) == std::vector<double>{1, 1, 1, 1, 1});
  // phi_1 = (1-2*1)(1)(1)(1) = -1, later products see only zeros.
  CHECK(feature_transform(bits_of({1, 0, 0, 0})) == std::vector<double>{-1, 1, 1, 1, 1});
  CHECK(feature_transform(bits_of({0, 1, 1, 0})) == std::vector<double>{1, 1, -1, 1, 1});

  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    Bits c = rng.bits(16);
    const auto before = feature_transform(c);
    c.back() ^= 1;
    const auto after = feature_transform(c);
    for (std::size_t i = 0; i + 1 < before.size(); ++i) CHECK(after[i] == -before[i]);
    CHECK(after.back() == 1.0);
  }
  CHECK_THROWS_AS(feature_transform(bits_of({0, 2})), CpufError);
}

TEST_CASE("eval") {
  SUBCASE("deterministic per challenge") {
    const CpufModel model(ModelSpec{Kind::XorArbiter, 32, 3, 8, 99});
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
      const Bits c = rng.bits(32);
      CHECK(model.eval(c) == model.eval(c));
    }
    const CpufModel ideal(ModelSpec{Kind::IdealBiased, 32, 1, 8, 99, 0.5});
    const Bits c = rng.bits(32);
    CHECK(ideal.eval(c) == ideal.eval(c));
  }
  SUBCASE("p = 1 gives all-zero responses") {
    const CpufModel ideal(ModelSpec{Kind::IdealBiased, 16, 1, 12, 5, 1.0});
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) CHECK(ideal.eval(rng.bits(16)) == Bits(12, 0));
  }
  SUBCASE("single chain with weights (0,...,0,1) always answers 0") {
    std::vector<double> w(9, 0.0);
    w.back() = 1.0;
    std::vector<XorArbiterPuf> per_bit{XorArbiterPuf({ArbiterChain(8, w)})};
    const CpufModel model(ModelSpec{Kind::Arbiter, 8, 1, 1, 0}, per_bit);
    for (unsigned x = 0; x < 256; ++x) {
      Bits c(8);
      for (int i = 0; i < 8; ++i) c[static_cast<std::size_t>(i)] = (x >> i) & 1;
      CHECK(model.eval(c)[0] == 0);
    }
  }
  SUBCASE("length mismatch") {
    const CpufModel model(ModelSpec{Kind::XorArbiter, 8, 2, 1, 1});
    CHECK_THROWS_AS(model.eval(Bits(7, 0)), CpufError);
  }
  SUBCASE("bad construction parameters") {
    CHECK_THROWS_AS(CpufModel(ModelSpec{Kind::IdealBiased, 8, 1, 1, 1, 0.4}), CpufError);
    CHECK_THROWS_AS(CpufModel(ModelSpec{Kind::XorArbiter, 8, 0, 1, 1}), CpufError);
    CHECK_THROWS_AS(ArbiterChain(4, {1.0, 2.0}), CpufError);
  }
}

TEST_CASE("XOR responses agree with the product of chain signs") {
  const CpufModel model(ModelSpec{Kind::XorArbiter, 24, 4, 1, 17});
  Rng rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const Bits c = rng.bits(24);
    const auto phi = feature_transform(c);
    double prod = 1.0;
    for (const auto& chain : model.arbiters()[0].chains()) prod *= chain.delay(phi);
    CHECK(model.eval(c)[0] == (prod < 0.0 ? 1 : 0));
  }
}

TEST_CASE("quality metrics") {
  Rng rng(42);
  SUBCASE("ideal unbiased PUF") {
    const CpufModel ideal(ModelSpec{Kind::IdealBiased, 32, 1, 1, 7, 0.5});
    const auto m = quality_metrics(ideal, 100000, rng);
    CHECK(std::abs(m.bias_estimate - 0.5) <= 0.01);
    CHECK(std::abs(m.inter_distance - 0.5) <= 0.01);
    CHECK(m.intra_distance == 0.0);
  }
  SUBCASE("ideal biased PUF converges to p") {
    const CpufModel ideal(ModelSpec{Kind::IdealBiased, 32, 1, 1, 7, 0.7});
    const auto m = quality_metrics(ideal, 100000, rng);
    CHECK(hlpuf::testing::within_sigmas(m.bias_estimate, 0.7, 100000));
  }
  SUBCASE("2-XOR arbiter, n = 32") {
    const CpufModel xorpuf(ModelSpec{Kind::XorArbiter, 32, 2, 1, 7});
    const auto m = quality_metrics(xorpuf, 100000, rng);
    CHECK(std::abs(m.bias_estimate - 0.5) <= 0.02);
  }
  SUBCASE("negating one chain leaves the bias unchanged") {
    const CpufModel base(ModelSpec{Kind::XorArbiter, 32, 2, 1, 31});
    auto chains = base.arbiters()[0].chains();
    std::vector<double> neg = chains[0].weights();
    for (auto& w : neg) w = -w;
    chains[0] = ArbiterChain(32, neg);
    const CpufModel flipped(base.spec(), {XorArbiterPuf(chains)});
    const long samples = 100000;
    long ones_base = 0, ones_flipped = 0;
    Rng crng(77);
    for (long s = 0; s < samples; ++s) {
      const Bits c = crng.bits(32);
      ones_base += base.eval(c)[0];
      ones_flipped += flipped.eval(c)[0];
    }
    // Flipped responses are exact complements, so the majority frequency is
    // the same.
    const double fb = static_cast<double>(ones_base) / samples;
    const double ff = static_cast<double>(ones_flipped) / samples;
    CHECK(std::abs(std::max(fb, 1 - fb) - std::max(ff, 1 - ff)) <= 3 * hlpuf::testing::std_error(0.5, samples));
  }
  CHECK_THROWS_AS(quality_metrics(CpufModel(ModelSpec{}), 50, rng), CpufError);
}

TEST_CASE("model file round trip reproduces every response") {
  Rng rng(9);
  for (const ModelSpec& spec : {ModelSpec{Kind::XorArbiter, 32, 2, 4, 1234},
                                ModelSpec{Kind::Arbiter, 16, 1, 2, 55},
                                ModelSpec{Kind::IdealBiased, 20, 1, 8, 77, 0.625, 0.0}}) {
    const CpufModel original(spec);
    std::stringstream text;
    save_model(original, text);
    const CpufModel reloaded = load_model(text);
    CHECK(reloaded.spec().seed == spec.seed);
    for (int rep = 0; rep < 500; ++rep) {
      const Bits c = rng.bits(static_cast<std::size_t>(spec.n));
      CHECK(original.eval(c) == reloaded.eval(c));
    }
    std::stringstream again;
    save_model(reloaded, again);
    std::stringstream first;
    save_model(original, first);
    CHECK(first.str() == again.str());
  }
  std::stringstream bad("hlpuf-cpuf v0\n");
  CHECK_THROWS_AS(load_model(bad), CpufError);
  std::stringstream truncated("hlpuf-cpuf v1\nkind ideal\nn 4\n");
  CHECK_THROWS_AS(load_model(truncated), CpufError);
}
