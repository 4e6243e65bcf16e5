#pragma once

// Attacks on hybrid PUFs: per-block split-attack extraction, multi-copy
// extraction, intercept-resend and logistic-regression modelling.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlpuf/cpuf.hpp"
#include "hlpuf/hybrid.hpp"
#include "hlpuf/qstate.hpp"
#include "hlpuf/random.hpp"

namespace hlpuf::adversary {

using qstate::PureState;

class AttackError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Source { Clean, Extracted };

/// Classical CRP table. All challenges share one length and all responses
/// share one width.
class CrpDatabase {
 public:
  CrpDatabase() = default;
  CrpDatabase(Source source, bool noisy) : source_(source), noisy_(noisy) {}

  void add(Bits challenge, Bits response);

  std::size_t size() const { return challenges_.size(); }
  bool empty() const { return challenges_.empty(); }
  int challenge_length() const { return challenge_length_; }
  int response_width() const { return response_width_; }
  Source source() const { return source_; }
  bool noisy() const { return noisy_; }

  const Bits& challenge(std::size_t i) const { return challenges_.at(i); }
  const Bits& response(std::size_t i) const { return responses_.at(i); }
  const std::vector<Bits>& challenges() const { return challenges_; }
  const std::vector<Bits>& responses() const { return responses_; }

  /// q uniformly random CRPs read off the model.
  static CrpDatabase sample(const cpuf::CpufModel& model, std::size_t q, Rng& rng);

 private:
  Source source_ = Source::Clean;
  bool noisy_ = false;
  int challenge_length_ = -1;
  int response_width_ = -1;
  std::vector<Bits> challenges_;
  std::vector<Bits> responses_;
};

/// Single-copy quantum CRPs: one state per block of the full response.
struct QuantumCrp {
  Bits challenge;
  std::vector<PureState> states;
};

class QuantumCrpDatabase {
 public:
  void add(Bits challenge, std::vector<PureState> states);
  std::size_t size() const { return entries_.size(); }
  const std::vector<QuantumCrp>& entries() const { return entries_; }

  /// Weak-adversary collection: q uniform challenges, one HPUF evaluation each.
  static QuantumCrpDatabase sample(const hybrid::HpufDevice& device, std::size_t q, Rng& rng);

 private:
  std::vector<QuantumCrp> entries_;
};

/// Adversary's model of how blocks are distributed.
struct BlockPrior {
  /// Probability that each classical bit is 0 (p-randomness).
  double p_zero = 0.5;
  /// Weights over the scheme's family bases. Empty means "derived from the
  /// basis bits", i.e. only the 2^basis_bits encodable bases.
  std::vector<double> basis_weights;
};

/// Uniform prior over every basis of the family, including bases the block
/// layout cannot address (basis 8 of the MUB-8 family).
BlockPrior uniform_over_family(const hybrid::EncodingScheme& scheme);

/// Sequential per-bit discrimination of one block. Stage s decides bit s
/// with the Helstrom measurement between the two mixtures of block states
/// that agree with the preceding bits and carry 0 or 1 at position s.
/// Bits are ordered as in the block layout (value bits, then basis bits).
class SplitAttack {
 public:
  SplitAttack(hybrid::EncodingScheme scheme, BlockPrior prior = {});

  const hybrid::EncodingScheme& scheme() const { return scheme_; }
  int stages() const { return scheme_.bits_per_block(); }

  /// Guesses every bit of the block. Stage s conditions on
  /// `conditioning[0..s)` when given (the adversary's prediction of the
  /// preceding bits), otherwise on its own earlier guesses. Each stage acts
  /// on the received state as delivered.
  Bits guess_block(const PureState& state, Rng& rng, std::span<const std::uint8_t> conditioning = {}) const;

  /// Optimal success of stage s given the true preceding bits, averaged over
  /// those bits under the prior. 0.5 when the stage carries no information.
  double stage_optimum(int stage) const;

 private:
  struct Stage {
    std::optional<qstate::HelstromMeasurement> measurement;
    int forced = -1;  // 0/1 when one hypothesis has zero prior mass
    double prefix_weight = 0.0;
    double success = 0.5;
  };

  const Stage& stage_for(int stage, std::span<const std::uint8_t> prefix) const;

  hybrid::EncodingScheme scheme_;
  BlockPrior prior_;
  // Keyed by (stage, prefix bits packed MSB first).
  std::map<std::pair<int, int>, Stage> stages_;
};

struct ExtractionReport {
  CrpDatabase database;      // extracted (noisy) responses
  double bit_accuracy;       // fraction of correct bits, if truth was given
  double response_accuracy;  // fraction of fully correct responses
};

/// Measures every single-copy entry with the split attack and records the
/// guessed bits. `conditioning`, when given, lists per-entry predictions of
/// the full response that later stages condition on; `truth`, when given,
/// is only used to score the extraction.
ExtractionReport split_attack_extract(const QuantumCrpDatabase& qdb, const SplitAttack& attack, Rng& rng,
                                      const CrpDatabase* conditioning = nullptr,
                                      const CrpDatabase* truth = nullptr);

struct MultiCopyResult {
  int value;
  int basis;
  int copies_used;
};

/// Multi-copy extraction of a BB84 block: up to K computational-basis
/// measurements; the first disagreement reveals the conjugate basis and the
/// next copy is measured in it. K identical outcomes yield basis 0. Needs at
/// most K + 1 copies; `state` stands for the forger's reproducible output.
MultiCopyResult multi_copy_extract(const PureState& state, int copies, Rng& rng);

struct InterceptResult {
  PureState resent;
  int bit;
  int basis;
};

/// Measures a qubit in a uniformly random BB84 basis and resends the outcome.
InterceptResult intercept_resend(const PureState& state, Rng& rng);

// ---------------------------------------------------------------------------
// Logistic regression

struct LrConfig {
  int epochs = 200;
  int batch_size = 0;  // 0: full batch
  int restarts = 5;
  double validation_fraction = 0.1;
  double initial_step = 0.05;
  double step_increase = 1.2;
  double step_decrease = 0.5;
  double min_step = 1e-6;
  double max_step = 1.0;
  /// Stop a restart once the training loss improves by less than this
  /// relative amount over `patience` epochs.
  double tolerance = 1e-5;
  int patience = 10;
  /// Stop restarting once validation accuracy reaches this value.
  double target_validation = 1.01;
  std::uint64_t seed = 0;
};

class LrModel {
 public:
  LrModel(int n, std::vector<std::vector<double>> weights);

  int n() const { return n_; }
  int k() const { return static_cast<int>(weights_.size()); }
  const std::vector<std::vector<double>>& weights() const { return weights_; }

  /// Product of the chain delays.
  double score_features(std::span<const double> features) const;
  std::uint8_t predict_features(std::span<const double> features) const {
    return score_features(features) < 0.0 ? 1 : 0;
  }
  std::uint8_t predict(std::span<const std::uint8_t> challenge) const;

 private:
  int n_;
  std::vector<std::vector<double>> weights_;
};

struct LrFit {
  LrModel model;
  double validation_accuracy;
  int restarts_run;
  bool diverged;
};

/// Fits P(r = 1 | c) = sigmoid(-prod_l <w_l, phi(c)>) to response bit
/// `target_bit` of `db` with iRprop- steps on the cross-entropy.
LrFit lr_train(const CrpDatabase& db, int target_bit, int k, const LrConfig& config);

/// The untrained starting point of restart 0 for a given config. Used as
/// the q = 0 model so every curve starts from the same guess.
LrModel lr_initial_model(int n, int k, const LrConfig& config);

/// Accuracy of a model against a response bit of the CPUF on fresh
/// uniformly random challenges.
double lr_test_accuracy(const LrModel& model, const cpuf::CpufModel& cpuf, int target_bit, int samples, Rng& rng);

struct AttackResult {
  std::uint64_t seed;
  std::size_t q;
  std::string scheme;
  int k;
  int n;
  int m;
  std::string mode;
  double accuracy;
  double bit_rate;
  double epsilon_measured;
  double runtime_ms;
};

/// Column header of the attack CSV.
std::string attack_csv_header();
std::string attack_csv_row(const AttackResult& r);

}  // namespace hlpuf::adversary
