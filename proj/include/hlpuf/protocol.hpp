#pragma once

// The four-step HLPUF authentication protocol as explicit server and client
// state machines with an interposable channel adversary.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlpuf/adversary.hpp"
#include "hlpuf/hybrid.hpp"

namespace hlpuf::protocol {

using qstate::PureState;

class ProtocolError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ChallengeStatus { Fresh, Reusable, Retired };

struct ReusePolicy {
  /// When false every challenge is retired after one round.
  bool reuse = true;
  /// Maximum number of accepted rounds per challenge; 0 means unlimited.
  int cap = 0;
};

class Server {
 public:
  Server(adversary::CrpDatabase db, hybrid::EncodingScheme scheme, ReusePolicy policy, std::uint64_t seed);

  const adversary::CrpDatabase& db() const { return db_; }
  const hybrid::EncodingScheme& scheme() const { return scheme_; }
  const ReusePolicy& policy() const { return policy_; }

  ChallengeStatus status(std::size_t index) const { return status_.at(index); }
  int accepted_uses(std::size_t index) const { return uses_.at(index); }
  std::size_t selectable() const;
  std::size_t retired() const;

  /// Uniform over non-retired entries; nullopt once the table is exhausted.
  std::optional<std::size_t> select();

  void record_accept(std::size_t index);
  void record_failure(std::size_t index);

 private:
  adversary::CrpDatabase db_;
  hybrid::EncodingScheme scheme_;
  ReusePolicy policy_;
  Rng rng_;
  std::vector<ChallengeStatus> status_;
  std::vector<int> uses_;
  std::vector<std::size_t> open_;  // indices not retired, kept in ascending order
};

class Client {
 public:
  explicit Client(hybrid::HpufDevice device) : device_(std::make_unique<hybrid::HlpufDevice>(std::move(device))) {}
  hybrid::HlpufDevice& device() { return *device_; }
  const hybrid::HlpufDevice& device() const { return *device_; }

 private:
  std::unique_ptr<hybrid::HlpufDevice> device_;
};

enum class Direction { ServerToClient, ClientToServer };

/// What a hook sees about the round besides the states themselves.
struct HookContext {
  long round;
  std::size_t challenge_index;
  const Bits& challenge;
};

/// Adversary controlling the public channel. Each in-flight state is moved
/// into exactly one hook call per direction; whatever the hook returns is
/// delivered.
class ChannelAdversary {
 public:
  virtual ~ChannelAdversary() = default;
  virtual std::string name() const = 0;
  virtual std::vector<PureState> forward(const HookContext& ctx, std::vector<PureState> states, Rng& rng);
  virtual std::vector<PureState> backward(const HookContext& ctx, std::vector<PureState> states, Rng& rng);
  /// Audit: the adversary's guess of the classical second-half bits of
  /// `challenge` (width bits).
  virtual Bits guess(const Bits& challenge, int width, Rng& rng);
  /// Told after each round; passive learners may use the public verdict.
  virtual void observe_outcome(const Bits& /*challenge*/, bool /*accepted*/) {}
};

/// Forwards everything and guesses uniformly.
class IdentityAdversary : public ChannelAdversary {
 public:
  std::string name() const override { return "identity"; }
};

/// Forwards everything untouched and keeps only public data: the
/// challenges and verdicts it saw. Its audit guess is a fixed pseudo-random
/// function of the challenge, so repeated audits of a reused challenge are
/// consistent.
class TranscriptLearner : public ChannelAdversary {
 public:
  explicit TranscriptLearner(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "transcript-learner"; }
  Bits guess(const Bits& challenge, int width, Rng& rng) override;
  void observe_outcome(const Bits& challenge, bool accepted) override;
  std::size_t observed() const { return seen_.size(); }

 private:
  std::uint64_t seed_;
  std::map<Bits, int> seen_;
};

/// Measures each qubit in a random BB84 basis and resends the outcome.
/// Remembers its latest second-half record per challenge for the audit.
class InterceptResendAdversary : public ChannelAdversary {
 public:
  InterceptResendAdversary(bool first_half, bool second_half) : first_(first_half), second_(second_half) {}
  std::string name() const override { return "intercept-resend"; }
  std::vector<PureState> forward(const HookContext& ctx, std::vector<PureState> states, Rng& rng) override;
  std::vector<PureState> backward(const HookContext& ctx, std::vector<PureState> states, Rng& rng) override;
  Bits guess(const Bits& challenge, int width, Rng& rng) override;

 private:
  std::vector<PureState> attack(std::vector<PureState> states, Rng& rng, Bits* record);
  bool first_, second_;
  std::map<Bits, Bits> record_;
};

/// Swaps the second half of each round for the one captured in the previous
/// round (a different challenge). The first round sends fresh random BB84
/// states.
class ForeignReplayAdversary : public ChannelAdversary {
 public:
  std::string name() const override { return "foreign-replay"; }
  std::vector<PureState> backward(const HookContext& ctx, std::vector<PureState> states, Rng& rng) override;

 private:
  std::optional<std::vector<PureState>> stored_;
  std::optional<Bits> stored_challenge_;
};

/// Drops one first-half state every round, so the lock always aborts.
class DropAdversary : public ChannelAdversary {
 public:
  std::string name() const override { return "drop"; }
  std::vector<PureState> forward(const HookContext& ctx, std::vector<PureState> states, Rng& rng) override;
};

enum class RoundStatus { Accepted, ClientAbort, ServerReject, Exhausted };

std::string to_string(RoundStatus status);

struct TranscriptEvent {
  long round;
  std::string step;
  std::string direction;  // "server", "client", "s->c", "c->s" or "-"
  std::string action;
  std::string outcome;
};

struct RoundOutcome {
  RoundStatus status = RoundStatus::Exhausted;
  std::optional<std::size_t> challenge_index;
  Bits challenge;
  /// False on a client abort: the device never emitted second-half states.
  bool second_half_emitted = false;
  std::size_t forward_states_in = 0, forward_states_out = 0;
  std::size_t backward_states_in = 0, backward_states_out = 0;
  std::vector<TranscriptEvent> events;
};

RoundOutcome run_round(Server& server, Client& client, ChannelAdversary& adversary, long round, Rng& rng);

struct AuditBucket {
  long guesses = 0;
  long hits = 0;
};

struct SessionReport {
  long rounds_requested = 0;
  long rounds_run = 0;
  long accepted = 0;
  long client_aborts = 0;
  long server_rejects = 0;
  std::size_t retired = 0;
  bool exhausted = false;
  double acceptance_rate = 0.0;
  /// accepted uses -> number of challenges with that many uses
  std::map<int, long> reuse_histogram;
  /// Audit guesses keyed by the number of accepted rounds the challenge had
  /// before the guess (0 = fresh).
  std::map<int, AuditBucket> audit;
  std::vector<RoundOutcome> rounds;
};

/// Drives run_round. Before each round the adversary guesses the second
/// half of the selected challenge; guesses are bucketed by prior accepted
/// uses. Exhaustion ends the session early.
SessionReport run_session(Server& server, Client& client, ChannelAdversary& adversary, long rounds, Rng& rng,
                          bool audit = true);

/// One JSON object per line: round, step, direction, action, outcome.
void write_transcript(const SessionReport& report, std::ostream& out);
/// Summary without per-round events.
std::string report_json(const SessionReport& report, const std::string& adversary_name);

}  // namespace hlpuf::protocol
