#include "hlpuf/protocol.hpp"

#include <algorithm>

#include "json.hpp"

namespace hlpuf::protocol {

namespace {

constexpr std::uint64_t kLearnerStream = 0x70722d6c6561726eULL;

std::uint64_t challenge_key(const Bits& challenge) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ challenge.size();
  for (auto b : challenge) h = mix64(h ^ b);
  return h;
}

std::string status_word(ChallengeStatus s, int uses) {
  switch (s) {
    case ChallengeStatus::Fresh: return "fresh";
    case ChallengeStatus::Reusable: return "reusable(" + std::to_string(uses) + ")";
    case ChallengeStatus::Retired: return "retired";
  }
  return "?";
}

std::string custody(std::size_t in, std::size_t out) {
  return "in=" + std::to_string(in) + " out=" + std::to_string(out);
}

}  // namespace

// ---------------------------------------------------------------------------

Server::Server(adversary::CrpDatabase db, hybrid::EncodingScheme scheme, ReusePolicy policy, std::uint64_t seed)
    : db_(std::move(db)), scheme_(scheme), policy_(policy), rng_(seed) {
  if (policy_.cap < 0) throw ProtocolError("reuse cap must be >= 0");
  if (!db_.empty()) scheme_.blocks_per_half(db_.response_width());
  status_.assign(db_.size(), ChallengeStatus::Fresh);
  uses_.assign(db_.size(), 0);
  open_.resize(db_.size());
  for (std::size_t i = 0; i < open_.size(); ++i) open_[i] = i;
}

std::size_t Server::selectable() const { return open_.size(); }
std::size_t Server::retired() const { return db_.size() - open_.size(); }

std::optional<std::size_t> Server::select() {
  if (open_.empty()) return std::nullopt;
  return open_[rng_.below(open_.size())];
}

void Server::record_accept(std::size_t index) {
  if (status_.at(index) == ChallengeStatus::Retired) throw ProtocolError("accepted round on a retired challenge");
  ++uses_[index];
  status_[index] = ChallengeStatus::Reusable;
  if (!policy_.reuse || (policy_.cap > 0 && uses_[index] >= policy_.cap)) record_failure(index);
}

void Server::record_failure(std::size_t index) {
  if (status_.at(index) == ChallengeStatus::Retired) return;
  status_[index] = ChallengeStatus::Retired;
  open_.erase(std::lower_bound(open_.begin(), open_.end(), index));
}

// ---------------------------------------------------------------------------
// Adversaries

std::vector<PureState> ChannelAdversary::forward(const HookContext&, std::vector<PureState> states, Rng&) {
  return states;
}

std::vector<PureState> ChannelAdversary::backward(const HookContext&, std::vector<PureState> states, Rng&) {
  return states;
}

Bits ChannelAdversary::guess(const Bits&, int width, Rng& rng) { return rng.bits(static_cast<std::size_t>(width)); }

Bits TranscriptLearner::guess(const Bits& challenge, int width, Rng&) {
  Rng keyed(derive_seed(seed_, kLearnerStream, challenge_key(challenge)));
  return keyed.bits(static_cast<std::size_t>(width));
}

void TranscriptLearner::observe_outcome(const Bits& challenge, bool accepted) { seen_[challenge] += accepted ? 1 : 0; }

std::vector<PureState> InterceptResendAdversary::attack(std::vector<PureState> states, Rng& rng, Bits* record) {
  std::vector<PureState> out;
  out.reserve(states.size());
  if (record) record->clear();
  for (auto& s : states) {
    if (s.dim() != 2) throw ProtocolError("intercept-resend needs BB84 traffic");
    auto r = adversary::intercept_resend(s, rng);
    if (record) {
      record->push_back(static_cast<std::uint8_t>(r.bit));
      record->push_back(static_cast<std::uint8_t>(r.basis));
    }
    out.push_back(std::move(r.resent));
  }
  return out;
}

std::vector<PureState> InterceptResendAdversary::forward(const HookContext&, std::vector<PureState> states, Rng& rng) {
  return first_ ? attack(std::move(states), rng, nullptr) : states;
}

std::vector<PureState> InterceptResendAdversary::backward(const HookContext& ctx, std::vector<PureState> states,
                                                          Rng& rng) {
  if (!second_) return states;
  Bits record;
  auto out = attack(std::move(states), rng, &record);
  record_[ctx.challenge] = std::move(record);
  return out;
}

Bits InterceptResendAdversary::guess(const Bits& challenge, int width, Rng& rng) {
  const auto it = record_.find(challenge);
  if (it != record_.end() && static_cast<int>(it->second.size()) == width) return it->second;
  return rng.bits(static_cast<std::size_t>(width));
}

std::vector<PureState> ForeignReplayAdversary::backward(const HookContext& ctx, std::vector<PureState> states,
                                                        Rng& rng) {
  std::vector<PureState> send;
  if (stored_ && stored_challenge_ != ctx.challenge) {
    send = std::move(*stored_);
  } else {
    for (std::size_t i = 0; i < states.size(); ++i) {
      send.push_back(qstate::bb84_state(static_cast<std::uint8_t>(rng.bit()), static_cast<std::uint8_t>(rng.bit())));
    }
  }
  stored_ = std::move(states);
  stored_challenge_ = ctx.challenge;
  return send;
}

std::vector<PureState> DropAdversary::forward(const HookContext&, std::vector<PureState> states, Rng&) {
  if (!states.empty()) states.pop_back();
  return states;
}

// ---------------------------------------------------------------------------

std::string to_string(RoundStatus status) {
  switch (status) {
    case RoundStatus::Accepted: return "accepted";
    case RoundStatus::ClientAbort: return "client_abort";
    case RoundStatus::ServerReject: return "server_reject";
    case RoundStatus::Exhausted: return "exhausted";
  }
  return "?";
}

namespace {

RoundOutcome run_selected(Server& server, Client& client, ChannelAdversary& adversary, long round, Rng& rng,
                          std::optional<std::size_t> index) {
  RoundOutcome out;
  auto log = [&](std::string step, std::string dir, std::string action, std::string outcome) {
    out.events.push_back({round, std::move(step), std::move(dir), std::move(action), std::move(outcome)});
  };

  if (!index) {
    log("select", "server", "choose_challenge", "exhausted");
    out.status = RoundStatus::Exhausted;
    return out;
  }
  out.challenge_index = index;
  out.challenge = server.db().challenge(*index);
  const Bits& y = server.db().response(*index);
  log("select", "server", "choose_challenge",
      "index=" + std::to_string(*index) + " " + status_word(server.status(*index), server.accepted_uses(*index)));

  const auto first = hybrid::server_encode(y, hybrid::Role::First, server.scheme());
  const auto expected_second = hybrid::server_encode(y, hybrid::Role::Second, server.scheme());
  log("encode", "server", "encode_first_half", "states=" + std::to_string(first.states.size()));

  const HookContext ctx{round, *index, out.challenge};
  out.forward_states_in = first.states.size();
  std::vector<PureState> delivered = adversary.forward(ctx, first.states, rng);
  out.forward_states_out = delivered.size();
  log("forward_hook", "s->c", adversary.name(), custody(out.forward_states_in, out.forward_states_out));

  hybrid::LockOutput released = client.device().lock_query(out.challenge, delivered, rng);
  if (!released) {
    log("lock_query", "client", "verify_first_half", "abort");
    server.record_failure(*index);
    log("policy", "server", "update", "retired");
    adversary.observe_outcome(out.challenge, false);
    out.status = RoundStatus::ClientAbort;
    return out;
  }
  out.second_half_emitted = true;
  log("lock_query", "client", "verify_first_half", "pass states=" + std::to_string(released->states.size()));

  out.backward_states_in = released->states.size();
  std::vector<PureState> returned = adversary.backward(ctx, std::move(released->states), rng);
  out.backward_states_out = returned.size();
  log("backward_hook", "c->s", adversary.name(), custody(out.backward_states_in, out.backward_states_out));

  const bool ok = hybrid::server_verify(expected_second, returned, server.scheme(), rng) == hybrid::Verdict::Accept;
  log("verify", "server", "verify_second_half", ok ? "accept" : "reject");
  if (ok) {
    server.record_accept(*index);
    out.status = RoundStatus::Accepted;
  } else {
    server.record_failure(*index);
    out.status = RoundStatus::ServerReject;
  }
  log("policy", "server", "update", status_word(server.status(*index), server.accepted_uses(*index)));
  adversary.observe_outcome(out.challenge, ok);
  return out;
}

}  // namespace

RoundOutcome run_round(Server& server, Client& client, ChannelAdversary& adversary, long round, Rng& rng) {
  return run_selected(server, client, adversary, round, rng, server.select());
}

SessionReport run_session(Server& server, Client& client, ChannelAdversary& adversary, long rounds, Rng& rng,
                          bool audit) {
  if (rounds < 1) throw ProtocolError("a session needs at least one round");
  SessionReport report;
  report.rounds_requested = rounds;
  const int width = server.db().empty() ? 0 : server.db().response_width() / 2;
  for (long r = 0; r < rounds; ++r) {
    const std::optional<std::size_t> next = server.select();
    if (audit && next) {
      const Bits g = adversary.guess(server.db().challenge(*next), width, rng);
      const auto half = hybrid::half_bits(server.db().response(*next), hybrid::Role::Second);
      auto& bucket = report.audit[server.accepted_uses(*next)];
      ++bucket.guesses;
      bucket.hits += std::equal(g.begin(), g.end(), half.begin(), half.end());
    }
    RoundOutcome outcome = run_selected(server, client, adversary, r, rng, next);
    if (outcome.status == RoundStatus::Exhausted) {
      report.exhausted = true;
      report.rounds.push_back(std::move(outcome));
      break;
    }
    ++report.rounds_run;
    report.accepted += outcome.status == RoundStatus::Accepted;
    report.client_aborts += outcome.status == RoundStatus::ClientAbort;
    report.server_rejects += outcome.status == RoundStatus::ServerReject;
    report.rounds.push_back(std::move(outcome));
  }
  report.retired = server.retired();
  report.acceptance_rate =
      report.rounds_run > 0 ? static_cast<double>(report.accepted) / static_cast<double>(report.rounds_run) : 0.0;
  for (std::size_t i = 0; i < server.db().size(); ++i) ++report.reuse_histogram[server.accepted_uses(i)];
  return report;
}

void write_transcript(const SessionReport& report, std::ostream& out) {
  for (const auto& round : report.rounds) {
    for (const auto& e : round.events) {
      const nlohmann::ordered_json line{{"round", e.round},
                                        {"step", e.step},
                                        {"direction", e.direction},
                                        {"action", e.action},
                                        {"outcome", e.outcome}};
      out << line.dump() << '\n';
    }
  }
}

std::string report_json(const SessionReport& report, const std::string& adversary_name) {
  nlohmann::ordered_json j;
  j["adversary"] = adversary_name;
  j["rounds_requested"] = report.rounds_requested;
  j["rounds_run"] = report.rounds_run;
  j["accepted"] = report.accepted;
  j["client_aborts"] = report.client_aborts;
  j["server_rejects"] = report.server_rejects;
  j["retired"] = report.retired;
  j["exhausted"] = report.exhausted;
  j["acceptance_rate"] = report.acceptance_rate;
  auto& hist = j["reuse_histogram"] = nlohmann::ordered_json::array();
  for (const auto& [uses, count] : report.reuse_histogram) hist.push_back({{"uses", uses}, {"challenges", count}});
  auto& audit = j["audit"] = nlohmann::ordered_json::array();
  for (const auto& [k, b] : report.audit) {
    audit.push_back({{"k", k},
                     {"guesses", b.guesses},
                     {"hits", b.hits},
                     {"hit_rate", b.guesses ? static_cast<double>(b.hits) / static_cast<double>(b.guesses) : 0.0}});
  }
  return j.dump(2);
}

}  // namespace hlpuf::protocol
