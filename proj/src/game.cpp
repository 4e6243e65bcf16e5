#include "hlpuf/game.hpp"

#include <map>
#include <memory>
#include <vector>

#include "hlpuf/parallel.hpp"

namespace hlpuf::adversary {

namespace {

constexpr std::uint64_t kDeviceStream = 0x67616d652d646576ULL;
constexpr std::uint64_t kChallengeStream = 0x67616d652d63686cULL;
constexpr std::uint64_t kMeasureStream = 0x67616d652d6d6561ULL;
constexpr std::uint64_t kLockStream = 0x67616d652d6c6f63ULL;
constexpr std::uint64_t kTestStream = 0x67616d652d746573ULL;

struct TrialOutcome {
  bool win = false;
  long aborts = 0;
  bool hit = false;
};

Bits slice(const Bits& bits, hybrid::Role role) {
  const auto half = hybrid::half_bits(bits, role);
  return Bits(half.begin(), half.end());
}

Bits extract_states(const SplitAttack& attack, const std::vector<PureState>& states, Rng& rng) {
  Bits out;
  for (const auto& s : states) {
    const Bits block = attack.guess_block(s, rng);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

Bits multi_copy_states(const std::vector<PureState>& states, int copies, Rng& rng) {
  Bits out;
  for (const auto& s : states) {
    const auto r = multi_copy_extract(s, copies, rng);
    out.push_back(static_cast<std::uint8_t>(r.value));
    out.push_back(static_cast<std::uint8_t>(r.basis));
  }
  return out;
}

TrialOutcome run_trial(const GameConfig& cfg, long t) {
  const auto trial = static_cast<std::uint64_t>(t);
  const int out_bits = 2 * cfg.m * cfg.scheme.bits_per_block();
  auto model = std::make_shared<const cpuf::CpufModel>(cpuf::ModelSpec{
      cpuf::Kind::IdealBiased, cfg.n, 1, out_bits, derive_seed(cfg.seed, kDeviceStream, trial), cfg.p});
  const hybrid::HpufDevice hpuf(model, cfg.scheme);
  hybrid::HlpufDevice lock{hybrid::HpufDevice(model, cfg.scheme)};

  Rng challenges(derive_seed(cfg.seed, kChallengeStream, trial));
  Rng measure(derive_seed(cfg.seed, kMeasureStream, trial));
  Rng lock_rng(derive_seed(cfg.seed, kLockStream, trial));
  Rng test(derive_seed(cfg.seed, kTestStream, trial));

  BlockPrior prior;
  prior.p_zero = cfg.p;
  const SplitAttack attack(cfg.scheme, prior);

  TrialOutcome outcome;
  std::map<Bits, Bits> table;
  const bool learns = cfg.forgery == Forgery::Lookup;
  for (std::size_t i = 0; learns && i < cfg.q; ++i) {
    const Bits x = challenges.bits(static_cast<std::size_t>(cfg.n));
    Bits learned;
    bool have = true;
    switch (cfg.target) {
      case Target::Cpuf:
        learned = model->eval(x);
        break;
      case Target::Hpuf: {
        auto [first, second] = hpuf.eval(x);
        std::vector<PureState> states = std::move(first.states);
        states.insert(states.end(), second.states.begin(), second.states.end());
        if (cfg.learning == Learning::Adaptive) {
          learned = multi_copy_states(states, cfg.copies, measure);
        } else {
          learned = extract_states(attack, states, measure);
        }
        break;
      }
      case Target::Hlpuf: {
        std::vector<PureState> first_half;
        if (cfg.learning == Learning::Adaptive && cfg.route == AdaptiveRoute::DirectProbe) {
          first_half = hybrid::encode_bits(challenges.bits(static_cast<std::size_t>(out_bits / 2)), cfg.scheme);
        } else {
          // Honest server traffic: weak eavesdropping and replay both see
          // the server's first half go into the lock.
          first_half = hybrid::server_encode(model->eval(x), hybrid::Role::First, cfg.scheme).states;
        }
        const hybrid::LockOutput released = lock.lock_query(x, first_half, lock_rng);
        if (!released) {
          ++outcome.aborts;
          have = false;
        } else {
          learned = extract_states(attack, released->states, measure);
        }
        break;
      }
    }
    if (have) table.emplace(x, std::move(learned));
  }

  const Bits x_star = test.bits(static_cast<std::size_t>(cfg.n));
  const Bits y_star = model->eval(x_star);
  const int forged_width = cfg.target == Target::Hlpuf ? out_bits / 2 : out_bits;

  Bits forged;
  switch (cfg.forgery) {
    case Forgery::ExactCopy:
      forged = cfg.target == Target::Hlpuf ? slice(y_star, hybrid::Role::Second) : y_star;
      break;
    case Forgery::UniformGuess:
      forged = test.bits(static_cast<std::size_t>(forged_width));
      break;
    case Forgery::Lookup: {
      const auto it = table.find(x_star);
      outcome.hit = it != table.end();
      forged = outcome.hit ? it->second : test.bits(static_cast<std::size_t>(forged_width));
      break;
    }
  }

  switch (cfg.target) {
    case Target::Cpuf:
      outcome.win = forged == y_star;
      break;
    case Target::Hpuf: {
      const auto states = hybrid::encode_bits(forged, cfg.scheme);
      const auto half = static_cast<std::ptrdiff_t>(states.size() / 2);
      const auto e1 = hybrid::server_encode(y_star, hybrid::Role::First, cfg.scheme);
      const auto e2 = hybrid::server_encode(y_star, hybrid::Role::Second, cfg.scheme);
      const bool ok1 = hybrid::server_verify(e1, std::span(states).first(static_cast<std::size_t>(half)), cfg.scheme,
                                             test) == hybrid::Verdict::Accept;
      const bool ok2 = hybrid::server_verify(e2, std::span(states).subspan(static_cast<std::size_t>(half)), cfg.scheme,
                                             test) == hybrid::Verdict::Accept;
      outcome.win = ok1 && ok2;
      break;
    }
    case Target::Hlpuf: {
      const auto states = hybrid::encode_bits(forged, cfg.scheme);
      const auto e2 = hybrid::server_encode(y_star, hybrid::Role::Second, cfg.scheme);
      outcome.win = hybrid::server_verify(e2, states, cfg.scheme, test) == hybrid::Verdict::Accept;
      break;
    }
  }
  return outcome;
}

}  // namespace

GameResult run_unforgeability_game(const GameConfig& config) {
  if (config.q < 1) throw AttackError("the learning phase needs q >= 1");
  if (config.trials < 1) throw AttackError("trials must be positive");
  if (config.m < 1 || config.n < 1) throw AttackError("n and m must be positive");
  if (config.target == Target::Hpuf && config.learning == Learning::Adaptive &&
      config.forgery == Forgery::Lookup && config.scheme.kind != hybrid::SchemeKind::BB84) {
    throw AttackError("multi-copy extraction is implemented for BB84 only");
  }

  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(config.trials));
  parallel_for(config.trials, config.threads,
               [&](long t) { outcomes[static_cast<std::size_t>(t)] = run_trial(config, t); });

  GameResult result;
  result.trials = config.trials;
  for (const auto& o : outcomes) {
    result.wins += o.win;
    result.lock_aborts += o.aborts;
    result.table_hits += o.hit;
  }
  result.win_rate = static_cast<double>(result.wins) / static_cast<double>(result.trials);
  return result;
}

std::string to_string(Target target) {
  switch (target) {
    case Target::Cpuf: return "cpuf";
    case Target::Hpuf: return "hpuf";
    case Target::Hlpuf: return "hlpuf";
  }
  return "?";
}

std::string to_string(Learning learning) { return learning == Learning::Weak ? "weak" : "adaptive"; }

}  // namespace hlpuf::adversary
