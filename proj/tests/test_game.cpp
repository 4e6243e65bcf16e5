#include <cmath>

#include "doctest.h"
#include "hlpuf/game.hpp"
#include "stat_helpers.hpp"

using namespace hlpuf;
using namespace hlpuf::adversary;
using hlpuf::testing::std_error;
using hlpuf::testing::within_sigmas;

namespace {

// Brute force over the 4 true and 4 guessed BB84 states of one qubit: the
// guess passes when measuring it in the true basis returns the true value.
double bb84_uniform_guess_pass() {
  const double s = 1.0 / std::sqrt(2.0);
  const double states[4][2] = {{1, 0}, {0, 1}, {s, s}, {s, -s}};
  double pass = 0.0;
  for (const auto& truth : states) {
    for (const auto& guess : states) {
      const double amp = truth[0] * guess[0] + truth[1] * guess[1];
      pass += amp * amp / 16.0;
    }
  }
  return pass;
}

}  // namespace

TEST_CASE("run_unforgeability_game") {
  SUBCASE("CPUF against an exact copy") {
    GameConfig cfg;
    cfg.target = Target::Cpuf;
    cfg.forgery = Forgery::ExactCopy;
    cfg.trials = 200;
    CHECK(run_unforgeability_game(cfg).win_rate == 1.0);
  }
  SUBCASE("HPUF BB84 uniform guesses, m = 4 blocks per half") {
    GameConfig cfg;
    cfg.target = Target::Hpuf;
    cfg.forgery = Forgery::UniformGuess;
    cfg.m = 4;
    cfg.trials = 40000;
    cfg.seed = 3;
    const double expected = std::pow(bb84_uniform_guess_pass(), 2 * cfg.m);
    CHECK(within_sigmas(run_unforgeability_game(cfg).win_rate, expected, cfg.trials));
  }
  SUBCASE("HLPUF adaptive replay equals weak mode on paired seeds") {
    GameConfig cfg;
    cfg.target = Target::Hlpuf;
    cfg.n = 6;
    cfg.q = 64;
    cfg.trials = 3000;
    cfg.seed = 9;
    const auto weak = run_unforgeability_game(cfg);
    cfg.learning = Learning::Adaptive;
    const auto replay = run_unforgeability_game(cfg);
    CHECK(replay.wins == weak.wins);
    cfg.route = AdaptiveRoute::DirectProbe;
    const auto probe = run_unforgeability_game(cfg);
    // Self-made first halves pass the lock with probability 2^-m per query.
    CHECK(within_sigmas(static_cast<double>(probe.lock_aborts) / (cfg.trials * 64.0), 0.75, cfg.trials * 64));
    CHECK(probe.win_rate <= weak.win_rate + 3 * std_error(weak.win_rate, cfg.trials));
  }
  SUBCASE("lock never helps: HLPUF adaptive <= HPUF with multi-copy access") {
    GameConfig cfg;
    cfg.n = 6;
    cfg.q = 64;
    cfg.trials = 3000;
    cfg.seed = 10;
    cfg.learning = Learning::Adaptive;
    cfg.target = Target::Hlpuf;
    const auto locked = run_unforgeability_game(cfg);
    cfg.target = Target::Hpuf;
    const auto multi = run_unforgeability_game(cfg);
    CHECK(locked.win_rate <= multi.win_rate + 3 * std_error(multi.win_rate, cfg.trials));
  }
  SUBCASE("threads do not change the result") {
    GameConfig cfg;
    cfg.target = Target::Hlpuf;
    cfg.trials = 500;
    cfg.seed = 4;
    const auto one = run_unforgeability_game(cfg);
    cfg.threads = 3;
    CHECK(run_unforgeability_game(cfg).wins == one.wins);
  }
  SUBCASE("multi-copy needs BB84") {
    GameConfig cfg;
    cfg.target = Target::Hpuf;
    cfg.learning = Learning::Adaptive;
    cfg.scheme = hybrid::mub8_scheme();
    cfg.trials = 2;
    CHECK_THROWS_AS(run_unforgeability_game(cfg), AttackError);
  }
}
