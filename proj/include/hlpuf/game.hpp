#pragma once

// Universal-unforgeability game harness for CPUF, HPUF and HLPUF targets.

#include <cstdint>
#include <string>

#include "hlpuf/adversary.hpp"
#include "hlpuf/cpuf.hpp"
#include "hlpuf/hybrid.hpp"

namespace hlpuf::adversary {

enum class Target { Cpuf, Hpuf, Hlpuf };
enum class Learning { Weak, Adaptive };

/// How the adversary produces its forgery for the random challenge.
enum class Forgery {
  ExactCopy,     // holds the device's CPUF outright
  UniformGuess,  // ignores the learning phase
  Lookup,        // replays what it learned for this challenge, else guesses
};

/// Adaptive access to a locked device.
enum class AdaptiveRoute {
  ReplayServerChallenges,  // forwards an honest server's first half to the lock
  DirectProbe,             // queries the lock with self-made first halves
};

struct GameConfig {
  Target target = Target::Hpuf;
  Learning learning = Learning::Weak;
  Forgery forgery = Forgery::Lookup;
  AdaptiveRoute route = AdaptiveRoute::ReplayServerChallenges;
  hybrid::EncodingScheme scheme = hybrid::bb84_scheme();
  int n = 8;
  /// Blocks per half. The CPUF is 2 * m * bits_per_block bits wide.
  int m = 2;
  double p = 0.5;
  /// Learning-phase challenges (drawn uniformly, with repetition).
  std::size_t q = 16;
  /// Copies per challenge for multi-copy extraction against an HPUF.
  int copies = 10;
  long trials = 1000;
  int threads = 1;
  std::uint64_t seed = 0;
};

struct GameResult {
  long trials = 0;
  long wins = 0;
  double win_rate = 0.0;
  /// Lock queries that returned the abort symbol during learning.
  long lock_aborts = 0;
  /// Trials whose challenge was present in the learned table.
  long table_hits = 0;
};

/// Per trial: a fresh ideal CPUF, a learning phase, a uniformly random
/// challenge, a forgery, and verification (bit equality for a CPUF, server
/// verification of both halves for an HPUF, of the second half for an
/// HLPUF whose first half the verifier supplies). Trial t draws all its
/// randomness from (seed, t), so weak and adaptive runs with equal seeds see
/// the same devices and challenges.
GameResult run_unforgeability_game(const GameConfig& config);

std::string to_string(Target target);
std::string to_string(Learning learning);

}  // namespace hlpuf::adversary
