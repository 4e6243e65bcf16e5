#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// suite.

#include <cstdint>
#include <string>
#include <vector>

#include "hlpuf/adversary.hpp"

namespace hlpuf::experiments {

inline constexpr const char* kToolVersion = "hlpuf 0.1.0";
inline constexpr const char* kCsvSchema = "csv-v1";

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);

/// "# <version> schema=<schema> config=<16 hex digits>"
std::string csv_comment(const std::string& canonical_config);

struct AttackCurveConfig {
  int n = 32;
  int k = 2;
  /// Blocks per half of the BB84-encoded response.
  int m = 4;
  std::vector<std::size_t> q_grid{0, 250, 500, 1000, 2000, 5000, 10000, 20000, 50000};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int target_bit = 0;
  int test_samples = 10000;
  /// Copies per challenge for the multi-copy (unlocked, adaptive) curve.
  int copies = 10;
  adversary::LrConfig lr;
  int threads = 1;
  /// Wall-clock column; off keeps output byte-identical across runs.
  bool timing = false;
};

/// Modes, in output order: "cpuf" (clean CRPs), "hpuf-adaptive" (labels
/// from multi-copy extraction of an unlocked HPUF), "hlpuf-weak" (labels
/// from single-copy split-attack extraction of eavesdropped traffic).
inline const std::vector<std::string> kAttackModes{"cpuf", "hpuf-adaptive", "hlpuf-weak"};

/// One row per (seed, q, mode). Every mode trains on the same challenges
/// (nested prefixes of one list per seed) with the same LR seed and is
/// scored on the same test challenges. q = 0 scores the untrained model.
std::vector<adversary::AttackResult> attack_curve(const AttackCurveConfig& config);

/// Mean accuracy per (mode, q) over seeds.
struct CurveMean {
  std::string mode;
  std::size_t q;
  double accuracy;
};
std::vector<CurveMean> mean_curve(const std::vector<adversary::AttackResult>& rows);

/// Smallest q whose mean accuracy reaches `level`; 0 when none does and
/// `found` is false.
struct Crossing {
  bool found;
  std::size_t q;
};
Crossing first_q_reaching(const std::vector<CurveMean>& means, const std::string& mode, double level);

struct CheckLine {
  std::string name;
  bool pass;
  std::string detail;
};

/// Fast invariant battery over every module. `corrupt_mub` swaps in a MUB-8
/// family with one damaged basis as a negative control.
std::vector<CheckLine> selfcheck(std::uint64_t seed, bool corrupt_mub = false);

}  // namespace hlpuf::experiments
