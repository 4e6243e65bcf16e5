#pragma once

// Closed-form security bounds and the Monte Carlo estimators checked against
// them.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlpuf/hybrid.hpp"

namespace hlpuf::analytics {

class BoundError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A probability bound clamped to [0, 1] together with the unclamped value.
struct Clamped {
  double value;
  double raw;
};

/// Per-bit extraction bound p(1 + sqrt(p^2 + (1-p)^2)) for p in [0.5, 1].
Clamped p_guess_bound(double p);

/// P[Binomial(q, s) >= ceil((1 - eps) q)], evaluated in log space.
double binomial_tail(long q, double eps, double s);

/// Probability that at least (1 - eps) q of q responses, each 2m bits
/// extracted independently with per-bit success p_guess, come out right.
double p_extract_bound(long q, double eps, int m, double p_guess);

/// Product of the extraction and classical-forging probabilities.
double forge_bound(double p_extract, double p_classical);

/// eps1 + k 2^-m for a challenge reused k times with m qubits per half.
Clamped reuse_bound(int k, int m, double eps1);

/// Binary entropy in bits, h(0) = h(1) = 0.
double binary_entropy(double x);

/// m (1 - h(zeta) - log2(1 + 2 delta_r)).
double minentropy_bound(int m, double zeta, double delta_r);

struct CurvePoint {
  double eps;
  long q;
  double value;
};

/// p_extract_bound on the grid eps x q, eps-major.
std::vector<CurvePoint> pextract_curve(const std::vector<double>& eps, const std::vector<long>& q, int m, double p);

struct ExtractRate {
  long trials = 0;
  long successes = 0;
  double rate = 0.0;          // fraction of trials meeting the threshold
  double per_bit = 0.0;       // measured per-bit extraction accuracy
  double per_response = 0.0;  // measured full-half extraction accuracy
  double bound = 0.0;         // p_extract_bound at the measured per-bit rate
  double sigma = 0.0;         // standard error of `rate` under `bound`
};

/// Split-attack extraction of q first-half responses of a fresh ideal CPUF
/// per trial (m blocks per half, every stage conditioned on the true
/// preceding bits). A trial succeeds when at least ceil((1-eps) q) halves
/// are extracted without error.
ExtractRate mc_extract_rate(const hybrid::EncodingScheme& scheme, int m, double p, long q, double eps, long trials,
                            std::uint64_t seed, int threads = 1);

struct EveGuessing {
  long rounds = 0;
  long accepted = 0;
  long guessed = 0;          // accepted rounds where Eve named the whole half
  double zeta = 0.0;         // per-qubit verification error over all rounds
  double guess_rate = 0.0;   // guessed / accepted
  double bound = 0.0;        // 2^-minentropy_bound(m, zeta, delta_r)
  double sigma = 0.0;
};

/// Intercept-resend Eve on an m-qubit BB84 half. Eve's guess of the 2m
/// classical bits is her recorded outcome and basis per qubit.
EveGuessing eve_guessing_experiment(int m, double p, long rounds, std::uint64_t seed, int threads = 1);

}  // namespace hlpuf::analytics
