#include "hlpuf/analytics.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "hlpuf/adversary.hpp"
#include "hlpuf/parallel.hpp"

namespace hlpuf::analytics {

namespace {

constexpr std::uint64_t kExtractStream = 0x616e2d6578747261ULL;
constexpr std::uint64_t kEveStream = 0x616e2d6576652d2dULL;

void require_probability(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw BoundError(std::string(what) + " must lie in [0,1]");
}

// ceil((1 - eps) q), tolerant of products such as 0.9 * 10 landing just
// above an integer.
long threshold(long q, double eps) {
  const double exact = (1.0 - eps) * static_cast<double>(q);
  return std::max(0L, static_cast<long>(std::ceil(exact - 1e-9)));
}

double sigma_of(double p, long trials) { return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials)); }

}  // namespace

Clamped p_guess_bound(double p) {
  if (!(p >= 0.5 && p <= 1.0)) throw BoundError("p must lie in [0.5, 1]");
  const double raw = p * (1.0 + std::sqrt(p * p + (1.0 - p) * (1.0 - p)));
  return {std::min(1.0, raw), raw};
}

double binomial_tail(long q, double eps, double s) {
  if (q < 0) throw BoundError("q must be non-negative");
  require_probability(eps, "eps");
  require_probability(s, "per-response probability");
  const long k0 = threshold(q, eps);
  if (k0 == 0) return 1.0;
  if (k0 > q) return 0.0;
  if (s == 0.0) return 0.0;
  if (s == 1.0) return 1.0;

  const double log_s = std::log(s);
  const double log_f = std::log1p(-s);
  const double lq = std::lgamma(static_cast<double>(q) + 1.0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(q - k0 + 1));
  double peak = -std::numeric_limits<double>::infinity();
  for (long k = k0; k <= q; ++k) {
    const double kd = static_cast<double>(k);
    const double t = lq - std::lgamma(kd + 1.0) - std::lgamma(static_cast<double>(q - k) + 1.0) + kd * log_s +
                     static_cast<double>(q - k) * log_f;
    terms.push_back(t);
    peak = std::max(peak, t);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return std::min(1.0, std::exp(peak + std::log(sum)));
}

double p_extract_bound(long q, double eps, int m, double p_guess) {
  if (m < 0) throw BoundError("m must be non-negative");
  require_probability(p_guess, "p_guess");
  return binomial_tail(q, eps, std::pow(p_guess, 2.0 * m));
}

double forge_bound(double p_extract, double p_classical) {
  require_probability(p_extract, "p_extract");
  require_probability(p_classical, "p_classical");
  return p_extract * p_classical;
}

Clamped reuse_bound(int k, int m, double eps1) {
  if (k < 0 || m < 0) throw BoundError("k and m must be non-negative");
  require_probability(eps1, "eps1");
  const double raw = eps1 + static_cast<double>(k) * std::ldexp(1.0, -m);
  return {std::min(1.0, raw), raw};
}

double binary_entropy(double x) {
  require_probability(x, "entropy argument");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double minentropy_bound(int m, double zeta, double delta_r) {
  if (m < 0) throw BoundError("m must be non-negative");
  if (!(zeta >= 0.0 && zeta <= 0.5)) throw BoundError("zeta must lie in [0, 0.5]");
  if (!(delta_r >= 0.0 && delta_r <= 0.5)) throw BoundError("delta_r must lie in [0, 0.5]");
  return static_cast<double>(m) * (1.0 - binary_entropy(zeta) - std::log2(1.0 + 2.0 * delta_r));
}

std::vector<CurvePoint> pextract_curve(const std::vector<double>& eps, const std::vector<long>& q, int m, double p) {
  const double pg = p_guess_bound(p).value;
  std::vector<CurvePoint> out;
  out.reserve(eps.size() * q.size());
  for (double e : eps) {
    for (long qq : q) out.push_back({e, qq, p_extract_bound(qq, e, m, pg)});
  }
  return out;
}

ExtractRate mc_extract_rate(const hybrid::EncodingScheme& scheme, int m, double p, long q, double eps, long trials,
                            std::uint64_t seed, int threads) {
  if (m < 1 || q < 1 || trials < 1) throw BoundError("m, q and trials must be positive");
  require_probability(eps, "eps");
  if (!(p >= 0.5 && p <= 1.0)) throw BoundError("p must lie in [0.5, 1]");

  adversary::BlockPrior prior;
  prior.p_zero = p;
  const adversary::SplitAttack attack(scheme, prior);
  const int half_bits = m * scheme.bits_per_block();
  const long need = threshold(q, eps);

  struct Tally {
    long correct_bits = 0;
    long correct_halves = 0;
    bool success = false;
  };
  std::vector<Tally> tallies(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](long t) {
    Rng rng(derive_seed(seed, kExtractStream, static_cast<std::uint64_t>(t)));
    const auto model = std::make_shared<const cpuf::CpufModel>(
        cpuf::ModelSpec{cpuf::Kind::IdealBiased, 32, 1, 2 * half_bits, rng.next_u64(), p});
    const hybrid::HpufDevice device(model, scheme);
    Tally tally;
    const auto width = static_cast<std::size_t>(scheme.bits_per_block());
    for (long i = 0; i < q; ++i) {
      const Bits x = rng.bits(32);
      const Bits y = model->eval(x);
      const auto truth = hybrid::half_bits(y, hybrid::Role::First);
      const auto half = device.eval_half(x, hybrid::Role::First);
      long ok = 0;
      for (std::size_t j = 0; j < half.states.size(); ++j) {
        const auto cond = truth.subspan(j * width, width);
        const Bits guess = attack.guess_block(half.states[j], rng, cond);
        for (std::size_t b = 0; b < width; ++b) ok += guess[b] == cond[b];
      }
      tally.correct_bits += ok;
      tally.correct_halves += ok == half_bits;
    }
    tally.success = tally.correct_halves >= need;
    tallies[static_cast<std::size_t>(t)] = tally;
  });

  ExtractRate r;
  r.trials = trials;
  long bits = 0, halves = 0;
  for (const auto& t : tallies) {
    bits += t.correct_bits;
    halves += t.correct_halves;
    r.successes += t.success;
  }
  r.rate = static_cast<double>(r.successes) / static_cast<double>(trials);
  r.per_bit = static_cast<double>(bits) / (static_cast<double>(trials) * static_cast<double>(q) * half_bits);
  r.per_response = static_cast<double>(halves) / (static_cast<double>(trials) * static_cast<double>(q));
  r.bound = binomial_tail(q, eps, std::pow(r.per_bit, half_bits));
  r.sigma = sigma_of(r.bound, trials);
  return r;
}

EveGuessing eve_guessing_experiment(int m, double p, long rounds, std::uint64_t seed, int threads) {
  if (m < 1 || rounds < 1) throw BoundError("m and rounds must be positive");
  if (!(p >= 0.5 && p <= 1.0)) throw BoundError("p must lie in [0.5, 1]");
  const auto scheme = hybrid::bb84_scheme();

  struct Round {
    int errors = 0;
    bool guessed = false;
  };
  std::vector<Round> outcomes(static_cast<std::size_t>(rounds));
  parallel_for(rounds, threads, [&](long r) {
    Rng rng(derive_seed(seed, kEveStream, static_cast<std::uint64_t>(r)));
    Round round;
    bool all_right = true;
    for (int j = 0; j < m; ++j) {
      const Bits bits{static_cast<std::uint8_t>(rng.bernoulli(1.0 - p)), static_cast<std::uint8_t>(rng.bernoulli(1.0 - p))};
      const auto eve = adversary::intercept_resend(hybrid::encode_block(bits, scheme), rng);
      all_right = all_right && eve.bit == bits[0] && eve.basis == bits[1];
      const auto check = qstate::measure(eve.resent, qstate::bb84_family().basis(bits[1]), rng);
      round.errors += check.index != bits[0];
    }
    round.guessed = all_right;
    outcomes[static_cast<std::size_t>(r)] = round;
  });

  EveGuessing e;
  e.rounds = rounds;
  long errors = 0;
  for (const auto& o : outcomes) {
    errors += o.errors;
    if (o.errors == 0) {
      ++e.accepted;
      e.guessed += o.guessed;
    }
  }
  e.zeta = std::min(0.5, static_cast<double>(errors) / (static_cast<double>(rounds) * m));
  e.guess_rate = e.accepted > 0 ? static_cast<double>(e.guessed) / static_cast<double>(e.accepted) : 0.0;
  e.bound = std::min(1.0, std::exp2(-minentropy_bound(m, e.zeta, p - 0.5)));
  e.sigma = e.accepted > 0 ? sigma_of(e.bound, e.accepted) : 0.0;
  return e;
}

}  // namespace hlpuf::analytics
