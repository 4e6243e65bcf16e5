#include "hlpuf/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace hlpuf::adversary {

namespace {

constexpr std::uint64_t kLrSplitStream = 0x6c722d73706c6974ULL;    // "lr-split"
constexpr std::uint64_t kLrRestartStream = 0x6c722d7265737472ULL;  // "lr-restr"

int pack_bits(std::span<const std::uint8_t> bits) {
  int v = 0;
  for (auto b : bits) v = (v << 1) | b;
  return v;
}

double bit_weight(std::uint8_t bit, double p_zero) { return bit == 0 ? p_zero : 1.0 - p_zero; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Databases

void CrpDatabase::add(Bits challenge, Bits response) {
  if (challenges_.empty()) {
    challenge_length_ = static_cast<int>(challenge.size());
    response_width_ = static_cast<int>(response.size());
  } else if (static_cast<int>(challenge.size()) != challenge_length_ ||
             static_cast<int>(response.size()) != response_width_) {
    throw AttackError("CRP database entries must share challenge length and response width");
  }
  challenges_.push_back(std::move(challenge));
  responses_.push_back(std::move(response));
}

CrpDatabase CrpDatabase::sample(const cpuf::CpufModel& model, std::size_t q, Rng& rng) {
  CrpDatabase db(Source::Clean, false);
  for (std::size_t i = 0; i < q; ++i) {
    Bits c = rng.bits(static_cast<std::size_t>(model.n()));
    Bits r = model.eval(c);
    db.add(std::move(c), std::move(r));
  }
  return db;
}

void QuantumCrpDatabase::add(Bits challenge, std::vector<PureState> states) {
  entries_.push_back({std::move(challenge), std::move(states)});
}

QuantumCrpDatabase QuantumCrpDatabase::sample(const hybrid::HpufDevice& device, std::size_t q, Rng& rng) {
  QuantumCrpDatabase db;
  for (std::size_t i = 0; i < q; ++i) {
    Bits c = rng.bits(static_cast<std::size_t>(device.n()));
    auto [first, second] = device.eval(c);
    std::vector<PureState> states = std::move(first.states);
    for (auto& s : second.states) states.push_back(std::move(s));
    db.add(std::move(c), std::move(states));
  }
  return db;
}

// ---------------------------------------------------------------------------
// Split attack

BlockPrior uniform_over_family(const hybrid::EncodingScheme& scheme) {
  BlockPrior prior;
  prior.basis_weights.assign(scheme.family().size(), 1.0);
  return prior;
}

SplitAttack::SplitAttack(hybrid::EncodingScheme scheme, BlockPrior prior)
    : scheme_(scheme), prior_(std::move(prior)) {
  if (!(prior_.p_zero >= 0.0 && prior_.p_zero <= 1.0)) throw AttackError("p_zero outside [0,1]");
  const auto& family = scheme_.family();
  const int encodable = 1 << scheme_.basis_bits;
  if (prior_.basis_weights.empty()) {
    prior_.basis_weights.assign(family.size(), 0.0);
    for (int theta = 0; theta < encodable; ++theta) {
      double w = 1.0;
      for (int i = 0; i < scheme_.basis_bits; ++i) {
        w *= bit_weight(static_cast<std::uint8_t>((theta >> (scheme_.basis_bits - 1 - i)) & 1), prior_.p_zero);
      }
      prior_.basis_weights[static_cast<std::size_t>(theta)] = w;
    }
  }
  if (prior_.basis_weights.size() != family.size()) throw AttackError("basis prior size differs from family");
  const double total_basis = std::accumulate(prior_.basis_weights.begin(), prior_.basis_weights.end(), 0.0);
  if (!(total_basis > 0.0)) throw AttackError("basis prior has no mass");

  struct Symbol {
    Bits bits;  // value bits, then basis bits when the basis is encodable
    PureState state;
    double weight;
  };
  std::vector<Symbol> symbols;
  for (std::size_t theta = 0; theta < family.size(); ++theta) {
    const double wb = prior_.basis_weights[theta] / total_basis;
    if (wb <= 0.0) continue;
    for (int value = 0; value < scheme_.dim(); ++value) {
      double w = wb;
      Bits bits;
      for (int i = 0; i < scheme_.value_bits; ++i) {
        bits.push_back(static_cast<std::uint8_t>((value >> (scheme_.value_bits - 1 - i)) & 1));
        w *= bit_weight(bits.back(), prior_.p_zero);
      }
      if (static_cast<int>(theta) < encodable) {
        for (int i = 0; i < scheme_.basis_bits; ++i) {
          bits.push_back(static_cast<std::uint8_t>((theta >> (scheme_.basis_bits - 1 - i)) & 1));
        }
      }
      if (w > 0.0) symbols.push_back({std::move(bits), family.state(theta, value), w});
    }
  }

  for (int s = 0; s < stages(); ++s) {
    for (int prefix = 0; prefix < (1 << s); ++prefix) {
      double mass[2] = {0.0, 0.0};
      std::vector<std::pair<PureState, double>> parts[2];
      for (const auto& sym : symbols) {
        if (static_cast<int>(sym.bits.size()) <= s) continue;
        if (pack_bits(std::span(sym.bits).first(static_cast<std::size_t>(s))) != prefix) continue;
        const int b = sym.bits[static_cast<std::size_t>(s)];
        mass[b] += sym.weight;
        parts[b].emplace_back(sym.state, sym.weight);
      }
      const double total = mass[0] + mass[1];
      if (total <= 0.0) continue;
      Stage stage;
      stage.prefix_weight = total;
      if (mass[1] <= 0.0 || mass[0] <= 0.0) {
        stage.forced = mass[1] <= 0.0 ? 0 : 1;
        stage.success = 1.0;
      } else {
        for (int b = 0; b < 2; ++b) {
          for (auto& part : parts[b]) part.second /= mass[b];
        }
        stage.measurement.emplace(qstate::mixture(parts[0]), qstate::mixture(parts[1]), mass[0] / total);
        stage.success = stage.measurement->success();
      }
      stages_.emplace(std::make_pair(s, prefix), std::move(stage));
    }
  }
}

const SplitAttack::Stage& SplitAttack::stage_for(int stage, std::span<const std::uint8_t> prefix) const {
  static const Stage kUnreachable{std::nullopt, 0, 0.0, 0.5};
  const auto it = stages_.find({stage, pack_bits(prefix)});
  return it == stages_.end() ? kUnreachable : it->second;
}

Bits SplitAttack::guess_block(const PureState& state, Rng& rng, std::span<const std::uint8_t> conditioning) const {
  if (state.dim() != scheme_.dim()) throw AttackError("state dimension does not match the scheme");
  if (!conditioning.empty() && static_cast<int>(conditioning.size()) != stages()) {
    throw AttackError("conditioning bits must cover the whole block");
  }
  Bits guess(static_cast<std::size_t>(stages()));
  for (int s = 0; s < stages(); ++s) {
    const auto prefix = (conditioning.empty() ? std::span<const std::uint8_t>(guess) : conditioning)
                            .first(static_cast<std::size_t>(s));
    const Stage& st = stage_for(s, prefix);
    if (st.measurement) {
      guess[static_cast<std::size_t>(s)] = st.measurement->decide(state, rng) == qstate::Hypothesis::A ? 0 : 1;
    } else {
      guess[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(st.forced);
    }
  }
  return guess;
}

double SplitAttack::stage_optimum(int stage) const {
  double weighted = 0.0, total = 0.0;
  for (const auto& [key, st] : stages_) {
    if (key.first != stage) continue;
    weighted += st.prefix_weight * st.success;
    total += st.prefix_weight;
  }
  return total > 0.0 ? weighted / total : 0.5;
}

ExtractionReport split_attack_extract(const QuantumCrpDatabase& qdb, const SplitAttack& attack, Rng& rng,
                                      const CrpDatabase* conditioning, const CrpDatabase* truth) {
  const auto width = static_cast<std::size_t>(attack.stages());
  if (conditioning && conditioning->size() != qdb.size()) throw AttackError("conditioning size differs");
  if (truth && truth->size() != qdb.size()) throw AttackError("truth size differs");

  ExtractionReport report{CrpDatabase(Source::Extracted, true), 0.0, 0.0};
  long correct_bits = 0, total_bits = 0, correct_responses = 0;
  for (std::size_t i = 0; i < qdb.size(); ++i) {
    const auto& entry = qdb.entries()[i];
    Bits guessed;
    guessed.reserve(entry.states.size() * width);
    for (std::size_t j = 0; j < entry.states.size(); ++j) {
      std::span<const std::uint8_t> cond;
      if (conditioning) cond = std::span(conditioning->response(i)).subspan(j * width, width);
      const Bits block = attack.guess_block(entry.states[j], rng, cond);
      guessed.insert(guessed.end(), block.begin(), block.end());
    }
    if (truth) {
      const Bits& t = truth->response(i);
      if (t.size() != guessed.size()) throw AttackError("truth width differs from extracted width");
      long ok = 0;
      for (std::size_t b = 0; b < t.size(); ++b) ok += t[b] == guessed[b];
      correct_bits += ok;
      total_bits += static_cast<long>(t.size());
      correct_responses += ok == static_cast<long>(t.size());
    }
    report.database.add(entry.challenge, std::move(guessed));
  }
  if (truth && total_bits > 0) {
    report.bit_accuracy = static_cast<double>(correct_bits) / static_cast<double>(total_bits);
    report.response_accuracy = static_cast<double>(correct_responses) / static_cast<double>(qdb.size());
  }
  return report;
}

// ---------------------------------------------------------------------------

MultiCopyResult multi_copy_extract(const PureState& state, int copies, Rng& rng) {
  if (copies < 2) throw AttackError("multi-copy extraction needs K >= 2");
  if (state.dim() != 2) throw AttackError("multi-copy extraction is defined for BB84 qubits");
  const auto& z_basis = qstate::bb84_family().basis(0);
  const auto& x_basis = qstate::bb84_family().basis(1);
  int previous = qstate::measure(state, z_basis, rng).index;
  int used = 1;
  for (int i = 2; i <= copies; ++i) {
    const int z = qstate::measure(state, z_basis, rng).index;
    ++used;
    if (z != previous) {
      const int x = qstate::measure(state, x_basis, rng).index;
      return {x, 1, used + 1};
    }
    previous = z;
  }
  return {previous, 0, used};
}

InterceptResult intercept_resend(const PureState& state, Rng& rng) {
  if (state.dim() != 2) throw AttackError("intercept-resend acts on single qubits");
  const int basis = rng.bit();
  auto outcome = qstate::measure(state, qstate::bb84_family().basis(static_cast<std::size_t>(basis)), rng);
  return {std::move(outcome.post_state), outcome.index, basis};
}

// ---------------------------------------------------------------------------
// Logistic regression

LrModel::LrModel(int n, std::vector<std::vector<double>> weights) : n_(n), weights_(std::move(weights)) {
  if (weights_.empty()) throw AttackError("LR model needs k >= 1");
  for (const auto& w : weights_) {
    if (w.size() != static_cast<std::size_t>(n) + 1) throw AttackError("LR weight vector must have n+1 entries");
  }
}

double LrModel::score_features(std::span<const double> features) const {
  double prod = 1.0;
  for (const auto& w : weights_) {
    double dot = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) dot += w[i] * features[i];
    prod *= dot;
  }
  return prod;
}

std::uint8_t LrModel::predict(std::span<const std::uint8_t> challenge) const {
  if (static_cast<int>(challenge.size()) != n_) throw AttackError("challenge length differs from model");
  return predict_features(cpuf::feature_transform(challenge));
}

namespace {

struct Dataset {
  int dim = 0;                  // n + 1
  std::vector<double> features;  // row-major, dim per sample
  std::vector<double> signs;     // +1 for response 0, -1 for response 1
  std::size_t size() const { return signs.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
  }
};

std::vector<std::vector<double>> initial_weights(int k, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> w(static_cast<std::size_t>(k), std::vector<double>(dim));
  for (auto& wl : w)
    for (auto& v : wl) v = rng.normal();
  return w;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Mean cross-entropy and its gradient over the rows in `idx`.
double loss_and_gradient(const Dataset& data, std::span<const std::size_t> idx,
                         const std::vector<std::vector<double>>& w, std::vector<std::vector<double>>& grad) {
  const std::size_t k = w.size();
  const auto dim = static_cast<std::size_t>(data.dim);
  for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
  std::vector<double> dots(k);
  double loss = 0.0;
  for (std::size_t i : idx) {
    const auto x = data.row(i);
    double prod = 1.0;
    for (std::size_t l = 0; l < k; ++l) {
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) d += w[l][j] * x[j];
      dots[l] = d;
      prod *= d;
    }
    const double t = data.signs[i];
    const double z = t * prod;
    loss += softplus(-z);
    const double dprod = -t / (1.0 + std::exp(z));  // d loss / d prod
    for (std::size_t l = 0; l < k; ++l) {
      double others = 1.0;
      for (std::size_t o = 0; o < k; ++o) {
        if (o != l) others *= dots[o];
      }
      const double coef = dprod * others;
      for (std::size_t j = 0; j < dim; ++j) grad[l][j] += coef * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (auto& g : grad)
    for (auto& v : g) v *= inv;
  return loss * inv;
}

double accuracy_on(const Dataset& data, std::span<const std::size_t> idx, const LrModel& model) {
  if (idx.empty()) return 0.0;
  long ok = 0;
  for (std::size_t i : idx) {
    const double predicted_sign = model.score_features(data.row(i)) < 0.0 ? -1.0 : 1.0;
    ok += predicted_sign == data.signs[i];
  }
  return static_cast<double>(ok) / static_cast<double>(idx.size());
}

}  // namespace

LrFit lr_train(const CrpDatabase& db, int target_bit, int k, const LrConfig& config) {
  if (db.empty()) throw AttackError("cannot train on an empty database");
  if (target_bit < 0 || target_bit >= db.response_width()) throw AttackError("target bit out of range");
  if (k < 1) throw AttackError("k must be >= 1");
  if (config.epochs < 1 || config.restarts < 1) throw AttackError("epochs and restarts must be >= 1");

  const int n = db.challenge_length();
  Dataset data;
  data.dim = n + 1;
  data.features.resize(db.size() * static_cast<std::size_t>(data.dim));
  data.signs.resize(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    cpuf::feature_transform_into(db.challenge(i), std::span<double>(data.features).subspan(
                                                      i * static_cast<std::size_t>(data.dim), static_cast<std::size_t>(data.dim)));
    data.signs[i] = db.response(i)[static_cast<std::size_t>(target_bit)] ? -1.0 : 1.0;
  }

  std::vector<std::size_t> order(db.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(config.seed, kLrSplitStream));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng.below(i)]);
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(db.size())));
  if (db.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, db.size() - 1);
  else n_val = 0;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (val.empty()) val = train;

  const auto dim = static_cast<std::size_t>(data.dim);
  std::optional<LrFit> best;
  bool any_diverged = false;
  int restarts_run = 0;
  for (int r = 0; r < config.restarts; ++r) {
    ++restarts_run;
    Rng rng(derive_seed(config.seed, kLrRestartStream, static_cast<std::uint64_t>(r)));
    std::vector<std::vector<double>> w = initial_weights(k, dim, rng);
    auto best_w = w;
    std::vector<std::vector<double>> grad(w.size(), std::vector<double>(dim)), prev(grad), step(w.size(), std::vector<double>(dim, config.initial_step));

    const std::size_t batch = config.batch_size > 0 ? static_cast<std::size_t>(config.batch_size) : train.size();
    std::vector<std::size_t> shuffled = train;
    std::vector<double> history;
    bool diverged = false;
    double best_loss = INFINITY;
    for (int epoch = 0; epoch < config.epochs && !diverged; ++epoch) {
      if (batch < train.size()) {
        for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
      }
      double epoch_loss = 0.0;
      std::size_t batches = 0;
      for (std::size_t off = 0; off < shuffled.size(); off += batch) {
        const std::size_t len = std::min(batch, shuffled.size() - off);
        const double loss = loss_and_gradient(data, std::span(shuffled).subspan(off, len), w, grad);
        if (!std::isfinite(loss)) {
          diverged = true;
          break;
        }
        epoch_loss += loss;
        ++batches;
        for (std::size_t l = 0; l < w.size(); ++l) {
          for (std::size_t j = 0; j < dim; ++j) {
            double g = grad[l][j];
            const double s = g * prev[l][j];
            if (s > 0.0) {
              step[l][j] = std::min(step[l][j] * config.step_increase, config.max_step);
            } else if (s < 0.0) {
              step[l][j] = std::max(step[l][j] * config.step_decrease, config.min_step);
              g = 0.0;
            }
            if (g > 0.0) w[l][j] -= step[l][j];
            else if (g < 0.0) w[l][j] += step[l][j];
            prev[l][j] = g;
          }
        }
      }
      if (diverged) break;
      epoch_loss /= static_cast<double>(std::max<std::size_t>(batches, 1));
      if (epoch_loss < best_loss) {
        best_loss = epoch_loss;
        best_w = w;
      }
      history.push_back(epoch_loss);
      if (static_cast<int>(history.size()) > config.patience) {
        const double before = history[history.size() - 1 - static_cast<std::size_t>(config.patience)];
        if (before - epoch_loss < config.tolerance * std::max(before, 1e-12)) break;
      }
    }
    any_diverged = any_diverged || diverged;
    LrModel model(n, best_w);
    const double acc = accuracy_on(data, val, model);
    if (!best || acc > best->validation_accuracy) {
      best.emplace(LrFit{std::move(model), acc, 0, false});
    }
    if (best->validation_accuracy >= config.target_validation) break;
  }
  best->restarts_run = restarts_run;
  best->diverged = any_diverged;
  return std::move(*best);
}

LrModel lr_initial_model(int n, int k, const LrConfig& config) {
  if (n < 1 || k < 1) throw AttackError("n and k must be positive");
  Rng rng(derive_seed(config.seed, kLrRestartStream, 0));
  return LrModel(n, initial_weights(k, static_cast<std::size_t>(n) + 1, rng));
}

double lr_test_accuracy(const LrModel& model, const cpuf::CpufModel& cpuf, int target_bit, int samples, Rng& rng) {
  if (samples <= 0) throw AttackError("need a positive test sample count");
  std::vector<double> phi(static_cast<std::size_t>(cpuf.n()) + 1);
  long ok = 0;
  for (int s = 0; s < samples; ++s) {
    const Bits c = rng.bits(static_cast<std::size_t>(cpuf.n()));
    cpuf::feature_transform_into(c, phi);
    const std::uint8_t truth = cpuf.kind() == cpuf::Kind::IdealBiased ? cpuf.eval_bit(c, target_bit)
                                                                      : cpuf.eval_bit_features(phi, target_bit);
    ok += model.predict_features(phi) == truth;
  }
  return static_cast<double>(ok) / samples;
}

std::string attack_csv_header() {
  return "seed,q,scheme,k,n,m,mode,accuracy,bit_rate,epsilon_measured,runtime_ms";
}

std::string attack_csv_row(const AttackResult& r) {
  std::string row = std::to_string(r.seed) + ',' + std::to_string(r.q) + ',' + r.scheme + ',' + std::to_string(r.k) +
                    ',' + std::to_string(r.n) + ',' + std::to_string(r.m) + ',' + r.mode + ',' +
                    format_double(r.accuracy) + ',' + format_double(r.bit_rate) + ',' +
                    format_double(r.epsilon_measured) + ',';
  row += r.runtime_ms < 0.0 ? std::string("-") : format_double(r.runtime_ms);
  return row;
}

}  // namespace hlpuf::adversary
