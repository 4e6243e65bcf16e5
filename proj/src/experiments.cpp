#include "hlpuf/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include "hlpuf/analytics.hpp"
#include "hlpuf/parallel.hpp"
#include "hlpuf/protocol.hpp"

namespace hlpuf::experiments {

namespace {

constexpr std::uint64_t kCurveChallenges = 0x63762d6368616c6cULL;
constexpr std::uint64_t kCurveMeasure = 0x63762d6d65617375ULL;
constexpr std::uint64_t kCurveTest = 0x63762d7465737473ULL;
constexpr std::uint64_t kCurveLr = 0x63762d6c722d2d2dULL;

std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

adversary::CrpDatabase prefix(const adversary::CrpDatabase& db, std::size_t q) {
  adversary::CrpDatabase out(db.source(), db.noisy());
  for (std::size_t i = 0; i < q; ++i) out.add(db.challenge(i), db.response(i));
  return out;
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string csv_comment(const std::string& canonical_config) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_config)));
  return std::string("# ") + kToolVersion + " schema=" + kCsvSchema + " config=" + hex;
}

std::vector<adversary::AttackResult> attack_curve(const AttackCurveConfig& config) {
  using adversary::AttackResult;
  using adversary::CrpDatabase;
  if (config.m < 1 || config.n < 1 || config.k < 1) throw adversary::AttackError("n, k and m must be positive");
  if (config.target_bit < 0 || config.target_bit >= 2 * config.m) {
    throw adversary::AttackError("target bit must lie in the first half");
  }
  if (config.seeds.empty() || config.q_grid.empty()) throw adversary::AttackError("empty seed list or q grid");
  std::size_t q_max = 0;
  for (auto q : config.q_grid) q_max = std::max(q_max, q);

  const auto scheme = hybrid::bb84_scheme();
  std::vector<std::vector<AttackResult>> per_seed(config.seeds.size());

  parallel_for(static_cast<long>(config.seeds.size()), config.threads, [&](long si) {
    const std::uint64_t seed = config.seeds[static_cast<std::size_t>(si)];
    const auto model = std::make_shared<const cpuf::CpufModel>(
        cpuf::ModelSpec{cpuf::Kind::XorArbiter, config.n, config.k, 4 * config.m, seed});
    const hybrid::HpufDevice device(model, scheme);
    const adversary::SplitAttack attack(scheme);

    Rng challenges(derive_seed(seed, kCurveChallenges));
    Rng measure(derive_seed(seed, kCurveMeasure));
    CrpDatabase clean(adversary::Source::Clean, false);
    CrpDatabase multi(adversary::Source::Extracted, true);
    CrpDatabase single(adversary::Source::Extracted, true);
    long label_ok[3] = {0, 0, 0}, half_ok[3] = {0, 0, 0};
    for (std::size_t i = 0; i < q_max; ++i) {
      Bits x = challenges.bits(static_cast<std::size_t>(config.n));
      const Bits y = model->eval(x);
      const auto truth = hybrid::half_bits(y, hybrid::Role::First);
      const auto half = device.eval_half(x, hybrid::Role::First);
      Bits by_copies, by_split;
      for (const auto& s : half.states) {
        const auto r = adversary::multi_copy_extract(s, config.copies, measure);
        by_copies.push_back(static_cast<std::uint8_t>(r.value));
        by_copies.push_back(static_cast<std::uint8_t>(r.basis));
        const Bits g = attack.guess_block(s, measure);
        by_split.insert(by_split.end(), g.begin(), g.end());
      }
      const Bits truth_bits(truth.begin(), truth.end());
      const Bits* labels[3] = {&truth_bits, &by_copies, &by_split};
      for (int mode = 0; mode < 3; ++mode) {
        label_ok[mode] += (*labels[mode])[static_cast<std::size_t>(config.target_bit)] ==
                          truth_bits[static_cast<std::size_t>(config.target_bit)];
        half_ok[mode] += *labels[mode] == truth_bits;
      }
      clean.add(x, truth_bits);
      multi.add(x, std::move(by_copies));
      single.add(std::move(x), std::move(by_split));
    }
    const CrpDatabase* sources[3] = {&clean, &multi, &single};

    adversary::LrConfig lr = config.lr;
    lr.seed = derive_seed(config.lr.seed, kCurveLr, seed);
    for (std::size_t q : config.q_grid) {
      for (int mode = 0; mode < 3; ++mode) {
        const auto start = std::chrono::steady_clock::now();
        Rng test(derive_seed(seed, kCurveTest, q));
        double accuracy;
        if (q == 0) {
          accuracy = adversary::lr_test_accuracy(adversary::lr_initial_model(config.n, config.k, lr), *model,
                                                 config.target_bit, config.test_samples, test);
        } else {
          const auto fit = adversary::lr_train(prefix(*sources[mode], q), config.target_bit, config.k, lr);
          accuracy = adversary::lr_test_accuracy(fit.model, *model, config.target_bit, config.test_samples, test);
        }
        const double elapsed =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        const double denom = q_max > 0 ? static_cast<double>(q_max) : 1.0;
        per_seed[static_cast<std::size_t>(si)].push_back(AttackResult{
            seed, q, "bb84", config.k, config.n, config.m, kAttackModes[static_cast<std::size_t>(mode)], accuracy,
            q_max > 0 ? static_cast<double>(label_ok[mode]) / denom : 1.0,
            q_max > 0 ? 1.0 - static_cast<double>(half_ok[mode]) / denom : 0.0, config.timing ? elapsed : -1.0});
      }
    }
  });

  std::vector<AttackResult> rows;
  for (auto& chunk : per_seed) rows.insert(rows.end(), chunk.begin(), chunk.end());
  return rows;
}

std::vector<CurveMean> mean_curve(const std::vector<adversary::AttackResult>& rows) {
  std::map<std::pair<std::string, std::size_t>, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    auto& slot = acc[{r.mode, r.q}];
    slot.first += r.accuracy;
    ++slot.second;
  }
  std::vector<CurveMean> out;
  for (const auto& mode : kAttackModes) {
    for (const auto& [key, v] : acc) {
      if (key.first == mode) out.push_back({mode, key.second, v.first / v.second});
    }
  }
  return out;
}

Crossing first_q_reaching(const std::vector<CurveMean>& means, const std::string& mode, double level) {
  for (const auto& m : means) {
    if (m.mode == mode && m.accuracy >= level) return {true, m.q};
  }
  return {false, 0};
}

// ---------------------------------------------------------------------------
// Self-check

std::vector<CheckLine> selfcheck(std::uint64_t seed, bool corrupt_mub) {
  std::vector<CheckLine> out;
  auto add = [&](std::string name, bool pass, std::string detail) {
    out.push_back({std::move(name), pass, std::move(detail)});
  };
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(name, false, std::string("exception: ") + e.what());
    }
  };
  Rng rng(seed);

  guarded("qstate.mub_families", [&] {
    std::vector<qstate::Matrix> bases = qstate::mub8_family().bases();
    if (corrupt_mub) {
      // A small real rotation on two coordinates keeps basis 4 unitary but
      // breaks its unbiasedness against the others.
      qstate::Matrix rot = qstate::Matrix::Identity(8, 8);
      rot(0, 0) = rot(1, 1) = std::cos(0.3);
      rot(0, 1) = -std::sin(0.3);
      rot(1, 0) = std::sin(0.3);
      bases[4] = rot * bases[4];
    }
    const double d8 = qstate::mub_defect(qstate::MubFamily(8, bases));
    const double d4 = qstate::mub_defect(qstate::mub4_family());
    const double d2 = qstate::mub_defect(qstate::bb84_family());
    add("qstate.mub_families", d8 <= 1e-9 && d4 <= 1e-9 && d2 <= 1e-9 && bases.size() == 9,
        "defect8=" + fixed(d8, 12) + " defect4=" + fixed(d4, 12) + " defect2=" + fixed(d2, 12));
  });

  guarded("qstate.helstrom", [&] {
    using qstate::PureState;
    const PureState z0 = qstate::bb84_state(0, 0), z1 = qstate::bb84_state(1, 0);
    const PureState xp = qstate::bb84_state(0, 1), xm = qstate::bb84_state(1, 1);
    const std::vector<std::pair<PureState, double>> a{{z0, 0.5}, {xp, 0.5}}, b{{z1, 0.5}, {xm, 0.5}};
    const auto ra = qstate::mixture(a), rb = qstate::mixture(b);
    const double s = qstate::helstrom_success(ra, rb);
    const double d = qstate::trace_distance(ra, rb);
    const bool ok = std::abs(s - (0.5 + 1.0 / (2.0 * std::sqrt(2.0)))) < 1e-9 && std::abs(s - 0.5 - 0.5 * d) < 1e-9 &&
                    std::abs(ra.entries()(0, 0).real() - 0.75) < 1e-12 && std::abs(ra.entries()(0, 1).real() - 0.25) < 1e-12;
    add("qstate.helstrom", ok, "success=" + fixed(s) + " distance=" + fixed(d));
  });

  guarded("cpuf.determinism", [&] {
    const cpuf::CpufModel model(cpuf::ModelSpec{cpuf::Kind::XorArbiter, 32, 2, 4, seed});
    std::stringstream text;
    cpuf::save_model(model, text);
    const auto reloaded = cpuf::load_model(text);
    bool ok = true;
    for (int i = 0; i < 200; ++i) {
      const Bits c = rng.bits(32);
      ok = ok && model.eval(c) == model.eval(c) && model.eval(c) == reloaded.eval(c);
    }
    const auto phi = cpuf::feature_transform(Bits{1, 0, 0, 0});
    ok = ok && phi == std::vector<double>{-1, 1, 1, 1, 1};
    add("cpuf.determinism", ok, "200 challenges, save/load round trip");
  });

  guarded("hybrid.round_trip", [&] {
    bool ok = true;
    long checked = 0;
    for (const auto& scheme : {hybrid::bb84_scheme(), hybrid::mub4_scheme(), hybrid::mub8_scheme()}) {
      const auto model = std::make_shared<const cpuf::CpufModel>(
          cpuf::ModelSpec{cpuf::Kind::IdealBiased, 16, 1, 4 * scheme.bits_per_block(), seed});
      hybrid::HlpufDevice lock{hybrid::HpufDevice(model, scheme)};
      for (int i = 0; i < 50; ++i) {
        const Bits x = rng.bits(16);
        const Bits y = model->eval(x);
        const auto first = hybrid::server_encode(y, hybrid::Role::First, scheme);
        const auto second = hybrid::server_encode(y, hybrid::Role::Second, scheme);
        const auto released = lock.lock_query(x, first.states, rng);
        ok = ok && released && hybrid::server_verify(second, released->states, scheme, rng) == hybrid::Verdict::Accept;
        ++checked;
      }
      const std::vector<qstate::PureState> short_half(1, qstate::PureState::basis_vector(scheme.dim(), 0));
      ok = ok && !lock.lock_query(rng.bits(16), short_half, rng).has_value();
    }
    add("hybrid.round_trip", ok, std::to_string(checked) + " honest rounds, wrong arity aborts");
  });

  guarded("adversary.optima", [&] {
    const adversary::SplitAttack bb84(hybrid::bb84_scheme());
    const auto mub8 = hybrid::mub8_scheme();
    const adversary::SplitAttack m8(mub8, adversary::uniform_over_family(mub8));
    const double v = bb84.stage_optimum(0), p0 = m8.stage_optimum(0);
    bool ok = std::abs(v - 0.853553) < 1e-6 && std::abs(p0 - 0.62) < 0.01;
    for (int i = 0; i < 100; ++i) {
      const auto r = adversary::multi_copy_extract(qstate::bb84_state(1, 0), 4, rng);
      ok = ok && r.value == 1 && r.basis == 0;
    }
    add("adversary.optima", ok, "bb84=" + fixed(v) + " mub8_p0=" + fixed(p0));
  });

  guarded("analytics.pinned", [&] {
    const double a = analytics::binomial_tail(10, 0.2, 0.5);
    const double f = analytics::forge_bound(a, 0.9);
    const double r = analytics::reuse_bound(3, 4, 0.01).value;
    const double h = analytics::minentropy_bound(10, 0.01, 0.0);
    const bool ok = std::abs(a - 56.0 / 1024.0) < 1e-12 && std::abs(f - 0.04921875) < 1e-12 &&
                    std::abs(r - 0.1975) < 1e-12 && std::abs(h - 9.192) < 1e-3 &&
                    std::abs(analytics::p_guess_bound(0.5).value - 0.853553) < 1e-6;
    add("analytics.pinned", ok, "p_extract=" + fixed(a, 7) + " forge=" + fixed(f, 8) + " minentropy=" + fixed(h, 4));
  });

  guarded("protocol.honest_session", [&] {
    const auto model = std::make_shared<const cpuf::CpufModel>(cpuf::ModelSpec{cpuf::Kind::IdealBiased, 32, 1, 16, seed});
    Rng db_rng(derive_seed(seed, 1));
    protocol::Server server(adversary::CrpDatabase::sample(*model, 20, db_rng), hybrid::bb84_scheme(), {}, seed);
    protocol::Client client(hybrid::HpufDevice(model, hybrid::bb84_scheme()));
    protocol::IdentityAdversary identity;
    const auto report = protocol::run_session(server, client, identity, 50, rng);
    add("protocol.honest_session", report.accepted == 50 && report.retired == 0,
        "accepted=" + std::to_string(report.accepted) + "/50");
  });

  return out;
}

}  // namespace hlpuf::experiments
