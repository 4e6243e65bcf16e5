// Experiment runner. Exit codes: 0 success, 1 invariant failure, 2 config error.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hlpuf/analytics.hpp"
#include "hlpuf/experiments.hpp"
#include "hlpuf/protocol.hpp"

using namespace hlpuf;

namespace {

constexpr int kOk = 0;
constexpr int kInvariant = 1;
constexpr int kConfig = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream s;
  for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? "," : "") << xs[i];
  return s.str();
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fixed(xs[i], 6);
  return out;
}

/// Output sink: a file when --out is given, otherwise stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ConfigError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

// ---------------------------------------------------------------------------

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& c, bool seed_required) {
  auto* seed = cmd->add_option("--seed", c.seed, "master seed");
  if (seed_required) seed->required();
  cmd->add_option("--out", c.out, "output path (default stdout)");
  cmd->add_option("--threads", c.threads, "worker threads; never changes output bytes")->check(CLI::Range(1, 64));
}

// attack-curve ---------------------------------------------------------------

struct CurveOptions {
  CommonOptions common;
  int n = 32, k = 2, m = 4, seeds = 5, test_samples = 10000, copies = 10;
  std::vector<std::size_t> q_grid{0, 250, 500, 1000, 2000, 5000, 10000, 20000, 50000};
  int epochs = 200, restarts = 5, batch = 0;
  bool timing = false;
};

int cmd_attack_curve(const CurveOptions& o) {
  experiments::AttackCurveConfig cfg;
  cfg.n = o.n;
  cfg.k = o.k;
  cfg.m = o.m;
  cfg.q_grid = o.q_grid;
  cfg.seeds.clear();
  for (int i = 0; i < o.seeds; ++i) cfg.seeds.push_back(o.common.seed + static_cast<std::uint64_t>(i));
  cfg.test_samples = o.test_samples;
  cfg.copies = o.copies;
  cfg.lr.epochs = o.epochs;
  cfg.lr.restarts = o.restarts;
  cfg.lr.batch_size = o.batch;
  cfg.lr.seed = o.common.seed;
  cfg.threads = o.common.threads;
  cfg.timing = o.timing;

  const std::string canonical = "attack-curve;n=" + std::to_string(o.n) + ";k=" + std::to_string(o.k) +
                                ";m=" + std::to_string(o.m) + ";q=" + join(o.q_grid) + ";seed=" +
                                std::to_string(o.common.seed) + ";seeds=" + std::to_string(o.seeds) +
                                ";test=" + std::to_string(o.test_samples) + ";copies=" + std::to_string(o.copies) +
                                ";epochs=" + std::to_string(o.epochs) + ";restarts=" + std::to_string(o.restarts) +
                                ";batch=" + std::to_string(o.batch) + ";timing=" + (o.timing ? "1" : "0");
  const auto rows = experiments::attack_curve(cfg);
  Sink sink(o.common.out);
  auto& out = sink.stream();
  out << experiments::csv_comment(canonical) << '\n' << adversary::attack_csv_header() << '\n';
  bool sane = true;
  for (const auto& r : rows) {
    sane = sane && r.accuracy >= 0.0 && r.accuracy <= 1.0;
    out << adversary::attack_csv_row(r) << '\n';
  }
  return sane ? kOk : kInvariant;
}

// bounds ---------------------------------------------------------------------

struct BoundsOptions {
  CommonOptions common;
  int m = 4, k_max = 16;
  double p = 0.5, p_classical = 1.0, eps1 = 0.0;
  std::vector<double> eps{0.0, 0.05, 0.1, 0.2, 0.3};
  std::vector<long> q_grid{1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
  std::vector<double> p_grid{0.5, 0.55, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> zeta{0.0, 0.01, 0.05, 0.1, 0.15, 0.2, 0.25};
};

int cmd_bounds(const BoundsOptions& o) {
  const std::string canonical = "bounds;m=" + std::to_string(o.m) + ";p=" + fixed(o.p, 6) + ";pc=" +
                                fixed(o.p_classical, 6) + ";eps1=" + fixed(o.eps1, 6) + ";kmax=" +
                                std::to_string(o.k_max) + ";eps=" + join(o.eps) + ";q=" + join(o.q_grid) +
                                ";pgrid=" + join(o.p_grid) + ";zeta=" + join(o.zeta);
  // Validate before writing anything.
  analytics::p_guess_bound(o.p);
  for (double p : o.p_grid) analytics::p_guess_bound(p);

  Sink sink(o.common.out);
  auto& out = sink.stream();
  out << experiments::csv_comment(canonical) << '\n';
  out << "quantity,p,m,q,eps,k,zeta,delta_r,value,raw\n";
  auto row = [&](const std::string& what, double p, int m, long q, double eps, int k, double zeta, double value,
                 double raw) {
    out << what << ',' << fixed(p, 6) << ',' << m << ',' << q << ',' << fixed(eps, 6) << ',' << k << ','
        << fixed(zeta, 6) << ',' << fixed(p - 0.5, 6) << ',' << fixed(value) << ',' << fixed(raw) << '\n';
  };
  bool sane = true;
  for (double p : o.p_grid) {
    const auto g = analytics::p_guess_bound(p);
    row("p_guess", p, 0, 0, 0.0, 0, 0.0, g.value, g.raw);
  }
  for (const auto& point : analytics::pextract_curve(o.eps, o.q_grid, o.m, o.p)) {
    sane = sane && point.value >= 0.0 && point.value <= 1.0;
    row("p_extract", o.p, o.m, point.q, point.eps, 0, 0.0, point.value, point.value);
    const double f = analytics::forge_bound(point.value, o.p_classical);
    row("forge", o.p, o.m, point.q, point.eps, 0, 0.0, f, f);
  }
  for (int k = 0; k <= o.k_max; ++k) {
    const auto r = analytics::reuse_bound(k, o.m, o.eps1);
    row("reuse", o.p, o.m, 0, o.eps1, k, 0.0, r.value, r.raw);
  }
  double prev = 1e300;
  for (double z : o.zeta) {
    const double h = analytics::minentropy_bound(o.m, z, o.p - 0.5);
    sane = sane && h <= prev + 1e-12;
    prev = h;
    row("minentropy", o.p, o.m, 0, 0.0, 0, z, h, h);
  }
  return sane ? kOk : kInvariant;
}

// protocol -------------------------------------------------------------------

struct ProtocolOptions {
  CommonOptions common;
  int m = 8;
  std::size_t db_size = 1000;
  long rounds = 100;
  std::string adversary = "identity";
  bool no_reuse = false;
  int reuse_cap = 0;
  std::string transcript;
};

std::unique_ptr<protocol::ChannelAdversary> make_adversary(const std::string& name, std::uint64_t seed) {
  if (name == "identity") return std::make_unique<protocol::IdentityAdversary>();
  if (name == "transcript-learner") return std::make_unique<protocol::TranscriptLearner>(seed);
  if (name == "intercept-resend") return std::make_unique<protocol::InterceptResendAdversary>(true, true);
  if (name == "intercept-second") return std::make_unique<protocol::InterceptResendAdversary>(false, true);
  if (name == "foreign-replay") return std::make_unique<protocol::ForeignReplayAdversary>();
  if (name == "drop") return std::make_unique<protocol::DropAdversary>();
  throw ConfigError("unknown adversary " + name);
}

int cmd_protocol(const ProtocolOptions& o) {
  auto adversary = make_adversary(o.adversary, derive_seed(o.common.seed, 3));
  const auto model = std::make_shared<const cpuf::CpufModel>(
      cpuf::ModelSpec{cpuf::Kind::IdealBiased, 32, 1, 4 * o.m, derive_seed(o.common.seed, 0)});
  Rng db_rng(derive_seed(o.common.seed, 1));
  protocol::Server server(adversary::CrpDatabase::sample(*model, o.db_size, db_rng), hybrid::bb84_scheme(),
                          protocol::ReusePolicy{!o.no_reuse, o.reuse_cap}, derive_seed(o.common.seed, 2));
  protocol::Client client(hybrid::HpufDevice(model, hybrid::bb84_scheme()));
  Rng rng(derive_seed(o.common.seed, 4));
  const auto report = protocol::run_session(server, client, *adversary, o.rounds, rng);

  // Invariants: custody and retirement.
  bool ok = true;
  std::vector<bool> retired(o.db_size, false);
  for (const auto& r : report.rounds) {
    if (!r.challenge_index) continue;
    ok = ok && !retired[*r.challenge_index];
    if (r.status != protocol::RoundStatus::Accepted) retired[*r.challenge_index] = true;
    if (r.status == protocol::RoundStatus::ClientAbort) ok = ok && !r.second_half_emitted;
  }

  Sink sink(o.common.out);
  sink.stream() << protocol::report_json(report, adversary->name()) << '\n';
  if (!o.transcript.empty()) {
    std::ofstream t(o.transcript, std::ios::binary);
    if (!t) throw ConfigError("cannot open transcript file " + o.transcript);
    protocol::write_transcript(report, t);
  }
  return ok ? kOk : kInvariant;
}

// selfcheck ------------------------------------------------------------------

struct SelfcheckOptions {
  CommonOptions common;
  bool corrupt_mub = false;
};

int cmd_selfcheck(const SelfcheckOptions& o) {
  const auto lines = experiments::selfcheck(o.common.seed, o.corrupt_mub);
  Sink sink(o.common.out);
  bool all = true;
  for (const auto& l : lines) {
    all = all && l.pass;
    sink.stream() << (l.pass ? "PASS " : "FAIL ") << l.name << " : " << l.detail << '\n';
  }
  sink.stream() << (all ? "selfcheck: all passed" : "selfcheck: FAILURES") << '\n';
  return all ? kOk : kInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(experiments::kToolVersion) + " experiment runner"};
  app.set_config("--config", "", "TOML/INI file; command-line flags override it");
  app.require_subcommand(1);
  app.set_version_flag("--version", experiments::kToolVersion);

  CurveOptions curve;
  auto* c = app.add_subcommand("attack-curve", "LR accuracy vs q for clean, multi-copy and single-copy databases");
  add_common(c, curve.common, true);
  c->add_option("--trials,--seeds", curve.seeds, "number of seeds (seed, seed+1, ...)")->check(CLI::PositiveNumber);
  c->add_option("--n", curve.n)->check(CLI::Range(2, 256));
  c->add_option("--k", curve.k)->check(CLI::Range(1, 8));
  c->add_option("--m", curve.m)->check(CLI::Range(1, 64));
  c->add_option("--q-grid", curve.q_grid)->delimiter(',');
  c->add_option("--test-samples", curve.test_samples)->check(CLI::PositiveNumber);
  c->add_option("--copies", curve.copies)->check(CLI::Range(2, 64));
  c->add_option("--epochs", curve.epochs)->check(CLI::PositiveNumber);
  c->add_option("--restarts", curve.restarts)->check(CLI::PositiveNumber);
  c->add_option("--batch", curve.batch, "0 = full batch")->check(CLI::NonNegativeNumber);
  c->add_flag("--timing", curve.timing, "fill runtime_ms (output no longer byte-stable)");

  BoundsOptions bounds;
  auto* b = app.add_subcommand("bounds", "closed-form bound curves");
  add_common(b, bounds.common, false);
  b->add_option("--m", bounds.m)->check(CLI::Range(0, 128));
  b->add_option("--p", bounds.p);
  b->add_option("--p-classical", bounds.p_classical);
  b->add_option("--eps1", bounds.eps1);
  b->add_option("--k-max", bounds.k_max)->check(CLI::NonNegativeNumber);
  b->add_option("--eps", bounds.eps)->delimiter(',');
  b->add_option("--q-grid", bounds.q_grid)->delimiter(',');
  b->add_option("--p-grid", bounds.p_grid)->delimiter(',');
  b->add_option("--zeta", bounds.zeta)->delimiter(',');

  ProtocolOptions proto;
  auto* p = app.add_subcommand("protocol", "authentication session with a channel adversary");
  add_common(p, proto.common, true);
  p->add_option("--m", proto.m)->check(CLI::Range(1, 64));
  p->add_option("--db-size", proto.db_size)->check(CLI::PositiveNumber);
  p->add_option("--rounds,--trials", proto.rounds)->check(CLI::PositiveNumber);
  p->add_option("--adversary", proto.adversary)
      ->check(CLI::IsMember({"identity", "transcript-learner", "intercept-resend", "intercept-second",
                             "foreign-replay", "drop"}));
  p->add_flag("--no-reuse", proto.no_reuse);
  p->add_option("--reuse-cap", proto.reuse_cap, "0 = unlimited")->check(CLI::NonNegativeNumber);
  p->add_option("--transcript", proto.transcript, "JSON-lines transcript path");

  SelfcheckOptions self;
  auto* s = app.add_subcommand("selfcheck", "invariant battery over every module");
  add_common(s, self.common, false);
  s->add_flag("--corrupt-mub", self.corrupt_mub, "negative control: damage one MUB-8 basis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (c->parsed()) return cmd_attack_curve(curve);
    if (b->parsed()) return cmd_bounds(bounds);
    if (p->parsed()) return cmd_protocol(proto);
    if (s->parsed()) return cmd_selfcheck(self);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }
  return kConfig;
}
