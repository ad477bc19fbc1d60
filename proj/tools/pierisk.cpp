// Copyright 2026 The pierisk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// pierisk command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 oracle violation.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pierisk/bounds.hpp"
#include "pierisk/dataset.hpp"
#include "pierisk/errors.hpp"
#include "pierisk/estimation.hpp"
#include "pierisk/experiment.hpp"
#include "pierisk/mechanisms.hpp"
#include "pierisk/oracle.hpp"
#include "pierisk/parallel.hpp"
#include "pierisk/pse.hpp"
#include "pierisk/records.hpp"
#include "pierisk/reid.hpp"
#include "pierisk/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pierisk::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kViolation = 3 };

/// Bad flag values found after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  std::string config;

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
  unsigned thread_count() const {
    const unsigned t = threads.value_or(0);
    return t == 0 ? default_thread_count() : t;
  }
  /// Opens `name` under --out, or returns nullptr when --out is unset.
  std::unique_ptr<std::ofstream> open_out(const std::string& name, bool binary = false) const {
    if (out.empty()) return nullptr;
    fs::create_directories(out);
    auto f = std::make_unique<std::ofstream>(fs::path(out) / name, binary ? std::ios::binary : std::ios::out);
    if (!*f) throw DataError("cannot write " + (fs::path(out) / name).string());
    return f;
  }
};

Epsilon parse_epsilon(const std::string& s) {
  if (s == "inf" || s == "infinity") return Epsilon::unbounded();
  double v = 0.0;
  std::istringstream is(s);
  if (!(is >> v) || !is.eof()) throw UsageError("invalid epsilon '" + s + "'");
  if (!(v >= 0.0)) throw UsageError("epsilon must be >= 0");
  return Epsilon::finite(v);
}

json fano_json(const FanoBound& f) { return {{"raw", f.raw}, {"reported", f.reported}, {"vacuous", f.vacuous}}; }

json bound_json(const PieBoundReport& r) {
  json j;
  j["n"] = r.n;
  j["alphabet_size"] = r.alphabet_size;
  j["epsilon"] = r.epsilon->is_unbounded() ? json("inf") : json(r.epsilon->value());
  j["g"] = r.g ? json(*r.g) : json(nullptr);
  j["t"] = r.t;
  j["theta"] = r.theta;
  j["alpha_ldp"] = r.alpha_ldp;
  j["alpha_mechanism"] = r.alpha_mechanism;
  j["beta_u"] = r.beta_u;
  j["fano_ldp"] = fano_json(r.fano_ldp);
  j["fano_mechanism"] = fano_json(r.fano_mechanism);
  if (r.target_alpha) {
    j["target_beta"] = *r.target_beta;
    j["target_alpha"] = {{"alpha_max", r.target_alpha->alpha_max}, {"achievable", r.target_alpha->achievable}};
  }
  return j;
}

std::string bound_row(const PieBoundReport& r) {
  std::ostringstream os;
  os << (r.epsilon->is_unbounded() ? std::string("inf") : fmt(r.epsilon->value())) << ',' << r.n << ','
     << r.alphabet_size << ',' << (r.g ? std::to_string(*r.g) : std::string()) << ',' << r.t << ',' << fmt(r.theta)
     << ',' << fmt(r.alpha_ldp) << ',' << fmt(r.alpha_mechanism) << ',' << fmt(r.fano_ldp.reported) << ','
     << fmt(r.fano_mechanism.reported);
  return os.str();
}

constexpr const char* kBoundRowHeader = "epsilon,n,alphabet_size,g,t,theta,alpha_ldp,alpha_mechanism,fano_ldp,fano_mechanism";

// ---------------------------------------------------------------------------

struct BoundsArgs {
  std::vector<std::string> epsilon;
  std::optional<double> theta;
  std::size_t n = 0;
  std::size_t alphabet = 0;
  std::optional<std::size_t> g;
  std::size_t t = 1;
  std::optional<double> target_beta;
  std::string format = "json";
};

int run_bounds(const Globals& gl, const BoundsArgs& a) {
  if (a.epsilon.empty() == !a.theta.has_value()) throw UsageError("bounds: give --epsilon or --theta (exactly one)");
  if (a.n < 2) throw UsageError("bounds: --n must be >= 2");
  if (a.alphabet < 1) throw UsageError("bounds: --alphabet must be >= 1");
  if (a.g && *a.g < 2) throw UsageError("bounds: --g must be >= 2");
  std::vector<Epsilon> eps;
  if (a.theta) {
    eps.push_back(epsilon_for_theta(*a.theta, a.g ? *a.g : a.alphabet));
  } else {
    for (const auto& s : a.epsilon) eps.push_back(parse_epsilon(s));
  }
  std::vector<PieBoundReport> reports;
  for (const auto& e : eps) reports.push_back(make_bound_report(e, a.n, a.alphabet, a.g, a.t, a.target_beta));

  json arr = json::array();
  for (const auto& r : reports) arr.push_back(bound_json(r));
  if (a.format == "json") {
    for (const auto& j : arr) std::cout << j.dump() << '\n';
  } else {
    std::cout << kBoundRowHeader << '\n';
    for (const auto& r : reports) std::cout << bound_row(r) << '\n';
  }
  if (auto f = gl.open_out("bounds.json")) *f << arr.dump(2) << '\n';
  if (auto f = gl.open_out("bounds.csv")) {
    *f << kBoundRowHeader << '\n';
    for (const auto& r : reports) *f << bound_row(r) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct MechanismArgs {
  std::string mechanism = "rr";
  std::string epsilon;
  std::optional<double> theta;
  std::size_t g = 0;  // 0: LDP-optimal for GLH

  /// Resolves ε and g for an alphabet of size k.
  std::pair<Epsilon, std::size_t> resolve(std::size_t k) const {
    const MechanismKind kind = parse_mechanism(mechanism);
    if (epsilon.empty() == !theta.has_value()) throw UsageError("give --epsilon or --theta (exactly one)");
    if (theta) {
      if (kind == MechanismKind::glh && g == 0) throw UsageError("--theta with glh needs --g");
      return {epsilon_for_theta(*theta, kind == MechanismKind::rr ? k : g), kind == MechanismKind::rr ? 0 : g};
    }
    const Epsilon e = parse_epsilon(epsilon);
    if (kind == MechanismKind::rr) return {e, 0};
    if (e.is_unbounded() && g == 0) throw UsageError("glh with unbounded epsilon needs --g");
    return {e, g ? g : detail::glh_buckets(0, e.value())};
  }
};

std::string record_format(const std::string& requested, const std::string& path) {
  if (requested != "auto") return requested;
  return fs::path(path).extension() == ".bin" ? "binary" : "csv";
}

struct ObfuscateArgs {
  MechanismArgs mech;
  std::string input;
  std::string output;
  std::string format = "auto";
  std::string mode = "first";
  std::size_t min_events = 1;
};

int run_obfuscate(const Globals& gl, const ObfuscateArgs& a) {
  const auto data = ingest_checkins(a.input, IngestOptions{a.min_events, 0}).dataset;
  const std::size_t k = data.alphabet.size();
  const auto [eps, g] = a.mech.resolve(k);
  const MechanismKind kind = parse_mechanism(a.mech.mechanism);
  if (a.mode != "first" && a.mode != "all") throw UsageError("obfuscate: --mode must be first or all");
  Rng rng(gl.seed_or(1));

  std::vector<double> truth(k, 0.0);
  std::size_t released = 0;
  std::vector<RrRecord> rr_out;
  std::vector<GlhRecord> glh_out;
  const RandomizedResponse rr(eps, k);
  std::optional<GeneralLocalHash> glh;
  if (kind == MechanismKind::glh) glh.emplace(eps, HashFamily::carter_wegman(k, static_cast<std::uint32_t>(g)));
  for (std::size_t u = 0; u < data.users(); ++u) {
    const Trace& t = data.traces[u];
    const std::size_t count = a.mode == "first" ? 1 : t.size();
    for (std::size_t i = 0; i < count; ++i) {
      const Symbol x = t[i];
      truth[x] += 1.0;
      ++released;
      if (glh) {
        const auto o = glh->sample(x, rng);
        glh_out.push_back({u, o.hash, o.bucket});
      } else {
        rr_out.push_back({u, rr.sample(x, rng)});
      }
    }
  }
  for (double& v : truth) v /= static_cast<double>(released);

  const std::string out_path = !a.output.empty() ? a.output
                               : !gl.out.empty() ? (fs::path(gl.out) / "records.csv").string()
                                                 : std::string();
  const bool binary = record_format(a.format, out_path) == "binary";
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out_path.empty()) {
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    file.open(out_path, binary ? std::ios::binary : std::ios::out);
    if (!file) throw DataError("cannot write " + out_path);
    os = &file;
  } else if (binary) {
    throw UsageError("obfuscate: binary output needs --output or --out");
  }
  if (glh) {
    binary ? write_glh_binary(*os, glh_out) : write_glh_csv(*os, glh_out);
  } else {
    binary ? write_rr_binary(*os, rr_out) : write_rr_csv(*os, rr_out);
  }
  if (auto f = gl.open_out("truth.csv")) write_distribution_csv(*f, truth);
  if (auto f = gl.open_out("obfuscate.json")) {
    json j{{"mechanism", a.mech.mechanism},
           {"epsilon", eps.is_unbounded() ? json("inf") : json(eps.value())},
           {"alphabet_size", k},
           {"records", released},
           {"users", data.users()}};
    if (glh) j["g"] = g;
    *f << j.dump(2) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<double> read_distribution_csv(const std::string& path, std::size_t k) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<double> p(k, 0.0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty() || (line_no == 1 && line.rfind("symbol", 0) == 0)) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 2) throw DataError(path + ": line " + std::to_string(line_no) + ": expected symbol,probability");
    const auto s = detail::parse_u64(f[0], line_no);
    if (s >= k) throw DataError(path + ": line " + std::to_string(line_no) + ": symbol out of range");
    double v = 0.0;
    if (!detail::parse_number(f[1], v)) throw DataError(path + ": line " + std::to_string(line_no) + ": bad probability");
    p[s] = v;
  }
  return p;
}

struct EstimateArgs {
  MechanismArgs mech;
  std::string records;
  std::string format = "auto";
  std::size_t alphabet = 0;
  std::string truth;
  double level = 0.05;
  std::size_t phi = 0;
};

int run_estimate(const Globals& gl, const EstimateArgs& a) {
  if (a.alphabet < 2) throw UsageError("estimate: --alphabet must be >= 2");
  if (!(a.level > 0.0 && a.level < 1.0)) throw UsageError("estimate: --level must lie in (0,1)");
  const auto [eps, g] = a.mech.resolve(a.alphabet);
  const MechanismKind kind = parse_mechanism(a.mech.mechanism);
  const bool binary = record_format(a.format, a.records) == "binary";
  std::ifstream in(a.records, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot open " + a.records);

  FrequencyEstimate est;
  double null_var = 0.0;
  std::size_t n = 0;
  if (kind == MechanismKind::rr) {
    const auto recs = binary ? read_rr_binary(in) : read_rr_csv(in, a.alphabet);
    for (const auto& r : recs) {
      if (r.y >= a.alphabet) throw DataError("estimate: record symbol out of range");
    }
    n = recs.size();
    est = estimate_rr(std::span<const RrRecord>(recs), eps, a.alphabet);
    null_var = null_variance_rr(eps, a.alphabet, n);
  } else {
    const auto recs = binary ? read_glh_binary(in) : read_glh_csv(in);
    n = recs.size();
    if (n == 0) throw DataError("estimate: no records");
    const std::uint32_t gg = recs.front().hash.buckets;
    if (a.mech.g != 0 && a.mech.g != gg) throw DataError("estimate: records carry g = " + std::to_string(gg));
    est = estimate_glh(recs, eps, gg, a.alphabet, gl.thread_count());
    null_var = null_variance_glh(eps, gg, n);
  }
  const FrequencyEstimate thr = apply_significance_threshold(est, null_var, a.level);
  std::optional<std::vector<double>> truth;
  if (!a.truth.empty()) truth = read_distribution_csv(a.truth, a.alphabet);

  std::ostringstream csv;
  csv << (truth ? "symbol,p_true,p_hat,thresholded\n" : "symbol,p_hat,thresholded\n");
  for (std::size_t x = 0; x < a.alphabet; ++x) {
    csv << x << ',';
    if (truth) csv << fmt((*truth)[x]) << ',';
    csv << fmt(est.estimate[x]) << ',' << fmt(thr.estimate[x]) << '\n';
  }
  if (auto f = gl.open_out("estimate.csv")) {
    *f << csv.str();
  } else {
    std::cout << csv.str();
  }
  if (truth && a.phi > 0) {
    const auto e = l2_and_relative_error(*truth, est.estimate, a.phi);
    const auto et = l2_and_relative_error(*truth, thr.estimate, a.phi);
    json j{{"records", n},
           {"phi", a.phi},
           {"l2", e.l2_sum},
           {"relative_error", e.mean_relative_error},
           {"relative_error_thresholded", et.mean_relative_error}};
    if (auto f = gl.open_out("estimate.json")) *f << j.dump(2) << '\n';
    (gl.out.empty() ? std::cerr : std::cout) << j.dump() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

Knowledge parse_knowledge(const std::string& s) {
  if (s == "max") return Knowledge::maximum;
  if (s == "partial") return Knowledge::partial;
  throw UsageError("knowledge must be max or partial");
}

ReleaseMode parse_mode(const std::string& s) {
  if (s == "single") return ReleaseMode::single_datum;
  if (s == "trace") return ReleaseMode::full_trace;
  throw UsageError("mode must be single or trace");
}

TraceMechanism trace_mechanism(MechanismKind kind, Epsilon eps, std::size_t g, std::size_t k) {
  if (kind == MechanismKind::rr) return TraceMechanism::rr(RandomizedResponse(eps, k));
  return TraceMechanism::glh(GeneralLocalHash(eps, HashFamily::carter_wegman(k, static_cast<std::uint32_t>(g))));
}

struct ReidArgs {
  MechanismArgs mech;
  std::string dataset;
  std::size_t min_events = 10;
  std::string knowledge = "partial";
  std::string mode = "single";
  bool overlap = false;
  std::size_t passes = 1;
  std::size_t det_trials = 2000;
  std::size_t impostors = 10;
};

int run_reid(const Globals& gl, const ReidArgs& a) {
  const auto data = ingest_checkins(a.dataset, IngestOptions{a.min_events, 0}).dataset;
  if (data.users() < 2) throw DataError("reid: at least two users are required");
  const std::size_t k = data.alphabet.size();
  const auto [eps, g] = a.mech.resolve(k);
  const unsigned threads = gl.thread_count();
  const auto attack = prepare_attack(data, parse_knowledge(a.knowledge), parse_mode(a.mode), a.overlap, threads);
  const auto mech = trace_mechanism(parse_mechanism(a.mech.mechanism), eps, g, k);
  const Rng root(gl.seed_or(1));
  const auto res = identification_error_rate(attack.eval_data, mech, attack.profiles, a.passes, root.split(200), threads);
  const auto sample = harvest_scores(attack.eval_data, mech, attack.profiles,
                                     HarvestOptions{a.det_trials, a.impostors, threads}, root.split(300));
  const auto det = far_frr_det(sample.genuine, sample.impostor);
  json j{{"error_rate", res.error_rate()}, {"n", data.users()}, {"trials", res.trials}, {"errors", res.errors}};
  std::cout << j.dump() << '\n';
  if (auto f = gl.open_out("reid.json")) *f << j.dump(2) << '\n';
  if (auto f = gl.open_out("det.csv")) {
    *f << "threshold,far,frr\n";
    for (const auto& p : det) *f << fmt(p.threshold) << ',' << fmt(p.far) << ',' << fmt(p.frr) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

ScoreSample read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  ScoreSample s;
  s.provenance = "file:" + path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty() || (line_no == 1 && line.rfind("label", 0) == 0)) continue;
    const auto f = detail::split_csv(line);
    double v = 0.0;
    if (f.size() != 2 || !detail::parse_number(f[1], v) || !std::isfinite(v)) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected label,score");
    }
    if (f[0] == "g") {
      s.genuine.push_back(v);
    } else if (f[0] == "i") {
      s.impostor.push_back(v);
    } else {
      throw DataError(path + ": line " + std::to_string(line_no) + ": label must be g or i");
    }
  }
  return s;
}

struct PseArgs {
  std::string scores;
  std::size_t k = kDefaultKnnK;
  std::vector<double> fractions{0.125, 0.25, 0.5, 1.0};
};

int run_pse(const Globals& gl, const PseArgs& a) {
  if (a.scores.empty() == gl.config.empty()) throw UsageError("pse: give --scores or --config (exactly one)");
  if (a.k < 1) throw UsageError("pse: --k must be >= 1");
  const std::uint64_t seed = gl.seed_or(1);
  ScoreSample sample;
  if (!a.scores.empty()) {
    sample = read_scores(a.scores);
  } else {
    ExperimentConfig cfg = load_config(gl.config);
    if (gl.seed) cfg.seed = *gl.seed;
    const unsigned threads = gl.thread_count();
    const Rng root(cfg.seed);
    const auto data = load_dataset(cfg, root, threads);
    const auto attack = prepare_attack(data, cfg.knowledge, cfg.mode, cfg.overlap, threads);
    const auto [e, g] = operating_point(cfg, data.alphabet.size());
    const auto mech = trace_mechanism(cfg.mechanism, Epsilon::finite(e), g, data.alphabet.size());
    sample = harvest_scores(attack.eval_data, mech, attack.profiles,
                            HarvestOptions{cfg.pse_trials, cfg.pse_impostors, threads}, root.split(100));
  }
  if (sample.genuine.size() <= a.k || sample.impostor.size() < a.k) {
    throw DataError("pse: need more than k genuine and at least k impostor scores");
  }
  const Rng rng(seed);
  const KnnOptions knn{a.k, kDefaultTieJitter, rng.split(1).key()};
  const auto res = pse_estimate(sample, knn);
  const auto series = convergence_probe(sample, a.fractions, knn, rng.split(2));
  json conv = json::array();
  for (const auto& p : series) conv.push_back({{"n_genuine", p.genuine_count}, {"n_impostor", p.impostor_count}, {"bits", p.bits}});
  json j{{"pse_bits", res.estimate.bits},
         {"pse_raw_bits", res.estimate.raw_bits},
         {"below_noise_floor", res.estimate.below_noise_floor},
         {"jittered", res.estimate.jittered},
         {"k", res.k},
         {"n_genuine", res.n_genuine},
         {"n_impostor", res.n_impostor},
         {"converged", converged(series)},
         {"convergence", conv}};
  std::cout << j.dump() << '\n';
  if (auto f = gl.open_out("pse.json")) *f << j.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  std::size_t count = 1000;
  double tolerance = 1e-9;
};

int run_oracle(const Globals& gl, const OracleArgs& a) {
  oracle::SuiteOptions opt;
  opt.tolerance = a.tolerance;
  const auto rep = oracle::verify_bound_suite(a.count, Rng(gl.seed_or(1)), opt, gl.thread_count());
  json v = json::array();
  for (const auto& x : rep.violations) {
    v.push_back({{"instance", x.instance}, {"check", x.check}, {"lhs", x.lhs}, {"rhs", x.rhs}});
  }
  json j{{"instances", rep.instances},
         {"checks", rep.checks},
         {"violations", rep.violations.size()},
         {"tolerance", a.tolerance},
         {"seed", gl.seed_or(1)},
         {"details", v}};
  std::cout << j.dump() << '\n';
  if (auto f = gl.open_out("oracle.json")) *f << j.dump(2) << '\n';
  return rep.ok() ? kOk : kViolation;
}

// ---------------------------------------------------------------------------

ExperimentConfig resolve_config(const Globals& gl) {
  ExperimentConfig cfg = gl.config.empty() ? ExperimentConfig{} : load_config(gl.config);
  if (gl.seed) cfg.seed = *gl.seed;
  if (gl.threads) cfg.threads = *gl.threads;
  return cfg;
}

int run_simulate(const Globals& gl, bool no_timestamp) {
  if (gl.out.empty()) throw UsageError("simulate: --out DIR is required");
  const ExperimentConfig cfg = resolve_config(gl);
  RunOptions run;
  run.write_timestamp = !no_timestamp;
  run.log = &std::cerr;
  const auto rep = run_experiment(cfg, gl.out, run);
  json j{{"config_hash", rep.config_hash}, {"users", rep.users}, {"alphabet_size", rep.alphabet_size},
         {"files", rep.files}};
  std::cout << j.dump() << '\n';
  return kOk;
}

struct SynthArgs {
  std::optional<std::size_t> users;
  std::optional<std::size_t> alphabet;
  std::optional<double> zipf;
  std::optional<std::string> concentration;
  std::optional<std::size_t> support;
  bool disjoint = false;
  std::optional<std::size_t> train_length;
  std::optional<std::size_t> test_length;
};

int run_synth(const Globals& gl, const SynthArgs& a) {
  if (gl.out.empty()) throw UsageError("synth: --out DIR is required");
  const ExperimentConfig cfg = resolve_config(gl);
  SynthesisSpec spec = cfg.synth;
  if (a.users) spec.users = *a.users;
  if (a.alphabet) spec.alphabet_size = *a.alphabet;
  if (a.zipf) spec.zipf_exponent = *a.zipf;
  if (a.concentration) {
    spec.concentration = *a.concentration == "inf" ? std::numeric_limits<double>::infinity()
                                                   : parse_epsilon(*a.concentration).value();
  }
  if (a.support) spec.support = *a.support;
  if (a.disjoint) spec.disjoint_supports = true;
  if (a.train_length) spec.train_length = *a.train_length;
  if (a.test_length) spec.test_length = *a.test_length;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Rng root(cfg.seed);
  // Same stream as simulate uses for its synthetic dataset.
  const auto res = synth_population(spec, root.split(1), gl.thread_count());
  auto f = gl.open_out("checkins.csv");
  write_checkins(*f, res.dataset);
  json j{{"seed", cfg.seed},
         {"users", res.dataset.users()},
         {"alphabet_size", res.dataset.alphabet.size()},
         {"provenance", res.dataset.provenance}};
  if (auto m = gl.open_out("synth.json")) *m << j.dump(2) << '\n';
  std::cout << j.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

void add_mechanism_flags(CLI::App* sub, MechanismArgs& m) {
  sub->add_option("--mechanism", m.mechanism, "rr or glh")->check(CLI::IsMember({"rr", "glh"}));
  sub->add_option("--epsilon", m.epsilon, "privacy budget (number or inf)");
  sub->add_option("--theta", m.theta, "MI loss to solve epsilon from");
  sub->add_option("--g", m.g, "GLH buckets (0: e^eps + 1)");
}

int main(int argc, char** argv) {
  CLI::App app{"pierisk: re-identification risk of locally obfuscated data"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals gl;
  app.add_option("--seed", gl.seed, "random seed");
  app.add_option("--threads", gl.threads, "worker threads (0: all cores)");
  app.add_option("--out", gl.out, "output directory");
  app.add_option("--config", gl.config, "experiment config (JSON)");

  BoundsArgs ba;
  auto* bounds = app.add_subcommand("bounds", "PIE bounds and Fano guarantees");
  bounds->add_option("--epsilon", ba.epsilon, "one or more budgets (number or inf)");
  bounds->add_option("--theta", ba.theta, "MI loss (solves epsilon for RR, or GLH with --g)");
  bounds->add_option("--n", ba.n, "number of users")->required();
  bounds->add_option("--alphabet", ba.alphabet, "alphabet size |X|")->required();
  bounds->add_option("--g", ba.g, "GLH buckets; RR when absent");
  bounds->add_option("--t", ba.t, "data per user (sequential composition)");
  bounds->add_option("--target-beta", ba.target_beta, "target Bayes error");
  bounds->add_option("--format", ba.format, "json or row")->check(CLI::IsMember({"json", "row"}));

  ObfuscateArgs oa;
  auto* obf = app.add_subcommand("obfuscate", "obfuscate check-ins into records");
  add_mechanism_flags(obf, oa.mech);
  obf->add_option("--input", oa.input, "check-in CSV")->required();
  obf->add_option("--output", oa.output, "record file (default: OUT/records.csv or stdout)");
  obf->add_option("--format", oa.format, "csv, binary or auto")->check(CLI::IsMember({"csv", "binary", "auto"}));
  obf->add_option("--mode", oa.mode, "first (one datum per user) or all");
  obf->add_option("--min-events", oa.min_events, "drop users with fewer events");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "estimate the true distribution from records");
  add_mechanism_flags(est, ea.mech);
  est->add_option("--records", ea.records, "record file (CSV or .bin)")->required();
  est->add_option("--format", ea.format, "csv, binary or auto")->check(CLI::IsMember({"csv", "binary", "auto"}));
  est->add_option("--alphabet", ea.alphabet, "alphabet size |X|")->required();
  est->add_option("--truth", ea.truth, "true distribution CSV (symbol,probability)");
  est->add_option("--level", ea.level, "significance level for thresholding");
  est->add_option("--phi", ea.phi, "report top-phi errors against --truth");

  ReidArgs ra;
  auto* reid = app.add_subcommand("reid", "Markov re-identification attack");
  add_mechanism_flags(reid, ra.mech);
  reid->add_option("--dataset", ra.dataset, "check-in CSV")->required();
  reid->add_option("--min-events", ra.min_events, "drop users with fewer events");
  reid->add_option("--knowledge", ra.knowledge, "max or partial")->check(CLI::IsMember({"max", "partial"}));
  reid->add_option("--mode", ra.mode, "single or trace")->check(CLI::IsMember({"single", "trace"}));
  reid->add_flag("--overlap", ra.overlap, "evaluate on the full trace");
  reid->add_option("--passes", ra.passes, "identification passes over all users");
  reid->add_option("--det-trials", ra.det_trials, "genuine trials for the DET curve");
  reid->add_option("--impostors", ra.impostors, "impostor scores per trial");

  PseArgs pa;
  auto* pse = app.add_subcommand("pse", "PSE from scores or a simulation config");
  pse->add_option("--scores", pa.scores, "score CSV (label,score with label g or i)");
  pse->add_option("--k", pa.k, "nearest-neighbour order");

  OracleArgs ora;
  auto* orc = app.add_subcommand("oracle", "brute-force bound verification");
  orc->add_option("--count", ora.count, "random instances");
  orc->add_option("--tolerance", ora.tolerance, "numeric tolerance");

  bool no_timestamp = false;
  auto* sim = app.add_subcommand("simulate", "full experiment bundle");
  sim->add_flag("--no-timestamp", no_timestamp, "omit created_utc from MANIFEST.json");

  SynthArgs sa;
  auto* syn = app.add_subcommand("synth", "synthetic check-in dataset");
  syn->add_option("--users", sa.users, "users");
  syn->add_option("--alphabet", sa.alphabet, "alphabet size");
  syn->add_option("--zipf", sa.zipf, "Zipf exponent of symbol popularity");
  syn->add_option("--concentration", sa.concentration, "Dirichlet concentration (inf: shared chain)");
  syn->add_option("--support", sa.support, "symbols per user");
  syn->add_flag("--disjoint", sa.disjoint, "pairwise disjoint user supports");
  syn->add_option("--train-length", sa.train_length, "training events per user");
  syn->add_option("--test-length", sa.test_length, "evaluation events per user");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*bounds) return run_bounds(gl, ba);
    if (*obf) return run_obfuscate(gl, oa);
    if (*est) return run_estimate(gl, ea);
    if (*reid) return run_reid(gl, ra);
    if (*pse) return run_pse(gl, pa);
    if (*orc) return run_oracle(gl, ora);
    if (*sim) return run_simulate(gl, no_timestamp);
    if (*syn) return run_synth(gl, sa);
  } catch (const UsageError& e) {
    std::cerr << "pierisk: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "pierisk: " << e.what() << '\n';
    return kUsage;
  } catch (const StageError& e) {
    std::cerr << "pierisk: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "pierisk: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace pierisk::cli

int main(int argc, char** argv) { return pierisk::cli::main(argc, argv); }
