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

// Experiment configuration and the end-to-end report bundle.
//
// Bundle layout (all CSV rows start with config_hash,seed):
//   config.json                  canonical configuration
//   summary.json                 dataset shape and the configured point
//   bounds.csv                   closed-form caps per sweep epsilon
//   pse_vs_epsilon.csv           k-NN PSE estimate per mechanism and epsilon
//   identification_vs_epsilon.csv  error rate with every Fano lower bound
//   det.csv                      FAR/FRR at the configured point
//   estimation_vs_epsilon.csv    l2 and top-phi relative error
//   estimation_vs_g.csv          l2 at fixed theta across g
//   MANIFEST.json                stage status; the only file with a timestamp

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pierisk/bounds.hpp"
#include "pierisk/dataset.hpp"
#include "pierisk/errors.hpp"
#include "pierisk/estimation.hpp"
#include "pierisk/mechanisms.hpp"
#include "pierisk/parallel.hpp"
#include "pierisk/pse.hpp"
#include "pierisk/reid.hpp"
#include "pierisk/synth.hpp"

namespace pierisk {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

enum class MechanismKind { rr, glh };
enum class Knowledge { maximum, partial };
enum class ReleaseMode { single_datum, full_trace };

inline std::string to_string(MechanismKind k) { return k == MechanismKind::rr ? "rr" : "glh"; }

inline MechanismKind parse_mechanism(const std::string& s) {
  if (s == "rr") return MechanismKind::rr;
  if (s == "glh") return MechanismKind::glh;
  throw std::invalid_argument("unknown mechanism '" + s + "' (expected rr or glh)");
}

/// Flat, typed experiment description. See `to_json` for the key names.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: all available

  // Dataset: a check-in CSV when dataset_path is set, otherwise synthetic.
  std::string dataset_path;
  std::size_t min_events = 10;
  SynthesisSpec synth;
  bool overlap = false;

  // Configured release point.
  MechanismKind mechanism = MechanismKind::rr;
  std::optional<double> epsilon = 1.0;
  std::optional<double> theta;
  std::size_t g = 0;  // GLH buckets; 0 picks round(e^eps) + 1 per epsilon
  Knowledge knowledge = Knowledge::partial;
  ReleaseMode mode = ReleaseMode::single_datum;

  // Sweeps.
  std::vector<std::string> sweep_mechanisms{"rr", "glh"};
  std::vector<double> epsilon_sweep{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> g_sweep{1e3, 1e5, 1e7};
  double sweep_theta = 0.5;

  // Estimation.
  double threshold_level = 0.05;
  std::vector<std::size_t> phi{20};
  std::size_t estimation_trials = 10;

  // PSE and identification.
  std::size_t pse_k = kDefaultKnnK;
  std::size_t pse_trials = 2000;
  std::size_t pse_impostors = 10;
  std::size_t pse_se_reps = 10;
  std::size_t id_passes = 1;

  double beta_min = 0.9;
  std::vector<std::string> stages{"bounds", "pse", "identification", "estimation"};
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["dataset_path"] = c.dataset_path;
  j["min_events"] = c.min_events;
  j["synth_users"] = c.synth.users;
  j["synth_alphabet"] = c.synth.alphabet_size;
  j["synth_zipf"] = c.synth.zipf_exponent;
  j["synth_concentration"] = std::isinf(c.synth.concentration) ? nlohmann::json("inf") : nlohmann::json(c.synth.concentration);
  j["synth_support"] = c.synth.support;
  j["synth_disjoint"] = c.synth.disjoint_supports;
  j["synth_train_length"] = c.synth.train_length;
  j["synth_test_length"] = c.synth.test_length;
  j["overlap"] = c.overlap;
  j["mechanism"] = to_string(c.mechanism);
  if (c.epsilon) j["epsilon"] = *c.epsilon;
  if (c.theta) j["theta"] = *c.theta;
  j["g"] = c.g;
  j["knowledge"] = c.knowledge == Knowledge::maximum ? "max" : "partial";
  j["mode"] = c.mode == ReleaseMode::single_datum ? "single" : "trace";
  j["sweep_mechanisms"] = c.sweep_mechanisms;
  j["epsilon_sweep"] = c.epsilon_sweep;
  j["g_sweep"] = c.g_sweep;
  j["sweep_theta"] = c.sweep_theta;
  j["threshold_level"] = c.threshold_level;
  j["phi"] = c.phi;
  j["estimation_trials"] = c.estimation_trials;
  j["pse_k"] = c.pse_k;
  j["pse_trials"] = c.pse_trials;
  j["pse_impostors"] = c.pse_impostors;
  j["pse_se_reps"] = c.pse_se_reps;
  j["id_passes"] = c.id_passes;
  j["beta_min"] = c.beta_min;
  j["stages"] = c.stages;
  return j;
}

namespace detail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(std::string("config: key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Parses the flat config document. Unknown keys are rejected so typos do
/// not silently fall back to defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("config: expected a JSON object");
  static const std::vector<std::string> known{
      "schema_version", "seed", "threads", "dataset_path", "min_events", "synth_users", "synth_alphabet", "synth_zipf",
      "synth_concentration", "synth_support", "synth_disjoint", "synth_train_length", "synth_test_length", "overlap",
      "mechanism", "epsilon", "theta", "g", "knowledge", "mode", "sweep_mechanisms", "epsilon_sweep", "g_sweep",
      "sweep_theta", "threshold_level", "phi", "estimation_trials", "pse_k", "pse_trials", "pse_impostors",
      "pse_se_reps", "id_passes", "beta_min", "stages"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw DataError("config: unknown key '" + key + "'");
  }
  if (!j.contains("schema_version") || j.at("schema_version") != kConfigSchemaVersion) {
    throw DataError("config: schema_version must be " + std::to_string(kConfigSchemaVersion));
  }
  ExperimentConfig c;
  using detail::take;
  take(j, "seed", c.seed);
  take(j, "threads", c.threads);
  take(j, "dataset_path", c.dataset_path);
  take(j, "min_events", c.min_events);
  take(j, "synth_users", c.synth.users);
  take(j, "synth_alphabet", c.synth.alphabet_size);
  take(j, "synth_zipf", c.synth.zipf_exponent);
  if (j.contains("synth_concentration")) {
    const auto& v = j.at("synth_concentration");
    if (v.is_string() && v.get<std::string>() == "inf") {
      c.synth.concentration = std::numeric_limits<double>::infinity();
    } else {
      take(j, "synth_concentration", c.synth.concentration);
    }
  }
  take(j, "synth_support", c.synth.support);
  take(j, "synth_disjoint", c.synth.disjoint_supports);
  take(j, "synth_train_length", c.synth.train_length);
  take(j, "synth_test_length", c.synth.test_length);
  take(j, "overlap", c.overlap);
  std::string s;
  if (j.contains("mechanism")) {
    take(j, "mechanism", s);
    c.mechanism = parse_mechanism(s);
  }
  const bool has_eps = j.contains("epsilon");
  const bool has_theta = j.contains("theta");
  if (has_eps == has_theta) throw DataError("config: exactly one of epsilon or theta must be given");
  c.epsilon.reset();
  if (has_eps) {
    double e = 0.0;
    take(j, "epsilon", e);
    c.epsilon = e;
  } else {
    double t = 0.0;
    take(j, "theta", t);
    c.theta = t;
  }
  take(j, "g", c.g);
  if (j.contains("knowledge")) {
    take(j, "knowledge", s);
    if (s != "max" && s != "partial") throw DataError("config: knowledge must be max or partial");
    c.knowledge = s == "max" ? Knowledge::maximum : Knowledge::partial;
  }
  if (j.contains("mode")) {
    take(j, "mode", s);
    if (s != "single" && s != "trace") throw DataError("config: mode must be single or trace");
    c.mode = s == "single" ? ReleaseMode::single_datum : ReleaseMode::full_trace;
  }
  take(j, "sweep_mechanisms", c.sweep_mechanisms);
  for (const auto& m : c.sweep_mechanisms) parse_mechanism(m);
  take(j, "epsilon_sweep", c.epsilon_sweep);
  take(j, "g_sweep", c.g_sweep);
  take(j, "sweep_theta", c.sweep_theta);
  take(j, "threshold_level", c.threshold_level);
  take(j, "phi", c.phi);
  take(j, "estimation_trials", c.estimation_trials);
  take(j, "pse_k", c.pse_k);
  take(j, "pse_trials", c.pse_trials);
  take(j, "pse_impostors", c.pse_impostors);
  take(j, "pse_se_reps", c.pse_se_reps);
  take(j, "id_passes", c.id_passes);
  take(j, "beta_min", c.beta_min);
  take(j, "stages", c.stages);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a over the canonical (sorted-key) JSON, as 16 hex digits. Thread
/// count is excluded: it never changes results.
inline std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Shortest round-trip text is locale-free and stable across runs.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Report rows kept in memory for callers that want numbers, not files.
struct PseRow {
  std::string mechanism;
  double epsilon;
  std::size_t g;
  double pse_bits;
  double pse_raw_bits;
  double pse_se;
  std::size_t n_genuine;
  std::size_t n_impostor;
  double alpha_mechanism;
  double alpha_ldp;
};

struct IdentificationRow {
  std::string mechanism;
  double epsilon;
  std::size_t g;
  double error_rate;
  std::size_t trials;
  double fano_pse;
  double fano_mechanism;
  double fano_ldp;
};

struct EstimationRow {
  std::string mechanism;
  double epsilon;
  std::size_t g;
  std::size_t phi;
  double l2_analytic;
  double l2_empirical;
  double relative_error;
  double relative_error_thresholded;
};

struct GSweepRow {
  double theta;
  std::size_t g;
  double epsilon;
  double l2_analytic;
  double l2_limit;
  double l2_empirical;
};

struct ExperimentReport {
  std::string config_hash;
  std::size_t users = 0;
  std::size_t alphabet_size = 0;
  std::vector<PieBoundReport> bounds;
  std::vector<PseRow> pse;
  std::vector<IdentificationRow> identification;
  std::vector<DetPoint> det;
  std::vector<EstimationRow> estimation;
  std::vector<GSweepRow> g_sweep;
  std::vector<std::string> files;
  bool complete = false;
};

/// Raised when a stage fails; the bundle's MANIFEST records the same name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunOptions {
  bool write_timestamp = true;
  std::ostream* log = nullptr;
};

namespace detail {

inline std::size_t glh_buckets(std::size_t configured, double eps) {
  if (configured > 0) return configured;
  return static_cast<std::size_t>(std::llround(ldp_optimal_g(Epsilon::finite(eps))));
}

inline TraceMechanism make_trace_mechanism(MechanismKind kind, double eps, std::size_t g, std::size_t alphabet) {
  if (kind == MechanismKind::rr) return TraceMechanism::rr(RandomizedResponse(Epsilon::finite(eps), alphabet));
  return TraceMechanism::glh(
      GeneralLocalHash(Epsilon::finite(eps), HashFamily::carter_wegman(alphabet, static_cast<std::uint32_t>(g))));
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header, std::string prefix)
      : out_(path, std::ios::binary), prefix_(std::move(prefix)) {
    if (!out_) throw DataError("cannot write " + path.string());
    out_ << "config_hash,seed," << header << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    out_ << prefix_;
    for (const auto& c : cells) out_ << ',' << c;
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::string prefix_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Squared error and top-phi relative errors of one estimate.
struct EstimateScore {
  double l2;
  std::vector<double> relative;
  std::vector<double> relative_thresholded;
};

inline EstimateScore score_estimate(const FrequencyEstimate& est, std::span<const double> truth,
                                    std::span<const std::size_t> phis, double null_variance, double level) {
  EstimateScore s{0.0, {}, {}};
  for (std::size_t x = 0; x < truth.size(); ++x) s.l2 += (est.estimate[x] - truth[x]) * (est.estimate[x] - truth[x]);
  const FrequencyEstimate thr = apply_significance_threshold(est, null_variance, level);
  for (std::size_t phi : phis) {
    s.relative.push_back(l2_and_relative_error(truth, est.estimate, phi).mean_relative_error);
    s.relative_thresholded.push_back(l2_and_relative_error(truth, thr.estimate, phi).mean_relative_error);
  }
  return s;
}

}  // namespace detail

/// Synthesizes (stream root.split(1)) or ingests the configured dataset.
inline TraceDataset load_dataset(const ExperimentConfig& cfg, const Rng& root, unsigned threads) {
  TraceDataset data = cfg.dataset_path.empty()
                          ? synth_population(cfg.synth, root.split(1), threads).dataset
                          : ingest_checkins(cfg.dataset_path, IngestOptions{cfg.min_events, 0}).dataset;
  data.validate();
  return data;
}

/// Released data per user and the adversary's profiles.
struct AttackSetup {
  TraceSplit split;
  std::vector<Trace> eval_data;
  std::vector<MarkovProfile> profiles;
};

/// Single-datum mode releases the first evaluation event; maximum knowledge
/// trains each profile on the evaluation trace itself.
inline AttackSetup prepare_attack(const TraceDataset& data, Knowledge knowledge, ReleaseMode mode, bool overlap,
                                  unsigned threads) {
  const std::size_t n = data.users();
  const std::size_t k = data.alphabet.size();
  AttackSetup a{split_traces(data, overlap), std::vector<Trace>(n), {}};
  for (std::size_t u = 0; u < n; ++u) {
    const Trace& t = a.split.eval.traces[u];
    a.eval_data[u] = mode == ReleaseMode::single_datum ? Trace{t.front()} : t;
  }
  const auto& src = knowledge == Knowledge::partial ? a.split.train.traces : a.split.eval.traces;
  std::vector<std::optional<MarkovProfile>> slots(n);
  parallel_for(n, threads, [&](std::size_t u) { slots[u].emplace(train_profile(src[u], k, u)); });
  a.profiles.reserve(n);
  for (auto& p : slots) a.profiles.push_back(std::move(*p));
  return a;
}

/// ε and g (0 for RR) of the configured mechanism over an alphabet of size k.
inline std::pair<double, std::size_t> operating_point(const ExperimentConfig& cfg, std::size_t k) {
  if (cfg.epsilon) {
    const double e = *cfg.epsilon;
    return {e, cfg.mechanism == MechanismKind::glh ? detail::glh_buckets(cfg.g, e) : 0};
  }
  if (cfg.mechanism == MechanismKind::glh && cfg.g == 0) throw DataError("config: theta with glh needs g");
  const std::size_t domain = cfg.mechanism == MechanismKind::rr ? k : cfg.g;
  return {epsilon_for_theta(*cfg.theta, domain).value(), cfg.mechanism == MechanismKind::rr ? 0 : cfg.g};
}

/// Runs every configured stage and writes the bundle into `out_dir`.
/// A failing stage aborts the run with StageError after recording the
/// failure (and the files already written) in MANIFEST.json.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                       const RunOptions& run = {}) {
  namespace fs = std::filesystem;
  ExperimentReport rep;
  rep.config_hash = config_hash(cfg);
  const std::string prefix = rep.config_hash + "," + std::to_string(cfg.seed);
  const unsigned threads = cfg.threads == 0 ? default_thread_count() : cfg.threads;
  const Rng root(cfg.seed);
  fs::create_directories(out_dir);

  nlohmann::json stages = nlohmann::json::array();
  std::string current = "config";
  auto log = [&](const std::string& msg) {
    if (run.log) *run.log << "[" << current << "] " << msg << '\n';
  };
  auto manifest = [&](bool complete, const std::string& error) {
    nlohmann::json m;
    m["schema_version"] = kReportSchemaVersion;
    m["config_hash"] = rep.config_hash;
    m["seed"] = cfg.seed;
    m["complete"] = complete;
    m["stages"] = stages;
    m["files"] = rep.files;
    if (!complete) {
      m["failed_stage"] = current;
      m["error"] = error;
    }
    if (run.write_timestamp) m["created_utc"] = detail::utc_now();
    detail::write_json(out_dir / "MANIFEST.json", m);
  };
  auto wants = [&](const char* s) { return std::find(cfg.stages.begin(), cfg.stages.end(), s) != cfg.stages.end(); };
  auto add_file = [&](const char* name) {
    rep.files.emplace_back(name);
    return out_dir / name;
  };

  try {
    for (double f : cfg.epsilon_sweep) {
      if (!(f >= 0.0) || !std::isfinite(f)) throw DataError("config: epsilon_sweep entries must be finite and >= 0");
    }
    detail::write_json(add_file("config.json"), to_json(cfg));
    stages.push_back({{"name", "config"}, {"status", "ok"}});

    // Dataset.
    current = "dataset";
    const TraceDataset data = load_dataset(cfg, root, threads);
    const std::size_t n = data.users();
    const std::size_t k = data.alphabet.size();
    if (n < 2) throw DataError("dataset: at least two users are required");
    for (std::size_t p : cfg.phi) {
      if (p > k) throw DataError("config: phi entries must not exceed |X|");
    }
    rep.users = n;
    rep.alphabet_size = k;
    const AttackSetup attack = prepare_attack(data, cfg.knowledge, cfg.mode, cfg.overlap, threads);
    const TraceSplit& split = attack.split;
    const std::vector<Trace>& eval_data = attack.eval_data;
    const std::vector<MarkovProfile>& profiles = attack.profiles;
    log("users=" + std::to_string(n) + " alphabet=" + std::to_string(k));

    // Configured point.
    const auto [point_eps, point_g] = operating_point(cfg, k);
    const auto point_bound =
        make_bound_report(Epsilon::finite(point_eps), n, k,
                          cfg.mechanism == MechanismKind::glh ? std::optional<std::size_t>(point_g) : std::nullopt, 1,
                          cfg.beta_min);
    {
      nlohmann::json s;
      s["schema_version"] = kReportSchemaVersion;
      s["config_hash"] = rep.config_hash;
      s["seed"] = cfg.seed;
      s["provenance"] = data.provenance;
      s["users"] = n;
      s["alphabet_size"] = k;
      s["mechanism"] = to_string(cfg.mechanism);
      s["epsilon"] = point_eps;
      if (cfg.mechanism == MechanismKind::glh) s["g"] = point_g;
      s["theta"] = point_bound.theta;
      s["alpha_ldp"] = point_bound.alpha_ldp;
      s["alpha_mechanism"] = point_bound.alpha_mechanism;
      s["fano_mechanism"] = point_bound.fano_mechanism.reported;
      if (point_bound.target_alpha) {
        s["beta_min"] = cfg.beta_min;
        s["alpha_for_beta_min"] = point_bound.target_alpha->alpha_max;
        s["beta_min_achievable"] = point_bound.target_alpha->achievable;
      }
      detail::write_json(add_file("summary.json"), s);
    }
    stages.push_back({{"name", "dataset"}, {"status", "ok"}});

    const auto mechanisms = [&] {
      std::vector<MechanismKind> out;
      for (const auto& m : cfg.sweep_mechanisms) out.push_back(parse_mechanism(m));
      return out;
    }();

    if (wants("bounds")) {
      current = "bounds";
      detail::CsvFile csv(add_file("bounds.csv"),
                          "mechanism,epsilon,n,alphabet_size,g,theta,alpha_ldp,alpha_mechanism,fano_ldp,fano_mechanism",
                          prefix);
      for (MechanismKind m : mechanisms) {
        for (double e : cfg.epsilon_sweep) {
          const std::size_t g = m == MechanismKind::glh ? detail::glh_buckets(cfg.g, e) : 0;
          const auto b = make_bound_report(Epsilon::finite(e), n, k, g ? std::optional<std::size_t>(g) : std::nullopt);
          csv.row({to_string(m), fmt(e), std::to_string(n), std::to_string(k), std::to_string(g), fmt(b.theta),
                   fmt(b.alpha_ldp), fmt(b.alpha_mechanism), fmt(b.fano_ldp.reported), fmt(b.fano_mechanism.reported)});
          rep.bounds.push_back(b);
        }
      }
      stages.push_back({{"name", "bounds"}, {"status", "ok"}});
    }

    if (wants("pse")) {
      current = "pse";
      detail::CsvFile csv(add_file("pse_vs_epsilon.csv"),
                          "mechanism,epsilon,g,pse_bits,pse_raw_bits,pse_se,below_noise_floor,n_genuine,n_impostor,k,"
                          "alpha_mechanism,alpha_ldp",
                          prefix);
      std::uint64_t idx = 0;
      for (MechanismKind m : mechanisms) {
        for (double e : cfg.epsilon_sweep) {
          const std::size_t g = m == MechanismKind::glh ? detail::glh_buckets(cfg.g, e) : 0;
          const auto mech = detail::make_trace_mechanism(m, e, g, k);
          const Rng r = root.split(100).split(idx++);
          const ScoreSample sample = harvest_scores(
              eval_data, mech, profiles, HarvestOptions{cfg.pse_trials, cfg.pse_impostors, threads}, r.split(0));
          const KnnOptions knn{cfg.pse_k, kDefaultTieJitter, r.split(1).key()};
          const PseResult res = pse_estimate(sample, knn);
          const double se = cfg.pse_se_reps >= 2 ? half_sample_standard_error(sample, knn, cfg.pse_se_reps, r.split(2))
                                                 : 0.0;
          const auto b = make_bound_report(Epsilon::finite(e), n, k, g ? std::optional<std::size_t>(g) : std::nullopt);
          csv.row({to_string(m), fmt(e), std::to_string(g), fmt(res.estimate.bits), fmt(res.estimate.raw_bits), fmt(se),
                   res.estimate.below_noise_floor ? "1" : "0", std::to_string(res.n_genuine),
                   std::to_string(res.n_impostor), std::to_string(res.k), fmt(b.alpha_mechanism), fmt(b.alpha_ldp)});
          rep.pse.push_back({to_string(m), e, g, res.estimate.bits, res.estimate.raw_bits, se, res.n_genuine,
                             res.n_impostor, b.alpha_mechanism, b.alpha_ldp});
          log(to_string(m) + " eps=" + fmt(e) + " pse=" + fmt(res.estimate.bits));
        }
      }
      stages.push_back({{"name", "pse"}, {"status", "ok"}});
    }

    if (wants("identification")) {
      current = "identification";
      detail::CsvFile csv(add_file("identification_vs_epsilon.csv"),
                          "mechanism,epsilon,g,error_rate,trials,fano_pse,fano_mechanism,fano_ldp", prefix);
      std::uint64_t idx = 0;
      for (MechanismKind m : mechanisms) {
        for (double e : cfg.epsilon_sweep) {
          const std::size_t g = m == MechanismKind::glh ? detail::glh_buckets(cfg.g, e) : 0;
          const auto mech = detail::make_trace_mechanism(m, e, g, k);
          const auto res =
              identification_error_rate(eval_data, mech, profiles, cfg.id_passes, root.split(200).split(idx++), threads);
          const auto b = make_bound_report(Epsilon::finite(e), n, k, g ? std::optional<std::size_t>(g) : std::nullopt);
          double fano_pse = std::nan("");
          for (const auto& p : rep.pse) {
            if (p.mechanism == to_string(m) && p.epsilon == e) {
              fano_pse = fano_lower_bound(p.pse_bits, UniformPrior{n}).reported;
            }
          }
          csv.row({to_string(m), fmt(e), std::to_string(g), fmt(res.error_rate()), std::to_string(res.trials),
                   fmt(fano_pse), fmt(b.fano_mechanism.reported), fmt(b.fano_ldp.reported)});
          rep.identification.push_back({to_string(m), e, g, res.error_rate(), res.trials, fano_pse,
                                        b.fano_mechanism.reported, b.fano_ldp.reported});
          log(to_string(m) + " eps=" + fmt(e) + " error=" + fmt(res.error_rate()));
        }
      }
      // DET curve at the configured point.
      {
        const auto mech = detail::make_trace_mechanism(cfg.mechanism, point_eps, point_g, k);
        const ScoreSample sample = harvest_scores(
            eval_data, mech, profiles, HarvestOptions{cfg.pse_trials, cfg.pse_impostors, threads}, root.split(300));
        rep.det = far_frr_det(sample.genuine, sample.impostor);
        detail::CsvFile det(add_file("det.csv"), "threshold,far,frr", prefix);
        for (const auto& p : rep.det) det.row({fmt(p.threshold), fmt(p.far), fmt(p.frr)});
      }
      stages.push_back({{"name", "identification"}, {"status", "ok"}});
    }

    if (wants("estimation")) {
      current = "estimation";
      // One datum per user: the first evaluation event.
      std::vector<Symbol> datum(n);
      for (std::size_t u = 0; u < n; ++u) datum[u] = split.eval.traces[u].front();
      std::vector<double> truth(k, 0.0);
      for (Symbol x : datum) truth[x] += 1.0 / static_cast<double>(n);
      const std::size_t trials = std::max<std::size_t>(1, cfg.estimation_trials);

      auto monte_carlo = [&](MechanismKind m, double e, std::size_t g, const Rng& base) {
        std::vector<detail::EstimateScore> per(trials);
        const Epsilon eps = Epsilon::finite(e);
        const double null_var = m == MechanismKind::rr ? null_variance_rr(eps, k, n) : null_variance_glh(eps, g, n);
        parallel_for(trials, threads, [&](std::size_t t) {
          Rng r = base.split(t);
          FrequencyEstimate est;
          if (m == MechanismKind::rr) {
            const RandomizedResponse rr(eps, k);
            std::vector<double> counts(k, 0.0);
            for (Symbol x : datum) counts[rr.sample(x, r)] += 1.0;
            est = rr_estimate_from_counts(std::move(counts), n, eps);
          } else {
            const GeneralLocalHash glh(eps, HashFamily::carter_wegman(k, static_cast<std::uint32_t>(g)));
            GlhCountAccumulator acc(k);
            for (Symbol x : datum) {
              const auto o = glh.sample(x, r);
              acc.add(o.hash, o.bucket);
            }
            est = glh_estimate_from_counts(acc.take_counts(), n, eps, g);
          }
          per[t] = detail::score_estimate(est, truth, cfg.phi, null_var, cfg.threshold_level);
        });
        detail::EstimateScore mean{0.0, std::vector<double>(cfg.phi.size(), 0.0), std::vector<double>(cfg.phi.size(), 0.0)};
        for (const auto& s : per) {
          mean.l2 += s.l2 / static_cast<double>(trials);
          for (std::size_t i = 0; i < cfg.phi.size(); ++i) {
            mean.relative[i] += s.relative[i] / static_cast<double>(trials);
            mean.relative_thresholded[i] += s.relative_thresholded[i] / static_cast<double>(trials);
          }
        }
        return mean;
      };

      {
        detail::CsvFile csv(add_file("estimation_vs_epsilon.csv"),
                            "mechanism,epsilon,g,phi,l2_analytic,l2_empirical,relative_error,relative_error_thresholded,"
                            "trials",
                            prefix);
        std::uint64_t idx = 0;
        for (MechanismKind m : mechanisms) {
          for (double e : cfg.epsilon_sweep) {
            const std::size_t g = m == MechanismKind::glh ? detail::glh_buckets(cfg.g, e) : 0;
            const Epsilon eps = Epsilon::finite(e);
            double analytic = 0.0;
            for (std::size_t x = 0; x < k; ++x) {
              analytic += m == MechanismKind::rr ? expected_l2_rr(eps, k, n, truth[x]) : expected_l2_glh(eps, g, n, truth[x]);
            }
            const auto mc = monte_carlo(m, e, g, root.split(400).split(idx++));
            for (std::size_t i = 0; i < cfg.phi.size(); ++i) {
              csv.row({to_string(m), fmt(e), std::to_string(g), std::to_string(cfg.phi[i]), fmt(analytic), fmt(mc.l2),
                       fmt(mc.relative[i]), fmt(mc.relative_thresholded[i]), std::to_string(trials)});
              rep.estimation.push_back(
                  {to_string(m), e, g, cfg.phi[i], analytic, mc.l2, mc.relative[i], mc.relative_thresholded[i]});
            }
          }
        }
      }
      {
        detail::CsvFile csv(add_file("estimation_vs_g.csv"), "theta,g,epsilon,l2_analytic,l2_limit,l2_empirical,trials",
                            prefix);
        std::uint64_t idx = 0;
        for (double gd : cfg.g_sweep) {
          if (!(gd >= 2.0) || gd >= 4294967295.0) throw DataError("config: g_sweep entries must lie in [2, 2^32)");
          const auto g = static_cast<std::size_t>(gd);
          const double e = epsilon_for_theta(cfg.sweep_theta, g).value();
          double analytic = 0.0;
          double limit = 0.0;
          for (std::size_t x = 0; x < k; ++x) {
            analytic += expected_l2_glh(Epsilon::finite(e), g, n, truth[x]);
            limit += expected_l2_glh_limit(cfg.sweep_theta, n, truth[x]);
          }
          const auto mc = monte_carlo(MechanismKind::glh, e, g, root.split(500).split(idx++));
          csv.row({fmt(cfg.sweep_theta), std::to_string(g), fmt(e), fmt(analytic), fmt(limit), fmt(mc.l2),
                   std::to_string(trials)});
          rep.g_sweep.push_back({cfg.sweep_theta, g, e, analytic, limit, mc.l2});
        }
      }
      stages.push_back({{"name", "estimation"}, {"status", "ok"}});
    }
  } catch (const std::exception& e) {
    stages.push_back({{"name", current}, {"status", "failed"}});
    manifest(false, e.what());
    throw StageError(current, e.what());
  }
  rep.complete = true;
  current = "done";
  manifest(true, "");
  return rep;
}

}  // namespace pierisk
