// Experiment configuration: a single JSON document with nested sections,
// validated field by field, hashed for provenance. Defaults for every
// experiment are constructible and printable.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddlab/errors.hpp"
#include "ddlab/gaussian_mixture.hpp"
#include "ddlab/schedule.hpp"
#include "ddlab/score_model.hpp"

namespace ddlab {

using Json = nlohmann::json;

enum class ExperimentKind {
  hp_sample,
  track_likelihood,
  bias_bounds,
  mode_curve,
  tradeoff,
  hp_vs_samples,
  nonsmooth_demo,
  beta_invariance,
  selftest,
};

inline const char* experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::hp_sample: return "hp-sample";
    case ExperimentKind::track_likelihood: return "track-likelihood";
    case ExperimentKind::bias_bounds: return "bias-bounds";
    case ExperimentKind::mode_curve: return "mode-curve";
    case ExperimentKind::tradeoff: return "tradeoff";
    case ExperimentKind::hp_vs_samples: return "hp-vs-samples";
    case ExperimentKind::nonsmooth_demo: return "nonsmooth-demo";
    case ExperimentKind::beta_invariance: return "beta-invariance";
    case ExperimentKind::selftest: return "selftest";
  }
  return "?";
}

inline std::optional<ExperimentKind> experiment_from_name(const std::string& name) {
  for (ExperimentKind k :
       {ExperimentKind::hp_sample, ExperimentKind::track_likelihood, ExperimentKind::bias_bounds,
        ExperimentKind::mode_curve, ExperimentKind::tradeoff, ExperimentKind::hp_vs_samples,
        ExperimentKind::nonsmooth_demo, ExperimentKind::beta_invariance, ExperimentKind::selftest})
    if (name == experiment_name(k)) return k;
  return std::nullopt;
}

// FNV-1a over the canonical (key-sorted) JSON dump.
inline std::string config_hash(const Json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::selftest;
  Json doc;  // the full effective configuration

  std::string hash() const { return config_hash(doc); }

  double num(const std::string& section, const std::string& key) const {
    const Json& v = field(section, key);
    if (!v.is_number()) throw ConfigError(section + "." + key, "expected a number");
    return v.get<double>();
  }
  long integer(const std::string& section, const std::string& key) const {
    const Json& v = field(section, key);
    if (!v.is_number_integer()) throw ConfigError(section + "." + key, "expected an integer");
    return v.get<long>();
  }
  std::string str(const std::string& section, const std::string& key) const {
    const Json& v = field(section, key);
    if (!v.is_string()) throw ConfigError(section + "." + key, "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) const {
    if (!doc.contains(key)) throw ConfigError(key, "missing key");
    const Json& v = doc.at(key);
    if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(key, "expected numeric entries");
      out.push_back(e.get<double>());
    }
    return out;
  }

  NoiseSchedule schedule() const {
    try {
      return NoiseSchedule(num("schedule", "lambda_max"), num("schedule", "lambda_min"),
                           num("schedule", "horizon"));
    } catch (const std::domain_error& e) {
      throw ConfigError("schedule", e.what());
    }
  }

  GaussianMixtureFamily family(const std::string& section = "family") const {
    return parse_family(field_section(section), section, schedule());
  }

  ScoreModel score_model() const {
    const NoiseSchedule sched = schedule();
    if (!doc.contains("score_model")) return ScoreModel::exact(family());
    const Json& sm = doc.at("score_model");
    const std::string variant = sm.value("variant", "exact");
    if (variant == "exact") return ScoreModel::exact(family());
    if (variant == "mismatched") {
      if (!sm.contains("q_family"))
        throw ConfigError("score_model.q_family", "required for the mismatched variant");
      return ScoreModel::mismatched(parse_family(sm.at("q_family"), "score_model.q_family", sched));
    }
    if (variant == "perturbed") {
      const GaussianMixtureFamily fam = family();
      const double eps = sm.value("epsilon", 0.1);
      Eigen::VectorXd b = Eigen::VectorXd::Ones(fam.dim());
      if (sm.contains("bias")) {
        const auto bv = sm.at("bias");
        if (!bv.is_array() || static_cast<int>(bv.size()) != fam.dim())
          throw ConfigError("score_model.bias", "expected an array of length dim");
        for (int i = 0; i < fam.dim(); ++i) b[i] = bv.at(i).get<double>();
      }
      return ScoreModel::perturbed(fam, b, eps);
    }
    throw ConfigError("score_model.variant", "must be exact | mismatched | perturbed");
  }

  long n_steps() const { return integer("run", "n_steps"); }
  long n_paths() const { return integer("run", "n_paths"); }
  std::uint64_t seed() const {
    const long s = integer("run", "seed");
    if (s < 0) throw ConfigError("run.seed", "must be non-negative");
    return static_cast<std::uint64_t>(s);
  }

  void validate() const {
    schedule();
    if (doc.contains("family")) family();
    if (doc.contains("score_model")) score_model();
    if (n_steps() < 1) throw ConfigError("run.n_steps", "must be >= 1");
    if (n_paths() < 1) throw ConfigError("run.n_paths", "must be >= 1");
    seed();
  }

 private:
  const Json& field_section(const std::string& section) const {
    if (!doc.contains(section)) throw ConfigError(section, "missing section");
    return doc.at(section);
  }
  const Json& field(const std::string& section, const std::string& key) const {
    const Json& s = field_section(section);
    if (!s.contains(key)) throw ConfigError(section + "." + key, "missing key");
    return s.at(key);
  }

  static GaussianMixtureFamily parse_family(const Json& f, const std::string& section,
                                            const NoiseSchedule& sched) {
    const auto need = [&](const char* key) -> const Json& {
      if (!f.contains(key)) throw ConfigError(section + "." + key, "missing key");
      return f.at(key);
    };
    const int dim = need("dim").get<int>();
    const Json& jw = need("weights");
    const Json& jm = need("means");
    const Json& jv = need("variances");
    if (!jw.is_array() || !jm.is_array() || !jv.is_array() || jw.size() != jm.size() ||
        jw.size() != jv.size() || jw.empty())
      throw ConfigError(section, "weights/means/variances must be equal-length arrays");
    std::vector<double> w, c;
    std::vector<Eigen::VectorXd> mu;
    for (std::size_t i = 0; i < jw.size(); ++i) {
      w.push_back(jw.at(i).get<double>());
      c.push_back(jv.at(i).get<double>());
      Eigen::VectorXd m(dim);
      const Json& jmi = jm.at(i);
      if (jmi.is_number()) {
        if (dim != 1) throw ConfigError(section + ".means", "scalar mean but dim != 1");
        m[0] = jmi.get<double>();
      } else if (jmi.is_array() && static_cast<int>(jmi.size()) == dim) {
        for (int k = 0; k < dim; ++k) m[k] = jmi.at(k).get<double>();
      } else {
        throw ConfigError(section + ".means", "each mean must be a number (1D) or dim-array");
      }
      mu.push_back(std::move(m));
    }
    try {
      return GaussianMixtureFamily(dim, std::move(w), std::move(mu), std::move(c), sched);
    } catch (const std::domain_error& e) {
      throw ConfigError(section, e.what());
    }
  }
};

namespace detail {
inline Json family_json(const GaussianMixtureFamily& f) {
  Json j;
  j["dim"] = f.dim();
  j["weights"] = f.weights();
  j["variances"] = f.variances();
  Json means = Json::array();
  for (const auto& m : f.means()) {
    Json mm = Json::array();
    for (int i = 0; i < m.size(); ++i) mm.push_back(m[i]);
    means.push_back(mm);
  }
  j["means"] = means;
  return j;
}
}  // namespace detail

// Built-in defaults, one per experiment. Mixtures the paper leaves
// unspecified ship as documented choices and accept overrides.
inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  Json& j = cfg.doc;
  j["experiment"] = experiment_name(kind);
  j["schedule"] = {{"lambda_max", 10.0}, {"lambda_min", -10.0}, {"horizon", 1.0}};
  j["run"] = {{"n_steps", 1024}, {"n_paths", 256}, {"seed", 0}};

  const NoiseSchedule sched;
  switch (kind) {
    case ExperimentKind::hp_sample:
      j["family"] = detail::family_json(bimodal_fixture(sched));
      j["run"]["n_paths"] = 64;
      j["thresholds_lambda"] = {-4.0, 0.0, 4.0};
      j["base_sampler"] = "reverse-sde";  // or "pf-ode"
      break;
    case ExperimentKind::track_likelihood:
      j["family"] = detail::family_json(stationary_fixture(sched));
      break;
    case ExperimentKind::bias_bounds:
      j["family"] = detail::family_json(bimodal_fixture(sched));
      j["score_model"] = {{"variant", "perturbed"}, {"epsilon", 0.1}, {"bias", {1.0}}};
      j["run"]["n_paths"] = 512;
      j["run"]["n_steps"] = 2048;
      j["elbo_samples"] = 2048;
      j["ode_steps"] = 1024;
      break;
    case ExperimentKind::mode_curve:
      j["family"] = detail::family_json(trimodal_fixture(sched));
      j["anchor"] = {{"x", -2.5}, {"lambda_t", -8.0}};
      j["lambda_end"] = 1.1;  // stays below the known jump at lambda ~ 1.3
      j["checkpoints_lambda"] = {-7.0, -5.0, -3.0, -1.0, 0.0, 0.5, 1.0, 1.1};
      j["grid"] = {{"lo", -4.0}, {"hi", 3.5}, {"points", 4000}};
      j["run"]["n_steps"] = 4096;
      break;
    case ExperimentKind::tradeoff: {
      // Four well-separated 2D components, bottom-left carrying the most mass.
      Json fam;
      fam["dim"] = 2;
      fam["weights"] = {0.55, 0.15, 0.15, 0.15};
      fam["means"] = {{-2.0, -2.0}, {2.0, -2.0}, {-2.0, 2.0}, {2.0, 2.0}};
      fam["variances"] = {0.1, 0.1, 0.1, 0.1};
      j["family"] = fam;
      j["thresholds_lambda"] = {-4.0, 0.0, 4.0};
      j["run"]["n_paths"] = 256;
      j["base_sampler"] = "reverse-sde";
      break;
    }
    case ExperimentKind::hp_vs_samples:
      j["family"] = detail::family_json(bimodal_fixture(sched));
      j["thresholds_lambda"] = {-2.0, 0.0, 2.0};
      j["k_samples"] = 512;
      j["anchors_per_threshold"] = 4;
      break;
    case ExperimentKind::nonsmooth_demo:
      j["family"] = detail::family_json(trimodal_fixture(sched));
      j["anchor"] = {{"x", -2.5}, {"lambda_t", -8.0}};
      j["lambda_scan"] = {{"from", -4.0}, {"to", 6.0}, {"step", 0.02}};
      j["grid"] = {{"lo", -4.0}, {"hi", 3.5}, {"points", 512}};
      j["jump_threshold"] = 0.5;
      break;
    case ExperimentKind::beta_invariance:
      j["family"] = detail::family_json(bimodal_fixture(sched));
      j["betas"] = {0.5, 2.0};
      j["run"]["n_paths"] = 10000;
      break;
    case ExperimentKind::selftest:
      j["family"] = detail::family_json(bimodal_fixture(sched));
      j["run"]["n_paths"] = 16;
      j["run"]["n_steps"] = 512;
      break;
  }
  return cfg;
}

}  // namespace ddlab
