#include "sgm/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "sgm/diffusion.hpp"
#include "sgm/error.hpp"
#include "sgm/io.hpp"
#include "sgm/metrics.hpp"

namespace sgm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("not a number");
  return out;
}

template <typename Int>
Int to_int(const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("not an integer");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("not a boolean");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field num(const char* key, T ExperimentConfig::*member) {
  return {key,
          [member](ExperimentConfig& c, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*member = to_double(v);
            } else {
              c.*member = to_int<T>(v);
            }
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return io::format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field str(const char* key, std::string ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

Field flag(const char* key, bool ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = to_bool(v); },
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      str("target.kind", &ExperimentConfig::target_kind),
      num("target.dim", &ExperimentConfig::target_dim),
      {"target.mu",
       [](ExperimentConfig& c, const std::string& v) {
         c.target_mu.clear();
         for (const auto& item : split_list(v)) c.target_mu.push_back(to_double(item));
       },
       [](const ExperimentConfig& c) {
         std::vector<std::string> items;
         for (double x : c.target_mu) items.push_back(io::format_double(x));
         return join(items);
       }},
      str("target.sigma-file", &ExperimentConfig::target_sigma_file),
      str("schedule.kind", &ExperimentConfig::schedule_kind),
      num("schedule.a", &ExperimentConfig::schedule_a),
      num("schedule.s", &ExperimentConfig::schedule_s),
      num("schedule.beta0", &ExperimentConfig::beta0),
      num("schedule.beta1", &ExperimentConfig::beta1),
      num("schedule.T", &ExperimentConfig::T),
      num("schedule.sigma2", &ExperimentConfig::sigma2),
      num("grid.steps", &ExperimentConfig::steps),
      str("score", &ExperimentConfig::score),
      str("train.loss", &ExperimentConfig::loss),
      num("train.epochs", &ExperimentConfig::epochs),
      num("train.lr", &ExperimentConfig::lr),
      num("train.batch", &ExperimentConfig::batch),
      num("train.width", &ExperimentConfig::width),
      num("train.layers", &ExperimentConfig::layers),
      num("train.n", &ExperimentConfig::n_train),
      num("sample.n", &ExperimentConfig::sample_n),
      str("sample.scheme", &ExperimentConfig::scheme),
      str("bound.metric", &ExperimentConfig::bound_metric),
      flag("bound.refined", &ExperimentConfig::refined),
      str("bound.eps", &ExperimentConfig::eps),
      num("bound.n-mc", &ExperimentConfig::n_mc),
      num("sweep.a-min", &ExperimentConfig::a_min),
      num("sweep.a-max", &ExperimentConfig::a_max),
      num("sweep.a-step", &ExperimentConfig::a_step),
      flag("sweep.refine", &ExperimentConfig::refine),
      num("sweep.refine-step", &ExperimentConfig::refine_step),
      num("sweep.refine-radius", &ExperimentConfig::refine_radius),
      num("sweep.runs", &ExperimentConfig::runs),
      flag("sweep.compare", &ExperimentConfig::compare),
      {"metrics",
       [](ExperimentConfig& c, const std::string& v) { c.metrics = split_list(v); },
       [](const ExperimentConfig& c) { return join(c.metrics); }},
      num("metrics.projections", &ExperimentConfig::projections),
      str("preprocess", &ExperimentConfig::preprocess),
      num("seed", &ExperimentConfig::seed),
      str("output.dir", &ExperimentConfig::output_dir),
      str("output.prefix", &ExperimentConfig::output_prefix),
      str("cache.dir", &ExperimentConfig::cache_dir),
  };
  return table;
}

void check(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw ConfigError(key + ": " + why);
}

template <typename F>
void check_name(const std::string& key, const std::string& value, F&& parse) {
  try {
    parse(value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (key == f.key) field = &f;
    if (field == nullptr) throw ConfigError(where + "unknown key '" + key + "'");
    for (const auto& s : seen)
      if (s == key) throw ConfigError(where + "duplicate key '" + key + "'");
    seen.push_back(key);
    try {
      field->set(cfg, value);
    } catch (const std::exception&) {
      throw ConfigError(where + "bad value '" + value + "' for key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

void validate_config(const ExperimentConfig& cfg) {
  const std::vector<std::string> kinds = {"iso",    "heterosc", "corr",    "stationary",
                                          "funnel", "gmm25",    "gaussian"};
  check(std::find(kinds.begin(), kinds.end(), cfg.target_kind) != kinds.end(), "target.kind",
        "unknown target '" + cfg.target_kind + "'");
  check(cfg.target_dim >= 1, "target.dim", "must be at least 1");
  if (cfg.target_kind == "funnel" || cfg.target_kind == "gmm25")
    check(cfg.target_dim >= 2, "target.dim", "must be at least 2 for " + cfg.target_kind);
  if (cfg.target_kind == "gaussian") {
    check(!cfg.target_sigma_file.empty(), "target.sigma-file", "required for gaussian targets");
    check(std::filesystem::exists(cfg.target_sigma_file), "target.sigma-file",
          "file '" + cfg.target_sigma_file + "' does not exist");
    check(cfg.target_mu.size() == 1 || cfg.target_mu.size() == static_cast<std::size_t>(cfg.target_dim),
          "target.mu", "needs one value or target.dim values");
  }
  check(cfg.schedule_kind == "linear" || cfg.schedule_kind == "parametric" ||
            cfg.schedule_kind == "cosine",
        "schedule.kind", "expected linear, parametric or cosine");
  check(cfg.beta0 > 0.0 && cfg.beta1 >= cfg.beta0, "schedule.beta0", "need 0 < beta0 <= beta1");
  check(cfg.T > 0.0, "schedule.T", "must be positive");
  check(cfg.sigma2 > 0.0, "schedule.sigma2", "must be positive");
  check(cfg.schedule_s > 0.0, "schedule.s", "must be positive");
  check(cfg.steps >= 1, "grid.steps", "must be at least 1");
  check_name("score", cfg.score, parse_score_mode);
  check_name("train.loss", cfg.loss, parse_loss);
  check(cfg.epochs >= 1, "train.epochs", "must be at least 1");
  check(cfg.lr > 0.0, "train.lr", "must be positive");
  check(cfg.batch >= 1, "train.batch", "must be at least 1");
  check(cfg.width >= 1, "train.width", "must be at least 1");
  check(cfg.layers >= 1, "train.layers", "must be at least 1");
  check(cfg.n_train >= 2, "train.n", "must be at least 2");
  check(cfg.sample_n >= 2, "sample.n", "must be at least 2");
  check_name("sample.scheme", cfg.scheme, parse_scheme);
  check_name("bound.metric", cfg.bound_metric, parse_bound_metric);
  if (cfg.eps != "estimate") {
    double v = -1.0;
    try {
      v = to_double(cfg.eps);
    } catch (const std::exception&) {
    }
    check(v >= 0.0, "bound.eps", "expected estimate or a nonnegative number");
  }
  check(cfg.a_step > 0.0, "sweep.a-step", "must be positive");
  check(cfg.a_max >= cfg.a_min, "sweep.a-max", "must not be below sweep.a-min");
  check(cfg.refine_step > 0.0, "sweep.refine-step", "must be positive");
  check(cfg.refine_radius >= cfg.refine_step, "sweep.refine-radius", "must be at least the refine step");
  check(cfg.runs >= 1, "sweep.runs", "must be at least 1");
  check(!cfg.compare || !cfg.metrics.empty(), "sweep.compare", "needs at least one metric");
  for (const auto& m : cfg.metrics) check(is_metric_name(m), "metrics", "unknown metric '" + m + "'");
  check(cfg.projections >= 1, "metrics.projections", "must be at least 1");
  check(cfg.preprocess == "none" || cfg.preprocess == "rescale", "preprocess",
        "expected none or rescale");
}

Target make_target(const ExperimentConfig& cfg) {
  const int d = cfg.target_dim;
  if (cfg.target_kind == "iso") return GaussianTarget::iso(d);
  if (cfg.target_kind == "heterosc") return GaussianTarget::heterosc(d);
  if (cfg.target_kind == "corr") return GaussianTarget::corr(d);
  if (cfg.target_kind == "stationary") return GaussianTarget::stationary(d, cfg.sigma2);
  if (cfg.target_kind == "funnel") return FunnelTarget(d);
  if (cfg.target_kind == "gmm25") return GmmTarget::gmm25(d);
  if (cfg.target_kind == "gaussian") {
    const Mat sigma = io::read_matrix(cfg.target_sigma_file);
    if (sigma.rows() != d) throw ConfigError("target.sigma-file: dimension does not match target.dim");
    Vec mu = cfg.target_mu.size() == 1
                 ? Vec(Vec::Constant(d, cfg.target_mu.front()))
                 : Vec(Eigen::Map<const Vec>(cfg.target_mu.data(), static_cast<Eigen::Index>(d)));
    return GaussianTarget(mu, sigma);
  }
  throw ConfigError("target.kind: unknown target '" + cfg.target_kind + "'");
}

Schedule make_schedule(const ExperimentConfig& cfg) {
  if (cfg.schedule_kind == "linear") return Schedule::linear(cfg.beta0, cfg.beta1, cfg.T, cfg.sigma2);
  if (cfg.schedule_kind == "parametric")
    return Schedule::parametric(cfg.schedule_a, cfg.beta0, cfg.beta1, cfg.T, cfg.sigma2);
  if (cfg.schedule_kind == "cosine") return Schedule::cosine(cfg.schedule_s, cfg.T, cfg.sigma2);
  throw ConfigError("schedule.kind: unknown schedule '" + cfg.schedule_kind + "'");
}

TrainConfig make_train_config(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.loss = parse_loss(cfg.loss);
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch;
  t.learning_rate = cfg.lr;
  t.width = cfg.width;
  t.layers = cfg.layers;
  t.seed = cfg.seed;
  return t;
}

SweepSpec make_sweep_spec(const ExperimentConfig& cfg) {
  SweepSpec s;
  s.metric = parse_bound_metric(cfg.bound_metric);
  s.target = make_target(cfg);
  s.beta0 = cfg.beta0;
  s.beta1 = cfg.beta1;
  s.T = cfg.T;
  s.sigma2 = cfg.sigma2;
  s.steps = cfg.steps;
  s.score = parse_score_mode(cfg.score);
  s.train = make_train_config(cfg);
  s.n_train = cfg.n_train;
  s.rescale = cfg.preprocess == "rescale";
  if (cfg.eps == "estimate") {
    s.eps_mode = EpsMode::Estimate;
  } else {
    s.eps_value = to_double(cfg.eps);
    s.eps_mode = s.eps_value == 0.0 ? EpsMode::Zero : EpsMode::Value;
  }
  s.n_mc = cfg.n_mc;
  s.refined = cfg.refined;
  s.metrics = cfg.metrics;
  s.n_gen = cfg.sample_n;
  s.n_proj = cfg.projections;
  s.scheme = parse_scheme(cfg.scheme);
  s.seed = cfg.seed;
  s.cache_dir = cfg.cache_dir;
  return s;
}

}  // namespace sgm
