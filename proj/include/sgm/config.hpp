#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgm/schedule.hpp"
#include "sgm/targets.hpp"
#include "sgm/tuner.hpp"

namespace sgm {

// Flat key = value experiment description. Lines starting with '#' and blank
// lines are ignored; every key is optional and unknown keys are rejected.
struct ExperimentConfig {
  std::string target_kind = "iso";  // iso heterosc corr stationary funnel gmm25 gaussian
  int target_dim = 50;
  std::vector<double> target_mu;  // gaussian kind: one value (broadcast) or d values
  std::string target_sigma_file;  // gaussian kind: binary matrix file

  std::string schedule_kind = "linear";
  double schedule_a = 0.0;
  double schedule_s = Schedule::kDefaultCosineS;
  double beta0 = 0.1;
  double beta1 = 20.0;
  double T = 1.0;
  double sigma2 = 1.0;

  std::size_t steps = 500;

  std::string score = "exact";  // exact or trained
  std::string loss = "explicit";
  std::size_t epochs = 20;
  double lr = 1e-4;
  std::size_t batch = 64;
  int width = 256;
  int layers = 3;
  std::size_t n_train = 10000;

  std::size_t sample_n = 10000;
  std::string scheme = "ei";

  std::string bound_metric = "kl";
  bool refined = false;
  std::string eps = "0";  // 0, estimate or a value
  std::size_t n_mc = 500;

  double a_min = -10.0;
  double a_max = 10.0;
  double a_step = 1.0;
  bool refine = false;
  double refine_step = 0.25;
  double refine_radius = 1.0;
  std::size_t runs = 1;
  bool compare = false;

  std::vector<std::string> metrics;
  std::size_t projections = 500;
  std::string preprocess = "none";  // none or rescale
  std::uint64_t seed = 0;

  std::string output_dir = ".";
  std::string output_prefix = "";
  std::string cache_dir = "";

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);
// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);
// Semantic checks: value ranges, known names and that referenced files exist.
void validate_config(const ExperimentConfig& cfg);

Target make_target(const ExperimentConfig& cfg);
Schedule make_schedule(const ExperimentConfig& cfg);
TrainConfig make_train_config(const ExperimentConfig& cfg);
SweepSpec make_sweep_spec(const ExperimentConfig& cfg);

}  // namespace sgm
