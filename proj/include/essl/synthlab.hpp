#pragma once

// Desk-scale stand-in for self-supervised pre-training: two noisy views of
// Gaussian latents, a linear encoder, and the scheduler choosing the loss
// weights at every step.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "essl/scheduler.hpp"
#include "essl/ssl_losses.hpp"

namespace essl {

struct LabConfig {
  int input_dim = 16;
  int feature_dim = 8;
  int batch_size = 32;
  double noise_scale = 0.1;
  long long steps = 50000;
  double learning_rate = 0.01;
  std::uint64_t seed = 7;
  double temperature = kDefaultTemperature;
  double epsilon = kDefaultRedundancyWeight;

  void validate() const;
};

std::pair<FeatureBatch, FeatureBatch> gen_two_view_batch(std::mt19937_64& rng,
                                                         const LabConfig& cfg);

// weights: feature_dim x input_dim. Returns x * weights^T.
FeatureBatch encoder_forward(const Eigen::MatrixXd& weights, const FeatureBatch& x);
// Gradient w.r.t. the weights given the gradient w.r.t. the encoder output.
Eigen::MatrixXd encoder_weight_grad(const FeatureBatch& x, const Eigen::MatrixXd& grad_out);

struct StepRecord {
  long long step = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double reward = 0.0;
  double cosine = 0.0;
  double loss_total = 0.0;
  double loss_gen = 0.0;
  double loss_dis = 0.0;
};

struct TrainingLog {
  std::vector<StepRecord> records;
  Eigen::MatrixXd final_weights;
  PolicyParams final_policy;
  long long policy_updates = 0;

  // Mean (alpha, beta) over the last `window` records (fewer if the log is
  // shorter).
  std::pair<double, double> trailing_mean_weights(std::size_t window) const;
  double trailing_cosine(std::size_t window, PopulationState target) const;
};

struct EpisodeOptions {
  std::optional<PolicyParams> initial_policy;
  bool learn_policy = true;
};

TrainingLog train_episode(const LabConfig& cfg, const SchedulerConfig& sched_cfg,
                          const EpisodeOptions& options = {});

// `step,alpha,beta,reward,loss_total,loss_gen,loss_dis` with a header.
std::string training_log_csv(const TrainingLog& log);
// First line `rows,cols`, then one comma-separated row per line.
std::string weights_text(const Eigen::MatrixXd& w);

}  // namespace essl
