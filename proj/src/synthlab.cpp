#include "essl/synthlab.hpp"

#include <algorithm>
#include <cmath>

#include "essl/error.hpp"
#include "essl/text_io.hpp"

namespace essl {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  std::uint32_t words[2];
  seq.generate(std::begin(words), std::end(words));
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

void LabConfig::validate() const {
  if (input_dim < 1) throw ValidationError("lab: input_dim must be positive");
  if (feature_dim < 2) throw ValidationError("lab: feature_dim must be at least 2");
  if (batch_size < 2) throw ValidationError("lab: batch_size must be at least 2");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ValidationError("lab: noise_scale must be nonnegative");
  }
  if (steps < 1) throw ValidationError("lab: steps must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("lab: learning_rate must be positive");
  if (!(temperature > 0.0)) throw ValidationError("lab: temperature must be positive");
  if (!(epsilon > 0.0)) throw ValidationError("lab: epsilon must be positive");
}

std::pair<FeatureBatch, FeatureBatch> gen_two_view_batch(std::mt19937_64& rng,
                                                         const LabConfig& cfg) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureBatch latent(cfg.batch_size, cfg.input_dim);
  for (Eigen::Index i = 0; i < latent.size(); ++i) latent.data()[i] = normal(rng);
  FeatureBatch v1 = latent;
  FeatureBatch v2 = latent;
  if (cfg.noise_scale > 0.0) {
    for (Eigen::Index i = 0; i < v1.size(); ++i) v1.data()[i] += cfg.noise_scale * normal(rng);
    for (Eigen::Index i = 0; i < v2.size(); ++i) v2.data()[i] += cfg.noise_scale * normal(rng);
  }
  return {std::move(v1), std::move(v2)};
}

FeatureBatch encoder_forward(const Eigen::MatrixXd& weights, const FeatureBatch& x) {
  if (weights.cols() != x.cols()) {
    throw ValidationError("encoder expects " + std::to_string(weights.cols()) +
                          " input columns, got " + std::to_string(x.cols()));
  }
  return x * weights.transpose();
}

Eigen::MatrixXd encoder_weight_grad(const FeatureBatch& x, const Eigen::MatrixXd& grad_out) {
  if (x.rows() != grad_out.rows()) throw ValidationError("encoder gradient: batch mismatch");
  return grad_out.transpose() * x;
}

std::pair<double, double> TrainingLog::trailing_mean_weights(std::size_t window) const {
  if (records.empty()) return {0.0, 0.0};
  const std::size_t n = std::min(window, records.size());
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = records.size() - n; i < records.size(); ++i) {
    a += records[i].alpha;
    b += records[i].beta;
  }
  return {a / static_cast<double>(n), b / static_cast<double>(n)};
}

double TrainingLog::trailing_cosine(std::size_t window, PopulationState target) const {
  auto [a, b] = trailing_mean_weights(window);
  const double norms = std::hypot(a, b) * std::hypot(target.x, target.y);
  return norms > 0.0 ? (a * target.x + b * target.y) / norms : 0.0;
}

TrainingLog train_episode(const LabConfig& cfg, const SchedulerConfig& sched_cfg,
                          const EpisodeOptions& options) {
  cfg.validate();
  sched_cfg.validate();

  std::mt19937_64 data_rng(derive_seed(cfg.seed, 1));
  std::mt19937_64 init_rng(derive_seed(cfg.seed, 2));

  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.input_dim)));
  Eigen::MatrixXd weights(cfg.feature_dim, cfg.input_dim);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = normal(init_rng);

  PolicyParams policy =
      options.initial_policy
          ? *options.initial_policy
          : PolicyParams::initialized(cfg.feature_dim, sched_cfg.hidden_width,
                                      sched_cfg.init_log_std, init_rng);
  if (policy.state_dim() != cfg.feature_dim) {
    throw ValidationError("initial policy state_dim does not match feature_dim");
  }
  HyperParamScheduler scheduler(sched_cfg, std::move(policy), derive_seed(cfg.seed, 3),
                                options.learn_policy);

  TrainingLog log;
  log.records.reserve(static_cast<std::size_t>(cfg.steps));
  for (long long t = 1; t <= cfg.steps; ++t) {
    auto [x1, x2] = gen_two_view_batch(data_rng, cfg);
    const FeatureBatch z1 = encoder_forward(weights, x1);
    const FeatureBatch z2 = encoder_forward(weights, x2);

    const auto decision = scheduler.act(z1);
    const auto loss = essl_loss(z1, z2, decision.weights, cfg.temperature, cfg.epsilon);
    const auto r = scheduler.feedback(loss.total);

    weights -= cfg.learning_rate *
               (encoder_weight_grad(x1, loss.grad1) + encoder_weight_grad(x2, loss.grad2));

    log.records.push_back({t, decision.weights.alpha, decision.weights.beta, r.total, r.cosine,
                           loss.total, loss.gen, loss.dis});
  }
  log.final_weights = std::move(weights);
  log.final_policy = scheduler.policy();
  log.policy_updates = scheduler.updates();
  return log;
}

std::string training_log_csv(const TrainingLog& log) {
  std::string out = "step,alpha,beta,reward,loss_total,loss_gen,loss_dis\n";
  out.reserve(out.size() + log.records.size() * 96);
  for (const auto& r : log.records) {
    out += std::to_string(r.step);
    for (double v : {r.alpha, r.beta, r.reward, r.loss_total, r.loss_gen, r.loss_dis}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string weights_text(const Eigen::MatrixXd& w) {
  std::string out = std::to_string(w.rows()) + "," + std::to_string(w.cols()) + "\n";
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (j) out += ',';
      out += format_double(w(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace essl
