#pragma once

// Reinforcement-learning controller for the loss weights (alpha, beta).
//
// The agent observes the batch mean of the projected features, emits a
// squashed Gaussian action in [-1, 1]^2 that offsets both weights from V, and
// is rewarded for pointing (alpha, beta) along the equilibrium found by the
// game analysis plus an exploration bonus driven by the change in total loss.
// Updates use a clipped surrogate objective every `update_period` steps.

#include <array>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "essl/egt.hpp"
#include "essl/ssl_losses.hpp"

namespace essl {

struct SchedulerConfig {
  double v = 0.5;
  double xi = 0.1;
  double phi = 1.0;
  PopulationState target{0.85, 0.87};
  int update_period = 200;
  double reward_cap = 100.0;
  double denom_floor = 1e-6;

  // PPO
  double clip = 0.2;
  double discount = 0.99;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  int minibatch_size = 64;
  int hidden_width = 16;
  double init_log_std = -1.0;

  void validate() const;
};

// Weights never fall below this, so (alpha, beta) is always a valid LossWeights.
inline constexpr double kMinLossWeight = 1e-3;

inline constexpr double kMinLogStd = -5.0;
inline constexpr double kMaxLogStd = 2.0;

using Action = std::array<double, 2>;

struct Transition {
  Eigen::VectorXd state;
  Action action{};      // squashed, in [-1, 1]
  Action pre_squash{};  // Gaussian sample before tanh
  double reward = 0.0;
  double log_prob = 0.0;
  double value_estimate = 0.0;
};

// Two small tanh networks, one for the action mean and one for the value,
// plus a state-independent log standard deviation. All parameters live in
// one flat vector so the optimizer and checkpoints can treat them uniformly.
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(int state_dim, int hidden_width);

  // Small random weights, zero biases, log-std = init_log_std.
  static PolicyParams initialized(int state_dim, int hidden_width, double init_log_std,
                                  std::mt19937_64& rng);

  int state_dim() const noexcept { return state_dim_; }
  int hidden_width() const noexcept { return hidden_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(theta_.size()); }

  Eigen::VectorXd& flat() noexcept { return theta_; }
  const Eigen::VectorXd& flat() const noexcept { return theta_; }

  struct Forward {
    Eigen::Vector2d mean;
    Eigen::Vector2d log_std;
    double value = 0.0;
    Eigen::VectorXd policy_hidden;
    Eigen::VectorXd value_hidden;
  };
  Forward forward(const Eigen::VectorXd& state) const;

  // Layout accessors (views into flat()).
  Eigen::Map<Eigen::MatrixXd> policy_w1();
  Eigen::Map<Eigen::VectorXd> policy_b1();
  Eigen::Map<Eigen::MatrixXd> mean_w();
  Eigen::Map<Eigen::VectorXd> mean_b();
  Eigen::Map<Eigen::VectorXd> log_std();
  Eigen::Map<Eigen::MatrixXd> value_w1();
  Eigen::Map<Eigen::VectorXd> value_b1();
  Eigen::Map<Eigen::VectorXd> value_w();
  Eigen::Map<Eigen::VectorXd> value_b();

  // Adam moments; not part of checkpoints.
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  long long adam_step = 0;

 private:
  struct Layout {
    std::size_t pw1, pb1, mw, mb, ls, vw1, vb1, vw, vb, total;
  };
  Layout layout() const noexcept;
  Eigen::Map<Eigen::MatrixXd> mat(std::size_t off, int rows, int cols);
  Eigen::Map<Eigen::VectorXd> vec(std::size_t off, int n);

  int state_dim_ = 0;
  int hidden_ = 0;
  Eigen::VectorXd theta_;
};

// Per-dimension mean over the batch axis.
Eigen::VectorXd observe_state(const FeatureBatch& features);

// alpha = clamp(V + a_alpha, 0, 2V), floored at kMinLossWeight; same for beta.
LossWeights map_action(const Action& action, const SchedulerConfig& cfg);

struct RewardTerms {
  double cosine = 0.0;
  double exploration = 0.0;
  double total = 0.0;
};

// cos((alpha, beta), target) + xi * min(1 / max(|L_t - phi L_{t-1}|, floor), cap).
// Without a previous loss the exploration term is 0.
RewardTerms reward(const LossWeights& w, const SchedulerConfig& cfg, double loss_t,
                   std::optional<double> loss_prev);

struct PolicySample {
  Action action{};
  Action pre_squash{};
  double log_prob = 0.0;
  double value_estimate = 0.0;
};

PolicySample policy_act(const PolicyParams& policy, const Eigen::VectorXd& state,
                        std::mt19937_64& rng);

// Log-density of a squashed-Gaussian action given its pre-squash sample.
double squashed_log_prob(const PolicyParams::Forward& f, const Action& pre_squash);

// Per-sample clipped surrogate objective min(r A, clip(r, 1-eps, 1+eps) A).
struct SurrogateTerm {
  double objective = 0.0;
  bool clipped = false;  // the clipped branch was selected (zero gradient)
};
SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip) noexcept;

struct PpoStats {
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double mean_advantage = 0.0;
};

// Discounted reward-to-go, bootstrapped past the last transition with its
// own value estimate.
std::vector<double> rewards_to_go(std::span<const Transition> buffer, double discount);

// One epoch of clipped-surrogate updates over the buffer, in minibatches, with
// Adam. Advantage = reward-to-go minus the stored value estimate; the value
// network regresses onto the rewards-to-go.
PolicyParams ppo_update(const PolicyParams& policy, std::span<const Transition> buffer,
                        const SchedulerConfig& cfg, std::mt19937_64& rng,
                        PpoStats* stats = nullptr);

// Checkpoint: version header, dimensions, then one parameter per line.
std::string serialize_policy(const PolicyParams& p);
PolicyParams parse_policy(std::string_view text);

// Online side of the training loop: act on a feature batch, receive the loss
// of the step, store the transition and update every update_period steps.
class HyperParamScheduler {
 public:
  HyperParamScheduler(const SchedulerConfig& cfg, PolicyParams policy, std::uint64_t seed,
                      bool learning = true);

  struct Decision {
    LossWeights weights;
    PolicySample sample;
  };

  Decision act(const FeatureBatch& features);
  // Must follow act(). Returns the reward of the step.
  RewardTerms feedback(double loss_total);

  const PolicyParams& policy() const noexcept { return policy_; }
  const std::vector<Transition>& buffer() const noexcept { return buffer_; }
  long long steps() const noexcept { return step_; }
  long long updates() const noexcept { return updates_; }
  const PpoStats& last_stats() const noexcept { return last_stats_; }

 private:
  SchedulerConfig cfg_;
  PolicyParams policy_;
  std::mt19937_64 rng_;
  bool learning_;
  std::vector<Transition> buffer_;
  std::optional<Transition> pending_;
  std::optional<LossWeights> pending_weights_;
  std::optional<double> prev_loss_;
  long long step_ = 0;
  long long updates_ = 0;
  PpoStats last_stats_;
};

}  // namespace essl
