#include "essl/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "essl/error.hpp"
#include "essl/text_io.hpp"

namespace essl {

namespace {

constexpr std::string_view kPolicyMagic = "essl-policy 1";

double softplus(double x) noexcept {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log(1 - tanh(u)^2), stable for large |u|.
double log_tanh_jacobian(double u) noexcept {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

}  // namespace

void SchedulerConfig::validate() const {
  if (!(v > 0.0)) throw ValidationError("scheduler: v must be positive");
  if (update_period < 1) throw ValidationError("scheduler: update_period must be >= 1");
  if (!(reward_cap > 0.0)) throw ValidationError("scheduler: reward_cap must be positive");
  if (!(denom_floor > 0.0)) throw ValidationError("scheduler: denom_floor must be positive");
  if (!std::isfinite(xi) || !std::isfinite(phi)) {
    throw ValidationError("scheduler: xi and phi must be finite");
  }
  if (!(std::hypot(target.x, target.y) > 0.0) || !std::isfinite(target.x) ||
      !std::isfinite(target.y)) {
    throw ValidationError("scheduler: target must be a finite nonzero point");
  }
  if (!(clip > 0.0)) throw ValidationError("scheduler: clip must be positive");
  if (!(discount >= 0.0 && discount <= 1.0)) {
    throw ValidationError("scheduler: discount must lie in [0, 1]");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("scheduler: learning_rate must be positive");
  if (!(value_coef >= 0.0)) throw ValidationError("scheduler: value_coef must be nonnegative");
  if (minibatch_size < 1) throw ValidationError("scheduler: minibatch_size must be >= 1");
  if (hidden_width < 1) throw ValidationError("scheduler: hidden_width must be >= 1");
  if (!(init_log_std >= kMinLogStd && init_log_std <= kMaxLogStd)) {
    throw ValidationError("scheduler: init_log_std must lie in [-5, 2]");
  }
}

// ---------------------------------------------------------------------------
// PolicyParams
// ---------------------------------------------------------------------------

PolicyParams::PolicyParams(int state_dim, int hidden_width)
    : state_dim_(state_dim), hidden_(hidden_width) {
  if (state_dim < 1 || hidden_width < 1) throw ValidationError("policy dimensions must be >= 1");
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout().total));
  adam_m = Eigen::VectorXd::Zero(theta_.size());
  adam_v = Eigen::VectorXd::Zero(theta_.size());
}

PolicyParams PolicyParams::initialized(int state_dim, int hidden_width, double init_log_std,
                                       std::mt19937_64& rng) {
  PolicyParams p(state_dim, hidden_width);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(state_dim));
  const double hid_scale = 1.0 / std::sqrt(static_cast<double>(hidden_width));
  for (auto m : {p.policy_w1(), p.value_w1()}) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in_scale * normal(rng);
  }
  // The mean head starts near zero so the initial action sits at the centre.
  auto mw = p.mean_w();
  for (Eigen::Index i = 0; i < mw.size(); ++i) mw.data()[i] = 0.01 * hid_scale * normal(rng);
  auto vw = p.value_w();
  for (Eigen::Index i = 0; i < vw.size(); ++i) vw.data()[i] = hid_scale * normal(rng);
  p.log_std().setConstant(init_log_std);
  return p;
}

PolicyParams::Layout PolicyParams::layout() const noexcept {
  const auto d = static_cast<std::size_t>(state_dim_);
  const auto h = static_cast<std::size_t>(hidden_);
  Layout l{};
  l.pw1 = 0;
  l.pb1 = l.pw1 + h * d;
  l.mw = l.pb1 + h;
  l.mb = l.mw + 2 * h;
  l.ls = l.mb + 2;
  l.vw1 = l.ls + 2;
  l.vb1 = l.vw1 + h * d;
  l.vw = l.vb1 + h;
  l.vb = l.vw + h;
  l.total = l.vb + 1;
  return l;
}

Eigen::Map<Eigen::MatrixXd> PolicyParams::mat(std::size_t off, int rows, int cols) {
  return {theta_.data() + off, rows, cols};
}
Eigen::Map<Eigen::VectorXd> PolicyParams::vec(std::size_t off, int n) {
  return {theta_.data() + off, n};
}

Eigen::Map<Eigen::MatrixXd> PolicyParams::policy_w1() { return mat(layout().pw1, hidden_, state_dim_); }
Eigen::Map<Eigen::VectorXd> PolicyParams::policy_b1() { return vec(layout().pb1, hidden_); }
Eigen::Map<Eigen::MatrixXd> PolicyParams::mean_w() { return mat(layout().mw, 2, hidden_); }
Eigen::Map<Eigen::VectorXd> PolicyParams::mean_b() { return vec(layout().mb, 2); }
Eigen::Map<Eigen::VectorXd> PolicyParams::log_std() { return vec(layout().ls, 2); }
Eigen::Map<Eigen::MatrixXd> PolicyParams::value_w1() { return mat(layout().vw1, hidden_, state_dim_); }
Eigen::Map<Eigen::VectorXd> PolicyParams::value_b1() { return vec(layout().vb1, hidden_); }
Eigen::Map<Eigen::VectorXd> PolicyParams::value_w() { return vec(layout().vw, hidden_); }
Eigen::Map<Eigen::VectorXd> PolicyParams::value_b() { return vec(layout().vb, 1); }

PolicyParams::Forward PolicyParams::forward(const Eigen::VectorXd& state) const {
  if (state.size() != state_dim_) {
    throw ValidationError("policy expects a state of length " + std::to_string(state_dim_) +
                          ", got " + std::to_string(state.size()));
  }
  const auto l = layout();
  const double* t = theta_.data();
  using CMat = Eigen::Map<const Eigen::MatrixXd>;
  using CVec = Eigen::Map<const Eigen::VectorXd>;

  Forward f;
  f.policy_hidden = (CMat(t + l.pw1, hidden_, state_dim_) * state + CVec(t + l.pb1, hidden_))
                        .array()
                        .tanh()
                        .matrix();
  f.mean = CMat(t + l.mw, 2, hidden_) * f.policy_hidden + CVec(t + l.mb, 2);
  f.log_std = CVec(t + l.ls, 2).cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd);
  f.value_hidden = (CMat(t + l.vw1, hidden_, state_dim_) * state + CVec(t + l.vb1, hidden_))
                       .array()
                       .tanh()
                       .matrix();
  f.value = CVec(t + l.vw, hidden_).dot(f.value_hidden) + t[l.vb];
  return f;
}

// ---------------------------------------------------------------------------
// State, action, reward
// ---------------------------------------------------------------------------

Eigen::VectorXd observe_state(const FeatureBatch& features) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw ValidationError("cannot observe an empty feature batch");
  }
  return features.colwise().mean().transpose();
}

LossWeights map_action(const Action& action, const SchedulerConfig& cfg) {
  const auto to_weight = [&](double a) {
    return std::max(std::clamp(cfg.v + a, 0.0, 2.0 * cfg.v), kMinLossWeight);
  };
  return {to_weight(action[0]), to_weight(action[1])};
}

RewardTerms reward(const LossWeights& w, const SchedulerConfig& cfg, double loss_t,
                   std::optional<double> loss_prev) {
  RewardTerms r;
  const double dot = w.alpha * cfg.target.x + w.beta * cfg.target.y;
  const double norms = std::hypot(w.alpha, w.beta) * std::hypot(cfg.target.x, cfg.target.y);
  r.cosine = norms > 0.0 ? std::clamp(dot / norms, -1.0, 1.0) : 0.0;
  if (loss_prev) {
    const double gap = std::max(std::abs(loss_t - cfg.phi * *loss_prev), cfg.denom_floor);
    r.exploration = cfg.xi * std::min(1.0 / gap, cfg.reward_cap);
  }
  r.total = r.cosine + r.exploration;
  return r;
}

// ---------------------------------------------------------------------------
// Policy sampling and PPO
// ---------------------------------------------------------------------------

double squashed_log_prob(const PolicyParams::Forward& f, const Action& pre_squash) {
  double lp = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double sigma = std::exp(f.log_std(k));
    const double z = (pre_squash[static_cast<std::size_t>(k)] - f.mean(k)) / sigma;
    lp += -0.5 * z * z - f.log_std(k) - 0.5 * std::log(2.0 * std::numbers::pi);
    lp -= log_tanh_jacobian(pre_squash[static_cast<std::size_t>(k)]);
  }
  return lp;
}

PolicySample policy_act(const PolicyParams& policy, const Eigen::VectorXd& state,
                        std::mt19937_64& rng) {
  const auto f = policy.forward(state);
  std::normal_distribution<double> normal(0.0, 1.0);
  PolicySample s;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    s.pre_squash[k] = f.mean(i) + std::exp(f.log_std(i)) * normal(rng);
    s.action[k] = std::tanh(s.pre_squash[k]);
  }
  s.log_prob = squashed_log_prob(f, s.pre_squash);
  s.value_estimate = f.value;
  return s;
}

SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip) noexcept {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  if (clipped < unclipped) return {clipped, true};
  return {unclipped, false};
}

std::vector<double> rewards_to_go(std::span<const Transition> buffer, double discount) {
  std::vector<double> out(buffer.size());
  if (buffer.empty()) return out;
  double running = buffer.back().value_estimate;
  for (std::size_t i = buffer.size(); i-- > 0;) {
    running = buffer[i].reward + discount * running;
    out[i] = running;
  }
  return out;
}

PolicyParams ppo_update(const PolicyParams& policy, std::span<const Transition> buffer,
                        const SchedulerConfig& cfg, std::mt19937_64& rng, PpoStats* stats) {
  if (buffer.empty()) throw ValidationError("ppo_update needs a nonempty buffer");
  PolicyParams out = policy;
  const auto n_params = static_cast<Eigen::Index>(out.size());
  if (out.adam_m.size() != n_params) out.adam_m = Eigen::VectorXd::Zero(n_params);
  if (out.adam_v.size() != n_params) out.adam_v = Eigen::VectorXd::Zero(n_params);

  const auto returns = rewards_to_go(buffer, cfg.discount);
  std::vector<double> advantages(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    advantages[i] = returns[i] - buffer[i].value_estimate;
  }

  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const int h = out.hidden_width();
  PpoStats acc;
  std::size_t clipped_count = 0;

  // Scratch gradient shaped like the parameters, with the same layout maps.
  PolicyParams grad(out.state_dim(), h);
  const auto mb_size = static_cast<std::size_t>(cfg.minibatch_size);
  for (std::size_t start = 0; start < order.size(); start += mb_size) {
    const std::size_t stop = std::min(order.size(), start + mb_size);
    const double inv_m = 1.0 / static_cast<double>(stop - start);
    grad.flat().setZero();
    auto g_pw1 = grad.policy_w1();
    auto g_pb1 = grad.policy_b1();
    auto g_mw = grad.mean_w();
    auto g_mb = grad.mean_b();
    auto g_ls = grad.log_std();
    auto g_vw1 = grad.value_w1();
    auto g_vb1 = grad.value_b1();
    auto g_vw = grad.value_w();
    auto g_vb = grad.value_b();
    const auto mean_w = out.mean_w();  // copy-free view; read only here
    const auto value_w = out.value_w();

    for (std::size_t idx = start; idx < stop; ++idx) {
      const auto& tr = buffer[order[idx]];
      const double adv = advantages[order[idx]];
      const auto f = out.forward(tr.state);

      // Policy: maximize the clipped surrogate, i.e. minimize its negative.
      const double log_ratio = squashed_log_prob(f, tr.pre_squash) - tr.log_prob;
      const double ratio = std::exp(std::min(log_ratio, 50.0));
      const auto term = clipped_surrogate(ratio, adv, cfg.clip);
      acc.policy_objective += term.objective * inv_m;
      if (term.clipped) {
        ++clipped_count;
      } else {
        const double d_logp = -ratio * adv * inv_m;
        Eigen::Vector2d d_mean;
        for (int k = 0; k < 2; ++k) {
          const double var = std::exp(2.0 * f.log_std(k));
          const double diff = tr.pre_squash[static_cast<std::size_t>(k)] - f.mean(k);
          d_mean(k) = d_logp * diff / var;
          g_ls(k) += d_logp * (diff * diff / var - 1.0);
        }
        g_mw += d_mean * f.policy_hidden.transpose();
        g_mb += d_mean;
        const Eigen::VectorXd d_pre =
            (mean_w.transpose() * d_mean).cwiseProduct(
                (1.0 - f.policy_hidden.array().square()).matrix());
        g_pw1 += d_pre * tr.state.transpose();
        g_pb1 += d_pre;
      }

      // Value: regress onto the reward-to-go.
      const double err = f.value - returns[order[idx]];
      acc.value_loss += err * err * inv_m;
      const double d_value = cfg.value_coef * 2.0 * err * inv_m;
      g_vw += d_value * f.value_hidden;
      g_vb(0) += d_value;
      const Eigen::VectorXd d_vpre =
          (d_value * value_w).cwiseProduct((1.0 - f.value_hidden.array().square()).matrix());
      g_vw1 += d_vpre * tr.state.transpose();
      g_vb1 += d_vpre;
    }

    // Adam
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kAdamEps = 1e-8;
    ++out.adam_step;
    const auto& g = grad.flat();
    out.adam_m = kBeta1 * out.adam_m + (1.0 - kBeta1) * g;
    out.adam_v = kBeta2 * out.adam_v + (1.0 - kBeta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(out.adam_step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(out.adam_step));
    out.flat().array() -= cfg.learning_rate * (out.adam_m.array() / bc1) /
                          ((out.adam_v.array() / bc2).sqrt() + kAdamEps);
    auto ls = out.log_std();
    ls = ls.cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd);
  }

  if (stats) {
    const double batches =
        std::ceil(static_cast<double>(buffer.size()) / static_cast<double>(mb_size));
    acc.policy_objective /= batches;
    acc.value_loss /= batches;
    acc.clip_fraction = static_cast<double>(clipped_count) / static_cast<double>(buffer.size());
    acc.mean_advantage =
        std::accumulate(advantages.begin(), advantages.end(), 0.0) /
        static_cast<double>(advantages.size());
    *stats = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

std::string serialize_policy(const PolicyParams& p) {
  std::string out(kPolicyMagic);
  out += "\nstate_dim = " + std::to_string(p.state_dim());
  out += "\nhidden_width = " + std::to_string(p.hidden_width());
  out += "\nsize = " + std::to_string(p.size());
  out += '\n';
  for (Eigen::Index i = 0; i < p.flat().size(); ++i) {
    out += format_double(p.flat()(i));
    out += '\n';
  }
  return out;
}

PolicyParams parse_policy(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.size() < 4 || trim(lines[0]) != kPolicyMagic) {
    throw ParseError(1, "expected '" + std::string(kPolicyMagic) + "' header");
  }
  const auto header_value = [&](std::size_t i, std::string_view key) -> long long {
    auto kv = parse_key_values(lines[i]);
    auto it = kv.find(key);
    if (it == kv.end() || kv.size() != 1) throw ParseError(i + 1, "expected '" + std::string(key) + " = ...'");
    try {
      return parse_int(it->second);
    } catch (const ValidationError& e) {
      throw ParseError(i + 1, e.what());
    }
  };
  const auto state_dim = header_value(1, "state_dim");
  const auto hidden = header_value(2, "hidden_width");
  const auto size = header_value(3, "size");
  if (state_dim < 1 || hidden < 1 || state_dim > 1 << 16 || hidden > 1 << 16) {
    throw ParseError(2, "invalid policy dimensions");
  }
  PolicyParams p(static_cast<int>(state_dim), static_cast<int>(hidden));
  if (size != static_cast<long long>(p.size()) ||
      lines.size() != 4 + static_cast<std::size_t>(size)) {
    throw ParseError(4, "parameter count does not match the declared dimensions");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    try {
      p.flat()(static_cast<Eigen::Index>(i)) = parse_double(lines[4 + i]);
    } catch (const ValidationError& e) {
      throw ParseError(5 + i, e.what());
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// HyperParamScheduler
// ---------------------------------------------------------------------------

HyperParamScheduler::HyperParamScheduler(const SchedulerConfig& cfg, PolicyParams policy,
                                         std::uint64_t seed, bool learning)
    : cfg_(cfg), policy_(std::move(policy)), rng_(seed), learning_(learning) {
  cfg_.validate();
  buffer_.reserve(static_cast<std::size_t>(cfg_.update_period));
}

HyperParamScheduler::Decision HyperParamScheduler::act(const FeatureBatch& features) {
  if (pending_) throw ContractViolation("act() called twice without feedback()");
  Transition tr;
  tr.state = observe_state(features);
  const auto sample = policy_act(policy_, tr.state, rng_);
  tr.action = sample.action;
  tr.pre_squash = sample.pre_squash;
  tr.log_prob = sample.log_prob;
  tr.value_estimate = sample.value_estimate;
  pending_ = std::move(tr);
  pending_weights_ = map_action(sample.action, cfg_);
  return {*pending_weights_, sample};
}

RewardTerms HyperParamScheduler::feedback(double loss_total) {
  if (!pending_) throw ContractViolation("feedback() called without a pending act()");
  const auto terms = reward(*pending_weights_, cfg_, loss_total, prev_loss_);
  prev_loss_ = loss_total;
  pending_->reward = terms.total;
  buffer_.push_back(std::move(*pending_));
  pending_.reset();
  pending_weights_.reset();
  ++step_;

  if (step_ % cfg_.update_period == 0) {
    if (learning_) {
      policy_ = ppo_update(policy_, buffer_, cfg_, rng_, &last_stats_);
      ++updates_;
    }
    buffer_.clear();
  }
  return terms;
}

}  // namespace essl
