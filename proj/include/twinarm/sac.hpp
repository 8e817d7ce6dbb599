#pragma once

#include <array>
#include <vector>

#include "twinarm/env.hpp"
#include "twinarm/nn.hpp"
#include "twinarm/rng.hpp"

namespace twinarm {

struct SacConfig {
    std::vector<int> hidden{128, 128};
    int batch_size = 256;
    double lr = 3e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double gamma = 0.99;
    double tau = 0.005;
    double target_entropy_scale = 0.7;  // target entropy per branch = scale * ln 3
    double init_alpha = 1.0;
    int buffer_capacity = 200000;
    int warmup_steps = 1000;  // random-action steps before updates begin
    long total_steps = 200000;
    int update_every = 1;      // environment steps per gradient update
    int checkpoint_every = 0;  // 0 = final checkpoint only

    double target_entropy_total() const;
};

struct LossRecord {
    double value_loss = 0, policy_loss = 0, alpha_loss = 0, entropy = 0;
};

// Per-branch categorical distribution for one observation.
struct BranchDist {
    std::array<std::array<double, kBranchOptions>, kNumBranches> p{};
    std::array<std::array<double, kBranchOptions>, kNumBranches> logp{};
};

// Uniform ring buffer of transitions; oldest entries overwritten when full.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(int capacity);

    void push(const Transition& t);
    int size() const { return static_cast<int>(count_); }
    int capacity() const { return capacity_; }
    const Transition& at(int i) const { return store_[i]; }

    // i.i.d. uniform over stored items.
    std::vector<Transition> sample(Rng& rng, int n) const;

  private:
    int capacity_;
    size_t head_ = 0, count_ = 0;
    std::vector<Transition> store_;
};

// Discrete Soft Actor-Critic over the 7x3 branched action space.
//
// The policy is a product of per-branch categoricals (one 21-logit head);
// each critic scores every branch option and the joint value of an action is
// the sum of its selected per-branch entries, which keeps all SAC
// expectations exact per branch. Gradients are hand-derived.
class SacAgent {
  public:
    SacAgent(const SacConfig& cfg, Rng& init_rng);

    BranchDist policy_distribution(const Observation& obs) const;
    BranchedAction sample_action(const Observation& obs, Rng& rng) const;
    BranchedAction greedy_action(const Observation& obs) const;

    // V(s) = sum_b sum_a pi_b(a) * (min_i Q_i,b(s,a) - alpha * ln pi_b(a)).
    double soft_state_value(const Observation& obs) const;
    double soft_state_value_target(const Observation& obs) const;

    // y = r + gamma * (1 - done) * V_target(s'), per batch item.
    std::vector<double> critic_targets(const std::vector<Transition>& batch) const;

    // Pure loss evaluation at the current parameters.
    LossRecord compute_losses(const std::vector<Transition>& batch) const;

    struct Gradients {
        ParamSet policy, q1, q2;
        double log_alpha = 0;
        LossRecord losses;
    };
    // Pure gradients at the current parameters (policy loss treats critics
    // as constants; critic losses use the current targets).
    Gradients compute_gradients(const std::vector<Transition>& batch) const;

    // One SAC update: critic step, policy step against the updated critics,
    // temperature step, Polyak tracking. Throws on non-finite losses.
    LossRecord update(const std::vector<Transition>& batch);

    double alpha() const { return std::exp(log_alpha_); }
    double log_alpha() const { return log_alpha_; }
    void set_log_alpha(double v) { log_alpha_ = v; }

    DenseNet& policy_net() { return policy_; }
    DenseNet& q1_net() { return q1_; }
    DenseNet& q2_net() { return q2_; }
    DenseNet& target1_net() { return t1_; }
    DenseNet& target2_net() { return t2_; }
    const DenseNet& policy_net() const { return policy_; }
    const DenseNet& q1_net() const { return q1_; }
    const DenseNet& q2_net() const { return q2_; }
    const DenseNet& target1_net() const { return t1_; }
    const DenseNet& target2_net() const { return t2_; }
    Adam& policy_opt() { return opt_policy_; }
    Adam& q1_opt() { return opt_q1_; }
    Adam& q2_opt() { return opt_q2_; }
    Adam& alpha_opt() { return opt_alpha_; }
    const Adam& policy_opt() const { return opt_policy_; }
    const Adam& q1_opt() const { return opt_q1_; }
    const Adam& q2_opt() const { return opt_q2_; }
    const Adam& alpha_opt() const { return opt_alpha_; }

    const SacConfig& config() const { return cfg_; }
    long global_step = 0;

  private:
    struct BatchDist;  // batched softmax results

    Mat gather_obs(const std::vector<Transition>& batch, bool next) const;
    void branch_softmax(const Mat& logits, Mat& p, Mat& logp) const;
    std::vector<double> soft_values(const DenseNet& c1, const DenseNet& c2, const Mat& p,
                                    const Mat& logp, const Mat& obs) const;
    std::pair<ParamSet, double> critic_grads(const DenseNet& net, const Mat& obs,
                                             const std::vector<Transition>& batch,
                                             const std::vector<double>& y) const;
    struct PolicyGrads {
        ParamSet g;
        double alpha_grad = 0;
        double policy_loss = 0, alpha_loss = 0, entropy = 0;
    };
    PolicyGrads policy_alpha_grads(const Mat& obs) const;

    SacConfig cfg_;
    DenseNet policy_, q1_, q2_, t1_, t2_;
    double log_alpha_;
    Adam opt_policy_, opt_q1_, opt_q2_, opt_alpha_;
};

}  // namespace twinarm
