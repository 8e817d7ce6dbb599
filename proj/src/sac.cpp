#include "twinarm/sac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "twinarm/errors.hpp"

namespace twinarm {

double SacConfig::target_entropy_total() const {
    return target_entropy_scale * std::log(3.0) * kNumBranches;
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
    store_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
    if (count_ < static_cast<size_t>(capacity_)) {
        store_.push_back(t);
        ++count_;
    } else {
        store_[head_] = t;  // overwrite oldest
        head_ = (head_ + 1) % capacity_;
    }
}

std::vector<Transition> ReplayBuffer::sample(Rng& rng, int n) const {
    std::vector<Transition> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(store_[rng.uniform_int(size())]);
    return out;
}

namespace {

constexpr int kActDim = kNumBranches * kBranchOptions;  // 21

std::vector<int> net_sizes(const SacConfig& cfg) {
    std::vector<int> s;
    s.push_back(kObsDim);
    for (int h : cfg.hidden) s.push_back(h);
    s.push_back(kActDim);
    return s;
}

}  // namespace

SacAgent::SacAgent(const SacConfig& cfg, Rng& rng)
    : cfg_(cfg),
      policy_(net_sizes(cfg), rng, 0.01),
      q1_(net_sizes(cfg), rng, 0.01),
      q2_(net_sizes(cfg), rng, 0.01),
      t1_(q1_),
      t2_(q2_),
      log_alpha_(std::log(cfg.init_alpha)),
      opt_policy_(policy_.params().count(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      opt_q1_(q1_.params().count(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      opt_q2_(q2_.params().count(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      opt_alpha_(1, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) {}

Mat SacAgent::gather_obs(const std::vector<Transition>& batch, bool next) const {
    Mat X(static_cast<int>(batch.size()), kObsDim);
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto& o = next ? batch[i].next_obs : batch[i].obs;
        std::copy(o.v.begin(), o.v.end(), X.row(static_cast<int>(i)));
    }
    return X;
}

void SacAgent::branch_softmax(const Mat& logits, Mat& p, Mat& logp) const {
    const int B = logits.rows;
    p.resize(B, kActDim);
    logp.resize(B, kActDim);
    for (int i = 0; i < B; ++i) {
        const double* z = logits.row(i);
        double* pr = p.row(i);
        double* lr = logp.row(i);
        for (int b = 0; b < kNumBranches; ++b) {
            const double* zb = z + 3 * b;
            const double m = std::max(zb[0], std::max(zb[1], zb[2]));
            double e[3], s = 0;
            for (int a = 0; a < 3; ++a) {
                e[a] = std::exp(zb[a] - m);
                s += e[a];
            }
            const double ls = std::log(s);
            for (int a = 0; a < 3; ++a) {
                pr[3 * b + a] = e[a] / s;
                lr[3 * b + a] = zb[a] - m - ls;
            }
        }
    }
}

BranchDist SacAgent::policy_distribution(const Observation& obs) const {
    Mat X(1, kObsDim);
    std::copy(obs.v.begin(), obs.v.end(), X.row(0));
    DenseNet::Workspace ws;
    const Mat& logits = policy_.forward(X, ws);
    for (const double z : logits.d)
        if (!std::isfinite(z)) throw std::runtime_error("policy produced non-finite logits");
    Mat p, lp;
    branch_softmax(logits, p, lp);
    BranchDist d;
    for (int b = 0; b < kNumBranches; ++b)
        for (int a = 0; a < 3; ++a) {
            d.p[b][a] = p.at(0, 3 * b + a);
            d.logp[b][a] = lp.at(0, 3 * b + a);
        }
    return d;
}

BranchedAction SacAgent::sample_action(const Observation& obs, Rng& rng) const {
    const BranchDist d = policy_distribution(obs);
    BranchedAction a;
    for (int b = 0; b < kNumBranches; ++b)
        a.branches[b] = static_cast<uint8_t>(rng.categorical(d.p[b].data(), 3));
    return a;
}

BranchedAction SacAgent::greedy_action(const Observation& obs) const {
    const BranchDist d = policy_distribution(obs);
    BranchedAction a;
    for (int b = 0; b < kNumBranches; ++b) {
        int best = 0;
        for (int x = 1; x < 3; ++x)
            if (d.p[b][x] > d.p[b][best]) best = x;
        a.branches[b] = static_cast<uint8_t>(best);
    }
    return a;
}

std::vector<double> SacAgent::soft_values(const DenseNet& c1, const DenseNet& c2, const Mat& p,
                                          const Mat& logp, const Mat& obs) const {
    DenseNet::Workspace w1, w2;
    const Mat& q1 = c1.forward(obs, w1);
    const Mat& q2 = c2.forward(obs, w2);
    const double alpha = std::exp(log_alpha_);
    std::vector<double> v(obs.rows, 0.0);
    for (int i = 0; i < obs.rows; ++i) {
        const double *pi = p.row(i), *li = logp.row(i), *a1 = q1.row(i), *a2 = q2.row(i);
        double s = 0;
        for (int j = 0; j < kActDim; ++j) s += pi[j] * (std::min(a1[j], a2[j]) - alpha * li[j]);
        v[i] = s;
    }
    return v;
}

double SacAgent::soft_state_value(const Observation& obs) const {
    Mat X(1, kObsDim);
    std::copy(obs.v.begin(), obs.v.end(), X.row(0));
    DenseNet::Workspace ws;
    Mat p, lp;
    branch_softmax(policy_.forward(X, ws), p, lp);
    return soft_values(q1_, q2_, p, lp, X)[0];
}

double SacAgent::soft_state_value_target(const Observation& obs) const {
    Mat X(1, kObsDim);
    std::copy(obs.v.begin(), obs.v.end(), X.row(0));
    DenseNet::Workspace ws;
    Mat p, lp;
    branch_softmax(policy_.forward(X, ws), p, lp);
    return soft_values(t1_, t2_, p, lp, X)[0];
}

std::vector<double> SacAgent::critic_targets(const std::vector<Transition>& batch) const {
    const Mat next = gather_obs(batch, true);
    DenseNet::Workspace ws;
    Mat p, lp;
    branch_softmax(policy_.forward(next, ws), p, lp);
    std::vector<double> v = soft_values(t1_, t2_, p, lp, next);
    std::vector<double> y(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const double cont = batch[i].done ? 0.0 : cfg_.gamma * v[i];
        y[i] = batch[i].reward + cont;
    }
    return y;
}

std::pair<ParamSet, double> SacAgent::critic_grads(const DenseNet& net, const Mat& obs,
                                                   const std::vector<Transition>& batch,
                                                   const std::vector<double>& y) const {
    const int B = obs.rows;
    DenseNet::Workspace ws;
    const Mat& q = net.forward(obs, ws);
    Mat dq(B, kActDim);
    double loss = 0;
    for (int i = 0; i < B; ++i) {
        const double* qi = q.row(i);
        double qsel = 0;
        for (int b = 0; b < kNumBranches; ++b) qsel += qi[3 * b + batch[i].action.branches[b]];
        const double diff = qsel - y[i];
        loss += diff * diff;
        double* di = dq.row(i);
        for (int b = 0; b < kNumBranches; ++b)
            di[3 * b + batch[i].action.branches[b]] = 2.0 * diff / B;
    }
    loss /= B;
    ParamSet g = net.make_grads();
    net.backward(ws, dq, g);
    return {std::move(g), loss};
}

SacAgent::PolicyGrads SacAgent::policy_alpha_grads(const Mat& obs) const {
    const int B = obs.rows;
    DenseNet::Workspace ws;
    const Mat& logits = policy_.forward(obs, ws);
    Mat p, lp;
    branch_softmax(logits, p, lp);

    DenseNet::Workspace w1, w2;
    const Mat& q1 = q1_.forward(obs, w1);
    const Mat& q2 = q2_.forward(obs, w2);

    const double alpha = std::exp(log_alpha_);
    Mat dlogits(B, kActDim);
    double loss = 0, entropy = 0;
    for (int i = 0; i < B; ++i) {
        const double *pi = p.row(i), *li = lp.row(i), *a1 = q1.row(i), *a2 = q2.row(i);
        double* dz = dlogits.row(i);
        for (int b = 0; b < kNumBranches; ++b) {
            double g[3], mean_g = 0, lb = 0, hb = 0;
            for (int a = 0; a < 3; ++a) {
                const int j = 3 * b + a;
                g[a] = alpha * li[j] - std::min(a1[j], a2[j]);
                mean_g += pi[j] * g[a];
                lb += pi[j] * g[a];
                hb -= pi[j] * li[j];
            }
            for (int a = 0; a < 3; ++a) {
                const int j = 3 * b + a;
                dz[j] = pi[j] * (g[a] - mean_g) / B;
            }
            loss += lb;
            entropy += hb;
        }
    }
    loss /= B;
    entropy /= B;

    PolicyGrads out;
    out.g = policy_.make_grads();
    policy_.backward(ws, dlogits, out.g);
    out.policy_loss = loss;
    out.entropy = entropy;
    const double gap = entropy - cfg_.target_entropy_total();
    out.alpha_loss = alpha * gap;
    out.alpha_grad = alpha * gap;  // d(alpha * gap)/d(log_alpha), gap treated constant
    return out;
}

LossRecord SacAgent::compute_losses(const std::vector<Transition>& batch) const {
    const std::vector<double> y = critic_targets(batch);
    const Mat obs = gather_obs(batch, false);
    const auto [g1, l1] = critic_grads(q1_, obs, batch, y);
    const auto [g2, l2] = critic_grads(q2_, obs, batch, y);
    const PolicyGrads pg = policy_alpha_grads(obs);
    return {0.5 * (l1 + l2), pg.policy_loss, pg.alpha_loss, pg.entropy};
}

SacAgent::Gradients SacAgent::compute_gradients(const std::vector<Transition>& batch) const {
    const std::vector<double> y = critic_targets(batch);
    const Mat obs = gather_obs(batch, false);
    Gradients out;
    auto [g1, l1] = critic_grads(q1_, obs, batch, y);
    auto [g2, l2] = critic_grads(q2_, obs, batch, y);
    out.q1 = std::move(g1);
    out.q2 = std::move(g2);
    PolicyGrads pg = policy_alpha_grads(obs);
    out.policy = std::move(pg.g);
    out.log_alpha = pg.alpha_grad;
    out.losses = {0.5 * (l1 + l2), pg.policy_loss, pg.alpha_loss, pg.entropy};
    return out;
}

LossRecord SacAgent::update(const std::vector<Transition>& batch) {
    if (batch.empty()) throw UsageError("update() needs a non-empty batch");
    const std::vector<double> y = critic_targets(batch);
    const Mat obs = gather_obs(batch, false);

    auto [g1, l1] = critic_grads(q1_, obs, batch, y);
    opt_q1_.step(q1_.params(), g1);
    auto [g2, l2] = critic_grads(q2_, obs, batch, y);
    opt_q2_.step(q2_.params(), g2);

    // Policy step against the freshly updated critics.
    PolicyGrads pg = policy_alpha_grads(obs);
    opt_policy_.step(policy_.params(), pg.g);
    opt_alpha_.step_scalar(log_alpha_, pg.alpha_grad);

    polyak_update(t1_.params(), q1_.params(), cfg_.tau);
    polyak_update(t2_.params(), q2_.params(), cfg_.tau);

    const LossRecord rec{0.5 * (l1 + l2), pg.policy_loss, pg.alpha_loss, pg.entropy};
    if (!std::isfinite(rec.value_loss) || !std::isfinite(rec.policy_loss) ||
        !std::isfinite(rec.alpha_loss) || !std::isfinite(rec.entropy))
        throw std::runtime_error(
            "non-finite loss in SAC update (value=" + std::to_string(rec.value_loss) +
            " policy=" + std::to_string(rec.policy_loss) + " alpha=" +
            std::to_string(rec.alpha_loss) + " entropy=" + std::to_string(rec.entropy) + ")");
    return rec;
}

}  // namespace twinarm
