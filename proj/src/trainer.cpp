#include "twinarm/trainer.hpp"

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "twinarm/checkpoint.hpp"
#include "twinarm/errors.hpp"

namespace twinarm {

namespace {

// Sub-stream salts so the trainer's draws, the environment's goal sampling,
// and evaluation rollouts are independent but all derived from one seed.
constexpr uint64_t kEnvSalt = 0x9E3779B97F4A7C15ull;
constexpr uint64_t kActSalt = 0xD1B54A32D192ED03ull;
constexpr uint64_t kEvalSalt = 0x2545F4914F6CDD1Dull;

double mean(const std::deque<double>& d) {
    if (d.empty()) return 0.0;
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

void push_window(std::deque<double>& d, double v) {
    d.push_back(v);
    if (d.size() > 20) d.pop_front();
}

BranchedAction random_action(Rng& rng) {
    BranchedAction a;
    for (int b = 0; b < kNumBranches; ++b)
        a.branches[b] = static_cast<uint8_t>(rng.uniform_int(kBranchOptions));
    return a;
}

}  // namespace

std::string format_metrics_row(const MetricsRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%ld,%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", r.step,
                  r.episode, r.cum_reward, r.episode_length, r.value_loss, r.policy_loss,
                  r.alpha, r.entropy);
    return buf;
}

std::vector<MetricsRecord> parse_metrics_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("metrics csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsHeader)
        throw ConfigError("metrics csv: bad header '" + line + "'");
    std::vector<MetricsRecord> rows;
    size_t lineno = 1;
    long prev_step = -1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        MetricsRecord r;
        double step = 0, episode = 0;
        double* cols[8] = {&step,         &episode,       &r.cum_reward, &r.episode_length,
                           &r.value_loss, &r.policy_loss, &r.alpha,      &r.entropy};
        std::stringstream ss(line);
        std::string field;
        int n = 0;
        while (std::getline(ss, field, ',')) {
            if (n >= 8) break;
            size_t used = 0;
            try {
                *cols[n] = std::stod(field, &used);
            } catch (const std::exception&) {
                throw ConfigError("metrics csv: non-numeric field at line " +
                                  std::to_string(lineno));
            }
            if (used != field.size())
                throw ConfigError("metrics csv: non-numeric field at line " +
                                  std::to_string(lineno));
            ++n;
        }
        if (n != 8 || std::getline(ss, field, ','))
            throw ConfigError("metrics csv: expected 8 fields at line " + std::to_string(lineno));
        r.step = static_cast<long>(step);
        r.episode = static_cast<long>(episode);
        if (r.step <= prev_step)
            throw ConfigError("metrics csv: step not strictly increasing at line " +
                              std::to_string(lineno));
        prev_step = r.step;
        rows.push_back(r);
    }
    return rows;
}

TrainSummary train(const Config& cfg, const TrainOptions& opt) {
    cfg.validate();
    if (!opt.init_checkpoint.empty() && opt.case_id != CaseId::Case2)
        throw ConfigError(opt.case_id == CaseId::Case3
                              ? "case 3 is the no-transfer baseline of case 2; --init is not "
                                "permitted"
                              : "case 1 has no transfer source; --init is only valid for case 2");

    std::filesystem::create_directories(opt.out_dir);
    const SacConfig& sc = cfg.sac;
    const long total = opt.steps_override >= 0 ? opt.steps_override : sc.total_steps;

    Rng init_rng(opt.seed);
    SacAgent agent(sc, init_rng);
    if (!opt.init_checkpoint.empty()) warm_start_checkpoint(opt.init_checkpoint, agent);

    Environment env(opt.case_id, cfg.arm, cfg.env, reward_spec_for(cfg, opt.case_id),
                    opt.seed ^ kEnvSalt);
    ReplayBuffer buffer(sc.buffer_capacity);
    Rng act_rng(opt.seed ^ kActSalt);

    const std::string metrics_path = opt.out_dir + "/metrics.csv";
    std::ofstream mcsv(metrics_path, std::ios::trunc);
    if (!mcsv) throw ConfigError("cannot open metrics file for writing: " + metrics_path);
    mcsv << kMetricsHeader << '\n';

    const CheckpointMeta meta{opt.case_id, config_digest(cfg), ""};

    std::deque<double> win_reward, win_length;
    double ep_reward = 0;
    long ep_len = 0, episodes = 0;
    double sum_vl = 0, sum_pl = 0, sum_ent = 0;
    long n_upd = 0;

    Observation obs = env.observe();
    for (long step = 1; step <= total; ++step) {
        const BranchedAction a = step <= sc.warmup_steps ? random_action(act_rng)
                                                         : agent.sample_action(obs, act_rng);
        const Transition tr = env.step(a);
        buffer.push(tr);
        ep_reward += tr.reward;
        ep_len += 1;
        if (tr.done) {
            episodes += 1;
            push_window(win_reward, ep_reward);
            push_window(win_length, static_cast<double>(ep_len));
            ep_reward = 0;
            ep_len = 0;
            env.reset();
            obs = env.observe();
        } else {
            obs = tr.next_obs;
        }

        if (step > sc.warmup_steps && buffer.size() >= sc.batch_size &&
            step % sc.update_every == 0) {
            const LossRecord rec = agent.update(buffer.sample(act_rng, sc.batch_size));
            sum_vl += rec.value_loss;
            sum_pl += rec.policy_loss;
            sum_ent += rec.entropy;
            n_upd += 1;
        }
        agent.global_step = step;

        if (step % cfg.metrics_interval == 0) {
            MetricsRecord r;
            r.step = step;
            r.episode = episodes;
            r.cum_reward = mean(win_reward);
            r.episode_length = mean(win_length);
            r.value_loss = n_upd ? sum_vl / n_upd : 0.0;
            r.policy_loss = n_upd ? sum_pl / n_upd : 0.0;
            r.alpha = agent.alpha();
            r.entropy = n_upd ? sum_ent / n_upd : 0.0;
            mcsv << format_metrics_row(r) << '\n';
            sum_vl = sum_pl = sum_ent = 0;
            n_upd = 0;
        }
        if (sc.checkpoint_every > 0 && step % sc.checkpoint_every == 0) {
            CheckpointMeta m = meta;
            m.rng_state = act_rng.serialize();
            save_checkpoint(opt.out_dir + "/checkpoint_step" + std::to_string(step) + ".bin",
                            agent, m);
        }
    }

    TrainSummary s;
    s.steps = total;
    s.episodes = episodes;
    s.metrics_path = metrics_path;
    s.checkpoint_path = opt.out_dir + "/checkpoint.bin";
    s.last_window_reward = mean(win_reward);
    CheckpointMeta m = meta;
    m.rng_state = act_rng.serialize();
    save_checkpoint(s.checkpoint_path, agent, m);
    mcsv.flush();
    if (!mcsv) throw ConfigError("write failure on metrics file: " + metrics_path);
    return s;
}

EvalReport evaluate_checkpoint(const Config& cfg, const std::string& checkpoint_path,
                               int episodes, uint64_t seed) {
    cfg.validate();
    if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
    Rng init_rng(seed);
    SacAgent agent(cfg.sac, init_rng);
    const CheckpointMeta meta = load_checkpoint(checkpoint_path, agent);

    Environment env(meta.case_id, cfg.arm, cfg.env, reward_spec_for(cfg, meta.case_id),
                    seed ^ kEvalSalt);
    EvalReport rep;
    rep.episodes = episodes;
    double total_reward = 0, total_len = 0;
    int successes = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        if (ep > 0) env.reset();
        bool touched = false;
        double ep_reward = 0;
        long ep_len = 0;
        while (true) {
            const Transition tr = env.step(agent.greedy_action(env.observe()));
            ep_reward += tr.reward;
            ep_len += 1;
            touched = touched || env.last_events().predicates.touched_goal;
            if (tr.done) break;
        }
        successes += touched ? 1 : 0;
        total_reward += ep_reward;
        total_len += static_cast<double>(ep_len);
    }
    rep.success_rate = static_cast<double>(successes) / episodes;
    rep.mean_reward = total_reward / episodes;
    rep.mean_episode_length = total_len / episodes;
    return rep;
}

std::vector<TraceRecord> greedy_rollout(const Config& cfg, const std::string& checkpoint_path,
                                        uint64_t seed, int max_steps) {
    cfg.validate();
    Rng init_rng(seed);
    SacAgent agent(cfg.sac, init_rng);
    const CheckpointMeta meta = load_checkpoint(checkpoint_path, agent);
    Environment env(meta.case_id, cfg.arm, cfg.env, reward_spec_for(cfg, meta.case_id),
                    seed ^ kEvalSalt);
    std::vector<TraceRecord> out;
    int cap = max_steps > 0 ? max_steps : env.spec().max_episode_steps;
    for (int i = 0; i < cap; ++i) {
        TraceRecord rec;
        rec.t = env.step(agent.greedy_action(env.observe()));
        rec.q_after = env.state().q;
        out.push_back(rec);
        if (rec.t.done) break;
    }
    return out;
}

}  // namespace twinarm
