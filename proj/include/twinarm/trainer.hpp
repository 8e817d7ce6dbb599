#pragma once

#include <string>
#include <vector>

#include "twinarm/config.hpp"
#include "twinarm/env.hpp"
#include "twinarm/sac.hpp"

namespace twinarm {

struct MetricsRecord {
    long step = 0;
    long episode = 0;
    double cum_reward = 0;      // running mean over the last 20 episodes
    double episode_length = 0;  // same window
    double value_loss = 0;      // means over the metrics interval
    double policy_loss = 0;
    double alpha = 0;           // current temperature
    double entropy = 0;
};

inline constexpr const char* kMetricsHeader =
    "step,episode,cum_reward,episode_length,value_loss,policy_loss,alpha,entropy";

std::string format_metrics_row(const MetricsRecord& r);
std::vector<MetricsRecord> parse_metrics_csv(std::istream& is);  // strict; ConfigError

struct TrainOptions {
    CaseId case_id = CaseId::Case1;
    uint64_t seed = 1;
    std::string out_dir;
    std::string init_checkpoint;  // empty = from scratch
    long steps_override = -1;     // <0 = config total_steps
};

struct TrainSummary {
    long steps = 0;
    long episodes = 0;
    std::string checkpoint_path;
    std::string metrics_path;
    double last_window_reward = 0;
};

// Runs environment interaction plus SAC updates, writes metrics.csv and
// checkpoint.bin (plus periodic checkpoints when configured) under out_dir.
// Deterministic for a fixed config and seed. Only Case 2 accepts a transfer
// checkpoint; the Case 1 -> Case 2 warm start copies network weights only.
TrainSummary train(const Config& cfg, const TrainOptions& opt);

struct EvalReport {
    double success_rate = 0;
    double mean_reward = 0;
    double mean_episode_length = 0;
    int episodes = 0;
};

// Greedy rollouts of a saved policy; success = goal contact fired at least
// once in the episode.
EvalReport evaluate_checkpoint(const Config& cfg, const std::string& checkpoint_path,
                               int episodes, uint64_t seed);

// One greedy episode for the twin-link publisher.
std::vector<TraceRecord> greedy_rollout(const Config& cfg, const std::string& checkpoint_path,
                                        uint64_t seed, int max_steps = 0);

}  // namespace twinarm
