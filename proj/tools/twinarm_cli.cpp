#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "twinarm/checkpoint.hpp"
#include "twinarm/config.hpp"
#include "twinarm/errors.hpp"
#include "twinarm/trainer.hpp"
#include "twinarm/twinlink.hpp"

namespace {

using namespace twinarm;

Config load_cfg(const std::string& path) {
    return path.empty() ? Config{} : load_config_file(path);
}

int run_train(const std::string& config_path, int case_n, std::optional<uint64_t> seed,
              const std::string& out_dir, const std::string& init, long steps) {
    const Config cfg = load_cfg(config_path);
    TrainOptions opt;
    opt.case_id = case_from_int(case_n);
    opt.seed = seed.value_or(cfg.seed);
    opt.out_dir = out_dir;
    opt.init_checkpoint = init;
    opt.steps_override = steps;
    const TrainSummary s = train(cfg, opt);
    std::cout << "trained case " << case_n << " for " << s.steps << " steps ("
              << s.episodes << " episodes); checkpoint: " << s.checkpoint_path
              << "; metrics: " << s.metrics_path << "\n";
    return 0;
}

int run_eval(const std::string& config_path, const std::string& ckpt, int episodes,
             std::optional<uint64_t> seed) {
    const Config cfg = load_cfg(config_path);
    const EvalReport rep =
        evaluate_checkpoint(cfg, ckpt, episodes, seed.value_or(cfg.seed));
    nlohmann::json j{{"success_rate", rep.success_rate},
                     {"mean_reward", rep.mean_reward},
                     {"mean_episode_length", rep.mean_episode_length},
                     {"episodes", rep.episodes}};
    std::cout << j.dump() << "\n";
    return 0;
}

int run_twin_serve(const std::string& config_path, const std::string& trace_path,
                   const std::string& ckpt, const std::string& bind_override,
                   std::optional<double> rate, std::optional<uint64_t> seed, long max_frames,
                   double accept_timeout_s) {
    const Config cfg = load_cfg(config_path);
    if (trace_path.empty() == ckpt.empty())
        throw ConfigError("twin-serve needs exactly one of --trace or --ckpt");

    std::vector<std::array<double, 7>> frames;
    if (!trace_path.empty()) {
        std::ifstream is(trace_path);
        if (!is) throw ConfigError("cannot open trace: " + trace_path);
        for (const TraceRecord& rec : read_trace(is)) {
            std::array<double, 7> f;
            for (int i = 0; i < 6; ++i) f[i] = rec.q_after.angles[i];
            f[6] = rec.q_after.gripper_aperture;
            frames.push_back(f);
        }
    } else {
        for (const TraceRecord& rec : greedy_rollout(cfg, ckpt, seed.value_or(cfg.seed))) {
            std::array<double, 7> f;
            for (int i = 0; i < 6; ++i) f[i] = rec.q_after.angles[i];
            f[6] = rec.q_after.gripper_aperture;
            frames.push_back(f);
        }
    }
    if (max_frames > 0 && frames.size() > static_cast<size_t>(max_frames))
        frames.resize(max_frames);
    if (frames.empty()) throw ConfigError("no frames to publish");

    const std::string bind = bind_override.empty() ? cfg.twin.bind : bind_override;
    TcpListener listener(bind);
    auto stream = listener.accept(accept_timeout_s);
    PublishOptions popt;
    popt.rate_hz = rate.value_or(cfg.twin.rate_hz);
    popt.budget_ms = cfg.twin.budget_ms;
    const SessionSummary sum = publish(*stream, frames, popt);
    std::cout << sum.to_json().dump() << "\n";
    return sum.error.empty() ? 0 : 1;
}

int run_twin_follow(const std::string& config_path, const std::string& connect_override) {
    const Config cfg = load_cfg(config_path);
    const std::string addr = connect_override.empty() ? cfg.twin.connect : connect_override;
    auto stream = TcpStream::connect(addr);
    const DivergenceReport rep = follow(*stream, cfg.arm);
    std::cout << rep.to_json().dump() << "\n";
    return rep.error.empty() ? 0 : 1;
}

int run_metrics(const std::string& csv_path, bool normalize_peak) {
    std::ifstream is(csv_path, std::ios::binary);
    if (!is) throw ConfigError("cannot open csv: " + csv_path);
    std::stringstream raw;
    raw << is.rdbuf();
    std::string text = raw.str();
    {
        std::istringstream check(text);
        parse_metrics_csv(check);  // validates even in passthrough mode
    }
    if (!normalize_peak) {
        std::cout << text;  // byte-identical passthrough
        return 0;
    }
    std::istringstream in(text);
    std::vector<MetricsRecord> rows = parse_metrics_csv(in);
    auto scale = [&rows](double MetricsRecord::*field) {
        double peak = 0;
        for (const auto& r : rows) peak = std::max(peak, std::abs(r.*field));
        if (peak == 0) return;  // all-zero series stays all-zero
        for (auto& r : rows) r.*field = 100.0 * (r.*field) / peak;
    };
    scale(&MetricsRecord::cum_reward);
    scale(&MetricsRecord::episode_length);
    scale(&MetricsRecord::value_loss);
    scale(&MetricsRecord::policy_loss);
    scale(&MetricsRecord::alpha);
    scale(&MetricsRecord::entropy);
    std::cout << kMetricsHeader << "\n";
    for (const auto& r : rows) std::cout << format_metrics_row(r) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branched-action SAC training for a simulated 6-DOF arm with "
                 "TCP digital-twin streaming"};
    app.require_subcommand(1);
    std::function<int()> runner;

    std::string config_path, out_dir, init_ckpt, ckpt, trace_path, bind, connect, csv_path;
    int case_n = 1, episodes = 50;
    long steps = -1, max_frames = 0;
    std::optional<uint64_t> seed;
    std::optional<double> rate;
    double accept_timeout = 10.0;
    bool normalize_peak = false;

    auto* t = app.add_subcommand("train", "Train a case and write checkpoint + metrics");
    t->add_option("--case", case_n, "Training case (1, 2, or 3)")->required();
    t->add_option("--config", config_path, "Config JSON path (defaults built in)");
    t->add_option("--seed", seed, "Seed override");
    t->add_option("--out", out_dir, "Output directory")->required();
    t->add_option("--init", init_ckpt, "Warm-start checkpoint (case 2 only)");
    t->add_option("--steps", steps, "Step count override");
    t->callback([&] {
        runner = [&] { return run_train(config_path, case_n, seed, out_dir, init_ckpt, steps); };
    });

    auto* e = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
    e->add_option("--ckpt", ckpt, "Checkpoint path")->required();
    e->add_option("--episodes", episodes, "Number of evaluation episodes");
    e->add_option("--config", config_path, "Config JSON path");
    e->add_option("--seed", seed, "Seed override");
    e->callback([&] {
        runner = [&] { return run_eval(config_path, ckpt, episodes, seed); };
    });

    auto* s = app.add_subcommand("twin-serve", "Publish joint states to a follower");
    s->add_option("--trace", trace_path, "Trace JSONL to replay");
    s->add_option("--ckpt", ckpt, "Checkpoint for a live greedy rollout");
    s->add_option("--bind", bind, "host:port to listen on");
    s->add_option("--rate", rate, "Frame rate in Hz");
    s->add_option("--frames", max_frames, "Cap on frames to send");
    s->add_option("--seed", seed, "Rollout seed");
    s->add_option("--config", config_path, "Config JSON path");
    s->add_option("--accept-timeout", accept_timeout, "Seconds to wait for the follower");
    s->callback([&] {
        runner = [&] {
            return run_twin_serve(config_path, trace_path, ckpt, bind, rate, seed, max_frames,
                                  accept_timeout);
        };
    });

    auto* f = app.add_subcommand("twin-follow", "Follow a publisher and report divergence");
    f->add_option("--connect", connect, "host:port of the publisher");
    f->add_option("--config", config_path, "Config JSON path");
    f->callback([&] {
        runner = [&] { return run_twin_follow(config_path, connect); };
    });

    auto* m = app.add_subcommand("metrics", "Validate, passthrough, or peak-normalize a CSV");
    m->add_option("csv", csv_path, "Metrics CSV path")->required();
    m->add_flag("--normalize-peak", normalize_peak,
                "Rescale each value series to percent of its absolute peak");
    m->callback([&] {
        runner = [&] { return run_metrics(csv_path, normalize_peak); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : 2;  // help exits clean; usage errors are config errors
    }

    try {
        return runner();
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const CheckpointError& err) {
        std::cerr << "checkpoint error: " << err.what() << "\n";
        return 3;
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
