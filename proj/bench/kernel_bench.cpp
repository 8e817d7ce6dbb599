// Timing of the naive reference kernels against the tiled OpenMP kernels,
// plus one full SAC update at the default sizes.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "twinarm/nn.hpp"
#include "twinarm/sac.hpp"

using namespace twinarm;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Mat random_mat(int r, int c, Rng& rng) {
    Mat m(r, c);
    for (double& x : m.d) x = rng.uniform(-1.0, 1.0);
    return m;
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const double t0 = now_s();
        f();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void bench_linear(int B, int in, int out) {
    Rng rng(42);
    const Mat X = random_mat(B, in, rng);
    const Mat W = random_mat(out, in, rng);
    std::vector<double> b(out, 0.1);
    Mat Y;
    const double flops = 2.0 * B * in * out;
    const int inner = std::max(1, static_cast<int>(2e8 / flops));

    const double tn = time_best_of(5, [&] {
        for (int i = 0; i < inner; ++i) kernels::naive::linear_forward(X, W, b, Y);
    }) / inner;
    kernels::set_parallel(false);
    const double ts = time_best_of(5, [&] {
        for (int i = 0; i < inner; ++i) kernels::fast::linear_forward(X, W, b, Y);
    }) / inner;
    kernels::set_parallel(true);
    const double tp = time_best_of(5, [&] {
        for (int i = 0; i < inner; ++i) kernels::fast::linear_forward(X, W, b, Y);
    }) / inner;

    std::printf("forward %4dx%3dx%3d | naive %8.1f us (%5.2f GF/s) | tiled %8.1f us (%5.2f "
                "GF/s) | tiled+omp %8.1f us (%5.2f GF/s)\n",
                B, in, out, tn * 1e6, flops / tn / 1e9, ts * 1e6, flops / ts / 1e9, tp * 1e6,
                flops / tp / 1e9);
}

void bench_update(int batch) {
    SacConfig cfg;
    cfg.batch_size = batch;
    Rng rng(7);
    SacAgent agent(cfg, rng);
    std::vector<Transition> batch_data(batch);
    for (auto& t : batch_data) {
        for (auto& x : t.obs.v) x = rng.uniform(-1, 1);
        for (auto& x : t.next_obs.v) x = rng.uniform(-1, 1);
        for (auto& a : t.action.branches) a = static_cast<uint8_t>(rng.uniform_int(3));
        t.reward = rng.uniform(-1, 1);
        t.done = rng.uniform01() < 0.01;
    }
    const double t = time_best_of(3, [&] {
        for (int i = 0; i < 20; ++i) agent.update(batch_data);
    }) / 20;
    std::printf("sac update (batch %3d): %8.2f ms  -> %7.0f updates/min\n", batch, t * 1e3,
                60.0 / t);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP: %d thread(s)\n", omp_get_max_threads());
#else
    std::printf("OpenMP: disabled at build time\n");
#endif
    bench_linear(256, 16, 128);
    bench_linear(256, 128, 128);
    bench_linear(256, 128, 21);
    bench_linear(1024, 128, 128);
    bench_update(128);
    bench_update(256);
    return 0;
}
