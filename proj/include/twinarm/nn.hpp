#pragma once

#include <cstddef>
#include <vector>

#include "twinarm/rng.hpp"

namespace twinarm {

// Dense row-major matrix of doubles.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int i) { return d.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return d.data() + static_cast<size_t>(i) * cols; }
    double& at(int i, int j) { return d[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return d[static_cast<size_t>(i) * cols + j]; }
    void zero() { std::fill(d.begin(), d.end(), 0.0); }
    void resize(int r, int c) {
        rows = r;
        cols = c;
        d.assign(static_cast<size_t>(r) * c, 0.0);
    }
};

namespace kernels {

// Global switch between the threaded fast path and its single-thread run.
// Results are bit-identical either way: work is partitioned by output row
// and each element is accumulated in a fixed order.
void set_parallel(bool on);
bool parallel_enabled();

// Deterministic tanh built on a bit-twiddled exp2; matches std::tanh to
// ~4 ulp and vectorizes, unlike the libm call.
double fast_tanh(double x);

// Y = X * W^T + b with W stored [out][in]. X: B x in, Y: B x out.
// Reference implementations: textbook loops, serial, used as the oracle for
// the tiled kernels and by the benchmark.
namespace naive {
void linear_forward(const Mat& X, const Mat& W, const std::vector<double>& b, Mat& Y);
void linear_backward_data(const Mat& dY, const Mat& W, Mat& dX);
void linear_backward_params(const Mat& A, const Mat& dY, Mat& dW, std::vector<double>& db);
void tanh_forward(Mat& Y);
void tanh_backward(const Mat& A, Mat& dA);  // dA *= 1 - A^2
}  // namespace naive

// Tiled kernels, OpenMP-parallel over rows when enabled.
namespace fast {
void linear_forward(const Mat& X, const Mat& W, const std::vector<double>& b, Mat& Y);
void linear_backward_data(const Mat& dY, const Mat& W, Mat& dX);
void linear_backward_params(const Mat& A, const Mat& dY, Mat& dW, std::vector<double>& db);
void tanh_forward(Mat& Y);
void tanh_backward(const Mat& A, Mat& dA);
}  // namespace fast

}  // namespace kernels

// Weights and biases of a dense stack, in declaration order: per layer, the
// [out][in] weight matrix then the bias. This order is also the checkpoint
// serialization order and the Adam moment order.
struct ParamSet {
    std::vector<Mat> W;
    std::vector<std::vector<double>> b;

    void zero();
    size_t count() const;

    // Visits every parameter as (value reference). Fixed order.
    template <typename F>
    void for_each(F&& f) {
        for (size_t l = 0; l < W.size(); ++l) {
            for (double& x : W[l].d) f(x);
            for (double& x : b[l]) f(x);
        }
    }
    template <typename F>
    void for_each(F&& f) const {
        for (size_t l = 0; l < W.size(); ++l) {
            for (const double& x : W[l].d) f(x);
            for (const double& x : b[l]) f(x);
        }
    }
};

// Visits matching parameters of two equally-shaped sets.
template <typename F>
void for_each_pair(ParamSet& a, const ParamSet& b, F&& f) {
    for (size_t l = 0; l < a.W.size(); ++l) {
        for (size_t i = 0; i < a.W[l].d.size(); ++i) f(a.W[l].d[i], b.W[l].d[i]);
        for (size_t i = 0; i < a.b[l].size(); ++i) f(a.b[l][i], b.b[l][i]);
    }
}

// MLP with tanh hidden layers and a linear output layer. Forward/backward
// are batched; gradients are hand-derived and accumulate into a ParamSet.
class DenseNet {
  public:
    DenseNet() = default;

    // sizes = {in, hidden..., out}. Xavier-uniform init; the output layer is
    // scaled by last_layer_scale to start near zero.
    DenseNet(std::vector<int> sizes, Rng& rng, double last_layer_scale = 1.0);

    struct Workspace {
        std::vector<Mat> a;      // a[0] = input, a[l+1] = layer l output
        std::vector<Mat> delta;  // backward scratch
    };

    // Returns ws.a.back(), a B x out matrix.
    const Mat& forward(const Mat& X, Workspace& ws) const;

    // dOut: gradient at the linear output (B x out). Accumulates parameter
    // gradients into g; optionally produces the input gradient.
    void backward(Workspace& ws, const Mat& dOut, ParamSet& g, Mat* dX = nullptr) const;

    ParamSet& params() { return p_; }
    const ParamSet& params() const { return p_; }
    const std::vector<int>& sizes() const { return sizes_; }
    ParamSet make_grads() const;  // zeroed, same shape

  private:
    std::vector<int> sizes_;
    ParamSet p_;
};

// Adam over a ParamSet, moments kept flat in declaration order.
class Adam {
  public:
    Adam() = default;
    Adam(size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(ParamSet& p, const ParamSet& g);
    void step_scalar(double& p, double g);  // 1-parameter variant

    long t() const { return t_; }
    void set_t(long t) { t_ = t; }
    std::vector<double>& m() { return m_; }
    std::vector<double>& v() { return v_; }
    const std::vector<double>& m() const { return m_; }
    const std::vector<double>& v() const { return v_; }
    double lr() const { return lr_; }

  private:
    double lr_ = 3e-4, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    std::vector<double> m_, v_;
    long t_ = 0;
};

// target = (1 - tau) * target + tau * src, elementwise.
void polyak_update(ParamSet& target, const ParamSet& src, double tau);

}  // namespace twinarm
