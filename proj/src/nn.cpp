#include "twinarm/nn.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace twinarm {
namespace kernels {

namespace {
bool g_parallel = true;
}

void set_parallel(bool on) { g_parallel = on; }
bool parallel_enabled() { return g_parallel; }

// exp(u) for |u| <= 0.3466, Taylor to u^13 (max error ~1e-17).
static inline double exp_small(double u) {
    constexpr double c13 = 1.0 / 6227020800.0, c12 = 1.0 / 479001600.0,
                     c11 = 1.0 / 39916800.0, c10 = 1.0 / 3628800.0, c9 = 1.0 / 362880.0,
                     c8 = 1.0 / 40320.0, c7 = 1.0 / 5040.0, c6 = 1.0 / 720.0,
                     c5 = 1.0 / 120.0, c4 = 1.0 / 24.0, c3 = 1.0 / 6.0, c2 = 0.5;
    double p = c13;
    p = p * u + c12;
    p = p * u + c11;
    p = p * u + c10;
    p = p * u + c9;
    p = p * u + c8;
    p = p * u + c7;
    p = p * u + c6;
    p = p * u + c5;
    p = p * u + c4;
    p = p * u + c3;
    p = p * u + c2;
    p = p * u + 1.0;
    return p * u + 1.0;
}

double fast_tanh(double x) {
    constexpr double kLog2e = 1.4426950408889634074;
    constexpr double kLn2 = 0.6931471805599453094;
    const double ax = std::fabs(x) < 19.0 ? std::fabs(x) : 19.0;  // tanh(19) == 1 in doubles
    const double z = 2.0 * ax * kLog2e;
    const double k = std::nearbyint(z);
    const double f = z - k;
    const double e2x = exp_small(f * kLn2) *
                       std::bit_cast<double>((static_cast<uint64_t>(k) + 1023) << 52);
    const double t = 1.0 - 2.0 / (e2x + 1.0);
    return std::copysign(t, x);
}

namespace {

template <typename F>
inline void run_rows(int n, F&& f) {
    if (g_parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) f(i);
    } else {
        for (int i = 0; i < n; ++i) f(i);
    }
}

// Fixed-order horizontal sum of 8 lanes.
inline double hsum8(const double* a) {
    return ((a[0] + a[1]) + (a[2] + a[3])) + ((a[4] + a[5]) + (a[6] + a[7]));
}

}  // namespace

namespace naive {

void linear_forward(const Mat& X, const Mat& W, const std::vector<double>& b, Mat& Y) {
    const int B = X.rows, in = X.cols, out = W.rows;
    Y.resize(B, out);
    for (int i = 0; i < B; ++i)
        for (int o = 0; o < out; ++o) {
            double s = b[o];
            for (int k = 0; k < in; ++k) s += X.at(i, k) * W.at(o, k);
            Y.at(i, o) = s;
        }
}

void linear_backward_data(const Mat& dY, const Mat& W, Mat& dX) {
    const int B = dY.rows, out = W.rows, in = W.cols;
    dX.resize(B, in);
    for (int i = 0; i < B; ++i)
        for (int k = 0; k < in; ++k) {
            double s = 0;
            for (int o = 0; o < out; ++o) s += dY.at(i, o) * W.at(o, k);
            dX.at(i, k) = s;
        }
}

void linear_backward_params(const Mat& A, const Mat& dY, Mat& dW, std::vector<double>& db) {
    const int B = A.rows, in = A.cols, out = dY.cols;
    for (int o = 0; o < out; ++o) {
        for (int k = 0; k < in; ++k) {
            double s = 0;
            for (int i = 0; i < B; ++i) s += dY.at(i, o) * A.at(i, k);
            dW.at(o, k) += s;
        }
        double s = 0;
        for (int i = 0; i < B; ++i) s += dY.at(i, o);
        db[o] += s;
    }
}

void tanh_forward(Mat& Y) {
    for (double& x : Y.d) x = std::tanh(x);
}

void tanh_backward(const Mat& A, Mat& dA) {
    for (size_t i = 0; i < A.d.size(); ++i) dA.d[i] *= 1.0 - A.d[i] * A.d[i];
}

}  // namespace naive

namespace fast {

// Four dot products against one streamed x row; lane accumulators keep the
// summation order independent of vector width and thread count.
static inline void dot4(const double* x, const double* w0, const double* w1, const double* w2,
                        const double* w3, int n, double* out4) {
    double a0[8] = {0}, a1[8] = {0}, a2[8] = {0}, a3[8] = {0};
    int k = 0;
    for (; k + 8 <= n; k += 8)
        for (int l = 0; l < 8; ++l) {
            a0[l] += x[k + l] * w0[k + l];
            a1[l] += x[k + l] * w1[k + l];
            a2[l] += x[k + l] * w2[k + l];
            a3[l] += x[k + l] * w3[k + l];
        }
    for (; k < n; ++k) {
        a0[k & 7] += x[k] * w0[k];
        a1[k & 7] += x[k] * w1[k];
        a2[k & 7] += x[k] * w2[k];
        a3[k & 7] += x[k] * w3[k];
    }
    out4[0] = hsum8(a0);
    out4[1] = hsum8(a1);
    out4[2] = hsum8(a2);
    out4[3] = hsum8(a3);
}

static inline double dot1(const double* x, const double* w, int n) {
    double a[8] = {0};
    int k = 0;
    for (; k + 8 <= n; k += 8)
        for (int l = 0; l < 8; ++l) a[l] += x[k + l] * w[k + l];
    for (; k < n; ++k) a[k & 7] += x[k] * w[k];
    return hsum8(a);
}

void linear_forward(const Mat& X, const Mat& W, const std::vector<double>& b, Mat& Y) {
    const int B = X.rows, in = X.cols, out = W.rows;
    Y.resize(B, out);
    const double* bp = b.data();
    run_rows(B, [&](int i) {
        const double* x = X.row(i);
        double* y = Y.row(i);
        int o = 0;
        for (; o + 4 <= out; o += 4) {
            double r[4];
            dot4(x, W.row(o), W.row(o + 1), W.row(o + 2), W.row(o + 3), in, r);
            y[o] = bp[o] + r[0];
            y[o + 1] = bp[o + 1] + r[1];
            y[o + 2] = bp[o + 2] + r[2];
            y[o + 3] = bp[o + 3] + r[3];
        }
        for (; o < out; ++o) y[o] = bp[o] + dot1(x, W.row(o), in);
    });
}

void linear_backward_data(const Mat& dY, const Mat& W, Mat& dX) {
    const int B = dY.rows, out = W.rows, in = W.cols;
    dX.resize(B, in);
    run_rows(B, [&](int i) {
        const double* dy = dY.row(i);
        double* dx = dX.row(i);
        for (int k = 0; k < in; ++k) dx[k] = 0;
        int o = 0;
        for (; o + 4 <= out; o += 4) {
            const double g0 = dy[o], g1 = dy[o + 1], g2 = dy[o + 2], g3 = dy[o + 3];
            const double *w0 = W.row(o), *w1 = W.row(o + 1), *w2 = W.row(o + 2),
                         *w3 = W.row(o + 3);
            for (int k = 0; k < in; ++k)
                dx[k] += g0 * w0[k] + g1 * w1[k] + g2 * w2[k] + g3 * w3[k];
        }
        for (; o < out; ++o) {
            const double g = dy[o];
            const double* w = W.row(o);
            for (int k = 0; k < in; ++k) dx[k] += g * w[k];
        }
    });
}

void linear_backward_params(const Mat& A, const Mat& dY, Mat& dW, std::vector<double>& db) {
    const int B = A.rows, in = A.cols, out = dY.cols;
    run_rows(out, [&](int o) {
        double* dw = dW.row(o);
        double bs = 0;
        int i = 0;
        for (; i + 4 <= B; i += 4) {
            const double g0 = dY.at(i, o), g1 = dY.at(i + 1, o), g2 = dY.at(i + 2, o),
                         g3 = dY.at(i + 3, o);
            const double *a0 = A.row(i), *a1 = A.row(i + 1), *a2 = A.row(i + 2),
                         *a3 = A.row(i + 3);
            for (int k = 0; k < in; ++k)
                dw[k] += g0 * a0[k] + g1 * a1[k] + g2 * a2[k] + g3 * a3[k];
            bs += (g0 + g1) + (g2 + g3);
        }
        for (; i < B; ++i) {
            const double g = dY.at(i, o);
            const double* a = A.row(i);
            for (int k = 0; k < in; ++k) dw[k] += g * a[k];
            bs += g;
        }
        db[o] += bs;
    });
}

void tanh_forward(Mat& Y) {
    const int B = Y.rows, n = Y.cols;
    run_rows(B, [&](int i) {
        double* y = Y.row(i);
        for (int j = 0; j < n; ++j) y[j] = fast_tanh(y[j]);
    });
}

void tanh_backward(const Mat& A, Mat& dA) {
    const int B = A.rows, n = A.cols;
    run_rows(B, [&](int i) {
        const double* a = A.row(i);
        double* d = dA.row(i);
        for (int j = 0; j < n; ++j) d[j] *= 1.0 - a[j] * a[j];
    });
}

}  // namespace fast
}  // namespace kernels

void ParamSet::zero() {
    for (auto& w : W) w.zero();
    for (auto& bb : b) std::fill(bb.begin(), bb.end(), 0.0);
}

size_t ParamSet::count() const {
    size_t n = 0;
    for (size_t l = 0; l < W.size(); ++l) n += W[l].d.size() + b[l].size();
    return n;
}

DenseNet::DenseNet(std::vector<int> sizes, Rng& rng, double last_layer_scale)
    : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("DenseNet needs at least two sizes");
    const size_t L = sizes_.size() - 1;
    p_.W.resize(L);
    p_.b.resize(L);
    for (size_t l = 0; l < L; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        p_.W[l].resize(out, in);
        p_.b[l].assign(out, 0.0);
        const double limit = std::sqrt(6.0 / (in + out));
        const double scale = (l == L - 1) ? last_layer_scale : 1.0;
        for (double& w : p_.W[l].d) w = scale * rng.uniform(-limit, limit);
    }
}

const Mat& DenseNet::forward(const Mat& X, Workspace& ws) const {
    const size_t L = p_.W.size();
    ws.a.resize(L + 1);
    ws.a[0] = X;
    for (size_t l = 0; l < L; ++l) {
        kernels::fast::linear_forward(ws.a[l], p_.W[l], p_.b[l], ws.a[l + 1]);
        if (l + 1 < L) kernels::fast::tanh_forward(ws.a[l + 1]);
    }
    return ws.a.back();
}

void DenseNet::backward(Workspace& ws, const Mat& dOut, ParamSet& g, Mat* dX) const {
    const size_t L = p_.W.size();
    ws.delta.resize(L + 1);
    ws.delta[L] = dOut;
    for (size_t l = L; l-- > 0;) {
        kernels::fast::linear_backward_params(ws.a[l], ws.delta[l + 1], g.W[l], g.b[l]);
        if (l > 0 || dX) {
            kernels::fast::linear_backward_data(ws.delta[l + 1], p_.W[l], ws.delta[l]);
            if (l > 0) kernels::fast::tanh_backward(ws.a[l], ws.delta[l]);
        }
    }
    if (dX) *dX = ws.delta[0];
}

ParamSet DenseNet::make_grads() const {
    ParamSet g;
    g.W.resize(p_.W.size());
    g.b.resize(p_.b.size());
    for (size_t l = 0; l < p_.W.size(); ++l) {
        g.W[l].resize(p_.W[l].rows, p_.W[l].cols);
        g.b[l].assign(p_.b[l].size(), 0.0);
    }
    return g;
}

void Adam::step(ParamSet& p, const ParamSet& g) {
    t_ += 1;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    size_t i = 0;
    for_each_pair(p, g, [&](double& pv, const double& gv) {
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * gv;
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * gv * gv;
        pv -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        ++i;
    });
}

void Adam::step_scalar(double& p, double g) {
    t_ += 1;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    m_[0] = b1_ * m_[0] + (1.0 - b1_) * g;
    v_[0] = b2_ * v_[0] + (1.0 - b2_) * g * g;
    p -= lr_ * (m_[0] / bc1) / (std::sqrt(v_[0] / bc2) + eps_);
}

void polyak_update(ParamSet& target, const ParamSet& src, double tau) {
    for_each_pair(target, src,
                  [tau](double& t, const double& s) { t = (1.0 - tau) * t + tau * s; });
}

}  // namespace twinarm
