#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace twinarm {

// Seedable generator with hand-rolled draw helpers so that sampled values
// depend only on the mt19937_64 bit stream, not on the standard library's
// distribution implementations. State serializes to a canonical text form.
class Rng {
  public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    int uniform_int(int n) {
        const uint64_t bound = ~uint64_t{0} - ~uint64_t{0} % static_cast<uint64_t>(n);
        uint64_t x;
        do {
            x = gen_();
        } while (x >= bound);
        return static_cast<int>(x % static_cast<uint64_t>(n));
    }

    // Categorical draw by CDF inversion over p[0..n).
    int categorical(const double* p, int n) {
        const double u = uniform01();
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += p[i];
            if (u < acc) return i;
        }
        return n - 1;  // guard against accumulated rounding
    }

    std::string serialize() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> gen_;
    }

    bool operator==(const Rng& o) const { return gen_ == o.gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace twinarm
