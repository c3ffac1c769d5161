#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace sgnnx {

// Seeded mt19937_64 behind the few draw kinds the library needs.
// Every stochastic component takes an explicit Rng (or seed) so runs
// are reproducible from the recorded seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform draw in the open interval (0, 1). Resamples the endpoint
    // values so -log(-log(u)) stays finite.
    double uniform_open() {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        double u = d(gen_);
        while (u <= 0.0 || u >= 1.0) u = d(gen_);
        return u;
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }

    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        std::uniform_int_distribution<int> d(lo, hi);
        return d(gen_);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), gen_);
    }

    // k distinct indices from [0, n), in increasing order.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        // partial Fisher-Yates
        for (int i = 0; i < k; ++i) {
            int j = uniform_int(i, n - 1);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

} // namespace sgnnx
