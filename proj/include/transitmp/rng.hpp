// Portable seeded random streams. The distributions are written out here
// instead of using <random>'s, whose output is implementation-defined, so
// runs are bit-identical across standard libraries.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace transitmp {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : engine_(splitmix64(seed)) {}

    /// Independent stream for one concern (demand, CV sampling, ...).
    static Rng stream(std::uint64_t run_seed, std::uint64_t concern) {
        return Rng(splitmix64(run_seed) ^ splitmix64(concern * 0xD1B54A32D192ED03ULL + 1));
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform() < p;
    }

    /// Knuth's product method; fine for the small per-step means used here.
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        double prod = uniform();
        int k = 0;
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    /// Index drawn proportionally to non-negative weights; weights must not all be zero.
    template <typename Weights>
    std::size_t categorical(const Weights& w) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = uniform() * total;
        std::size_t i = 0;
        for (double x : w) {
            if (u < x) return i;
            u -= x;
            ++i;
        }
        return i == 0 ? 0 : i - 1;
    }

private:
    std::mt19937_64 engine_;
};

namespace stream {
inline constexpr std::uint64_t kDemand = 1;
inline constexpr std::uint64_t kConnected = 2;
inline constexpr std::uint64_t kTurning = 3;
inline constexpr std::uint64_t kPassengers = 4;
inline constexpr std::uint64_t kError = 5;
inline constexpr std::uint64_t kOccupancy = 6;
}  // namespace stream

}  // namespace transitmp
