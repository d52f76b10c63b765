#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lf {

//! Seeded RNG with self-contained distributions so that streams are
//! reproducible across standard-library implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), eng_(seed) {}

    uint64_t next() { return eng_(); }

    //! Uniform double in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    //! Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    //! Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0;
        while (u1 <= 0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    //! Independent child stream: deterministic function of (seed, salt) only.
    Rng fork(uint64_t salt) const { return Rng(mix(seed_, salt)); }

    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return x;
    }

  private:
    uint64_t seed_;
    std::mt19937_64 eng_;
    double spare_ = 0;
    bool have_spare_ = false;
};

} // namespace lf
