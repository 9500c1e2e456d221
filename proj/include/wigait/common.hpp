#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wigait {

using Vec3 = Eigen::Vector3d;
using cplx = std::complex<double>;

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw error(msg);
}

// splitmix64 finalizer; also the generator step when iterated with the golden
// gamma. Used for deriving independent sub-seeds from one root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive a stream seed from a root seed and a textual tag (FNV-1a over the tag,
// then two splitmix rounds). Distinct tags give independent streams, and the
// derivation is stable across runs and platforms.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(root ^ h));
}

// mt19937_64 with hand-rolled distributions: the standard mandates the engine
// sequence but not distribution output, so conversions are done here to keep
// results identical across library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // uniform in [0,1) with 53-bit resolution
    double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Lemire-style rejection-free modulo is overkill here; rejection keeps it
    // exactly uniform.
    std::uint64_t uniform_int(std::uint64_t n) {
        check(n > 0, "uniform_int: empty range");
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    double normal(double mu = 0.0, double sigma = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mu + sigma * spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mu + sigma * r * std::cos(a);
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Percentile with linear interpolation between order statistics
// (rank = q*(n-1)), matching the numpy default convention.
double percentile(std::vector<double> v, double q);

double mean(const std::vector<double>& v);

}  // namespace wigait
