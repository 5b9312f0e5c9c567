#pragma once

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attt {

// Invalid user-supplied configuration (bad sizes, fractions, toggles).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated an operation's precondition (shape mismatch, empty batch).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Volume statistics make normalization impossible (IQR = 0).
struct DegenerateVolumeError : std::runtime_error {
    explicit DegenerateVolumeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives a child seed from a root seed and a module tag. All randomness in
// the project fans out from one root seed through this function, so runs are
// reproducible and modules are decoupled (see README for the derivation).
inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index = 0) {
    uint64_t s = root ^ fnv1a(tag);
    s ^= 0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL;
    splitmix64(s);
    return splitmix64(s);
}

// Deterministic RNG with self-contained distributions. std distributions are
// implementation-defined, so uniform/normal are generated here directly and
// outputs are bit-stable across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (int i = 0; i < 4; ++i) state_[i] = splitmix64(s);
    }

    uint64_t next_u64() {
        // xoshiro256**
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) { return n <= 1 ? 0 : int(next_u64() % uint64_t(n)); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    template <class T>
    void shuffle(std::vector<T>& xs) {
        for (size_t i = xs.size(); i > 1; --i) {
            size_t j = next_u64() % i;
            std::swap(xs[i - 1], xs[j]);
        }
    }

    Rng fork(std::string_view tag, uint64_t index = 0) {
        return Rng(derive_seed(next_u64(), tag, index));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a over raw bytes of a double vector; used by the parameter-isolation
// contracts (hash before/after and compare).
inline uint64_t hash_doubles(const std::vector<double>& v) {
    uint64_t h = 0xcbf29ce484222325ULL;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(v.data());
    for (size_t i = 0; i < v.size() * sizeof(double); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline bool almost_equal(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

} // namespace attt
