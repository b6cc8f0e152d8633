#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ipg {

// Seeded PRNG with hand-rolled draws. std::mt19937_64 output is specified by
// the standard, but the <random> distributions are not, so every conversion
// here is explicit to keep runs reproducible byte-for-byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1) with 53 bits of precision
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; second value cached
    double gaussian();

    // uniform integer in [0, n), rejection sampled
    int below(int n);

    int sign() { return (next_u64() & 1u) ? 1 : -1; }

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t splitmix64(std::uint64_t x);

// Per-sample stream id: hash of run seed and sample id, so attacks and
// extractions on distinct samples draw from independent streams.
std::uint64_t mix_seed(std::uint64_t seed, const std::string& key);

std::string hex64(std::uint64_t v);

}  // namespace ipg
