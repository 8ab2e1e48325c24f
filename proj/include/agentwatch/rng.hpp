#pragma once

// Portable seeded randomness.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard *distributions* are not portable across library
// implementations, so every draw the simulator makes goes through the helpers
// below instead:
//   below(n)   - rejection sampling on the top bits, unbiased
//   uniform()  - 53 high bits scaled to [0, 1)
//   shuffle()  - Fisher-Yates from the back using below()
// Child streams are derived with the SplitMix64 finalizer (mix_seed), so a run
// seed, a game index and a purpose tag always map to the same stream.

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace agentwatch {

std::uint64_t splitmix64(std::uint64_t x);

// Derive a child seed from a parent seed and a tag.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t mix_seed(std::uint64_t base, std::string_view tag);

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    // Uniform real in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace agentwatch
