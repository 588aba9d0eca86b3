#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace nfa {

// xoshiro256++ with splitmix64 seeding. Hand-rolled so that streams are
// bit-identical across platforms and standard library versions; std::
// distributions are implementation-defined and would break byte-for-byte
// reproducibility of checkpoints and result streams.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    // Independent stream derived from a global seed and a purpose label.
    // Adding a new label never perturbs the draws of an existing one.
    static Rng stream(std::uint64_t global_seed, std::string_view label);
    static Rng stream(std::uint64_t global_seed, std::string_view label, std::uint64_t index);

    std::uint64_t next_u64();

    // Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    // Uniform integer in [0, n), unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace nfa
