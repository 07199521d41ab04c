#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uchain {

/// Named deterministic random stream. Two streams built from the same (seed, name)
/// produce identical sequences; different names give statistically independent ones.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::string_view name);

    /// Standard normal draw.
    double normal() { return normal_(engine_); }
    /// Uniform draw in [0, 1).
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// splitmix64 finalizer, used to derive stream seeds.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t x);

}  // namespace uchain
