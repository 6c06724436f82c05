#pragma once

#include <cstdint>

namespace cds {

/// splitmix64-seeded xoshiro256**; output sequence is stable across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();                    // [0,1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int below(int n);                    // [0,n)
    double normal();                     // Box-Muller, one value per call

    Rng fork(uint64_t stream);           // independent child stream

private:
    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cds
