#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "jumpstab/linalg.hpp"
#include "jumpstab/model.hpp"

namespace jumpstab {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic random stream identified by (root_seed, stream_id).
//
// Splitting scheme: the pair is hashed into a 64-bit key
//     key = mix64(mix64(root_seed) ^ mix64(stream_id ^ 0xD1B54A32D192ED03))
// and the key seeds a xoshiro256** state through four SplitMix64 outputs.
// split(channel) derives a child key mix64(key ^ mix64(channel + 1)), so the
// draws used by one path never depend on how many paths exist or which worker
// runs them. All variates are built from 64-bit integer output with explicit
// transforms; nothing depends on the standard library's distributions.
class SeededStream {
public:
    SeededStream(std::uint64_t root_seed, std::uint64_t stream_id);

    SeededStream split(std::uint64_t channel) const;

    std::uint64_t root_seed() const noexcept { return root_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::uint64_t next_u64() noexcept;
    double uniform() noexcept;       // [0, 1), 53 random bits
    double uniform_open() noexcept;  // (0, 1)
    double normal() noexcept;        // Marsaglia polar, caches the spare variate
    double exponential(double rate) noexcept;
    std::uint64_t poisson(double mean) noexcept;
    int rademacher() noexcept;

private:
    SeededStream(std::uint64_t root_seed, std::uint64_t stream_id, std::uint64_t key);
    void seed_from(std::uint64_t key) noexcept;

    std::uint64_t root_seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Channels used when a path splits its stream per noise source.
enum class Channel : std::uint64_t {
    wiener = 1,
    poisson = 2,
    regime = 3,
    eta = 4,
    xi = 5,
    initial_state = 6,
};

inline SeededStream split(const SeededStream& s, Channel c) {
    return s.split(static_cast<std::uint64_t>(c));
}

// Piecewise-constant regime trajectory on [0, horizon].
struct RegimePath {
    int initial = 0;
    std::vector<double> jump_times;  // strictly increasing, within (0, horizon]
    std::vector<int> states;         // state entered at each jump time

    int jumps() const { return static_cast<int>(jump_times.size()); }
    int state_at(double t) const;  // right-continuous
    // Total time spent in `state` over [0, horizon].
    double occupation(int state, double horizon) const;
};

// Exact simulation with exponential holding times.
RegimePath sample_ctmc(const Matrix& Q, int y0, double horizon, SeededStream& stream);

int step_eta(const Matrix& P_H, int h, SeededStream& stream);

std::vector<double> sample_xi(XiLaw law, int count, SeededStream& stream);

}  // namespace jumpstab
