#include "jumpstab/stochastic.hpp"

#include <algorithm>
#include <cmath>

namespace jumpstab {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

std::uint64_t stream_key(std::uint64_t root_seed, std::uint64_t stream_id) noexcept {
    return mix64(mix64(root_seed) ^ mix64(stream_id ^ 0xD1B54A32D192ED03ULL));
}

}  // namespace

SeededStream::SeededStream(std::uint64_t root_seed, std::uint64_t stream_id)
    : SeededStream(root_seed, stream_id, stream_key(root_seed, stream_id)) {}

SeededStream::SeededStream(std::uint64_t root_seed, std::uint64_t stream_id, std::uint64_t key)
    : root_seed_(root_seed), stream_id_(stream_id), key_(key) {
    seed_from(key);
}

void SeededStream::seed_from(std::uint64_t key) noexcept {
    std::uint64_t z = key;
    for (auto& word : s_) {
        z += 0x9E3779B97F4A7C15ULL;
        std::uint64_t w = z;
        w = (w ^ (w >> 30)) * 0xBF58476D1CE4E5B9ULL;
        w = (w ^ (w >> 27)) * 0x94D049BB133111EBULL;
        word = w ^ (w >> 31);
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

SeededStream SeededStream::split(std::uint64_t channel) const {
    return SeededStream(root_seed_, stream_id_, mix64(key_ ^ mix64(channel + 1)));
}

std::uint64_t SeededStream::next_u64() noexcept {
    // xoshiro256**
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double SeededStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededStream::uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double SeededStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

double SeededStream::exponential(double rate) noexcept {
    return -std::log(uniform_open()) / rate;
}

std::uint64_t SeededStream::poisson(double mean) noexcept {
    if (!(mean > 0.0)) return 0;
    // Sum of independent Poisson variables is Poisson; keep each inversion
    // chunk small so exp(-chunk) stays well away from underflow.
    constexpr double chunk = 16.0;
    std::uint64_t total = 0;
    while (mean > chunk) {
        total += poisson(chunk);
        mean -= chunk;
    }
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf && k < 1000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return total + k;
}

int SeededStream::rademacher() noexcept { return (next_u64() >> 63) ? 1 : -1; }

int RegimePath::state_at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return initial;
    return states[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

double RegimePath::occupation(int state, double horizon) const {
    double total = 0.0;
    double t = 0.0;
    int current = initial;
    for (std::size_t n = 0; n < jump_times.size(); ++n) {
        if (current == state) total += jump_times[n] - t;
        t = jump_times[n];
        current = states[n];
    }
    if (current == state) total += horizon - t;
    return total;
}

RegimePath sample_ctmc(const Matrix& Q, int y0, double horizon, SeededStream& stream) {
    RegimePath path;
    path.initial = y0;
    const auto N = Q.rows();
    int state = y0;
    double t = 0.0;
    while (true) {
        const double rate = -Q(state, state);
        if (!(rate > 0.0)) break;  // absorbing
        t += stream.exponential(rate);
        if (t > horizon) break;
        // Next state j != state with probability q_ij / rate.
        const double target = stream.uniform() * rate;
        double acc = 0.0;
        int next = -1;
        for (Eigen::Index j = 0; j < N; ++j) {
            if (j == state || Q(state, j) <= 0.0) continue;
            acc += Q(state, j);
            next = static_cast<int>(j);
            if (target < acc) break;
        }
        if (next < 0) break;
        path.jump_times.push_back(t);
        path.states.push_back(next);
        state = next;
    }
    return path;
}

int step_eta(const Matrix& P_H, int h, SeededStream& stream) {
    const double u = stream.uniform();
    double acc = 0.0;
    int last = h;
    for (Eigen::Index j = 0; j < P_H.cols(); ++j) {
        const double p = P_H(h, j);
        if (p <= 0.0) continue;
        acc += p;
        last = static_cast<int>(j);
        if (u < acc) return last;
    }
    return last;
}

std::vector<double> sample_xi(XiLaw law, int count, SeededStream& stream) {
    std::vector<double> out(static_cast<std::size_t>(std::max(count, 0)));
    for (auto& v : out) {
        v = law == XiLaw::rademacher ? static_cast<double>(stream.rademacher()) : stream.normal();
    }
    return out;
}

}  // namespace jumpstab
