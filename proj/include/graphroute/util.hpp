#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

namespace graphroute {

// Deterministic RNG. std:: distributions are implementation-defined, so all
// sampling goes through this class to keep seeded runs byte-identical across
// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    // uniform integer in [0, n)
    std::size_t next_index(std::size_t n) {
        return n ? static_cast<std::size_t>(next_u64() % n) : 0;
    }

    // index sampled from unnormalized non-negative weights
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double point = next_double() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            cum += weights[i];
            if (point < cum) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_index(i)]);
        }
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

// Order-free seed derivation: every stochastic unit of work (trial, rollout,
// episode) gets its own seed from stable keys so concurrency cannot change
// results.
inline std::uint64_t derive_seed(std::uint64_t base) { return mix64(base); }

template <typename Head, typename... Tail>
std::uint64_t derive_seed(std::uint64_t base, const Head& head, const Tail&... tail) {
    std::uint64_t h;
    if constexpr (std::is_convertible_v<Head, std::string_view>) {
        h = fnv1a64(std::string_view(head));
    } else {
        h = static_cast<std::uint64_t>(head);
    }
    return derive_seed(mix64(base ^ (h + 0x9e3779b97f4a7c15ULL)), tail...);
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Runs fn(i) for i in [0, n) on up to `parallelism` threads. Each index must
// write only its own output slot; aggregation stays with the caller so float
// reduction order is fixed.
inline void parallel_for(std::size_t n, unsigned parallelism,
                         const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    unsigned workers = std::max(1u, parallelism);
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::atomic<std::size_t> cursor{0};
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                std::size_t i = cursor.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : threads) t.join();
}

}  // namespace graphroute
