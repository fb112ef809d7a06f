#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "crane/errors.hpp"

namespace crane {

// Deterministic random stream. All distributions are implemented by hand on
// top of mt19937_64 so that sequences are identical across platforms and
// standard-library versions, and so the full generator state can be
// serialized for bit-exact checkpoint resume.
class RngStream {
  public:
    RngStream() : RngStream(0x9e3779b97f4a7c15ull) {}
    explicit RngStream(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        base_seed_ = seed;
        engine_.seed(seed);
        has_cached_normal_ = false;
        cached_normal_ = 0.0;
    }

    // Derive an independent stream; used to give each environment / trial its
    // own stream so results are order-independent.
    RngStream child(std::uint64_t index) const {
        // splitmix64 over (base seed, index) — decorrelates nearby indices.
        std::uint64_t z = base_seed_ + 0x9e3779b97f4a7c15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return RngStream(z ^ (z >> 31));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1): 53-bit mantissa, never returns 1.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller with one cached value.
    double normal() {
        if (has_cached_normal_) {
            has_cached_normal_ = false;
            return cached_normal_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_normal_ = r * std::sin(a);
        has_cached_normal_ = true;
        return r * std::cos(a);
    }

    // Gamma(shape, 1) for shape >= 1 via Marsaglia-Tsang squeeze.
    double gamma(double shape) {
        if (!(shape >= 1.0)) throw InvalidArgument("gamma: shape must be >= 1");
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0;
            double v = 0.0;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    void serialize(std::ostream& os) const {
        os.precision(17);
        os << base_seed_ << ' ' << (has_cached_normal_ ? 1 : 0) << ' '
           << cached_normal_ << ' ' << engine_;
    }

    void deserialize(std::istream& is) {
        int cached = 0;
        is >> base_seed_ >> cached >> cached_normal_ >> engine_;
        has_cached_normal_ = (cached != 0);
        if (!is) throw IoError("RngStream: malformed serialized state");
    }

    std::string serialize_string() const {
        std::ostringstream os;
        serialize(os);
        return os.str();
    }

    void deserialize_string(const std::string& s) {
        std::istringstream is(s);
        deserialize(is);
    }

    bool operator==(const RngStream& o) const {
        return engine_ == o.engine_ && has_cached_normal_ == o.has_cached_normal_ &&
               cached_normal_ == o.cached_normal_ && base_seed_ == o.base_seed_;
    }

  private:
    std::mt19937_64 engine_;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
    std::uint64_t base_seed_ = 0;
};

}  // namespace crane
