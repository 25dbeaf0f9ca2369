#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <span>
#include <string>

#include "driftreg/volume.hpp"

namespace test {

inline driftreg::Volume random_volume(driftreg::Dims d, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(d.count());
    for (double& x : v) x = u(rng);
    return driftreg::Volume(d, std::move(v));
}

inline driftreg::DeformationField random_field(driftreg::Dims d, std::uint64_t seed, double amp) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    driftreg::DeformationField f(d);
    for (double& x : f.components()) x = u(rng);
    return f;
}

inline driftreg::DeformationField constant_field(driftreg::Dims d, double ux, double uy, double uz) {
    driftreg::DeformationField f(d);
    const double c[3] = {ux, uy, uz};
    for (std::size_t k = 0; k < 3; ++k)
        for (double& x : f.channel(k)) x = c[k];
    return f;
}

inline bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("driftreg_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace test
