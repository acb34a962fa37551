#include "interp3d/rng.hpp"

#include <cmath>

#include "interp3d/errors.hpp"

namespace interp3d {

namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; bijective on u64.
uint64_t mix(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// ln via exponent split plus atanh series; avoids libm so results do not
// depend on the host math library.
double det_log(double x) {
    // x = m * 2^e with m in [1, 2)
    int e = 0;
    double m = std::frexp(x, &e);  // m in [0.5, 1)
    m *= 2.0;
    e -= 1;
    // ln(m) = 2 atanh((m-1)/(m+1)), |t| <= 1/3
    const double t = (m - 1.0) / (m + 1.0);
    const double t2 = t * t;
    double term = t;
    double sum = 0.0;
    for (int k = 0; k < 27; k += 2) {
        sum += term / static_cast<double>(k + 1);
        term *= t2;
    }
    constexpr double kLn2 = 0.6931471805599453094172321214581766;
    return 2.0 * sum + static_cast<double>(e) * kLn2;
}

}  // namespace

uint64_t hash_tag(std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng::Rng(uint64_t seed, RngKey key) {
    uint64_t b = mix(seed ^ kGolden);
    b = mix(b ^ (key.purpose + 0x8bb84b93962eacc9ULL));
    b = mix(b ^ (key.frame + 0x2f52c379875f0cd5ULL));
    b = mix(b ^ (key.step + 0x71d67fffeda60000ULL));
    base_ = b;
}

Rng::Rng(uint64_t seed, std::string_view purpose, uint64_t frame, uint64_t step)
    : Rng(seed, RngKey{hash_tag(purpose), frame, step}) {}

uint64_t Rng::next_u64() {
    ++counter_;
    return mix(base_ + counter_ * kGolden);
}

double Rng::next_uniform() {
    // 53 mantissa bits, shifted into the open interval (0, 1)
    const uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidInputError("inverse_normal_cdf: p must be in (0, 1)");
    }
    // Acklam's rational approximation, |relative error| < 1.2e-9.
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * det_log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * det_log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

float Rng::next_gaussian() {
    return static_cast<float>(inverse_normal_cdf(next_uniform()));
}

FeatureMatrix seeded_gaussian(Rng& rng, int rows, int cols) {
    if (rows < 1 || cols < 1) throw InvalidInputError("seeded_gaussian: shape must be positive");
    FeatureMatrix m(rows, cols);
    for (auto& v : m.data) v = rng.next_gaussian();
    return m;
}

}  // namespace interp3d
