#include "interp3d/schedule.hpp"

#include <cmath>
#include <string>

#include "interp3d/errors.hpp"

namespace interp3d {

void MorphSchedule::validate() const {
    if (frame_count < 2 || static_cast<int>(alphas.size()) != frame_count) {
        throw InvalidInputError("MorphSchedule: need at least 2 frames");
    }
    if (alphas.front() != 0.0 || alphas.back() != 1.0) {
        throw InvalidInputError("MorphSchedule: endpoints must be exactly 0 and 1");
    }
    for (size_t i = 1; i < alphas.size(); ++i) {
        if (!(alphas[i] > alphas[i - 1])) {
            throw InvalidInputError("MorphSchedule: alphas must be strictly increasing");
        }
    }
    if (denoise_steps < 1) throw InvalidInputError("MorphSchedule: denoise steps must be >= 1");
}

namespace {

// Continued fraction for the incomplete beta (Numerical Recipes style).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw InvalidInputError("regularized_incomplete_beta: a, b must be positive");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double beta_inverse_cdf(double beta_param, double p) {
    if (!(beta_param > 0.0)) throw InvalidInputError("beta_inverse_cdf: shape must be positive");
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    // bisection to 1e-10 on the monotone CDF
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_incomplete_beta(beta_param, beta_param, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

MorphSchedule alpha_schedule(int frame_count, double beta_param) {
    if (frame_count < 2) throw InvalidInputError("alpha_schedule: frame count must be >= 2");
    if (!(beta_param > 0.0)) throw InvalidInputError("alpha_schedule: shape must be positive");
    MorphSchedule sched;
    sched.frame_count = frame_count;
    sched.beta_param = beta_param;
    sched.alphas.resize(static_cast<size_t>(frame_count));
    sched.alphas.front() = 0.0;
    sched.alphas.back() = 1.0;
    for (int i = 1; i < frame_count - 1; ++i) {
        const double p = static_cast<double>(i) / (frame_count - 1);
        sched.alphas[static_cast<size_t>(i)] = beta_inverse_cdf(beta_param, p);
    }
    sched.validate();
    return sched;
}

int patch_size_schedule(int t, int total_steps, int s_max) {
    if (total_steps < 1 || t < 0 || t >= total_steps) {
        throw InvalidInputError("patch_size_schedule: step index out of range");
    }
    if (s_max < 1 || (s_max & (s_max - 1)) != 0) {
        throw InvalidInputError("patch_size_schedule: s_max must be a power of two");
    }
    int levels = 1;  // log2(s_max) + 1
    for (int s = s_max; s > 1; s >>= 1) ++levels;
    const int shift = static_cast<int>((static_cast<long long>(t) * levels) / total_steps);
    const int side = s_max >> shift;
    return side < 1 ? 1 : side;
}

}  // namespace interp3d
