#include "interp3d/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace interp3d {

FeatureMatrix matmul(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.cols != b.rows) {
        throw InvalidInputError("matmul: inner dims differ (" + std::to_string(a.cols) +
                                " vs " + std::to_string(b.rows) + ")");
    }
    FeatureMatrix out(a.rows, b.cols);
    std::vector<double> acc(static_cast<size_t>(b.cols));
    for (int i = 0; i < a.rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* arow = a.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const float* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) acc[j] += aik * brow[j];
        }
        float* orow = out.row(i);
        for (int j = 0; j < b.cols; ++j) orow[j] = static_cast<float>(acc[j]);
    }
    return out;
}

FeatureMatrix lerp_matrix(const FeatureMatrix& a, const FeatureMatrix& b, float alpha) {
    if (!a.same_shape(b)) throw InvalidInputError("lerp_matrix: shape mismatch");
    if (alpha == 0.0f) return a;
    if (alpha == 1.0f) return b;
    FeatureMatrix out(a.rows, a.cols);
    const float one_minus = 1.0f - alpha;
    for (size_t i = 0; i < a.data.size(); ++i) {
        out.data[i] = one_minus * a.data[i] + alpha * b.data[i];
    }
    return out;
}

double pairwise_sum(std::span<const double> values) {
    const size_t n = values.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

std::vector<double> row_norms(const FeatureMatrix& m, const char* name) {
    std::vector<double> norms(static_cast<size_t>(m.rows));
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const float* r = m.row(i);
        for (int j = 0; j < m.cols; ++j) s += static_cast<double>(r[j]) * r[j];
        const double norm = std::sqrt(s);
        if (norm < 1e-12) {
            throw InvalidInputError(std::string("cosine_similarity_matrix: degenerate row ") +
                                    std::to_string(i) + " of input " + name);
        }
        norms[static_cast<size_t>(i)] = norm;
    }
    return norms;
}

}  // namespace

FeatureMatrix cosine_similarity_matrix(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.cols != b.cols) {
        throw InvalidInputError("cosine_similarity_matrix: channel counts differ");
    }
    const auto na = row_norms(a, "a");
    const auto nb = row_norms(b, "b");
    FeatureMatrix sim(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const float* ra = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const float* rb = b.row(j);
            double dot = 0.0;
            for (int k = 0; k < a.cols; ++k) dot += static_cast<double>(ra[k]) * rb[k];
            sim.at(i, j) = static_cast<float>(dot / (na[i] * nb[j]));
        }
    }
    return sim;
}

SymmetricEigen symmetric_eigen(const std::vector<double>& s, int d) {
    if (static_cast<size_t>(d) * d != s.size()) {
        throw InvalidInputError("symmetric_eigen: size mismatch");
    }
    std::vector<double> a = s;           // working copy, becomes diagonal
    std::vector<double> v(s.size(), 0.0);  // accumulated rotations
    for (int i = 0; i < d; ++i) v[static_cast<size_t>(i) * d + i] = 1.0;

    auto at = [d](std::vector<double>& m, int r, int c) -> double& {
        return m[static_cast<size_t>(r) * d + c];
    };

    // Cyclic Jacobi sweeps; converges quadratically for symmetric input.
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += at(a, p, q) * at(a, p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                const double apq = at(a, p, q);
                if (apq == 0.0) continue;
                const double app = at(a, p, p);
                const double aqq = at(a, q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < d; ++k) {
                    const double akp = at(a, k, p);
                    const double akq = at(a, k, q);
                    at(a, k, p) = c * akp - sn * akq;
                    at(a, k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = at(a, p, k);
                    const double aqk = at(a, q, k);
                    at(a, p, k) = c * apk - sn * aqk;
                    at(a, q, k) = sn * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    const double vkp = at(v, k, p);
                    const double vkq = at(v, k, q);
                    at(v, k, p) = c * vkp - sn * vkq;
                    at(v, k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    // Sort eigenpairs ascending, keeping vector columns in step.
    std::vector<int> order(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        return a[static_cast<size_t>(x) * d + x] < a[static_cast<size_t>(y) * d + y];
    });

    SymmetricEigen out;
    out.values.resize(static_cast<size_t>(d));
    out.vectors.assign(s.size(), 0.0);
    for (int j = 0; j < d; ++j) {
        const int src = order[static_cast<size_t>(j)];
        out.values[static_cast<size_t>(j)] = a[static_cast<size_t>(src) * d + src];
        for (int i = 0; i < d; ++i) {
            out.vectors[static_cast<size_t>(i) * d + j] = v[static_cast<size_t>(i) * d + src];
        }
    }
    return out;
}

std::vector<double> psd_sqrt(const std::vector<double>& s, int d) {
    if (static_cast<size_t>(d) * d != s.size()) {
        throw InvalidInputError("psd_sqrt: size mismatch");
    }
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const double diff = std::abs(s[static_cast<size_t>(i) * d + j] -
                                         s[static_cast<size_t>(j) * d + i]);
            if (diff > 1e-6) {
                throw InvalidInputError("psd_sqrt: input asymmetric at (" + std::to_string(i) +
                                        "," + std::to_string(j) + "), delta " +
                                        std::to_string(diff));
            }
        }
    }
    SymmetricEigen eig = symmetric_eigen(s, d);
    for (auto& lam : eig.values) {
        if (lam < -1e-8) {
            throw InvalidInputError("psd_sqrt: eigenvalue " + std::to_string(lam) +
                                    " below -1e-8; input not PSD");
        }
        lam = lam > 0.0 ? std::sqrt(lam) : 0.0;
    }
    // R = V * sqrt(D) * V^T
    std::vector<double> r(s.size(), 0.0);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) {
                acc += eig.vectors[static_cast<size_t>(i) * d + k] *
                       eig.values[static_cast<size_t>(k)] *
                       eig.vectors[static_cast<size_t>(j) * d + k];
            }
            r[static_cast<size_t>(i) * d + j] = acc;
            r[static_cast<size_t>(j) * d + i] = acc;
        }
    }
    return r;
}

FeatureMatrix psd_sqrt(const FeatureMatrix& s) {
    if (s.rows != s.cols) throw InvalidInputError("psd_sqrt: matrix must be square");
    std::vector<double> work(s.data.begin(), s.data.end());
    const auto r = psd_sqrt(work, s.rows);
    FeatureMatrix out(s.rows, s.cols);
    for (size_t i = 0; i < r.size(); ++i) out.data[i] = static_cast<float>(r[i]);
    return out;
}

}  // namespace interp3d
