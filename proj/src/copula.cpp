#include "bailout/copula.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bailout/errors.hpp"
#include "bailout/normal.hpp"

namespace bailout {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 20-point Gauss-Legendre on [-1, 1], positive half.
constexpr std::array<double, 10> kGlNodes = {0.07652652113349733, 0.2277858511416451, 0.3737060887154196,
                                             0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
                                             0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
                                             0.9931285991850949};
constexpr std::array<double, 10> kGlWeights = {0.1527533871307259, 0.1491729864726037, 0.1420961093183821,
                                               0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
                                               0.08327674157670475, 0.06267204833410906, 0.04060142980038694,
                                               0.01761400713915212};

// Integrand of Phi2(h,k;r) - Phi(h)Phi(k) over theta in [0, asin r].
double sheppard_integrand(double h, double k, double theta) {
    const double s = std::sin(theta);
    const double c2 = 1.0 - s * s;
    return std::exp((2.0 * h * k * s - h * h - k * k) / (2.0 * c2)) / (2.0 * std::numbers::pi);
}

}  // namespace

double bivariate_normal_cdf(double h, double k, double r) {
    if (std::isnan(h) || std::isnan(k) || std::isnan(r)) throw DomainError("bivariate_normal_cdf: NaN input");
    if (h == -kInf || k == -kInf) return 0.0;
    if (h == kInf) return normal_cdf(k);
    if (k == kInf) return normal_cdf(h);
    r = std::clamp(r, -1.0, 1.0);
    if (r == 1.0) return normal_cdf(std::min(h, k));
    if (r == -1.0) return std::max(0.0, normal_cdf(h) - normal_cdf(-k));
    const double base = normal_cdf(h) * normal_cdf(k);
    if (r == 0.0) return base;
    const double upper = std::asin(r);
    double integral = 0.0;
    if (std::abs(r) < 0.925) {
        // theta = upper/2 * (1 +- x)
        const double half = 0.5 * upper;
        for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
            integral += kGlWeights[i] * (sheppard_integrand(h, k, half * (1.0 - kGlNodes[i])) +
                                         sheppard_integrand(h, k, half * (1.0 + kGlNodes[i])));
        }
        integral *= half;
    } else {
        auto f = [h, k](double theta) { return sheppard_integrand(h, k, theta); };
        integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, upper, 20, 1e-14);
    }
    return std::clamp(base + integral, 0.0, 1.0);
}

CorrelationFactor cholesky_factor(const Eigen::MatrixXd& sigma_sub, std::vector<int> index) {
    const Eigen::Index n = sigma_sub.rows();
    if (sigma_sub.cols() != n) throw NotPositiveSemidefinite("correlation matrix must be square");
    if (index.empty()) {
        index.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) index[static_cast<std::size_t>(i)] = static_cast<int>(i);
    }
    if (static_cast<Eigen::Index>(index.size()) != n) throw DimensionError("cholesky_factor: index map size mismatch");
    {
        auto sorted = index;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw DimensionError("cholesky_factor: index map must be injective");
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(sigma_sub(i, i) - 1.0) > 1e-12) throw NotPositiveSemidefinite("correlation matrix needs a unit diagonal");
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = sigma_sub(i, j);
            if (!std::isfinite(v) || std::abs(v - sigma_sub(j, i)) > 1e-12) {
                throw NotPositiveSemidefinite("correlation matrix must be symmetric");
            }
            if (std::abs(v) > 1.0 + 1e-12) {
                throw NotPositiveSemidefinite("correlation entry outside [-1, 1]: " + std::to_string(v));
            }
        }
    }

    // Semi-definite Cholesky: a vanishing pivot zeroes its column, which is
    // only consistent if the remaining column entries vanish too.
    const double tol = 1e-10;
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = sigma_sub(j, j) - lower.row(j).head(j).squaredNorm();
        if (pivot < -tol) throw NotPositiveSemidefinite("correlation matrix is not positive semi-definite");
        if (pivot <= tol) {
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double residual = sigma_sub(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j));
                if (std::abs(residual) > 1e-8) throw NotPositiveSemidefinite("correlation matrix is not positive semi-definite");
            }
            continue;
        }
        const double d = std::sqrt(pivot);
        lower(j, j) = d;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            lower(i, j) = (sigma_sub(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j))) / d;
        }
    }
    return CorrelationFactor{std::move(lower), std::move(index)};
}

Eigen::MatrixXd correlation_submatrix(const Eigen::MatrixXd& sigma, NodeSet nodes) {
    const auto ids = nodes.ids();
    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd sub(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) sub(r, c) = sigma(ids[static_cast<std::size_t>(r)], ids[static_cast<std::size_t>(c)]);
    }
    return sub;
}

CorrelationFactor factor_for(const Eigen::MatrixXd& sigma, NodeSet nodes) {
    return cholesky_factor(correlation_submatrix(sigma, nodes), nodes.ids());
}

double default_threshold(double pd) {
    if (pd >= 1.0) return kInf;
    if (!(pd > 0.0)) throw DomainError("default probability must lie in (0, 1]");
    return normal_quantile(pd);
}

void draw_latent(const CorrelationFactor& factor, RandomStream& rng, std::span<double> out) {
    const int n = factor.dim();
    if (static_cast<int>(out.size()) != n) throw DimensionError("draw_latent: output size mismatch");
    thread_local std::vector<double> z;
    z.resize(static_cast<std::size_t>(n));
    for (double& v : z) v = rng.normal();
    for (int r = 0; r < n; ++r) {
        double acc = 0.0;
        for (int c = 0; c <= r; ++c) acc += factor.lower(r, c) * z[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
}

LatentDraw sample_defaults(std::span<const double> pds, const CorrelationFactor& factor, RandomStream& rng) {
    if (static_cast<int>(pds.size()) != factor.dim()) throw DimensionError("sample_defaults: one PD per factor row required");
    LatentDraw draw;
    draw.x.resize(pds.size());
    draw.defaults.resize(pds.size());
    draw_latent(factor, rng, draw.x);
    for (std::size_t r = 0; r < pds.size(); ++r) {
        const bool d = draw.x[r] < default_threshold(pds[r]);
        draw.defaults[r] = d;
        if (d) draw.default_set.insert(factor.index[r]);
    }
    return draw;
}

namespace {

// Phi2 of the conditional pair (X_q, X_s) given X_p = x, where the
// conditional standard deviations may vanish.
double conditional_pair_cdf(double bq, double bs, double rq, double rs, double sq, double ss, double rho, double x) {
    const double uq = bq - rq * x;
    const double us = bs - rs * x;
    constexpr double kDegenerate = 1e-12;
    const bool dq = sq < kDegenerate;
    const bool ds = ss < kDegenerate;
    if (dq && ds) return (uq > 0.0 && us > 0.0) ? 1.0 : 0.0;
    if (dq) return uq > 0.0 ? normal_cdf(us / ss) : 0.0;
    if (ds) return us > 0.0 ? normal_cdf(uq / sq) : 0.0;
    return bivariate_normal_cdf(uq / sq, us / ss, rho);
}

double trivariate_cdf(const std::array<double, 3>& b, const Eigen::Matrix3d& r) {
    // Integrate over the variable least correlated with the others.
    int p = 0;
    double best = kInf;
    for (int i = 0; i < 3; ++i) {
        const double load = std::abs(r(i, (i + 1) % 3)) + std::abs(r(i, (i + 2) % 3));
        if (load < best) {
            best = load;
            p = i;
        }
    }
    const int q = (p + 1) % 3;
    const int s = (p + 2) % 3;
    const double rq = r(p, q);
    const double rs = r(p, s);
    const double sq = std::sqrt(std::max(0.0, 1.0 - rq * rq));
    const double ss = std::sqrt(std::max(0.0, 1.0 - rs * rs));
    double rho = 0.0;
    if (sq > 1e-12 && ss > 1e-12) rho = std::clamp((r(q, s) - rq * rs) / (sq * ss), -1.0, 1.0);
    auto f = [&](double x) { return normal_pdf(x) * conditional_pair_cdf(b[q], b[s], rq, rs, sq, ss, rho, x); };
    const double upper = b[p];
    const double lower = std::min(-9.0, upper - 9.0);
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lower, upper, 15, 1e-12);
    return std::clamp(value, 0.0, 1.0);
}

}  // namespace

double orthant_probability(std::span<const double> upper, const Eigen::MatrixXd& corr) {
    const auto n = static_cast<Eigen::Index>(upper.size());
    if (corr.rows() != n || corr.cols() != n) throw DimensionError("orthant_probability: correlation size mismatch");
    std::vector<int> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double b = upper[static_cast<std::size_t>(i)];
        if (std::isnan(b)) throw DomainError("orthant_probability: NaN bound");
        if (b == -kInf) return 0.0;
        if (b != kInf) keep.push_back(static_cast<int>(i));
    }
    if (keep.size() > 3) throw DimensionError("exact orthant probabilities are limited to 3 dimensions");
    switch (keep.size()) {
        case 0:
            return 1.0;
        case 1:
            return normal_cdf(upper[static_cast<std::size_t>(keep[0])]);
        case 2:
            return bivariate_normal_cdf(upper[static_cast<std::size_t>(keep[0])], upper[static_cast<std::size_t>(keep[1])],
                                        corr(keep[0], keep[1]));
        default: {
            std::array<double, 3> b{};
            Eigen::Matrix3d r;
            for (int a = 0; a < 3; ++a) {
                b[static_cast<std::size_t>(a)] = upper[static_cast<std::size_t>(keep[static_cast<std::size_t>(a)])];
                for (int c = 0; c < 3; ++c) r(a, c) = corr(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(c)]);
            }
            return trivariate_cdf(b, r);
        }
    }
}

JointProbability joint_default_prob(std::span<const double> pds, NodeSet default_set, NodeSet survive_set,
                                    const Eigen::MatrixXd& sigma, const JointProbOptions& options) {
    const auto n = static_cast<int>(pds.size());
    if (sigma.rows() != n || sigma.cols() != n) throw DimensionError("joint_default_prob: correlation size mismatch");
    if (!(default_set & survive_set).empty()) throw DomainError("joint_default_prob: a node cannot both default and survive");
    const NodeSet involved = default_set | survive_set;
    if (!involved.is_subset_of(NodeSet::all(n))) throw DimensionError("joint_default_prob: node index out of range");
    const auto ids = involved.ids();
    const auto dim = static_cast<Eigen::Index>(ids.size());

    if (options.method == JointMethod::kExactSmall) {
        if (dim > 3) throw DimensionError("joint_default_prob: exact route supports at most 3 nodes, got " + std::to_string(dim));
        // Survival x_i >= h_i becomes -x_i < -h_i; flip the sign of that coordinate.
        std::vector<double> bounds(ids.size());
        std::vector<double> sign(ids.size());
        for (std::size_t a = 0; a < ids.size(); ++a) {
            const double h = default_threshold(pds[static_cast<std::size_t>(ids[a])]);
            const bool survive = survive_set.contains(ids[a]);
            sign[a] = survive ? -1.0 : 1.0;
            bounds[a] = survive ? -h : h;
        }
        Eigen::MatrixXd corr(dim, dim);
        for (Eigen::Index a = 0; a < dim; ++a) {
            for (Eigen::Index c = 0; c < dim; ++c) {
                corr(a, c) = sign[static_cast<std::size_t>(a)] * sign[static_cast<std::size_t>(c)] *
                             sigma(ids[static_cast<std::size_t>(a)], ids[static_cast<std::size_t>(c)]);
            }
        }
        return {orthant_probability(bounds, corr), 0.0};
    }

    if (options.samples <= 0) throw DomainError("joint_default_prob: sample count must be positive");
    if (dim == 0) return {1.0, 0.0};
    const CorrelationFactor factor = factor_for(sigma, involved);
    std::vector<double> thresholds(ids.size());
    for (std::size_t a = 0; a < ids.size(); ++a) thresholds[a] = default_threshold(pds[static_cast<std::size_t>(ids[a])]);
    RandomStream rng(options.seed);
    std::vector<double> x(ids.size());
    std::int64_t hits = 0;
    for (std::int64_t s = 0; s < options.samples; ++s) {
        draw_latent(factor, rng, x);
        bool ok = true;
        for (std::size_t a = 0; a < ids.size() && ok; ++a) {
            const bool defaults = x[a] < thresholds[a];
            ok = defaults == default_set.contains(ids[a]);
        }
        hits += ok ? 1 : 0;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(options.samples);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(options.samples))};
}

std::vector<double> partition_probabilities(std::span<const double> pds, const Eigen::MatrixXd& corr) {
    const auto n = static_cast<int>(pds.size());
    if (n > 3) throw DimensionError("partition_probabilities: at most 3 nodes");
    if (corr.rows() != n || corr.cols() != n) throw DimensionError("partition_probabilities: correlation size mismatch");
    const int count = 1 << n;
    // Lower-orthant CDF of every subset; nodes outside the subset are free.
    std::vector<double> cdf(static_cast<std::size_t>(count));
    std::vector<double> bounds(static_cast<std::size_t>(n));
    for (int mask = 0; mask < count; ++mask) {
        for (int i = 0; i < n; ++i) bounds[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? default_threshold(pds[static_cast<std::size_t>(i)]) : kInf;
        cdf[static_cast<std::size_t>(mask)] = orthant_probability(bounds, corr);
    }
    // Moebius inversion: P(exactly D) = sum_{T >= D} (-1)^{|T \ D|} F(T).
    std::vector<double> probs(static_cast<std::size_t>(count));
    for (int d = 0; d < count; ++d) {
        double acc = 0.0;
        for (int t = 0; t < count; ++t) {
            if ((t & d) != d) continue;
            acc += (std::popcount(static_cast<unsigned>(t & ~d)) % 2 ? -1.0 : 1.0) * cdf[static_cast<std::size_t>(t)];
        }
        probs[static_cast<std::size_t>(d)] = std::clamp(acc, 0.0, 1.0);
    }
    return probs;
}

}  // namespace bailout
