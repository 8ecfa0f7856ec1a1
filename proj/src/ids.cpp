#include "ergo/ids.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "ergo/errors.hpp"

namespace ergo {

namespace {

void check_samples(std::size_t M, std::size_t samples) {
    if (M < 1) throw ConfigError("window length M must be at least 1");
    if (samples < 1) throw ConfigError("at least one sample is needed");
}

void check_eps(double eps) {
    if (!(eps > 0.0 && eps <= 0.5)) throw ConfigError("eps must lie in (0, 1/2]");
}

PotentialWindow sample_window(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, std::size_t M,
                              std::uint64_t seed, std::size_t s) {
    Stream st(seed, s);
    return potential(sys, f, lambda, sys.sample_point(st), M);
}

double mean_stderr(double sum, double sumsq, std::size_t n, double& mean) {
    mean = sum / double(n);
    if (n < 2) return 0.0;
    double var = std::max(0.0, (sumsq - sum * mean) / double(n - 1));
    return std::sqrt(var / double(n));
}

}  // namespace

void IDSTable::write_csv(std::ostream& os) const {
    os << "E,k_M,stderr,M,samples,lambda\n";
    for (std::size_t i = 0; i < energies.size(); ++i)
        os << fmt::format("{:.17g},{:.17g},{:.17g},{},{},{:.17g}\n", energies[i], values[i], stderr_[i], M, samples,
                          lambda);
}

IDSTable ids(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, std::size_t M,
             const std::vector<double>& grid, std::size_t samples, std::uint64_t seed) {
    check_samples(M, samples);
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ConfigError("IDS energy grid must be strictly increasing");
    // integer sums keep the table monotone and exact for rational values
    std::vector<std::uint64_t> sum(grid.size(), 0), sumsq(grid.size(), 0);
    for (std::size_t s = 0; s < samples; ++s) {
        auto w = sample_window(sys, f, lambda, M, seed, s);
        OperatorWindow op(w, {0, static_cast<long>(M) - 1});
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::uint64_t c = eigen_count_below(op, grid[i]);
            sum[i] += c;
            sumsq[i] += c * c;
        }
    }
    IDSTable t;
    t.M = M;
    t.energies = grid;
    t.samples = samples;
    t.lambda = lambda;
    t.system = to_string(sys.kind);
    t.f = f.name();
    const double denom = double(M) * double(samples);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        t.values.push_back(double(sum[i]) / denom);
        double mean;
        double se = mean_stderr(double(sum[i]), double(sumsq[i]), samples, mean);
        t.stderr_.push_back(se / double(M));
    }
    return t;
}

double EmpiricalProbability::stderr_() const {
    if (samples == 0) return 0.0;
    double p = value();
    return std::sqrt(p * (1.0 - p) / double(samples));
}

EmpiricalProbability wegner_probability(const ErgodicSystem& sys, const SamplingFunction& f, double lambda,
                                        std::size_t M, double E, double eps, std::size_t samples,
                                        std::uint64_t seed) {
    check_samples(M, samples);
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    EmpiricalProbability p;
    p.samples = samples;
    for (std::size_t s = 0; s < samples; ++s) {
        auto w = sample_window(sys, f, lambda, M, seed, s);
        OperatorWindow op(w, {0, static_cast<long>(M) - 1});
        if (eigen_count_closed(op, E - eps, E + eps) > 0) ++p.hits;
    }
    return p;
}

EmpiricalProbability subinterval_resonance_frequency(const ErgodicSystem& sys, const SamplingFunction& f,
                                                     double lambda, std::size_t M, double E, double eps,
                                                     std::size_t samples, std::uint64_t seed) {
    check_samples(M, samples);
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    EmpiricalProbability p;
    p.samples = samples;
    for (std::size_t s = 0; s < samples; ++s) {
        auto w = sample_window(sys, f, lambda, M, seed, s);
        if (is_resonant(w, {0, static_cast<long>(M) - 1}, {E, E}, 0.5 * eps).resonant) ++p.hits;
    }
    return p;
}

void WegnerParams::validate() const {
    if (!(C > 0.0)) throw ConfigError("Wegner constant C must be positive");
    if (!(beta >= 0.0)) throw ConfigError("Wegner exponent beta must be nonnegative");
    if (!(rho_exp >= 1.0)) throw ConfigError("Wegner exponent rho must be at least 1");
}

double WegnerParams::bound(double M, double eps) const {
    validate();
    check_eps(eps);
    return C * std::pow(M, beta) / std::pow(std::abs(std::log(eps)), rho_exp);
}

double wegner_to_resonance_bound(const WegnerParams& p, double M, double eps) {
    p.validate();
    if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("eps must lie in (0, 1/2)");
    return p.C * std::pow(M, 2.0 + p.beta) / std::pow(std::abs(std::log(eps)), p.rho_exp);
}

double loghoelder_constant(double alpha, double rho) {
    if (!(alpha > 0.0 && rho > 0.0)) throw ConfigError("alpha and rho must be positive");
    return std::exp(-rho + rho * std::log(rho / alpha));
}

double skew_probability_bound(double lambda, double rho, double M, double eps) {
    check_eps(eps);
    double lg = std::log(std::abs(std::log(eps)));
    return 14.0 * std::max(1.0, 1.0 / lambda) * std::exp(rho * std::log(rho) + 4.0 * std::log(M) - rho * lg);
}

double skew_increment_bound(double lambda, std::size_t N, double eps) {
    return 7.0 * std::max(1.0, 1.0 / lambda) * double(N) * double(N) * eps;
}

std::size_t SkewWegnerReport::violations() const {
    std::size_t v = 0;
    for (auto& r : increments) v += r.violated;
    for (auto& r : probabilities) v += r.violated;
    return v;
}

SkewWegnerReport skewshift_wegner_check(double lambda, double alpha, int K, std::size_t N,
                                        const std::vector<double>& eps_list, const std::vector<double>& E_grid,
                                        std::size_t samples, std::uint64_t seed,
                                        const std::vector<double>& rho_list) {
    if (N < 10) throw ConfigError("the skew-shift Wegner check needs N >= 10");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    check_samples(N, samples);
    for (double e : eps_list) check_eps(e);
    for (double r : rho_list)
        if (!(r >= 1.0)) throw ConfigError("rho must be at least 1");
    auto sys = ErgodicSystem::skew_shift(K, alpha, seed);
    sys.validate();
    const auto f = SamplingFunction::linear_centered();

    const std::size_t ne = E_grid.size(), nx = eps_list.size();
    // per (E, eps): increment sums and hits of the closed eps-window
    std::vector<double> inc_sum(ne * nx, 0.0), inc_sq(ne * nx, 0.0);
    std::vector<std::size_t> hits(ne * nx, 0);
    for (std::size_t s = 0; s < samples; ++s) {
        auto w = sample_window(sys, f, lambda, N, seed, s);
        OperatorWindow op(w, {0, static_cast<long>(N) - 1});
        for (std::size_t i = 0; i < ne; ++i) {
            const double E = E_grid[i];
            const auto base = eigen_count_below(op, E);
            for (std::size_t j = 0; j < nx; ++j) {
                const double eps = eps_list[j];
                double d = double(eigen_count_below(op, E + eps) - base);
                inc_sum[i * nx + j] += d;
                inc_sq[i * nx + j] += d * d;
                if (eigen_count_closed(op, E - eps, E + eps) > 0) ++hits[i * nx + j];
            }
        }
    }

    SkewWegnerReport rep;
    rep.lambda = lambda;
    rep.alpha = alpha;
    rep.K = K;
    rep.N = N;
    rep.samples = samples;
    for (std::size_t i = 0; i < ne; ++i)
        for (std::size_t j = 0; j < nx; ++j) {
            const std::size_t at = i * nx + j;
            SkewIncrementRow r;
            r.E = E_grid[i];
            r.eps = eps_list[j];
            double mean;
            r.stderr_ = mean_stderr(inc_sum[at], inc_sq[at], samples, mean) / double(N);
            r.increment = mean / double(N);
            r.bound = skew_increment_bound(lambda, N, r.eps);
            r.informative = r.bound < 1.0;
            r.violated = r.increment > r.bound + 3.0 * r.stderr_;
            rep.increments.push_back(r);

            EmpiricalProbability p{hits[at], samples};
            for (double rho : rho_list) {
                SkewProbabilityRow q;
                q.E = r.E;
                q.eps = r.eps;
                q.rho = rho;
                q.probability = p.value();
                q.stderr_ = p.stderr_();
                q.bound = skew_probability_bound(lambda, rho, double(N), r.eps);
                q.violated = q.probability > q.bound + 3.0 * q.stderr_;
                q.loghoelder_ok =
                    r.eps <= loghoelder_constant(1.0, rho) / std::pow(std::abs(std::log(r.eps)), rho);
                rep.probabilities.push_back(q);
            }
        }
    return rep;
}

long max_count_difference(const OperatorWindow& a, const OperatorWindow& b, double shift) {
    std::vector<double> pts;
    for (double mu : eigenvalues(a)) pts.push_back(mu + shift);
    for (double nu : eigenvalues(b)) pts.push_back(nu);
    std::sort(pts.begin(), pts.end());
    std::vector<double> probes;
    if (!pts.empty()) {
        probes.push_back(pts.front() - 1.0);
        probes.push_back(pts.back() + 1.0);
    }
    const double tol = 1e-12 * (1.0 + std::max(a.max_abs_diag(), b.max_abs_diag()));
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i] - pts[i - 1] > tol) probes.push_back(0.5 * (pts[i] + pts[i - 1]));
    long worst = 0;
    for (double E : probes) {
        long d = long(eigen_count_below(b, E)) - long(eigen_count_below(a, E - shift));
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

LastCoordinateComparison compare_last_coordinate(double lambda, double alpha, int K, std::size_t N,
                                                 const Point& omega, double t) {
    if (!(t >= 0.0 && t < 1.0)) throw ConfigError("last-coordinate shift must lie in [0, 1)");
    auto sys = ErgodicSystem::skew_shift(K, alpha);
    const auto f = SamplingFunction::linear_centered();
    Point moved = omega;
    moved.back() = std::fmod(moved.back() + t, 1.0);
    auto w0 = potential(sys, f, lambda, omega, N);
    auto w1 = potential(sys, f, lambda, moved, N);
    LastCoordinateComparison c;
    c.N = N;
    c.t = t;
    const double shift = 2.0 * lambda * t;
    for (std::size_t n = 0; n < N; ++n)
        if (w1[n] - w0[n] < shift - lambda) ++c.wrapped_sites;
    const long last = static_cast<long>(N) - 1;
    OperatorWindow a(w0, {0, last}), b(w1, {0, last});
    c.raw_difference = max_count_difference(a, b, 0.0);
    c.compensated_difference = max_count_difference(a, b, shift);
    return c;
}

}  // namespace ergo
