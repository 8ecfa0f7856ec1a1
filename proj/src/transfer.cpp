#include "ergo/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ergo/errors.hpp"

namespace ergo {

namespace {

// Neumaier compensated sum for long runs of log increments.
struct CompensatedSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x)) c += (s - t) + x;
        else c += (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double stderr_of(const std::vector<double>& x, double mean) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return std::sqrt(s / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

void check_kappa(double kappa) {
    if (!(kappa > 0.0 && kappa < std::numbers::pi)) throw ConfigError("kappa must lie in (0, pi)");
    if (std::abs(std::cos(kappa)) < 1e-12) throw ConfigError("kappa = pi/2 is excluded");
}

void check_step(std::span<const double> v, double kappa) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    double step = 3.0 * m / std::abs(std::sin(kappa));
    if (step > kMaxPruferStep)
        throw StepTooLarge("3 max|V| / |sin kappa| = " + std::to_string(step) + " exceeds 1/2");
}

}  // namespace

TransferProduct transfer_product(std::span<const double> v, double E, std::size_t N, std::size_t stride) {
    if (N > v.size()) throw WindowTooShort("transfer product longer than the potential window");
    if (stride == 0) throw ConfigError("rescale stride must be positive");

    // P = Q * r11 * [[1, t], [0, w]] with Q a rotation
    double q00 = 1.0, q01 = 0.0, q10 = 0.0, q11 = 1.0;
    double t = 0.0, w = 1.0;
    CompensatedSum l1, ldet;  // ldet: per-block log(p r22), each block close to 0
    int sign22 = 1;
    double acc_p = 1.0, acc_r = 1.0;

    for (std::size_t n = 0; n < N; ++n) {
        const double a = E - v[n];
        const double m00 = a * q00 - q10, m01 = a * q01 - q11;
        const double m10 = q00, m11 = q01;
        const double p = std::sqrt(m00 * m00 + m10 * m10);
        const double c = m00 / p, s = m10 / p;
        const double r12 = c * m01 + s * m11;
        const double r22 = -s * m01 + c * m11;
        t += (r12 / p) * w;
        w *= r22 / p;
        q00 = c, q10 = s, q01 = -s, q11 = c;
        acc_p *= p;
        if (r22 < 0) sign22 = -sign22;
        acc_r *= std::abs(r22);
        if ((n + 1) % stride == 0) {
            l1.add(std::log(acc_p));
            ldet.add(std::log(acc_p * acc_r));
            acc_p = acc_r = 1.0;
        }
    }
    if (acc_p != 1.0) l1.add(std::log(acc_p));
    if (acc_p != 1.0 || acc_r != 1.0) ldet.add(std::log(acc_p * acc_r));

    TransferProduct P;
    P.N = N;
    P.E = E;
    const double frob = std::sqrt(1.0 + t * t + w * w);
    const double e01 = q00 * t + q01 * w, e11 = q10 * t + q11 * w;
    P.entries = {q00 / frob, e01 / frob, q10 / frob, e11 / frob};
    P.log_scale = l1.value() + std::log(frob);
    const double s2 = 1.0 + t * t + w * w;
    const double smax2 = 0.5 * (s2 + std::sqrt(std::max(0.0, s2 * s2 - 4.0 * w * w)));
    P.log_norm = l1.value() + 0.5 * std::log(smax2);
    P.det_deviation = std::abs(sign22 * std::exp(ldet.value()) - 1.0);
    return P;
}

TransferProduct transfer_product(const PotentialWindow& w, double E, std::size_t N, std::size_t stride) {
    return transfer_product(std::span<const double>(w.values), E, N, stride);
}

std::vector<LyapunovEstimate> lyapunov_scan(const ErgodicSystem& sys, const SamplingFunction& f, double lambda,
                                            const std::vector<double>& energies, std::size_t N,
                                            std::size_t samples, std::uint64_t seed) {
    if (N < 1 || samples < 1) throw ConfigError("lyapunov scan needs N >= 1 and samples >= 1");
    std::vector<std::vector<double>> vals(energies.size());
    std::vector<double> det_dev(energies.size(), 0.0);
    for (std::size_t trial = 0; trial < samples; ++trial) {
        Stream st(seed, trial);
        Point omega = sys.sample_point(st);
        PotentialWindow w = potential(sys, f, lambda, omega, N);
        for (std::size_t i = 0; i < energies.size(); ++i) {
            TransferProduct P = transfer_product(w, energies[i], N);
            vals[i].push_back(P.growth_rate());
            det_dev[i] = std::max(det_dev[i], P.det_deviation);
        }
    }
    std::vector<LyapunovEstimate> out(energies.size());
    for (std::size_t i = 0; i < energies.size(); ++i) {
        auto& e = out[i];
        e.E = energies[i];
        e.value = mean_of(vals[i]);
        e.std_error = stderr_of(vals[i], e.value);
        e.N = N;
        e.samples = samples;
        e.max_det_deviation = det_dev[i];
    }
    return out;
}

LyapunovEstimate lyapunov_estimate(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, double E,
                                   std::size_t N, std::size_t samples, std::uint64_t seed) {
    return lyapunov_scan(sys, f, lambda, {E}, N, samples, seed).front();
}

std::vector<double> lyapunov_trials(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, double E,
                                    std::size_t N, std::size_t samples, std::uint64_t seed) {
    std::vector<double> out;
    for (std::size_t trial = 0; trial < samples; ++trial) {
        Stream st(seed, trial);
        Point omega = sys.sample_point(st);
        out.push_back(transfer_product(potential(sys, f, lambda, omega, N), E, N).growth_rate());
    }
    return out;
}

namespace {

// One Prufer step. (zr, zi) = zeta(n) in, zeta(n+1) out; returns the
// log-rho increment and the phase increment minus kappa.
struct PruferStep {
    double mr, mi;  // mu = e^{2 i kappa}
    double log_inc = 0.0;
    double dphi = 0.0;
    void operator()(double& zr, double& zi, double t) {
        const double wr = zr * mr - zi * mi;
        const double wi = zr * mi + zi * mr;
        log_inc = 0.5 * std::log1p(-t * wi + 0.5 * t * t * (1.0 - wr));
        // zeta' = w - (i t / 2) (w - 1)^2 / (1 + (i t / 2)(w - 1))
        const double a = wr - 1.0, b = wi;
        const double h = 0.5 * t;
        const double nr = -h * 2.0 * a * b, ni = h * (a * a - b * b);
        const double dr = 1.0 - h * b, di = h * a;
        const double dd = dr * dr + di * di;
        const double fr = (nr * dr + ni * di) / dd, fi = (ni * dr - nr * di) / dd;
        const double zr1 = wr - fr, zi1 = wi - fi;
        // arg(zeta' conj(w)) / 2
        dphi = 0.5 * std::atan2(zi1 * wr - zr1 * wi, zr1 * wr + zi1 * wi);
        zr = zr1;
        zi = zi1;
    }
};

void renormalize(double& zr, double& zi) {
    double m = std::sqrt(zr * zr + zi * zi);
    zr /= m;
    zi /= m;
}

}  // namespace

PruferTrajectory prufer_evolve(std::span<const double> v, double kappa, double theta) {
    check_kappa(kappa);
    check_step(v, kappa);
    const double sk = std::sin(kappa);
    PruferStep step{std::cos(2 * kappa), std::sin(2 * kappa)};
    PruferTrajectory tr;
    tr.kappa = kappa;
    tr.theta = theta;
    tr.N = v.size();
    tr.zeta.reserve(v.size() + 1);
    tr.log_rho.reserve(v.size() + 1);
    tr.phi.reserve(v.size() + 1);
    double zr = std::cos(2 * theta), zi = std::sin(2 * theta);
    double lr = 0.0, phi = theta;
    tr.zeta.emplace_back(zr, zi);
    tr.log_rho.push_back(lr);
    tr.phi.push_back(phi);
    for (std::size_t n = 0; n < v.size(); ++n) {
        step(zr, zi, v[n] / sk);
        if ((n + 1) % kZetaRenormStride == 0) renormalize(zr, zi);
        lr += step.log_inc;
        phi += kappa + step.dphi;
        tr.zeta.emplace_back(zr, zi);
        tr.log_rho.push_back(lr);
        tr.phi.push_back(phi);
    }
    return tr;
}

PruferTrajectory prufer_evolve(const PotentialWindow& w, double kappa, double theta) {
    return prufer_evolve(std::span<const double>(w.values), kappa, theta);
}

double prufer_log_rho(std::span<const double> v, double kappa, double theta) {
    check_kappa(kappa);
    check_step(v, kappa);
    const double sk = std::sin(kappa);
    PruferStep step{std::cos(2 * kappa), std::sin(2 * kappa)};
    double zr = std::cos(2 * theta), zi = std::sin(2 * theta), lr = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
        step(zr, zi, v[n] / sk);
        if ((n + 1) % kZetaRenormStride == 0) renormalize(zr, zi);
        lr += step.log_inc;
    }
    return lr;
}

std::vector<double> reconstruct_solution(const PruferTrajectory& tr) {
    const double sk = std::sin(tr.kappa), ck = std::cos(tr.kappa);
    std::vector<double> u(tr.N + 2);
    u[0] = std::exp(tr.log_rho[0]) * std::sin(tr.phi[0]) / sk;
    for (std::size_t n = 0; n <= tr.N; ++n) {
        const double r = std::exp(tr.log_rho[n]);
        u[n + 1] = r * (std::cos(tr.phi[n]) + ck / sk * std::sin(tr.phi[n]));
    }
    return u;
}

double recurrence_residual(const std::vector<double>& u, std::span<const double> v, double E) {
    // u[k] = u(k - 1)
    double worst = 0.0;
    for (std::size_t n = 0; n + 2 < u.size() && n < v.size(); ++n) {
        const double um = u[n], u0 = u[n + 1], up = u[n + 2];
        const double a = E - v[n];
        const double scale = std::abs(up) + std::abs(a * u0) + std::abs(um);
        if (scale == 0.0) continue;
        worst = std::max(worst, std::abs(up - a * u0 + um) / scale);
    }
    return worst;
}

PruferFunctionals prufer_functionals(const PruferTrajectory& tr, std::span<const double> v) {
    if (v.size() < tr.N) throw ConfigError("potential shorter than the trajectory");
    const double sk = std::sin(tr.kappa);
    const std::complex<double> mu(std::cos(2 * tr.kappa), std::sin(2 * tr.kappa));
    PruferFunctionals F;
    if (tr.N == 0) return F;
    for (std::size_t n = 0; n < tr.N; ++n) {
        const double t = v[n] / sk;
        const std::complex<double> w = tr.zeta[n] * mu;
        F.F1 += t * t / 8.0;
        F.F2 -= 0.5 * t * w.imag();
        F.F3 -= 0.25 * t * t * w.real();
        F.F4 += t * t / 8.0 * (w * w).real();
    }
    const double N = static_cast<double>(tr.N);
    F.F1 /= N, F.F2 /= N, F.F3 /= N, F.F4 /= N;
    F.log_rho_rate = tr.log_rho[tr.N] / N;
    F.deviation = std::abs(F.log_rho_rate - F.total());
    return F;
}

double condN1_bound(double sigma2, double kappa) {
    const double s = std::sin(kappa), c = std::cos(kappa);
    return 344.0 * sigma2 / (std::abs(s * c) * std::min(1.0, 2.0 * std::abs(c * c - s * s)));
}

double condlam1_bound(double sigma2, double kappa) {
    const double s = std::sin(kappa), c = std::cos(kappa);
    const double g = std::abs(s * c) * std::min(1.0, 2.0 * std::abs(c * c - s * s));
    return std::abs(s) * std::min(sigma2 / 7000.0, g / (1032.0 * sigma2));
}

LDTParams LDTParams::make(Distribution d, double lambda, double kappa, std::size_t N) {
    check_kappa(kappa);
    LDTParams p;
    LawMoments m = law_moments(d);
    p.distribution = d;
    p.sigma2 = m.sigma2;
    p.sigma4 = m.sigma4;
    p.lambda = lambda;
    p.kappa = kappa;
    p.N = N;
    const double s = std::sin(kappa);
    p.gamma1 = p.sigma2 * lambda * lambda / (8.0 * s * s);
    p.condN1 = static_cast<double>(N) >= condN1_bound(p.sigma2, kappa);
    p.condlam1 = lambda <= condlam1_bound(p.sigma2, kappa);
    return p;
}

double LDTParams::bound() const {
    const double n = static_cast<double>(N);
    return 2400.0 / n * sigma4 / (sigma2 * sigma2) + 3.0 * std::exp(-gamma1 * gamma1 * n / 80000.0);
}

double ldt_theta(std::size_t trial) { return (static_cast<double>(trial % 16) + 0.5) * std::numbers::pi / 16.0; }

LDTResult ldt_experiment(const LDTParams& p, std::size_t trials, std::uint64_t seed) {
    if (trials < 100) throw ConfigError("ldt experiment needs at least 100 trials");
    if (p.N < 1) throw ConfigError("ldt experiment needs N >= 1");
    LDTResult r;
    r.bound = p.bound();
    r.trials = trials;
    r.condN1 = p.condN1;
    r.condlam1 = p.condlam1;
    if (p.gamma1 == 0.0) return r;  // empty deviation event
    const ErgodicSystem sys = ErgodicSystem::iid(p.distribution, seed);
    const SamplingFunction f = SamplingFunction::coordinate();
    double rate_sum = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Stream st(seed, trial);
        Point omega = sys.sample_point(st);
        PotentialWindow w = potential(sys, f, p.lambda, omega, p.N);
        const double rate = prufer_log_rho(w.values, p.kappa, ldt_theta(trial)) / static_cast<double>(p.N);
        rate_sum += rate;
        if (std::abs(rate - p.gamma1) >= p.gamma1 / 6.0) ++r.deviations;
    }
    r.empirical = static_cast<double>(r.deviations) / static_cast<double>(trials);
    r.mean_rate = rate_sum / static_cast<double>(trials);
    return r;
}

RandomConditions random_conditions(double sigma2, double sigma4, double E) {
    RandomConditions c;
    const double g = 4.0 - E * E;
    const double sq = std::sqrt(g);
    c.A = std::min(1.0, std::abs(E * E - 2.0));
    c.K_min = std::max(2800.0 * sigma2 / (std::abs(E) * sq * c.A), 4608.0 * sigma4 / (sigma2 * sigma2));
    c.lambda_max = sq / 2.0 * std::min(sigma2 / 7000.0, std::abs(E) * sq * c.A / (4400.0 * sigma2));
    c.lambda2K_min = 150000.0 * g / sigma2;
    return c;
}

RandomWindowResult random_window_goodness(std::span<const double> V, double lambda, double sigma2, double E,
                                          long K) {
    if (K < 4) throw ConfigError("random window goodness needs K >= 4");
    if (!(std::abs(E) < 2.0) || E == 0.0) throw ConfigError("energy must lie in (-2,0) or (0,2)");
    const std::size_t len = static_cast<std::size_t>(2 * K - 2);
    if (V.size() < len) throw WindowTooShort("random window needs 2K-2 values");

    std::vector<double> d(len);
    for (std::size_t i = 0; i < len; ++i) d[i] = lambda * V[i];

    RandomWindowResult r;
    r.gamma = lambda * lambda * sigma2 / (4.0 * (4.0 - E * E));
    const long Ms[2] = {2 * K - 3, 2 * K - 2};
    int best = -1;
    for (int i = 0; i < 2; ++i) {
        SignedLog det = shifted_determinant(std::span<const double>(d).first(static_cast<std::size_t>(Ms[i])), E);
        r.log_det[i] = det.log_abs;
        if (det.sign != 0 && (best < 0 || det.log_abs > r.log_det[best])) best = i;
    }
    if (best < 0) {
        r.singular = true;
        return r;
    }
    r.M = Ms[best];
    OperatorWindow op(std::span<const double>(d).first(static_cast<std::size_t>(r.M)), 1);
    const double root = std::sqrt(1.0 - std::abs(E) / 2.0);
    const double Kd = static_cast<double>(K);
    r.green_threshold = root / 2.0 * std::exp(-r.gamma * Kd);
    try {
        r.green_1K = std::abs(green(op, E, 1, K));
        r.green_MK = std::abs(green(op, E, r.M, K));
    } catch (const NearSingular&) {
        r.singular = true;
        return r;
    }
    r.resolvent_norm = 1.0 / spectral_distance(op, E);
    r.resolvent_bound = root * 2.0 * Kd * std::exp((10.0 / 3.0 * r.gamma + std::log(6.0)) * Kd);
    r.good = r.green_1K <= r.green_threshold && r.green_MK <= r.green_threshold &&
             r.resolvent_norm <= r.resolvent_bound;

    r.gamma_tilde = r.gamma - (0.5 * std::log(1.0 - std::abs(E) / 2.0) + std::log(2.0)) / Kd;
    r.eps = std::exp(-(r.gamma_tilde + 10.0 / 3.0 * r.gamma + std::log(6.0)) * Kd) / (16.0 * root * Kd);
    GreenCertificate c = certify_green_bound(op, 1, {K - 1, K, r.M}, 0.5 * std::exp(-r.gamma_tilde * Kd),
                                             {E - r.eps, E + r.eps});
    r.good2 = c.status;
    return r;
}

}  // namespace ergo
