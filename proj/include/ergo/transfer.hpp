// Transfer matrices, Lyapunov exponents, Prufer variables and the
// large-deviation experiments built on them.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "ergo/dynamics.hpp"
#include "ergo/spectral.hpp"

namespace ergo {

// Products use the one-step matrix [[E - V(n), -1], [1, 0]]; the opposite
// convention [[V(n) - E, ...]] has the same norm.
enum class TransferConvention { e_minus_v };

inline constexpr std::size_t kDefaultRescaleStride = 16;

struct TransferProduct {
    std::array<double, 4> entries{};  // row-major, Frobenius norm 1
    double log_scale = 0.0;           // product = e^{log_scale} * entries
    double log_norm = 0.0;            // log of the operator 2-norm of the product
    double det_deviation = 0.0;       // |det(product) - 1|
    std::size_t N = 0;
    double E = 0.0;
    TransferConvention convention = TransferConvention::e_minus_v;

    double growth_rate() const { return N ? log_norm / static_cast<double>(N) : 0.0; }
};

// A(E,N) = B(V(N-1)) ... B(V(0)); `window` holds the lambda-scaled values.
TransferProduct transfer_product(std::span<const double> window, double E, std::size_t N,
                                 std::size_t stride = kDefaultRescaleStride);
TransferProduct transfer_product(const PotentialWindow& w, double E, std::size_t N,
                                 std::size_t stride = kDefaultRescaleStride);

struct LyapunovEstimate {
    double E = 0.0;
    double value = 0.0;
    double std_error = 0.0;
    std::size_t N = 0;
    std::size_t samples = 0;
    double max_det_deviation = 0.0;
};

// One potential per trial (substream (seed, trial)), shared by every energy.
std::vector<LyapunovEstimate> lyapunov_scan(const ErgodicSystem& sys, const SamplingFunction& f, double lambda,
                                            const std::vector<double>& energies, std::size_t N,
                                            std::size_t samples, std::uint64_t seed);
LyapunovEstimate lyapunov_estimate(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, double E,
                                   std::size_t N, std::size_t samples, std::uint64_t seed);
// Per-trial values of (1/N) log||A||, in trial order.
std::vector<double> lyapunov_trials(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, double E,
                                    std::size_t N, std::size_t samples, std::uint64_t seed);

// ---- Prufer variables at E = 2 cos(kappa) ----

inline constexpr std::size_t kZetaRenormStride = 64;

struct PruferTrajectory {
    double kappa = 0.0;
    double theta = 0.0;
    std::vector<std::complex<double>> zeta;  // zeta[n], n = 0..N
    std::vector<double> log_rho;             // log rho(n), n = 0..N
    std::vector<double> phi;                 // lifted phase, n = 0..N
    std::size_t N = 0;
};

// Largest step size 3 max|V| / |sin kappa| allowed by the recursions.
inline constexpr double kMaxPruferStep = 0.5;

// `v` holds the lambda-scaled potential; state n is advanced with v[n].
PruferTrajectory prufer_evolve(std::span<const double> v, double kappa, double theta);
PruferTrajectory prufer_evolve(const PotentialWindow& w, double kappa, double theta);
// Only log rho(N); no trajectory storage.
double prufer_log_rho(std::span<const double> v, double kappa, double theta);

// Solution values u(-1), u(0), ..., u(N) recovered from (rho, phi); u[k] = u(k-1).
std::vector<double> reconstruct_solution(const PruferTrajectory& traj);
// max_n |u(n+1) - (E - v(n)) u(n) + u(n-1)| / (|u(n+1)| + |E - v(n)||u(n)| + |u(n-1)|)
double recurrence_residual(const std::vector<double>& u, std::span<const double> v, double E);

struct PruferFunctionals {
    double F1 = 0.0, F2 = 0.0, F3 = 0.0, F4 = 0.0;
    double total() const { return F1 + F2 + F3 + F4; }
    double log_rho_rate = 0.0;  // (1/N) log rho(N)
    double deviation = 0.0;     // |(1/N) log rho(N) - total()|
};
PruferFunctionals prufer_functionals(const PruferTrajectory& traj, std::span<const double> v);

// ---- large deviations ----

double condN1_bound(double sigma2, double kappa);    // N must be at least this
double condlam1_bound(double sigma2, double kappa);  // lambda must be at most this

struct LDTParams {
    Distribution distribution = Distribution::uniform;
    double sigma2 = 0.0;
    double sigma4 = 0.0;
    double lambda = 0.0;
    double kappa = 0.0;
    std::size_t N = 0;
    double gamma1 = 0.0;
    bool condN1 = false;
    bool condlam1 = false;

    static LDTParams make(Distribution d, double lambda, double kappa, std::size_t N);
    double bound() const;  // 2400 sigma4 / (N sigma2^2) + 3 exp(-gamma1^2 N / 80000)
};

// Phase grid used for the initial angle: trial t uses (t mod 16 + 1/2) pi / 16.
double ldt_theta(std::size_t trial);

struct LDTResult {
    double empirical = 0.0;  // fraction with |(1/N) log rho_N - gamma1| >= gamma1 / 6
    double bound = 0.0;
    std::size_t trials = 0;
    std::size_t deviations = 0;
    bool condN1 = false;
    bool condlam1 = false;
    double mean_rate = 0.0;  // mean of (1/N) log rho_N
};
LDTResult ldt_experiment(const LDTParams& p, std::size_t trials, std::uint64_t seed);

// ---- single random windows ----

struct RandomConditions {
    double A = 0.0;  // min(1, |E^2 - 2|)
    double K_min = 0.0;
    double lambda_max = 0.0;
    double lambda2K_min = 0.0;  // lambda^2 K must be at least this
    bool holds(double lambda, long K) const {
        return static_cast<double>(K) >= K_min && lambda <= lambda_max &&
               lambda * lambda * static_cast<double>(K) >= lambda2K_min;
    }
};
RandomConditions random_conditions(double sigma2, double sigma4, double E);

struct RandomWindowResult {
    long M = 0;  // chosen length, 2K-3 or 2K-2
    bool good = false;
    bool singular = false;  // both candidate determinants vanish
    double gamma = 0.0;     // lambda^2 sigma2 / (4 (4 - E^2))
    double log_det[2] = {0.0, 0.0};
    double green_1K = 0.0;
    double green_MK = 0.0;
    double green_threshold = 0.0;
    double resolvent_norm = 0.0;
    double resolvent_bound = 0.0;
    // shrunk-interval check on [E - eps, E + eps] with the adjusted rate
    double eps = 0.0;
    double gamma_tilde = 0.0;
    GoodStatus good2 = GoodStatus::unverifiable;
};

// `V` holds raw values (before lambda) for sites 1..2K-2.
RandomWindowResult random_window_goodness(std::span<const double> V, double lambda, double sigma2, double E,
                                          long K);

}  // namespace ergo
