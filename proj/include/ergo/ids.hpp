// Integrated density of states by eigenvalue counting, Wegner-type
// probabilities and the skew-shift increment bound.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ergo/dynamics.hpp"
#include "ergo/spectral.hpp"

namespace ergo {

// k_M(E) = (1/M) E_omega #{eigenvalues of H_[0,M-1] strictly below E}.
struct IDSTable {
    std::size_t M = 0;
    std::vector<double> energies;  // increasing
    std::vector<double> values;
    std::vector<double> stderr_;   // standard error of each value
    std::size_t samples = 0;
    double lambda = 0.0;
    std::string system;
    std::string f;

    // columns E,k_M,stderr,M,samples,lambda
    void write_csv(std::ostream& os) const;
};

// Sample s uses omega drawn from Stream(seed, s), so tables over different
// grids share their ensembles.
IDSTable ids(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, std::size_t M,
             const std::vector<double>& grid, std::size_t samples, std::uint64_t seed);

struct EmpiricalProbability {
    std::size_t hits = 0;
    std::size_t samples = 0;
    double value() const { return samples ? double(hits) / double(samples) : 0.0; }
    double stderr_() const;  // binomial
};

// Fraction of omega with dist(spectrum of H_[0,M-1], E) <= eps.
EmpiricalProbability wegner_probability(const ErgodicSystem& sys, const SamplingFunction& f, double lambda,
                                        std::size_t M, double E, double eps, std::size_t samples,
                                        std::uint64_t seed);

// Fraction of omega for which some subinterval of [0,M-1] has an eigenvalue within eps/2 of E.
EmpiricalProbability subinterval_resonance_frequency(const ErgodicSystem& sys, const SamplingFunction& f,
                                                     double lambda, std::size_t M, double E, double eps,
                                                     std::size_t samples, std::uint64_t seed);

// P(dist <= eps) <= C M^beta / |log eps|^rho_exp for 0 < eps <= 1/2.
struct WegnerParams {
    double C = 1.0;
    double beta = 0.0;
    double rho_exp = 1.0;

    void validate() const;
    bool exponents_compatible() const { return 3.0 * beta + 3.0 - rho_exp <= 0.0; }
    double bound(double M, double eps) const;
};

// C M^{2+beta} / |log eps|^rho_exp: some subinterval of [0,M-1] is eps/2-resonant.
double wegner_to_resonance_bound(const WegnerParams& p, double M, double eps);

// e^{-rho} (rho/alpha)^rho, the smallest C with eps^alpha <= C / |log eps|^rho on (0,1).
double loghoelder_constant(double alpha, double rho);

// 14 max(1, 1/lambda) rho^rho M^4 / |log eps|^rho
double skew_probability_bound(double lambda, double rho, double M, double eps);
// 7 max(1, 1/lambda) N^2 eps
double skew_increment_bound(double lambda, std::size_t N, double eps);

struct SkewIncrementRow {
    double E = 0.0, eps = 0.0;
    double increment = 0.0;  // k_N(E + eps) - k_N(E)
    double stderr_ = 0.0;
    double bound = 0.0;
    bool informative = false;  // bound < 1
    bool violated = false;     // increment > bound + 3 stderr
};

struct SkewProbabilityRow {
    double E = 0.0, eps = 0.0, rho = 0.0;
    double probability = 0.0;  // P(dist(spectrum, E) <= eps)
    double stderr_ = 0.0;
    double bound = 0.0;
    bool violated = false;
    bool loghoelder_ok = false;  // eps <= C(1, rho) / |log eps|^rho
};

struct SkewWegnerReport {
    double lambda = 0.0, alpha = 0.0;
    int K = 0;
    std::size_t N = 0, samples = 0;
    std::vector<SkewIncrementRow> increments;
    std::vector<SkewProbabilityRow> probabilities;
    std::size_t violations() const;
};

// Skew-shift T_{alpha,K} with f = linear-centered, windows [0, N-1].
SkewWegnerReport skewshift_wegner_check(double lambda, double alpha, int K, std::size_t N,
                                        const std::vector<double>& eps_list, const std::vector<double>& E_grid,
                                        std::size_t samples, std::uint64_t seed,
                                        const std::vector<double>& rho_list = {1.0, 15.0});

// sup over E of |#{b < E} - #{a < E - shift}|, evaluated between consecutive
// eigenvalues of both windows.
long max_count_difference(const OperatorWindow& a, const OperatorWindow& b, double shift = 0.0);

struct LastCoordinateComparison {
    std::size_t N = 0;
    double t = 0.0;
    std::size_t wrapped_sites = 0;  // sites where the last coordinate crossed 1
    long raw_difference = 0;        // without removing the constant shift 2 lambda t
    long compensated_difference = 0;
};

// omega and omega with its last coordinate moved by t. With f = linear-centered
// the potentials differ by 2 lambda t minus 2 lambda at each wrapped site.
LastCoordinateComparison compare_last_coordinate(double lambda, double alpha, int K, std::size_t N,
                                                 const Point& omega, double t);

}  // namespace ergo
