// Finite Dirichlet restrictions H_[a,b] = Laplacian + V of the Schrodinger
// operator: spectra, Green functions, resonances, Combes-Thomas, good blocks.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ergo/dynamics.hpp"

namespace ergo {

struct SiteInterval {
    long a = 0;
    long b = -1;  // inclusive; empty when b < a
    long size() const { return b >= a ? b - a + 1 : 0; }
    bool contains(long x) const { return x >= a && x <= b; }
};

struct EnergyInterval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
};

// View of the restriction of a potential to [a,b]. Does not own the values.
class OperatorWindow {
public:
    OperatorWindow(const PotentialWindow& w, SiteInterval I);
    OperatorWindow(std::span<const double> diag, long first_site = 0);

    std::span<const double> diag() const { return diag_; }
    long first() const { return first_; }
    long last() const { return first_ + static_cast<long>(diag_.size()) - 1; }
    std::size_t size() const { return diag_.size(); }
    double max_abs_diag() const;
    OperatorWindow sub(SiteInterval I) const;

private:
    std::span<const double> diag_;
    long first_ = 0;
};

// Determinant of (H - E) in sign / log-magnitude form. Empty window: 1.
struct SignedLog {
    int sign = 1;  // 0 means exactly zero
    double log_abs = 0.0;
    double value() const;
};
SignedLog shifted_determinant(std::span<const double> diag, double E);

std::vector<double> eigenvalues(const OperatorWindow& op);
// Number of eigenvalues strictly below E (Sturm sign count).
std::size_t eigen_count_below(const OperatorWindow& op, double E);
// Number of eigenvalues in the closed interval [lo, hi].
std::size_t eigen_count_closed(const OperatorWindow& op, double lo, double hi);
double spectral_distance(const OperatorWindow& op, double E);

inline constexpr double kNearSingularTol = 1e-12;
inline constexpr double kGreenAgreementTol = 1e-8;

// Both internal routes, exposed for cross-validation.
double green_solve(const OperatorWindow& op, double E, long x, long y);
SignedLog green_cramer(const OperatorWindow& op, double E, long x, long y);
// Checked entry of the resolvent (H_Lambda - E)^{-1}.
double green(const OperatorWindow& op, double E, long x, long y);

// Pivoted tridiagonal factorization of H - E, reusable for many right-hand sides.
class ShiftedSolver {
public:
    ShiftedSolver(std::span<const double> diag, double E);
    // overwrites rhs with (H - E)^{-1} rhs
    void solve(std::vector<double>& rhs) const;
    std::vector<double> column(std::size_t j) const;

private:
    std::size_t n_;
    std::vector<double> dl_, d_, du_, du2_;
    std::vector<int> ipiv_;
};

// Frobenius norm of the resolvent and the Hadamard-type bound M (4 + 2C)^{M/2} / |det|
// with C = max|V|; both as logarithms.
double log_resolvent_hs_norm(const OperatorWindow& op, double E);
double log_hadamard_resolvent_bound(const OperatorWindow& op, double E);

struct ResonanceWitness {
    SiteInterval lambda_interval;
    double eigen_lo = 0.0;  // bracket around an eigenvalue in [E0 - eps, E1 + eps]
    double eigen_hi = 0.0;
};
struct ResonanceResult {
    bool resonant = false;
    std::optional<ResonanceWitness> witness;
};
ResonanceResult is_resonant(const PotentialWindow& w, SiteInterval I, EnergyInterval energies, double eps);
ResonanceResult is_resonant(std::span<const double> values, SiteInterval I, EnergyInterval energies, double eps);

struct CombesThomas {
    double gamma;
    double K;
};
CombesThomas combes_thomas(double delta);

enum class GoodStatus { good, bad, unverifiable };
std::string to_string(GoodStatus s);

struct GreenCertificate {
    GoodStatus status = GoodStatus::unverifiable;
    double threshold = 0.0;
    double max_green = 0.0;  // largest |G| seen on the grid
    double max_slack = 0.0;  // largest gap between a cell bound and the grid values
    double worst_energy = 0.0;
    std::size_t grid_points = 0;
    std::string note;
};

struct CertifyOptions {
    std::size_t initial_grid = 16;
    std::size_t max_grid = std::size_t{1} << 20;
};

// Certifies |G_Lambda(E, x, y)| <= threshold for every y in `targets` and all
// E in `energies`. |G| is a ratio of characteristic polynomials, so each grid
// cell gets an upper bound from the zeros and poles; cells are halved until
// every bound is below the threshold. An eigenvalue inside `energies` is bad.
GreenCertificate certify_green_bound(const OperatorWindow& op, long x, const std::vector<long>& targets,
                                     double threshold, EnergyInterval energies, CertifyOptions opt = {});

// [a-K, a+K] is (gamma, energies)-good: |G(E, a, a +- K)| <= e^{-gamma K} / 2 on the interval.
GreenCertificate is_good(const PotentialWindow& w, long a, long K, double gamma, EnergyInterval energies,
                         std::size_t grid);

}  // namespace ergo
