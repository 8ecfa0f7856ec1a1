// Criticality witnesses, the scale schedule, one multiscale step and the
// inductive driver, plus the conversion of Green decay into growth rates.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergo/dynamics.hpp"
#include "ergo/spectral.hpp"

namespace ergo {

// A (delta, sigma, L, energies)-critical sequence k_0 < ... < k_{L+1} in [0, N].
// Block l is [k_{l-1}+1, k_{l+1}-1], centred at k_l; blocks in `badset` may fail
// |G(E, k_l, k_{l+-1} -+ 1)| <= e^{-delta}/2.
struct CriticalityWitness {
    double delta = 0.0;
    double sigma = 0.0;
    long L = 0;
    EnergyInterval energies;
    std::vector<long> k;       // size L + 2
    std::vector<long> badset;  // sorted, values in [1, L]
    std::size_t grid = 16;     // initial certification grid used for the checks

    bool is_bad(long l) const;
    double bad_fraction() const { return L > 0 ? double(badset.size()) / double(L) : 1.0; }
    SiteInterval block(long l) const { return {k[l - 1] + 1, k[l + 1] - 1}; }
};

// Throws ConfigError on a malformed witness (ordering, sizes, range).
void validate_witness_shape(const CriticalityWitness& w, std::size_t N);

struct BlockCheck {
    long l = 0;
    GreenCertificate cert;
};
// Re-runs the Green check of every block; returns the blocks that are not certified good.
std::vector<long> failing_blocks(const PotentialWindow& pot, const CriticalityWitness& w,
                                 std::vector<BlockCheck>* details = nullptr);

struct CriticalityReport {
    bool success = false;
    long L = 0;
    long K = 0;
    double gamma = 0.0;
    double bad_fraction = 0.0;
    std::vector<long> bad_blocks;
    CriticalityWitness witness;  // meaningful only when success
};

// k_j = jK, delta = gamma K, L = floor(N/K) - 1. Block l is certified against
// |G_[(l-1)K+1, (l+1)K-1](E, lK, lK +- (K-1))| <= e^{-gamma K}/2 on `energies`.
CriticalityReport initial_criticality(const PotentialWindow& pot, long K, double gamma, EnergyInterval energies,
                                      double sigma, std::size_t grid = 16);

// ---- scale schedule ----

struct ScaleSchedule {
    double sigma0 = 0.0, delta0 = 0.0;
    long L0 = 0;
    long N = 0;
    int j_max = -1;
    // indexed j = 0..j_max
    std::vector<double> M, sigma, delta, eps, K_wegner;
    std::vector<long> L;
    // per-j bracket checks
    std::vector<bool> delta_bracket;  // delta_j >= e^{-4 sigma} 10^{j(j+1)} delta
    std::vector<bool> L_bracket;      // e^{-4 sigma} e^{-1/99} L 10^{-j(j+1)} <= L_j <= L 10^{-j(j+1)}
    std::vector<bool> sigma_delta_bracket;  // sigma_j delta_j >= e^{-4 sigma} 10^{j^2} 5^j sigma delta
    std::vector<bool> K_wegner_bracket;     // K_j <= e^{4 sigma} e^{1/99} (N / L) 10^{3(j+1)(j+2)}

    bool all_brackets_hold() const;
};

// Exact integer identity prod_{k=0}^{j} 100^{k+1} == 10^{(j+1)(j+2)}.
bool product_identity_holds(int j);
std::string product_of_M(int j);  // decimal digits of the product

// Realized L_{j+1} = ceil((1 - 2 sigma_j) L_j / (M_j + 1)), the smallest value the step guarantees.
ScaleSchedule scale_schedule(double delta, double sigma, long L, long N);

// ---- energy subdivision ----

inline constexpr double kDefaultQMax = 1e6;

struct EnergyChild {
    std::uint64_t q = 0;
    EnergyInterval energies;
};

struct EnergySubdivision {
    EnergyInterval parent;
    std::uint64_t Q = 0;
    bool audited = false;  // only a subset of the Q children was built
    std::vector<EnergyChild> children;

    // Endpoint q of the partition; the same expression serves both neighbours.
    double endpoint(std::uint64_t q) const;
};

// Q = ceil(|parent| e^{sigma delta}). Beyond Q_max the call fails with
// QCapExceeded unless `audit` names the children to build.
EnergySubdivision subdivide_energy(EnergyInterval parent, double sigma, double delta, double Q_max = kDefaultQMax,
                                   const std::vector<std::uint64_t>* audit = nullptr);

// ---- coarse points ----

struct CoarsePoints {
    std::vector<long> k;        // k~_0 .. k~_{L~+1}
    std::vector<long> indices;  // l_j with k~_j = k_{l_j}
    long L = 0;
};

// Greedy choice: k~_{j+1} = k_l for the smallest l leaving exactly M good
// blocks strictly between k~_j and k~_{j+1}.
CoarsePoints choose_coarse(const CriticalityWitness& w, long M);

// L~_0: coarse blocks with k~_{l+1} - k~_{l-1} >= 16 N (M+1) / (sigma L).
std::vector<long> long_coarse_blocks(const CoarsePoints& c, long N, long M, double sigma, long L);

// ---- the step ----

enum class StepVariant { eliminate, wegner };
std::string to_string(StepVariant v);
StepVariant step_variant_from_name(const std::string& s);

struct StepOptions {
    double Q_max = kDefaultQMax;
    std::optional<std::vector<std::uint64_t>> audit;  // children to build beyond the cap
    std::size_t grid = 16;                            // initial certification grid
};

struct ChildOutcome {
    std::uint64_t q = 0;
    EnergyInterval energies;
    std::vector<long> resonant;  // the coarse blocks l with a resonant [k~_{l-1}, k~_{l+1}]
    std::vector<ResonanceWitness> resonance_witnesses;
    bool eliminated = false;
    std::optional<CriticalityWitness> witness;
    std::size_t reverified = 0;  // surviving blocks checked directly
    double max_green_ratio = 0.0;  // max |G| / threshold over the re-verified blocks
};

struct StepOutcome {
    StepVariant variant = StepVariant::eliminate;
    long M = 0;
    long N = 0;
    double delta_old = 0.0, sigma_old = 0.0;
    long L_old = 0;
    double delta_new = 0.0, sigma_new = 0.0;
    long L_new = 0;
    CoarsePoints coarse;
    std::vector<long> long_blocks;  // L~_0
    double resonance_eps = 0.0;     // 2 e^{-sigma delta}
    double threshold_new = 0.0;     // e^{-delta~}/2
    std::uint64_t Q = 0;
    bool audited = false;
    std::vector<ChildOutcome> children;
    std::vector<std::uint64_t> eliminated;
    double eliminated_bound = 0.0;  // (2^15/sigma~) ((M+1) N / (sigma L))^3
    double L_lower = 0.0, L_upper = 0.0;
    std::size_t resonance_checks = 0;
    long greenimp_iterations = 0;  // M resolvent expansions per side in the decay argument
    // wegner variant
    long wegner_window = 0;
    long wegner_resonant = 0;
    double wegner_allowance = 0.0;  // (sigma/4)(1 - 2 sigma) L / (M + 1)

    std::size_t surviving() const;
};

// Preconditions: M >= 3, sigma <= 1/4, sigma L / M >= 2 (ConditionViolated otherwise).
// Every surviving (l, q) pair is re-checked directly; a failure raises ReverificationFailure.
StepOutcome multiscale_step(const PotentialWindow& pot, const CriticalityWitness& w, long M, StepVariant variant,
                            const StepOptions& opt = {});

// ---- the induction ----

struct InductionHypotheses {
    bool cond1 = false;  // sigma L / M_0 >= 2
    bool cond2 = false;  // |E| >= e^{-sigma delta / 25}
    bool cond3 = false;  // 2^17 e^{12 sigma} / sigma^4 (N/L)^3 <= e^{(8/25) e^{-4 sigma} sigma delta}
    bool asA1 = false;   // gamma K >= max(1/sigma, (25/sigma) ln(1/|E|))
    bool asA2 = false;   // e^{(8/75) sigma gamma K} / K^3 >= 2^17 e^3 / sigma^4
    std::vector<std::string> failed() const;
};
InductionHypotheses induction_hypotheses(const CriticalityWitness& w, long N, long K, double gamma);

struct InductionOptions {
    StepVariant variant = StepVariant::eliminate;
    StepOptions step;
    bool enforce_hypotheses = true;  // otherwise failures are only reported
    long M_override = 0;             // > 0: single step with this M instead of the schedule
};

struct InductionResult {
    InductionHypotheses hypotheses;
    ScaleSchedule schedule;
    std::vector<StepOutcome> steps;       // in execution order
    std::vector<CriticalityWitness> final_witnesses;
    std::vector<EnergyInterval> surviving;
    double parent_measure = 0.0;
    double surviving_measure = 0.0;  // total length of the surviving intervals
    double surviving_fraction() const { return parent_measure > 0 ? surviving_measure / parent_measure : 0.0; }
    double measure_bound = 0.0;      // 1 - e^{-(8/25) sigma gamma K}
    bool measure_bound_applies = false;  // asA1 and asA2 hold
    bool measure_bound_ok = true;
    double certified_rate = 0.0;     // e^{-8 sigma} e^{-1/99} gamma - sqrt(2) / (L K)
    int levels = 0;                  // steps executed along each branch
};

// Throws HypothesisViolated naming the failing inequality when enforcing.
InductionResult run_induction(const PotentialWindow& pot, const CriticalityReport& initial,
                              const InductionOptions& opt = {});

// ---- from Green decay to Lyapunov growth ----

struct GreenBound {
    long a = 0;  // Lambda = [a, N], a in {0, 1}
    long k = 0;
    double value = 0.0;  // upper bound on |G_Lambda(E, k, N)|
};

// The four values |G_[a,N](E, k, N)| for a in {0,1}, k in {k0-1, k0}.
std::vector<GreenBound> boundary_green_values(const PotentialWindow& pot, double E, long k0, long N);

struct LyapunovLowerBound {
    double E = 0.0;
    long N = 0;
    long k0 = 0;
    double gamma = 0.0;  // largest rate with every input bound <= e^{-gamma N}
    double bound = 0.0;  // gamma - log(sqrt 2) / N
    double measured = 0.0;  // (1/N) log ||A(E, N+1)||, the product over V(0..N)
    bool cross_check = false;
};

// Needs bounds for both Lambda and both k for a single k0 (MissingInput otherwise)
// and a window holding V(0..N).
LyapunovLowerBound greens_to_lyapunov(const PotentialWindow& pot, double E, long N,
                                      const std::vector<GreenBound>& bounds);

// ---- serialization ----

inline constexpr int kMultiscaleFormatVersion = 1;
std::string witness_to_json(const CriticalityWitness& w);
CriticalityWitness witness_from_json(const std::string& s);
std::string step_to_json(const StepOutcome& s);

}  // namespace ergo
