// Ergodic transformations, sampling functions and potential windows.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ergo/rng.hpp"

namespace ergo {

enum class SystemKind { doubling, skew_shift, iid, rotation };
enum class Distribution { uniform, bernoulli };

// Number of doubling steps taken exactly in floating point; later orbit
// points come from the simulated binary tail.
inline constexpr int kExactDoublingSteps = 48;

inline const double kGoldenMean = 0.6180339887498949;  // (sqrt 5 - 1) / 2

using Point = std::vector<double>;

struct ErgodicSystem {
    SystemKind kind = SystemKind::doubling;
    double alpha = kGoldenMean;  // skew-shift and rotation
    int dim = 1;                 // skew-shift torus dimension K
    Distribution distribution = Distribution::uniform;  // iid only
    std::uint64_t seed = 0;

    static ErgodicSystem doubling(std::uint64_t seed = 0);
    static ErgodicSystem skew_shift(int K, double alpha = kGoldenMean, std::uint64_t seed = 0);
    static ErgodicSystem iid(Distribution d = Distribution::uniform, std::uint64_t seed = 0);
    static ErgodicSystem rotation(double alpha = kGoldenMean, std::uint64_t seed = 0);

    int point_dim() const { return kind == SystemKind::skew_shift ? dim : 1; }
    void validate() const;
    // A point distributed according to the invariant measure.
    Point sample_point(Stream& s) const;
};

std::string to_string(SystemKind k);
SystemKind system_kind_from_string(const std::string& s);
std::string to_string(Distribution d);
Distribution distribution_from_string(const std::string& s);

// (second moment, fourth central moment of x^2) of an iid law on [-1,1].
struct LawMoments {
    double mean;
    double sigma2;
    double sigma4;
};
LawMoments law_moments(Distribution d);

// Streaming orbit: current() is T^n omega, advance() moves to n+1.
class OrbitCursor {
public:
    OrbitCursor(const ErgodicSystem& sys, const Point& omega);
    const Point& current() const { return x_; }
    void advance();
    std::size_t step() const { return n_; }

private:
    void refill_tail();

    ErgodicSystem sys_;
    Point x_;
    std::size_t n_ = 0;
    // doubling: 64-digit window of the binary expansion
    std::uint64_t window_ = 0;
    Stream tail_;
    std::uint64_t tail_word_ = 0;
    int tail_left_ = 0;
    // iid
    Stream iid_;
};

std::vector<Point> orbit(const ErgodicSystem& sys, const Point& omega, std::size_t n_steps);

enum class SamplingKind { cosine, linear_centered, coordinate, table };

struct SamplingFunction {
    SamplingKind kind = SamplingKind::cosine;
    std::vector<double> table_x;  // ascending, in [0,1)
    std::vector<double> table_y;
    std::string source;           // table file, if any

    static SamplingFunction cosine() { return {SamplingKind::cosine, {}, {}, {}}; }
    static SamplingFunction linear_centered() { return {SamplingKind::linear_centered, {}, {}, {}}; }
    static SamplingFunction coordinate() { return {SamplingKind::coordinate, {}, {}, {}}; }
    static SamplingFunction table(std::vector<double> x, std::vector<double> y, std::string source = {});
    // Two-column text file "x f(x)", '#' comments allowed.
    static SamplingFunction table_from_file(const std::string& path);
    // "cosine", "linear-centered", "coordinate" or "table:<path>"
    static SamplingFunction from_name(const std::string& name);

    std::string name() const;
    double bound() const;
    // Applied to the last coordinate of the point.
    double operator()(const Point& p) const { return eval(p.back()); }
    double eval(double x) const;
    // Mean of f under the invariant measure of `sys` (recorded, never enforced).
    double mean(const ErgodicSystem& sys) const;
};

struct PotentialOrigin {
    ErgodicSystem system;
    Point omega;
    std::string f_name;
    double f_mean = 0.0;
};

struct PotentialWindow {
    std::vector<double> values;  // values[n] = lambda f(T^n omega)
    double lambda = 0.0;
    PotentialOrigin origin;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double max_abs() const;
};

PotentialWindow potential(const ErgodicSystem& sys, const SamplingFunction& f, double lambda,
                          const Point& omega, std::size_t N);
// Window built from raw values (synthetic experiments and imports).
PotentialWindow potential_from_values(std::vector<double> values, double lambda = 1.0);

void export_potential(std::ostream& os, const PotentialWindow& w);
PotentialWindow import_potential(std::istream& is);

struct NondegeneracyProfile {
    double F = 0.0;
    double alpha = 0.0;
    bool degenerate_fit = false;  // every tail was zero: alpha = +inf, F = 0
    std::vector<double> epsilon_grid;
    std::vector<double> measured_tails;  // sup over the energy grid
    std::vector<double> worst_energy;
    double fit_residual = 0.0;           // max |log tail - log(F eps^alpha)|
    std::size_t energy_points = 0;
};

// Empty E_grid: 64 points spanning the sampled image of f.
NondegeneracyProfile estimate_nondegeneracy(const SamplingFunction& f, const ErgodicSystem& sys,
                                            std::vector<double> E_grid,
                                            const std::vector<double>& eps_grid,
                                            std::size_t samples);

}  // namespace ergo
