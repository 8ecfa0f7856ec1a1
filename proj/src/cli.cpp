#include "ergo/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ergo/dynamics.hpp"
#include "ergo/errors.hpp"
#include "ergo/ids.hpp"
#include "ergo/multiscale.hpp"
#include "ergo/transfer.hpp"

namespace ergo::cli {

using Json = nlohmann::ordered_json;

namespace {

const std::map<std::string, std::string> kCommon = {
    {"seed", "1"}, {"workers", "1"}, {"out", ""}, {"enforce_hypotheses", "false"}};

const std::map<std::string, std::string> kSystem = {
    {"system", "doubling"}, {"alpha", "0.6180339887498949"}, {"dim", "2"},
    {"distribution", "uniform"}, {"system_seed", "0"}, {"f", "cosine"}};

const std::map<std::string, std::string> kGrid = {{"E_min", "-2"}, {"E_max", "2"}, {"E_points", "21"}, {"E", ""}};

std::map<std::string, std::string> merged(std::initializer_list<std::map<std::string, std::string>> parts) {
    std::map<std::string, std::string> out;
    for (auto& p : parts)
        for (auto& [k, v] : p) out[k] = v;
    return out;
}

const std::map<std::string, std::map<std::string, std::string>>& all_defaults() {
    static const std::map<std::string, std::map<std::string, std::string>> d = {
        {"lyapunov", merged({kCommon, kSystem, kGrid, {{"lambda", "1"}, {"N", "10000"}, {"samples", "16"}}})},
        {"prufer-check",
         merged({kCommon,
                 {{"distribution", "uniform"}, {"lambda", "0.1"}, {"kappa", "1.0471975511965976"},
                  {"N", "10000"}, {"samples", "100"}}})},
        {"ldt", merged({kCommon,
                        {{"distribution", "uniform"}, {"lambda", "0.1"}, {"kappa", "1.0471975511965976"},
                         {"N_list", "1000,10000,100000"}, {"samples", "500"}}})},
        {"msa-certify",
         merged({kCommon, kSystem,
                 {{"system", "iid"}, {"f", "coordinate"}, {"lambda", "100"}, {"N", "800"}, {"K", "8"},
                  {"gamma", "2"}, {"sigma", "0.25"}, {"E_min", "9.5"}, {"E_max", "10.5"}, {"grid", "16"},
                  {"M", "3"}, {"Q_max", "1000000"}, {"variant", "eliminate"}}})},
        {"ids", merged({kCommon, kSystem, kGrid,
                        {{"lambda", "1"}, {"N", "20"}, {"samples", "1000"}, {"E_min", "-3"}, {"E_max", "3"},
                         {"E_points", "61"}}})},
        {"wegner-skew",
         merged({kCommon, kGrid,
                 {{"lambda", "0.5"}, {"alpha", "0.6180339887498949"}, {"dim", "3"}, {"N", "20"},
                  {"eps", "1e-5"}, {"rho", "1,15"}, {"samples", "100000"}, {"E_min", "-2.5"},
                  {"E_max", "2.5"}, {"E_points", "11"}}})},
        {"nondegen", merged({kCommon, kSystem,
                             {{"E", ""}, {"eps", "0.1,0.05,0.025,0.0125"}, {"samples", "100000"}}})},
    };
    return d;
}

// ---- value parsing ----

double as_double(const RunConfig& c, const std::string& k) {
    const auto& s = c.get(k);
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("key '" + k + "' expects a number, got '" + s + "'");
    }
}

long as_long(const RunConfig& c, const std::string& k) {
    const auto& s = c.get(k);
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("key '" + k + "' expects an integer, got '" + s + "'");
    }
}

std::size_t as_count(const RunConfig& c, const std::string& k, long min = 1) {
    long v = as_long(c, k);
    if (v < min) throw ConfigError(fmt::format("key '{}' must be at least {}", k, min));
    return static_cast<std::size_t>(v);
}

bool as_bool(const RunConfig& c, const std::string& k) {
    const auto& s = c.get(k);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("key '" + k + "' expects true or false, got '" + s + "'");
}

std::vector<double> as_list(const RunConfig& c, const std::string& k) {
    std::vector<double> out;
    std::stringstream ss(c.get(k));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("key '" + k + "' expects a comma-separated list of numbers");
        }
    }
    return out;
}

std::vector<double> energy_grid(const RunConfig& c) {
    if (!c.get("E").empty()) return as_list(c, "E");
    double lo = as_double(c, "E_min"), hi = as_double(c, "E_max");
    std::size_t n = as_count(c, "E_points");
    if (hi < lo) throw ConfigError("E_max must not be below E_min");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
    return g;
}

ErgodicSystem make_system(const RunConfig& c) {
    ErgodicSystem s;
    s.kind = system_kind_from_string(c.get("system"));
    s.alpha = as_double(c, "alpha");
    s.dim = static_cast<int>(as_long(c, "dim"));
    s.distribution = distribution_from_string(c.get("distribution"));
    s.seed = static_cast<std::uint64_t>(as_long(c, "system_seed"));
    s.validate();
    return s;
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

// ---- worker pool ----

template <class F>
auto parallel_map(std::size_t n, std::size_t workers, F fn) -> std::vector<decltype(fn(std::size_t{0}))> {
    using R = decltype(fn(std::size_t{0}));
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(workers, n); ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    // lowest failing task wins, independent of scheduling
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// ---- reports ----

struct Check {
    std::string name;
    bool passed = true;
    bool numerical = true;  // false: a theorem's inequality checked at the run's parameters
    std::string detail;
};

struct Outcome {
    std::string csv;
    Json results = Json::object();
    std::vector<Check> checks;
    std::vector<std::string> hypotheses_failed;
    bool fatal_hypothesis = false;  // the pipeline could not proceed
};

// condition number of the eigenvector matrix of the free transfer matrix,
// from its Frobenius norm squared and |det|
double cond2(double frob2, double det) {
    double disc = std::sqrt(std::max(0.0, frob2 * frob2 - 4.0 * det * det));
    return std::sqrt((frob2 + disc) / std::max(frob2 - disc, 1e-300));
}

double free_lyapunov(double E) {
    double a = std::abs(E);
    return a > 2.0 ? std::log((a + std::sqrt(a * a - 4.0)) / 2.0) : 0.0;
}

// |(1/N) log||A^N|| - L| is at most log(cond(P)) / N for A = P D P^{-1}.
double free_finite_size(double E, std::size_t N) {
    double a = std::abs(E), n = double(N);
    if (a == 2.0) return std::log(2.0 * (n + 1.0)) / n;
    if (a > 2.0) {
        double mu = (a + std::sqrt(a * a - 4.0)) / 2.0;
        return std::log(cond2(mu * mu + 1.0 / (mu * mu) + 2.0, mu - 1.0 / mu)) / n;
    }
    double c = a / 2.0, s = std::sqrt(1.0 - c * c);
    return std::log(cond2(4.0, 2.0 * s)) / n;
}

Outcome run_lyapunov(const RunConfig& c, std::size_t workers) {
    auto sys = make_system(c);
    auto f = SamplingFunction::from_name(c.get("f"));
    double lambda = as_double(c, "lambda");
    auto grid = energy_grid(c);
    std::size_t N = as_count(c, "N"), samples = as_count(c, "samples");
    auto seed = static_cast<std::uint64_t>(as_long(c, "seed"));
    auto est = parallel_map(grid.size(), workers,
                            [&](std::size_t i) { return lyapunov_estimate(sys, f, lambda, grid[i], N, samples, seed); });
    Outcome o;
    o.csv = "E,L,stderr,N,samples,det_deviation\n";
    double det_dev = 0.0;
    std::size_t free_fail = 0, above = 0;
    for (auto& e : est) {
        o.csv += fmt::format("{},{},{},{},{},{}\n", num(e.E), num(e.value), num(e.std_error), e.N, e.samples,
                             num(e.max_det_deviation));
        det_dev = std::max(det_dev, e.max_det_deviation);
        if (lambda == 0.0 &&
            std::abs(e.value - free_lyapunov(e.E)) > 3.0 * e.std_error + free_finite_size(e.E, N) + 1e-12)
            ++free_fail;
        if (lambda > 1.0 && e.value >= std::log(lambda) / 5.0) ++above;
    }
    // worst case: every step adds a few ulps coherently (periodic potentials do)
    const double det_tol = 4.0 * double(N) * std::numeric_limits<double>::epsilon();
    o.checks.push_back({"transfer_determinant", det_dev <= det_tol, true,
                        fmt::format("max |det A - 1| = {:.3g}, tolerance {:.3g}", det_dev, det_tol)});
    if (lambda == 0.0)
        o.checks.push_back({"free_closed_form", free_fail == 0, true,
                            fmt::format("{} of {} energies off log((|E| + sqrt(E^2 - 4)) / 2)", free_fail, est.size())});
    if (lambda > 1.0) o.results["fraction_at_least_log_lambda_over_5"] = double(above) / double(est.size());
    o.results["energies"] = est.size();
    return o;
}

Outcome run_prufer_check(const RunConfig& c, std::size_t workers) {
    auto d = distribution_from_string(c.get("distribution"));
    double lambda = as_double(c, "lambda"), kappa = as_double(c, "kappa");
    std::size_t N = as_count(c, "N"), trials = as_count(c, "samples");
    auto seed = static_cast<std::uint64_t>(as_long(c, "seed"));
    auto p = LDTParams::make(d, lambda, kappa, N);
    auto sys = ErgodicSystem::iid(d, seed);
    const auto f = SamplingFunction::coordinate();
    struct Row {
        double theta, residual, rate, total, deviation;
    };
    auto rows = parallel_map(trials, workers, [&](std::size_t t) {
        Stream st(seed, t);
        auto w = potential(sys, f, lambda, sys.sample_point(st), N);
        double theta = ldt_theta(t);
        auto tr = prufer_evolve(w, kappa, theta);
        auto u = reconstruct_solution(tr);
        auto F = prufer_functionals(tr, w.values);
        return Row{theta, recurrence_residual(u, w.values, 2.0 * std::cos(kappa)), F.log_rho_rate, F.total(),
                   F.deviation};
    });
    Outcome o;
    o.csv = "trial,theta,residual,log_rho_rate,F_total,deviation\n";
    double worst_res = 0.0, worst_dev = 0.0;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        auto& r = rows[t];
        o.csv += fmt::format("{},{},{},{},{},{}\n", t, num(r.theta), num(r.residual), num(r.rate), num(r.total),
                             num(r.deviation));
        worst_res = std::max(worst_res, r.residual);
        worst_dev = std::max(worst_dev, r.deviation);
    }
    o.checks.push_back({"recurrence_residual", worst_res < 1e-10, true,
                        fmt::format("max relative residual {:.3g}", worst_res)});
    if (!p.condN1) o.hypotheses_failed.push_back("condN1: N >= " + num(condN1_bound(p.sigma2, kappa)));
    if (!p.condlam1) o.hypotheses_failed.push_back("condlam1: lambda <= " + num(condlam1_bound(p.sigma2, kappa)));
    if (p.condN1 && p.condlam1)
        o.checks.push_back({"log_rho_minus_functionals", worst_dev <= p.gamma1 / 12.0, false,
                            fmt::format("max deviation {:.3g}, gamma1 / 12 = {:.3g}", worst_dev, p.gamma1 / 12.0)});
    o.results["gamma1"] = p.gamma1;
    o.results["max_residual"] = worst_res;
    o.results["max_deviation"] = worst_dev;
    return o;
}

Outcome run_ldt(const RunConfig& c, std::size_t workers) {
    auto d = distribution_from_string(c.get("distribution"));
    double lambda = as_double(c, "lambda"), kappa = as_double(c, "kappa");
    std::size_t trials = as_count(c, "samples", 100);
    auto seed = static_cast<std::uint64_t>(as_long(c, "seed"));
    std::vector<std::size_t> Ns;
    for (double x : as_list(c, "N_list")) {
        if (!(x >= 1.0) || x != std::floor(x)) throw ConfigError("N_list entries must be positive integers");
        Ns.push_back(static_cast<std::size_t>(x));
    }
    if (Ns.empty()) throw ConfigError("N_list is empty");
    std::sort(Ns.begin(), Ns.end());
    auto res = parallel_map(Ns.size(), workers, [&](std::size_t i) {
        return std::make_pair(LDTParams::make(d, lambda, kappa, Ns[i]),
                              ldt_experiment(LDTParams::make(d, lambda, kappa, Ns[i]), trials, seed));
    });
    Outcome o;
    o.csv = "N,empirical,bound,trials,deviations,gamma1,mean_rate,condN1,condlam1\n";
    std::size_t over = 0, rises = 0;
    for (std::size_t i = 0; i < res.size(); ++i) {
        auto& [p, r] = res[i];
        o.csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", p.N, num(r.empirical), num(r.bound), r.trials,
                             r.deviations, num(p.gamma1), num(r.mean_rate), int(r.condN1), int(r.condlam1));
        if (r.bound < 1.0 && r.empirical > r.bound) ++over;
        if (i && r.empirical > res[i - 1].second.empirical) ++rises;
        if (!r.condN1) o.hypotheses_failed.push_back(fmt::format("condN1 at N = {}", p.N));
        if (!r.condlam1 && i == 0) o.hypotheses_failed.push_back("condlam1: lambda <= " +
                                                                  num(condlam1_bound(p.sigma2, kappa)));
    }
    o.checks.push_back({"ldt_bound", over == 0, false, fmt::format("{} sizes above a bound below 1", over)});
    o.checks.push_back({"ldt_nonincreasing", rises == 0, false, fmt::format("{} increases along N", rises)});
    return o;
}

Outcome run_msa(const RunConfig& c) {
    auto sys = make_system(c);
    auto f = SamplingFunction::from_name(c.get("f"));
    double lambda = as_double(c, "lambda");
    std::size_t N = as_count(c, "N");
    long K = static_cast<long>(as_count(c, "K"));
    double sigma = as_double(c, "sigma");
    double gamma;
    if (c.get("gamma").empty()) {
        if (!(lambda > 1.0)) throw ConfigError("the default gamma = log(lambda) / 5 needs lambda > 1");
        gamma = std::log(lambda) / 5.0;
    } else {
        gamma = as_double(c, "gamma");
    }
    EnergyInterval energies{as_double(c, "E_min"), as_double(c, "E_max")};
    if (energies.hi < energies.lo) throw ConfigError("E_max must not be below E_min");
    InductionOptions opt;
    opt.variant = step_variant_from_name(c.get("variant"));
    opt.step.Q_max = as_double(c, "Q_max");
    opt.step.grid = as_count(c, "grid", 2);
    opt.M_override = as_long(c, "M");
    if (opt.M_override < 0) throw ConfigError("M must be nonnegative (0 selects the schedule)");
    opt.enforce_hypotheses = false;
    auto seed = static_cast<std::uint64_t>(as_long(c, "seed"));

    Stream st(seed, 0);
    auto pot = potential(sys, f, lambda, sys.sample_point(st), N);
    auto init = initial_criticality(pot, K, gamma, energies, sigma, opt.step.grid);
    Outcome o;
    o.results["L"] = init.L;
    o.results["K"] = K;
    o.results["gamma"] = gamma;
    o.results["delta"] = gamma * double(K);
    o.results["initial_bad_fraction"] = init.bad_fraction;
    o.csv = "level,M,q,E_lo,E_hi,resonant_blocks,eliminated,reverified,max_green_ratio\n";
    if (!init.success) {
        o.hypotheses_failed.push_back(
            fmt::format("initial criticality: bad fraction {} exceeds sigma = {}", num(init.bad_fraction), num(sigma)));
        o.fatal_hypothesis = true;
        return o;
    }
    auto res = run_induction(pot, init, opt);
    for (std::size_t s = 0; s < res.steps.size(); ++s)
        for (auto& ch : res.steps[s].children)
            o.csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", s, res.steps[s].M, ch.q, num(ch.energies.lo),
                                 num(ch.energies.hi), ch.resonant.size(), int(ch.eliminated), ch.reverified,
                                 num(ch.max_green_ratio));
    for (auto& h : res.hypotheses.failed()) o.hypotheses_failed.push_back(h);
    const double kappa = std::exp(-8.0 * sigma - 1.0 / 99.0) / 5.0;
    o.results["j_max"] = res.schedule.j_max;
    o.results["levels"] = res.levels;
    o.results["steps"] = res.steps.size();
    o.results["parent_measure"] = res.parent_measure;
    o.results["surviving_measure"] = res.surviving_measure;
    o.results["surviving_fraction"] = res.surviving_fraction();
    o.results["measure_bound"] = res.measure_bound;
    o.results["measure_bound_applies"] = res.measure_bound_applies;
    o.results["certified_rate"] = res.certified_rate;
    o.results["kappa"] = kappa;
    o.results["kappa_log_lambda"] = lambda > 0 ? kappa * std::log(lambda) : 0.0;
    o.results["certified_rate_at_least_kappa_log_lambda"] = lambda > 0 && res.certified_rate >= kappa * std::log(lambda);
    if (res.measure_bound_applies)
        o.checks.push_back({"surviving_measure_bound", res.measure_bound_ok, false,
                            fmt::format("surviving fraction {} vs bound {}", num(res.surviving_fraction()),
                                        num(res.measure_bound))});
    return o;
}

Outcome run_ids(const RunConfig& c, std::size_t workers) {
    auto sys = make_system(c);
    auto f = SamplingFunction::from_name(c.get("f"));
    double lambda = as_double(c, "lambda");
    std::size_t M = as_count(c, "N"), samples = as_count(c, "samples");
    auto grid = energy_grid(c);
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ConfigError("IDS energy grid must be strictly increasing");
    auto seed = static_cast<std::uint64_t>(as_long(c, "seed"));
    auto parts = parallel_map(grid.size(), workers,
                              [&](std::size_t i) { return ids(sys, f, lambda, M, {grid[i]}, samples, seed); });
    IDSTable t = parts.empty() ? IDSTable{} : parts.front();
    t.energies.clear(), t.values.clear(), t.stderr_.clear();
    for (auto& p : parts) {
        t.energies.push_back(p.energies[0]);
        t.values.push_back(p.values[0]);
        t.stderr_.push_back(p.stderr_[0]);
    }
    Outcome o;
    std::ostringstream os;
    t.write_csv(os);
    o.csv = os.str();
    bool mono = true, bounded = true;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        bounded &= t.values[i] >= 0.0 && t.values[i] <= 1.0;
        if (i) mono &= t.values[i - 1] <= t.values[i];
    }
    o.checks.push_back({"ids_monotone", mono, true, "values nondecreasing along the grid"});
    o.checks.push_back({"ids_in_unit_interval", bounded, true, "values in [0, 1]"});
    return o;
}

Outcome run_wegner_skew(const RunConfig& c, std::size_t workers) {
    double lambda = as_double(c, "lambda"), alpha = as_double(c, "alpha");
    int K = static_cast<int>(as_long(c, "dim"));
    std::size_t N = as_count(c, "N"), samples = as_count(c, "samples");
    auto eps = as_list(c, "eps"), rho = as_list(c, "rho");
    auto grid = energy_grid(c);
    auto seed = static_cast<std::uint64_t>(as_long(c, "seed"));
    if (eps.empty() || rho.empty()) throw ConfigError("eps and rho lists must be nonempty");
    auto parts = parallel_map(grid.size(), workers, [&](std::size_t i) {
        return skewshift_wegner_check(lambda, alpha, K, N, eps, {grid[i]}, samples, seed, rho);
    });
    Outcome o;
    o.csv =
        "E,eps,rho,increment,increment_stderr,increment_bound,informative,probability,probability_stderr,"
        "probability_bound,loghoelder_ok,violated\n";
    std::size_t inc_viol = 0, prob_viol = 0, lh_fail = 0, informative = 0;
    double worst_ratio = 0.0;
    for (auto& rep : parts)
        for (std::size_t j = 0; j < rep.increments.size(); ++j) {
            auto& r = rep.increments[j];
            inc_viol += r.violated;
            informative += r.informative;
            if (r.informative) worst_ratio = std::max(worst_ratio, r.increment / r.bound);
            for (std::size_t k = 0; k < rho.size(); ++k) {
                auto& q = rep.probabilities[j * rho.size() + k];
                prob_viol += q.violated;
                lh_fail += !q.loghoelder_ok;
                o.csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", num(r.E), num(r.eps), num(q.rho),
                                     num(r.increment), num(r.stderr_), num(r.bound), int(r.informative),
                                     num(q.probability), num(q.stderr_), num(q.bound), int(q.loghoelder_ok),
                                     int(r.violated || q.violated));
            }
        }
    o.checks.push_back({"increment_bound", inc_viol == 0, false,
                        fmt::format("{} (E, eps) pairs above 7 max(1, 1/lambda) N^2 eps + 3 stderr", inc_viol)});
    o.checks.push_back({"probability_bound", prob_viol == 0, false,
                        fmt::format("{} (E, eps, rho) triples above the |log eps|^-rho bound", prob_viol)});
    o.checks.push_back({"loghoelder", lh_fail == 0, true, fmt::format("{} failures", lh_fail)});
    o.results["informative_pairs"] = informative;
    o.results["max_increment_over_bound"] = worst_ratio;
    return o;
}

Outcome run_nondegen(const RunConfig& c) {
    auto sys = make_system(c);
    auto f = SamplingFunction::from_name(c.get("f"));
    std::vector<double> E = c.get("E").empty() ? std::vector<double>{} : as_list(c, "E");
    auto eps = as_list(c, "eps");
    std::size_t samples = as_count(c, "samples");
    auto P = estimate_nondegeneracy(f, sys, E, eps, samples);
    Outcome o;
    o.csv = "eps,tail,worst_E\n";
    bool mono = true;
    for (std::size_t i = 0; i < P.epsilon_grid.size(); ++i) {
        o.csv += fmt::format("{},{},{}\n", num(P.epsilon_grid[i]), num(P.measured_tails[i]), num(P.worst_energy[i]));
        if (i) mono &= P.measured_tails[i] <= P.measured_tails[i - 1];
    }
    o.checks.push_back({"tails_nonincreasing", mono, true, "sup-tail shrinks with eps"});
    o.results["F"] = P.F;
    o.results["alpha"] = std::isfinite(P.alpha) ? Json(P.alpha) : Json("inf");
    o.results["degenerate_fit"] = P.degenerate_fit;
    o.results["fit_residual"] = P.fit_residual;
    o.results["energy_points"] = P.energy_points;
    return o;
}

// Parses and checks every key the subcommand uses, so a bad config fails before any file is written.
void validate(const RunConfig& c) {
    const auto& keys = c.values;
    if (keys.count("system")) make_system(c);
    if (keys.count("f")) SamplingFunction::from_name(c.get("f"));
    if (keys.count("distribution")) distribution_from_string(c.get("distribution"));
    if (keys.count("variant")) step_variant_from_name(c.get("variant"));
    if (keys.count("E_points")) energy_grid(c);
    else if (keys.count("E_min")) as_double(c, "E_min"), as_double(c, "E_max");
    as_count(c, "workers");
    as_long(c, "seed");
    as_bool(c, "enforce_hypotheses");
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"lyapunov", "prufer-check", "ldt", "msa-certify",
                                               "ids", "wegner-skew", "nondegen"};
    return s;
}

const std::map<std::string, std::string>& default_config(const std::string& subcommand) {
    auto it = all_defaults().find(subcommand);
    if (it == all_defaults().end()) throw ConfigError("unknown subcommand '" + subcommand + "'");
    return it->second;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ConfigError("key '" + key + "' is not used by " + subcommand);
    return it->second;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        Json j;
        try {
            j = Json::parse(text);
        } catch (const Json::exception& e) {
            throw ConfigError(std::string("unreadable JSON config: ") + e.what());
        }
        if (!j.contains("config") || !j["config"].is_object()) throw ConfigError("JSON config lacks a config object");
        for (auto& [k, v] : j["config"].items()) {
            if (!v.is_string()) throw ConfigError("config value for '" + k + "' must be a string");
            out[k] = v.get<std::string>();
        }
        return out;
    }
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        auto a = s.find_first_not_of(" \t\r");
        auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("config line {} is not key=value", lineno));
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(fmt::format("config line {} has an empty key", lineno));
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

RunConfig resolve_config(const std::string& subcommand, const std::map<std::string, std::string>& file_values,
                         const std::map<std::string, std::string>& flag_values) {
    RunConfig c;
    c.subcommand = subcommand;
    c.values = default_config(subcommand);
    for (auto* src : {&file_values, &flag_values})
        for (auto& [k, v] : *src) {
            if (!c.values.count(k)) throw ConfigError("unknown key '" + k + "' for " + subcommand);
            c.values[k] = v;
        }
    return c;
}

std::string output_directory(const RunConfig& cfg) {
    if (!cfg.get("out").empty()) return cfg.get("out");
    const char* root = std::getenv("RESULTS_DIR");
    std::filesystem::path base = root && *root ? root : "results";
    return (base / cfg.subcommand).string();
}

int run(const RunConfig& cfg, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    std::string error;
    int code = kExitOk;
    std::string out_dir;
    RunConfig echo = cfg;
    try {
        validate(cfg);
        out_dir = output_directory(cfg);
        echo.values["out"] = out_dir;
    } catch (const Error& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    const std::size_t workers = as_count(cfg, "workers");
    try {
        const auto& s = cfg.subcommand;
        if (s == "lyapunov") o = run_lyapunov(cfg, workers);
        else if (s == "prufer-check") o = run_prufer_check(cfg, workers);
        else if (s == "ldt") o = run_ldt(cfg, workers);
        else if (s == "msa-certify") o = run_msa(cfg);
        else if (s == "ids") o = run_ids(cfg, workers);
        else if (s == "wegner-skew") o = run_wegner_skew(cfg, workers);
        else if (s == "nondegen") o = run_nondegen(cfg);
        else throw ConfigError("unknown subcommand '" + s + "'");
    } catch (const Error& e) {
        if (e.category() == Error::Category::config) {
            log << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
        error = e.what();
        code = e.category() == Error::Category::numerical ? kExitNumerical : kExitHypothesis;
        if (code == kExitHypothesis) o.hypotheses_failed.push_back(error);
    }
    std::size_t passed = 0, failed = 0;
    bool numerical_fail = false;
    for (auto& ch : o.checks) {
        ch.passed ? ++passed : ++failed;
        numerical_fail |= !ch.passed;
    }
    if (code == kExitOk) {
        if (numerical_fail) code = kExitNumerical;
        else if (o.fatal_hypothesis || (as_bool(cfg, "enforce_hypotheses") && !o.hypotheses_failed.empty()))
            code = kExitHypothesis;
    }

    Json summary;
    summary["format_version"] = kFormatVersion;
    summary["subcommand"] = cfg.subcommand;
    summary["config"] = Json::object();
    for (auto& [k, v] : echo.values) summary["config"][k] = v;
    summary["exit_code"] = code;
    if (!error.empty()) summary["error"] = error;
    Json checks = Json::array();
    for (auto& ch : o.checks)
        checks.push_back({{"name", ch.name},
                          {"passed", ch.passed},
                          {"kind", ch.numerical ? "numerical" : "inequality"},
                          {"detail", ch.detail}});
    summary["invariants"] = {{"passed", passed}, {"failed", failed}, {"checks", checks}};
    summary["hypotheses_failed"] = o.hypotheses_failed;
    summary["results"] = o.results;
    summary["workers"] = workers;
    summary["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        log << "cannot create " << out_dir << ": " << ec.message() << "\n";
        return kExitConfig;
    }
    if (error.empty()) std::ofstream(std::filesystem::path(out_dir) / "results.csv") << o.csv;
    std::ofstream(std::filesystem::path(out_dir) / "summary.json") << summary.dump(2) << "\n";
    log << fmt::format("{}: exit {}, {} checks passed, {} failed, output in {}\n", cfg.subcommand, code, passed, failed,
                       out_dir);
    for (auto& ch : o.checks)
        if (!ch.passed) log << "  failed " << ch.name << ": " << ch.detail << "\n";
    for (auto& h : o.hypotheses_failed) log << "  hypothesis not met: " << h << "\n";
    return code;
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ergodic Schrodinger operator experiments"};
    app.require_subcommand(1);
    struct Sub {
        CLI::App* app;
        std::string config;
        std::map<std::string, std::string> flags;
        std::vector<std::pair<std::string, CLI::Option*>> options;
    };
    std::map<std::string, Sub> subs;
    static const std::map<std::string, std::string> about = {
        {"lyapunov", "Lyapunov exponent over an energy grid"},
        {"prufer-check", "Prufer reconstruction residual and functional expansion"},
        {"ldt", "large-deviation frequencies of (1/N) log rho_N"},
        {"msa-certify", "initial criticality plus multiscale induction on one window"},
        {"ids", "integrated density of states k_N(E)"},
        {"wegner-skew", "IDS increments and near-eigenvalue probabilities for the skew-shift"},
        {"nondegen", "fit of the sampling-function tail F eps^alpha"}};
    for (const auto& name : subcommands()) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, about.at(name));
        s.app->add_option("--config", s.config, "key=value file or an earlier summary.json");
        for (auto& [k, def] : default_config(name))
            s.options.emplace_back(k, s.app->add_option("--" + k, s.flags[k], "default: " + (def.empty() ? "unset" : def)));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitConfig;
    }
    for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        try {
            std::map<std::string, std::string> file_values, flag_values;
            if (!s.config.empty()) {
                std::ifstream in(s.config);
                if (!in) throw ConfigError("cannot read config file " + s.config);
                std::stringstream ss;
                ss << in.rdbuf();
                file_values = parse_config_text(ss.str());
            }
            for (auto& [k, opt] : s.options)
                if (opt->count()) flag_values[k] = s.flags[k];
            return run(resolve_config(name, file_values, flag_values), err);
        } catch (const Error& e) {
            err << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
    }
    return kExitConfig;
}

}  // namespace ergo::cli
