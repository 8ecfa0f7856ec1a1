#include "ergo/multiscale.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <set>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "ergo/errors.hpp"
#include "ergo/transfer.hpp"
#include "json.hpp"

namespace ergo {

namespace {

using nlohmann::json;

std::string fmt_num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

GreenCertificate certify_block(const PotentialWindow& pot, SiteInterval block, long centre, double threshold,
                               EnergyInterval energies, std::size_t grid) {
    OperatorWindow op(pot, block);
    CertifyOptions opt;
    opt.initial_grid = grid;
    return certify_green_bound(op, centre, {block.a, block.b}, threshold, energies, opt);
}

void check_sigma(double sigma) {
    if (!(sigma > 0.0 && sigma <= 0.25)) throw ConfigError("sigma must lie in (0, 1/4]");
}

}  // namespace

bool CriticalityWitness::is_bad(long l) const { return std::binary_search(badset.begin(), badset.end(), l); }

void validate_witness_shape(const CriticalityWitness& w, std::size_t N) {
    check_sigma(w.sigma);
    if (!(w.delta > 0.0)) throw ConfigError("witness delta must be positive");
    if (w.L < 1) throw ConfigError("witness needs L >= 1");
    if (w.k.size() != static_cast<std::size_t>(w.L + 2)) throw ConfigError("witness needs L + 2 points");
    if (w.k.front() < 0 || w.k.back() > static_cast<long>(N)) throw ConfigError("witness points leave [0, N]");
    for (std::size_t i = 1; i < w.k.size(); ++i)
        if (w.k[i] <= w.k[i - 1]) throw ConfigError("witness points must increase strictly");
    for (std::size_t i = 0; i < w.badset.size(); ++i) {
        if (w.badset[i] < 1 || w.badset[i] > w.L) throw ConfigError("bad block index outside [1, L]");
        if (i && w.badset[i] <= w.badset[i - 1]) throw ConfigError("bad set must be sorted and unique");
    }
    if (w.energies.hi < w.energies.lo) throw ConfigError("witness energy interval is empty");
}

std::vector<long> failing_blocks(const PotentialWindow& pot, const CriticalityWitness& w,
                                 std::vector<BlockCheck>* details) {
    validate_witness_shape(w, pot.size());
    const double threshold = 0.5 * std::exp(-w.delta);
    std::vector<long> out;
    for (long l = 1; l <= w.L; ++l) {
        auto cert = certify_block(pot, w.block(l), w.k[l], threshold, w.energies, w.grid);
        if (cert.status != GoodStatus::good) out.push_back(l);
        if (details) details->push_back({l, cert});
    }
    return out;
}

CriticalityReport initial_criticality(const PotentialWindow& pot, long K, double gamma, EnergyInterval energies,
                                      double sigma, std::size_t grid) {
    check_sigma(sigma);
    if (K < 1) throw ConfigError("initial criticality needs K >= 1");
    if (!(gamma > 0.0)) throw ConfigError("initial criticality needs gamma > 0");
    CriticalityReport rep;
    rep.K = K;
    rep.gamma = gamma;
    rep.L = static_cast<long>(pot.size()) / K - 1;
    if (rep.L < 1) {
        rep.bad_fraction = 1.0;
        return rep;
    }
    CriticalityWitness& w = rep.witness;
    w.delta = gamma * static_cast<double>(K);
    w.sigma = sigma;
    w.L = rep.L;
    w.energies = energies;
    w.grid = grid;
    for (long j = 0; j <= rep.L + 1; ++j) w.k.push_back(j * K);
    rep.bad_blocks = failing_blocks(pot, w);
    w.badset = rep.bad_blocks;
    rep.bad_fraction = w.bad_fraction();
    rep.success = rep.bad_fraction <= sigma;
    return rep;
}

// ---- schedule ----

bool ScaleSchedule::all_brackets_hold() const {
    auto all = [](const std::vector<bool>& v) { return std::all_of(v.begin(), v.end(), [](bool b) { return b; }); };
    return all(delta_bracket) && all(L_bracket) && all(sigma_delta_bracket) && all(K_wegner_bracket);
}

std::string product_of_M(int j) {
    boost::multiprecision::cpp_int p = 1;
    for (int k = 0; k <= j; ++k) p *= boost::multiprecision::pow(boost::multiprecision::cpp_int(100), k + 1);
    return p.str();
}

bool product_identity_holds(int j) {
    if (j < 0) throw ConfigError("product identity needs j >= 0");
    boost::multiprecision::cpp_int rhs = boost::multiprecision::pow(boost::multiprecision::cpp_int(10), (j + 1) * (j + 2));
    return boost::multiprecision::cpp_int(product_of_M(j)) == rhs;
}

ScaleSchedule scale_schedule(double delta, double sigma, long L, long N) {
    check_sigma(sigma);
    if (!(delta > 0.0)) throw ConfigError("schedule needs delta > 0");
    if (L < 1 || N < L) throw ConfigError("schedule needs 1 <= L <= N");
    ScaleSchedule s;
    s.sigma0 = sigma;
    s.delta0 = delta;
    s.L0 = L;
    s.N = N;
    const double ln10 = std::log(10.0);
    double d = delta;
    long Lj = L;
    for (int j = 0; j < 16; ++j) {
        const double Mj = std::pow(100.0, j + 1);
        const double sj = sigma / std::ldexp(1.0, j);
        if (!(sj * static_cast<double>(Lj) >= 2.0 * Mj)) break;
        s.j_max = j;
        s.M.push_back(Mj);
        s.sigma.push_back(sj);
        s.delta.push_back(d);
        s.L.push_back(Lj);
        s.eps.push_back(3.0 * std::exp(-sj * d));
        s.K_wegner.push_back(std::ceil(16.0 * double(N) * (Mj + 1.0) / (sj * double(Lj))));

        const double jj = double(j) * double(j + 1);
        s.delta_bracket.push_back(std::log(d) >= -4.0 * sigma + jj * ln10 + std::log(delta));
        const double Lmax = double(L) * std::exp(-jj * ln10);
        s.L_bracket.push_back(std::exp(-4.0 * sigma - 1.0 / 99.0) * Lmax <= double(Lj) && double(Lj) <= Lmax);
        s.sigma_delta_bracket.push_back(std::log(sj * d) >=
                                        -4.0 * sigma + double(j * j) * ln10 + j * std::log(5.0) + std::log(sigma * delta));
        s.K_wegner_bracket.push_back(std::log(s.K_wegner.back()) <=
                                     4.0 * sigma + 1.0 / 99.0 + std::log(double(N) / double(L)) +
                                         3.0 * double((j + 1) * (j + 2)) * ln10);

        d = (1.0 - 2.0 * sj) * Mj * d;
        Lj = static_cast<long>(std::ceil((1.0 - 2.0 * sj) * double(Lj) / (Mj + 1.0)));
    }
    if (s.j_max < 0)
        throw InfeasibleScales("sigma L >= 2 M_0 = 200 fails (sigma L = " + fmt_num(sigma * double(L)) + ")");
    return s;
}

// ---- subdivision ----

double EnergySubdivision::endpoint(std::uint64_t q) const {
    if (q == 0) return parent.lo;
    if (q >= Q) return parent.hi;
    return parent.lo + parent.length() * (static_cast<double>(q) / static_cast<double>(Q));
}

EnergySubdivision subdivide_energy(EnergyInterval parent, double sigma, double delta, double Q_max,
                                   const std::vector<std::uint64_t>* audit) {
    if (!(parent.hi > parent.lo)) throw ConfigError("subdivision needs a non-degenerate interval");
    if (!(sigma > 0.0) || !(delta > 0.0)) throw ConfigError("subdivision needs sigma, delta > 0");
    const double x = parent.length() * std::exp(sigma * delta);
    // a ceiling that ignores the last few ulps, so exact integers are not bumped up by rounding
    double Qd = std::max(1.0, std::ceil(x * (1.0 - 8.0 * DBL_EPSILON)));
    if (!std::isfinite(Qd) || Qd > 9.0e18) throw ConfigError("subdivision count does not fit in 64 bits");
    const bool capped = sigma * delta > std::log(Q_max) || Qd > Q_max;
    if (capped && !audit)
        throw QCapExceeded("subdivision needs Q = " + fmt_num(Qd) + " children, cap is " + fmt_num(Q_max));

    EnergySubdivision s;
    s.parent = parent;
    s.Q = static_cast<std::uint64_t>(Qd);
    auto make = [&](std::uint64_t q) { return EnergyChild{q, {s.endpoint(q), s.endpoint(q + 1)}}; };
    if (capped) {
        s.audited = true;
        std::set<std::uint64_t> picked(audit->begin(), audit->end());
        for (auto q : picked) {
            if (q >= s.Q) throw ConfigError("audited child index beyond Q");
            s.children.push_back(make(q));
        }
    } else {
        s.children.reserve(s.Q);
        for (std::uint64_t q = 0; q < s.Q; ++q) s.children.push_back(make(q));
    }
    return s;
}

// ---- coarse points ----

CoarsePoints choose_coarse(const CriticalityWitness& w, long M) {
    if (M < 1) throw ConfigError("coarse selection needs M >= 1");
    if (!(w.sigma * double(w.L) / double(M) >= 2.0))
        throw ConditionViolated("sigma L / M >= 2 fails (" + fmt_num(w.sigma * double(w.L) / double(M)) + ")");
    CoarsePoints c;
    c.indices.push_back(0);
    long cur = 0;
    for (;;) {
        long count = 0, l = cur + 1;
        while (l <= w.L + 1 && count < M) {
            if (l <= w.L && !w.is_bad(l)) ++count;
            ++l;
        }
        if (count < M || l > w.L + 1) break;
        c.indices.push_back(l);
        cur = l;
    }
    for (long i : c.indices) c.k.push_back(w.k[i]);
    c.L = static_cast<long>(c.indices.size()) - 2;
    if (c.L < 1) throw ConditionViolated("too few good blocks for a coarse scale (L~ = " + std::to_string(c.L) + ")");
    return c;
}

std::vector<long> long_coarse_blocks(const CoarsePoints& c, long N, long M, double sigma, long L) {
    const double len = 16.0 * double(N) * double(M + 1) / (sigma * double(L));
    std::vector<long> out;
    for (long l = 1; l <= c.L; ++l)
        if (double(c.k[l + 1] - c.k[l - 1]) >= len) out.push_back(l);
    return out;
}

// ---- step ----

std::string to_string(StepVariant v) { return v == StepVariant::eliminate ? "eliminate" : "wegner"; }

StepVariant step_variant_from_name(const std::string& s) {
    if (s == "eliminate") return StepVariant::eliminate;
    if (s == "wegner") return StepVariant::wegner;
    throw ConfigError("unknown step variant '" + s + "'");
}

std::size_t StepOutcome::surviving() const {
    return static_cast<std::size_t>(std::count_if(children.begin(), children.end(),
                                                  [](const ChildOutcome& c) { return !c.eliminated; }));
}

namespace {

// Direct Green checks of the coarse blocks outside `bad`; fills the child's witness.
void reverify(const PotentialWindow& pot, const StepOutcome& out, const CriticalityWitness& old, ChildOutcome& child,
              const std::vector<long>& bad) {
    CriticalityWitness nw;
    nw.delta = out.delta_new;
    nw.sigma = out.sigma_new;
    nw.L = out.L_new;
    nw.energies = child.energies;
    nw.k = out.coarse.k;
    nw.badset = bad;
    nw.grid = old.grid;
    for (long l = 1; l <= nw.L; ++l) {
        if (nw.is_bad(l)) continue;
        auto cert = certify_block(pot, nw.block(l), nw.k[l], out.threshold_new, child.energies, old.grid);
        ++child.reverified;
        child.max_green_ratio = std::max(child.max_green_ratio, cert.max_green / out.threshold_new);
        if (cert.status != GoodStatus::good)
            throw ReverificationFailure("coarse block " + std::to_string(l) + " on [" + fmt_num(child.energies.lo) +
                                        ", " + fmt_num(child.energies.hi) + "]: " + to_string(cert.status) +
                                        " (" + cert.note + ")");
    }
    child.witness = std::move(nw);
}

}  // namespace

StepOutcome multiscale_step(const PotentialWindow& pot, const CriticalityWitness& w, long M, StepVariant variant,
                            const StepOptions& opt) {
    validate_witness_shape(w, pot.size());
    if (M < 3) throw ConditionViolated("multiscale step needs M >= 3");
    if (double(w.badset.size()) > w.sigma * double(w.L))
        throw ConditionViolated("witness has more than sigma L bad blocks");

    StepOutcome out;
    out.variant = variant;
    out.M = M;
    out.N = static_cast<long>(pot.size());
    out.delta_old = w.delta;
    out.sigma_old = w.sigma;
    out.L_old = w.L;
    out.coarse = choose_coarse(w, M);
    out.delta_new = (1.0 - 2.0 * w.sigma) * double(M) * w.delta;
    out.sigma_new = 0.5 * w.sigma;
    out.L_new = out.coarse.L;
    out.long_blocks = long_coarse_blocks(out.coarse, out.N, M, w.sigma, w.L);
    out.resonance_eps = 2.0 * std::exp(-w.sigma * w.delta);
    out.threshold_new = 0.5 * std::exp(-out.delta_new);
    out.greenimp_iterations = M;
    out.L_lower = (1.0 - 2.0 * w.sigma) * double(w.L) / double(M + 1);
    out.L_upper = double(w.L) / double(M + 1);
    if (double(out.L_new) < out.L_lower || double(out.L_new) > out.L_upper)
        throw ConsistencyFailure("coarse count L~ = " + std::to_string(out.L_new) + " outside [" +
                                 fmt_num(out.L_lower) + ", " + fmt_num(out.L_upper) + "]");

    const long last_site = out.N - 1;
    auto resonance_interval = [&](long a, long b) { return SiteInterval{a, std::min(b, last_site)}; };
    const auto& kt = out.coarse.k;

    if (variant == StepVariant::eliminate) {
        auto sub = subdivide_energy(w.energies, w.sigma, w.delta, opt.Q_max, opt.audit ? &*opt.audit : nullptr);
        out.Q = sub.Q;
        out.audited = sub.audited;
        const double allowed = out.sigma_new * double(out.L_new);
        for (const auto& ch : sub.children) {
            ChildOutcome c;
            c.q = ch.q;
            c.energies = ch.energies;
            for (long l = 1; l <= out.L_new; ++l) {
                auto r = is_resonant(pot, resonance_interval(kt[l - 1], kt[l + 1]), ch.energies, out.resonance_eps);
                ++out.resonance_checks;
                if (r.resonant) {
                    c.resonant.push_back(l);
                    c.resonance_witnesses.push_back(*r.witness);
                }
            }
            c.eliminated = double(c.resonant.size()) > allowed;
            if (c.eliminated) out.eliminated.push_back(c.q);
            else reverify(pot, out, w, c, c.resonant);
            out.children.push_back(std::move(c));
        }
        out.eliminated_bound = (std::ldexp(1.0, 15) / out.sigma_new) *
                               std::pow(double(M + 1) * double(out.N) / (w.sigma * double(w.L)), 3);
        if (double(out.eliminated.size()) > out.eliminated_bound)
            throw ConsistencyFailure("eliminated " + std::to_string(out.eliminated.size()) + " children, bound " +
                                     fmt_num(out.eliminated_bound));
    } else {
        out.Q = 1;
        out.wegner_window = static_cast<long>(std::ceil(16.0 * double(out.N) * double(M + 1) / (w.sigma * double(w.L))));
        out.wegner_allowance = 0.25 * w.sigma * (1.0 - 2.0 * w.sigma) * double(w.L) / double(M + 1);
        std::vector<bool> res(static_cast<std::size_t>(w.L + 1), false);
        ChildOutcome c;
        c.energies = w.energies;
        for (long l = 0; l <= w.L; ++l) {
            if (w.k[l] > last_site) continue;
            auto r = is_resonant(pot, resonance_interval(w.k[l], w.k[l] + out.wegner_window), w.energies,
                                 out.resonance_eps);
            ++out.resonance_checks;
            if (r.resonant) {
                res[l] = true;
                ++out.wegner_resonant;
                c.resonance_witnesses.push_back(*r.witness);
            }
        }
        if (double(out.wegner_resonant) > out.wegner_allowance)
            throw ConditionViolated("resonant windows of length " + std::to_string(out.wegner_window) + ": " +
                                    std::to_string(out.wegner_resonant) + " > " + fmt_num(out.wegner_allowance));
        // a short coarse block sits inside the window starting at its left coarse point
        std::vector<long> bad = out.long_blocks;
        for (long l = 1; l <= out.L_new; ++l)
            if (!std::binary_search(out.long_blocks.begin(), out.long_blocks.end(), l) &&
                res[out.coarse.indices[l - 1]])
                bad.push_back(l);
        std::sort(bad.begin(), bad.end());
        c.resonant = bad;
        if (double(bad.size()) > out.sigma_new * double(out.L_new))
            throw ConditionViolated("more than sigma~ L~ coarse blocks are long or resonant");
        reverify(pot, out, w, c, bad);
        out.children.push_back(std::move(c));
    }
    return out;
}

// ---- induction ----

std::vector<std::string> InductionHypotheses::failed() const {
    std::vector<std::string> f;
    if (!cond1) f.push_back("sigma L / M_0 >= 2");
    if (!cond2) f.push_back("|E| >= exp(-sigma delta / 25)");
    if (!cond3) f.push_back("2^17 e^{12 sigma} / sigma^4 (N/L)^3 <= exp((8/25) e^{-4 sigma} sigma delta)");
    if (!asA1) f.push_back("gamma K >= max(1/sigma, (25/sigma) ln(1/|E|))");
    if (!asA2) f.push_back("exp((8/75) sigma gamma K) / K^3 >= 2^17 e^3 / sigma^4");
    return f;
}

InductionHypotheses induction_hypotheses(const CriticalityWitness& w, long N, long K, double gamma) {
    InductionHypotheses h;
    const double s = w.sigma, d = w.delta, len = w.energies.length();
    h.cond1 = s * double(w.L) / 100.0 >= 2.0;
    h.cond2 = len >= std::exp(-s * d / 25.0);
    h.cond3 = 17.0 * std::log(2.0) + 12.0 * s - 4.0 * std::log(s) + 3.0 * std::log(double(N) / double(w.L)) <=
              (8.0 / 25.0) * std::exp(-4.0 * s) * s * d;
    const double gK = gamma * double(K);
    h.asA1 = gK >= std::max(1.0 / s, (25.0 / s) * std::log(1.0 / len));
    h.asA2 = (8.0 / 75.0) * s * gK - 3.0 * std::log(double(K)) >= 17.0 * std::log(2.0) + 3.0 - 4.0 * std::log(s);
    return h;
}

InductionResult run_induction(const PotentialWindow& pot, const CriticalityReport& initial,
                              const InductionOptions& opt) {
    if (!initial.success)
        throw HypothesisViolated("initial criticality failed: bad fraction " + fmt_num(initial.bad_fraction) +
                                 " exceeds sigma");
    const CriticalityWitness& w0 = initial.witness;
    const long N = static_cast<long>(pot.size());
    InductionResult res;
    res.hypotheses = induction_hypotheses(w0, N, initial.K, initial.gamma);
    if (opt.enforce_hypotheses) {
        auto f = res.hypotheses.failed();
        if (!f.empty()) {
            std::string msg = "hypothesis violated:";
            for (auto& s : f) msg += " [" + s + "]";
            throw HypothesisViolated(msg);
        }
    }

    std::vector<long> Ms;
    if (opt.M_override > 0) {
        try {
            res.schedule = scale_schedule(w0.delta, w0.sigma, w0.L, N);
        } catch (const InfeasibleScales&) {
        }
        Ms.push_back(opt.M_override);
    } else {
        res.schedule = scale_schedule(w0.delta, w0.sigma, w0.L, N);
        for (double m : res.schedule.M) Ms.push_back(static_cast<long>(m));
    }

    res.parent_measure = w0.energies.length();
    double fraction = 1.0;
    std::vector<CriticalityWitness> frontier{w0};
    for (long M : Ms) {
        std::vector<CriticalityWitness> next;
        double built = 0.0, kept = 0.0;
        for (const auto& w : frontier) {
            auto step = multiscale_step(pot, w, M, opt.variant, opt.step);
            for (auto& c : step.children) {
                built += c.energies.length();
                if (!c.eliminated) {
                    kept += c.energies.length();
                    next.push_back(*c.witness);
                }
            }
            res.steps.push_back(std::move(step));
        }
        fraction *= built > 0.0 ? kept / built : 0.0;
        ++res.levels;
        frontier = std::move(next);
        if (frontier.empty()) break;
    }
    res.final_witnesses = frontier;
    for (auto& w : frontier) res.surviving.push_back(w.energies);
    res.surviving_measure = fraction * res.parent_measure;

    const double sgK = w0.sigma * initial.gamma * double(initial.K);
    res.measure_bound = 1.0 - std::exp(-(8.0 / 25.0) * sgK);
    res.measure_bound_applies = res.hypotheses.asA1 && res.hypotheses.asA2;
    res.measure_bound_ok = !res.measure_bound_applies || res.surviving_fraction() >= res.measure_bound;
    res.certified_rate = std::exp(-8.0 * w0.sigma - 1.0 / 99.0) * initial.gamma -
                         std::sqrt(2.0) / (double(w0.L) * double(initial.K));
    return res;
}

// ---- Green decay to growth ----

std::vector<GreenBound> boundary_green_values(const PotentialWindow& pot, double E, long k0, long N) {
    if (N < 2 || static_cast<long>(pot.size()) < N + 1) throw WindowTooShort("boundary Green values need V(0..N)");
    if (k0 < 2 || k0 > N) throw ConfigError("boundary Green values need 2 <= k0 <= N");
    std::vector<GreenBound> out;
    for (long a : {0L, 1L}) {
        OperatorWindow op(pot, SiteInterval{a, N});
        for (long k : {k0 - 1, k0}) out.push_back({a, k, std::abs(green(op, E, k, N))});
    }
    return out;
}

LyapunovLowerBound greens_to_lyapunov(const PotentialWindow& pot, double E, long N,
                                      const std::vector<GreenBound>& bounds) {
    if (N < 1) throw ConfigError("growth bound needs N >= 1");
    if (static_cast<long>(pot.size()) < N + 1) throw WindowTooShort("growth bound needs V(0..N)");
    auto find = [&](long a, long k) -> const GreenBound* {
        for (auto& b : bounds)
            if (b.a == a && b.k == k) return &b;
        return nullptr;
    };
    for (const auto& cand : bounds) {
        for (long k0 : {cand.k, cand.k + 1}) {
            const GreenBound* g[4] = {find(0, k0 - 1), find(0, k0), find(1, k0 - 1), find(1, k0)};
            if (!g[0] || !g[1] || !g[2] || !g[3]) continue;
            LyapunovLowerBound r;
            r.E = E;
            r.N = N;
            r.k0 = k0;
            double worst = 0.0;
            for (auto* p : g) {
                if (!(p->value >= 0.0) || !std::isfinite(p->value)) throw ConfigError("Green bound must be finite");
                worst = std::max(worst, p->value);
            }
            r.gamma = worst > 0.0 ? -std::log(worst) / double(N) : std::numeric_limits<double>::infinity();
            r.bound = r.gamma - std::log(std::sqrt(2.0)) / double(N);
            auto A = transfer_product(pot.values, E, static_cast<std::size_t>(N + 1));
            r.measured = A.log_norm / double(N);
            r.cross_check = r.measured >= r.bound - 1e-10 * std::max(1.0, std::abs(r.bound));
            return r;
        }
    }
    throw MissingInput("Green bounds for Lambda in {[0,N],[1,N]} and k in {k0-1, k0} are required");
}

// ---- serialization ----

std::string witness_to_json(const CriticalityWitness& w) {
    json j;
    j["format_version"] = kMultiscaleFormatVersion;
    j["kind"] = "criticality_witness";
    j["delta"] = w.delta;
    j["sigma"] = w.sigma;
    j["L"] = w.L;
    j["energies"] = {w.energies.lo, w.energies.hi};
    j["k"] = w.k;
    j["badset"] = w.badset;
    j["grid"] = w.grid;
    return j.dump(2);
}

CriticalityWitness witness_from_json(const std::string& s) {
    json j;
    try {
        j = json::parse(s);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("witness JSON: ") + e.what());
    }
    if (j.value("format_version", -1) != kMultiscaleFormatVersion || j.value("kind", "") != "criticality_witness")
        throw ConfigError("not a criticality witness of a supported format version");
    try {
        CriticalityWitness w;
        w.delta = j.at("delta").get<double>();
        w.sigma = j.at("sigma").get<double>();
        w.L = j.at("L").get<long>();
        w.energies = {j.at("energies").at(0).get<double>(), j.at("energies").at(1).get<double>()};
        w.k = j.at("k").get<std::vector<long>>();
        w.badset = j.at("badset").get<std::vector<long>>();
        w.grid = j.at("grid").get<std::size_t>();
        return w;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("witness JSON: ") + e.what());
    }
}

std::string step_to_json(const StepOutcome& s) {
    json j;
    j["format_version"] = kMultiscaleFormatVersion;
    j["kind"] = "step_outcome";
    j["variant"] = to_string(s.variant);
    j["M"] = s.M;
    j["N"] = s.N;
    j["old"] = {{"delta", s.delta_old}, {"sigma", s.sigma_old}, {"L", s.L_old}};
    j["new"] = {{"delta", s.delta_new}, {"sigma", s.sigma_new}, {"L", s.L_new}};
    j["coarse_points"] = s.coarse.k;
    j["coarse_indices"] = s.coarse.indices;
    j["long_blocks"] = s.long_blocks;
    j["resonance_eps"] = s.resonance_eps;
    j["threshold_new"] = s.threshold_new;
    j["Q"] = s.Q;
    j["audited"] = s.audited;
    j["eliminated"] = s.eliminated;
    j["eliminated_bound"] = s.eliminated_bound;
    j["L_bracket"] = {s.L_lower, s.L_upper};
    j["resonance_checks"] = s.resonance_checks;
    j["greenimp_iterations"] = s.greenimp_iterations;
    if (s.variant == StepVariant::wegner)
        j["wegner"] = {{"window", s.wegner_window}, {"resonant", s.wegner_resonant}, {"allowance", s.wegner_allowance}};
    json kids = json::array();
    for (const auto& c : s.children) {
        json kc;
        kc["q"] = c.q;
        kc["energies"] = {c.energies.lo, c.energies.hi};
        kc["resonant"] = c.resonant;
        kc["eliminated"] = c.eliminated;
        kc["reverified"] = c.reverified;
        kc["max_green_ratio"] = c.max_green_ratio;
        json rw = json::array();
        for (const auto& r : c.resonance_witnesses)
            rw.push_back({{"interval", {r.lambda_interval.a, r.lambda_interval.b}}, {"eigen", {r.eigen_lo, r.eigen_hi}}});
        kc["resonance_witnesses"] = rw;
        kids.push_back(kc);
    }
    j["children"] = kids;
    return j.dump(2);
}

}  // namespace ergo
