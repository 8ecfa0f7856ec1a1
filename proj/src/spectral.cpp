#include "ergo/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ergo/errors.hpp"

namespace ergo {

namespace {

// Stand-in for an exactly vanishing Sturm pivot. Positive, so that an
// eigenvalue sitting exactly at E is not counted as lying below E.
constexpr double kPivMin = 1e-290;

struct Sturm {
    double E;
    double q = 0.0;
    std::size_t count = 0;
    bool started = false;
    void push(double d) {
        q = started ? (d - E) - 1.0 / q : d - E;
        started = true;
        if (q == 0.0) q = kPivMin;
        if (q < 0.0) ++count;
    }
};

std::size_t count_below_span(std::span<const double> d, double E) {
    Sturm s{E};
    for (double v : d) s.push(v);
    return s.count;
}

void gershgorin(std::span<const double> d, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : d) lo = std::min(lo, v), hi = std::max(hi, v);
    lo -= 2.0;
    hi += 2.0;
}

// k-th eigenvalue (0-based) by bisection inside a bracket [lo, hi] with
// count(lo) <= k < count(hi).
double bisect_eigen(std::span<const double> d, std::size_t k, double lo, double hi) {
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (count_below_span(d, mid) > k) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double SignedLog::value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }

OperatorWindow::OperatorWindow(const PotentialWindow& w, SiteInterval I) : first_(I.a) {
    if (I.size() < 1 || I.a < 0 || I.b >= static_cast<long>(w.size()))
        throw WindowTooShort("interval [" + std::to_string(I.a) + "," + std::to_string(I.b) +
                             "] is not inside the potential window of length " + std::to_string(w.size()));
    diag_ = std::span<const double>(w.values).subspan(static_cast<std::size_t>(I.a), static_cast<std::size_t>(I.size()));
}

OperatorWindow::OperatorWindow(std::span<const double> diag, long first_site) : diag_(diag), first_(first_site) {
    if (diag.empty()) throw WindowTooShort("operator window must contain at least one site");
}

double OperatorWindow::max_abs_diag() const {
    double m = 0.0;
    for (double v : diag_) m = std::max(m, std::abs(v));
    return m;
}

OperatorWindow OperatorWindow::sub(SiteInterval I) const {
    if (I.size() < 1 || I.a < first() || I.b > last()) throw WindowTooShort("sub-interval outside operator window");
    return OperatorWindow(diag_.subspan(static_cast<std::size_t>(I.a - first_), static_cast<std::size_t>(I.size())),
                          I.a);
}

SignedLog shifted_determinant(std::span<const double> d, double E) {
    double prev = 0.0, cur = 1.0, log_scale = 0.0;
    for (double v : d) {
        double next = (v - E) * cur - prev;
        prev = cur;
        cur = next;
        double m = std::max(std::abs(cur), std::abs(prev));
        if (m > 1e150 || (m < 1e-150 && m > 0.0)) {
            int e;
            std::frexp(m, &e);
            cur = std::ldexp(cur, -e);
            prev = std::ldexp(prev, -e);
            log_scale += e * std::log(2.0);
        }
    }
    SignedLog r;
    if (cur == 0.0) {
        r.sign = 0;
        r.log_abs = -std::numeric_limits<double>::infinity();
    } else {
        r.sign = cur > 0 ? 1 : -1;
        r.log_abs = std::log(std::abs(cur)) + log_scale;
    }
    return r;
}

std::vector<double> eigenvalues(const OperatorWindow& op) {
    auto d = op.diag();
    double lo, hi;
    gershgorin(d, lo, hi);
    std::vector<double> ev(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        // previous eigenvalue is a valid lower bracket
        double l = k ? std::min(ev[k - 1], hi) - 1e-300 : lo;
        if (count_below_span(d, l) > k) l = lo;
        ev[k] = bisect_eigen(d, k, l, hi);
    }
    return ev;
}

std::size_t eigen_count_below(const OperatorWindow& op, double E) { return count_below_span(op.diag(), E); }

std::size_t eigen_count_closed(const OperatorWindow& op, double lo, double hi) {
    if (hi < lo) return 0;
    double hi_up = std::nextafter(hi, std::numeric_limits<double>::infinity());
    return count_below_span(op.diag(), hi_up) - count_below_span(op.diag(), lo);
}

double spectral_distance(const OperatorWindow& op, double E) {
    auto d = op.diag();
    double lo, hi;
    gershgorin(d, lo, hi);
    if (E <= lo) return bisect_eigen(d, 0, lo - 1.0, hi) - E;
    if (E >= hi) return E - bisect_eigen(d, d.size() - 1, lo, hi + 1.0);
    std::size_t c = count_below_span(d, E);
    double best = std::numeric_limits<double>::infinity();
    if (c > 0) best = E - bisect_eigen(d, c - 1, lo, E);
    if (c < d.size()) best = std::min(best, bisect_eigen(d, c, E, hi) - E);
    return std::max(best, 0.0);
}

ShiftedSolver::ShiftedSolver(std::span<const double> diag, double E)
    : n_(diag.size()), dl_(n_ ? n_ - 1 : 0, 1.0), d_(n_), du_(n_ ? n_ - 1 : 0, 1.0), du2_(n_ > 1 ? n_ - 2 : 0, 0.0),
      ipiv_(n_) {
    for (std::size_t i = 0; i < n_; ++i) d_[i] = diag[i] - E, ipiv_[i] = static_cast<int>(i);
    if (n_ < 2) return;
    // LU with partial pivoting for tridiagonal matrices
    for (std::size_t i = 0; i + 1 < n_; ++i) {
        if (std::abs(d_[i]) >= std::abs(dl_[i])) {
            if (d_[i] != 0.0) {
                double fact = dl_[i] / d_[i];
                dl_[i] = fact;
                d_[i + 1] -= fact * du_[i];
            }
        } else {
            double fact = d_[i] / dl_[i];
            d_[i] = dl_[i];
            dl_[i] = fact;
            double temp = du_[i];
            du_[i] = d_[i + 1];
            d_[i + 1] = temp - fact * d_[i + 1];
            if (i + 2 < n_) {
                du2_[i] = du_[i + 1];
                du_[i + 1] = -fact * du_[i + 1];
            }
            ipiv_[i] = static_cast<int>(i + 1);
        }
    }
}

void ShiftedSolver::solve(std::vector<double>& b) const {
    const std::size_t n = n_;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (ipiv_[i] == static_cast<int>(i)) {
            b[i + 1] -= dl_[i] * b[i];
        } else {
            double temp = b[i];
            b[i] = b[i + 1];
            b[i + 1] = temp - dl_[i] * b[i];
        }
    }
    b[n - 1] /= d_[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
    if (n > 2)
        for (std::size_t k = n - 2; k-- > 0;) b[k] = (b[k] - du_[k] * b[k + 1] - du2_[k] * b[k + 2]) / d_[k];
}

std::vector<double> ShiftedSolver::column(std::size_t j) const {
    std::vector<double> e(n_, 0.0);
    e[j] = 1.0;
    solve(e);
    return e;
}

double green_solve(const OperatorWindow& op, double E, long x, long y) {
    ShiftedSolver s(op.diag(), E);
    auto col = s.column(static_cast<std::size_t>(y - op.first()));
    return col[static_cast<std::size_t>(x - op.first())];
}

SignedLog green_cramer(const OperatorWindow& op, double E, long x, long y) {
    if (x > y) std::swap(x, y);
    auto d = op.diag();
    std::size_t i = static_cast<std::size_t>(x - op.first());
    std::size_t j = static_cast<std::size_t>(y - op.first());
    SignedLog left = shifted_determinant(d.subspan(0, i), E);
    SignedLog right = shifted_determinant(d.subspan(j + 1), E);
    SignedLog all = shifted_determinant(d, E);
    if (all.sign == 0) throw NearSingular("determinant of H - E vanishes");
    SignedLog g;
    g.sign = (((i + j) % 2) ? -1 : 1) * left.sign * right.sign * all.sign;
    g.log_abs = left.log_abs + right.log_abs - all.log_abs;
    return g;
}

double green(const OperatorWindow& op, double E, long x, long y) {
    if (x < op.first() || x > op.last() || y < op.first() || y > op.last())
        throw ConfigError("Green function query outside the window");
    if (eigen_count_closed(op, E - kNearSingularTol, E + kNearSingularTol) > 0)
        throw NearSingular("energy " + std::to_string(E) + " is within 1e-12 of the spectrum");
    double a = green_solve(op, E, x, y);
    SignedLog c = green_cramer(op, E, x, y);
    if (c.sign == 0) {
        if (a == 0.0) return 0.0;
        throw ConsistencyFailure("Cramer route gives 0, solve gives " + std::to_string(a));
    }
    if (a == 0.0) {
        if (c.log_abs < -740.0) return 0.0;  // below the double range on both routes
        throw ConsistencyFailure("solve route gives 0, Cramer route gives exp(" + std::to_string(c.log_abs) + ")");
    }
    int sa = a > 0 ? 1 : -1;
    double diff = std::abs(std::log(std::abs(a)) - c.log_abs);
    if (sa != c.sign || diff > kGreenAgreementTol)
        throw ConsistencyFailure("Green routes disagree: solve " + std::to_string(a) + ", Cramer " +
                                 std::to_string(c.value()));
    return a;
}

double log_resolvent_hs_norm(const OperatorWindow& op, double E) {
    ShiftedSolver s(op.diag(), E);
    double scale = 0.0, sum = 1.0;  // scaled sum of squares
    bool any = false;
    for (std::size_t j = 0; j < op.size(); ++j) {
        auto col = s.column(j);
        for (double v : col) {
            double a = std::abs(v);
            if (a == 0.0) continue;
            if (!any) {
                scale = a, sum = 1.0, any = true;
            } else if (a > scale) {
                sum = 1.0 + sum * (scale / a) * (scale / a);
                scale = a;
            } else {
                sum += (a / scale) * (a / scale);
            }
        }
    }
    return std::log(scale) + 0.5 * std::log(sum);
}

double log_hadamard_resolvent_bound(const OperatorWindow& op, double E) {
    double C = op.max_abs_diag();
    if (std::abs(E) > 2.0 + C) throw ConfigError("Hadamard resolvent bound needs |E| <= 2 + max|V|");
    double M = static_cast<double>(op.size());
    SignedLog det = shifted_determinant(op.diag(), E);
    if (det.sign == 0) return std::numeric_limits<double>::infinity();
    return std::log(M) + 0.5 * M * std::log(4.0 + 2.0 * C) - det.log_abs;
}

ResonanceResult is_resonant(std::span<const double> v, SiteInterval I, EnergyInterval energies, double eps) {
    if (!(eps > 0.0)) throw ConfigError("resonance tolerance must be positive");
    if (I.size() < 1 || I.a < 0 || I.b >= static_cast<long>(v.size()))
        throw WindowTooShort("resonance interval outside the potential window");
    const double lo = energies.lo - eps;
    const double hi_up = std::nextafter(energies.hi + eps, std::numeric_limits<double>::infinity());
    ResonanceResult res;
    for (long a = I.a; a <= I.b; ++a) {
        Sturm s_lo{lo}, s_hi{hi_up};
        for (long b = a; b <= I.b; ++b) {
            s_lo.push(v[static_cast<std::size_t>(b)]);
            s_hi.push(v[static_cast<std::size_t>(b)]);
            if (s_hi.count > s_lo.count) {
                res.resonant = true;
                ResonanceWitness w;
                w.lambda_interval = {a, b};
                auto d = v.subspan(static_cast<std::size_t>(a), static_cast<std::size_t>(b - a + 1));
                double glo, ghi;
                gershgorin(d, glo, ghi);
                double ev = bisect_eigen(d, s_lo.count, std::max(glo, lo), std::min(ghi, hi_up));
                w.eigen_lo = std::max(lo, std::nextafter(ev, -INFINITY));
                w.eigen_hi = std::min(energies.hi + eps, std::nextafter(ev, INFINITY));
                res.witness = w;
                return res;
            }
        }
    }
    return res;
}

ResonanceResult is_resonant(const PotentialWindow& w, SiteInterval I, EnergyInterval energies, double eps) {
    return is_resonant(std::span<const double>(w.values), I, energies, eps);
}

CombesThomas combes_thomas(double delta) {
    if (!(delta > 0.0)) throw ConfigError("Combes-Thomas needs delta > 0");
    double g = 0.5 * std::log1p(delta / 4.0);
    return {g, std::log(4.0 / (3.0 * delta)) / g};
}

std::string to_string(GoodStatus s) {
    switch (s) {
        case GoodStatus::good: return "good";
        case GoodStatus::bad: return "bad";
        case GoodStatus::unverifiable: return "unverifiable";
    }
    return "?";
}


namespace {

// log |det(H_I - E)| written through the spectrum of H_I
double log_abs_char(const std::vector<double>& ev, double E) {
    double acc = 0.0;
    for (double mu : ev) acc += std::log(std::abs(E - mu));
    return acc;
}

struct GreenFactors {
    std::vector<double> left, right;  // spectra of [first, min(x,y)-1] and [max(x,y)+1, last]
};

}  // namespace

GreenCertificate certify_green_bound(const OperatorWindow& op, long x, const std::vector<long>& targets,
                                     double threshold, EnergyInterval energies, CertifyOptions opt) {
    if (energies.hi < energies.lo) throw ConfigError("empty energy interval");
    for (long y : targets)
        if (y < op.first() || y > op.last()) throw WindowTooShort("Green target outside the window");
    if (x < op.first() || x > op.last()) throw WindowTooShort("Green source outside the window");
    if (!(threshold > 0.0)) throw ConfigError("Green threshold must be positive");

    GreenCertificate cert;
    cert.threshold = threshold;
    const bool point = energies.hi == energies.lo;
    if (eigen_count_closed(op, energies.lo, energies.hi) > 0) {
        // a pole inside the interval; conservative when its residue at (x, y) happens to vanish
        cert.status = GoodStatus::bad;
        cert.worst_energy = energies.lo;
        cert.note = point ? "energy is an eigenvalue" : "an eigenvalue lies in the energy interval";
        return cert;
    }

    // |G(E, x, y)| = |det(H_left - E) det(H_right - E) / det(H - E)|, so on a cell
    // [u, w] free of poles, log|G| <= sum_zeros log max(|u - mu|, |w - mu|) - sum_poles log dist(mu, [u, w]).
    const std::vector<double> poles = eigenvalues(op);
    std::vector<GreenFactors> factors;
    for (long y : targets) {
        const long lo_site = std::min(x, y), hi_site = std::max(x, y);
        GreenFactors f;
        if (lo_site > op.first()) f.left = eigenvalues(op.sub({op.first(), lo_site - 1}));
        if (hi_site < op.last()) f.right = eigenvalues(op.sub({hi_site + 1, op.last()}));
        factors.push_back(std::move(f));
    }
    // slack for the bisection error in each computed eigenvalue
    const double eta = 64.0 * std::numeric_limits<double>::epsilon() * (op.max_abs_diag() + 2.0);
    const double log_T = std::log(threshold);

    auto log_green_at = [&](const GreenFactors& f, double E) {
        return log_abs_char(f.left, E) + log_abs_char(f.right, E) - log_abs_char(poles, E);
    };
    auto log_green_cell = [&](const GreenFactors& f, double u, double w) {
        double acc = 0.0;
        for (const auto* zs : {&f.left, &f.right})
            for (double mu : *zs) acc += std::log(std::max(std::abs(u - mu), std::abs(w - mu)) + eta);
        for (double mu : poles) {
            double dist = (mu < u ? u - mu : mu - w) - eta;
            if (!(dist > 0.0)) return std::numeric_limits<double>::infinity();
            acc -= std::log(dist);
        }
        return acc;
    };

    std::size_t G = point ? 1 : std::max<std::size_t>(opt.initial_grid, 2);
    for (;;) {
        const double h = point ? 0.0 : energies.length() / static_cast<double>(G - 1);
        auto grid_energy = [&](std::size_t i) {
            return (i + 1 == G && !point) ? energies.hi : energies.lo + static_cast<double>(i) * h;
        };
        bool settled = true;
        cert.max_green = 0.0;
        cert.max_slack = 0.0;
        cert.grid_points = G;
        for (std::size_t i = 0; i < G; ++i) {
            const double E = grid_energy(i);
            for (const auto& f : factors) {
                const double g = std::exp(log_green_at(f, E));
                if (g > cert.max_green) cert.max_green = g, cert.worst_energy = E;
                if (g > threshold) {
                    cert.status = GoodStatus::bad;
                    cert.worst_energy = E;
                    cert.note = "Green bound violated at a grid energy";
                    return cert;
                }
                if (i + 1 == G && !point) continue;
                const double u = E, w = point ? E : grid_energy(i + 1);
                const double cell = log_green_cell(f, u, w);
                if (cell > log_T) settled = false;
                const double g_next = point ? g : std::exp(log_green_at(f, w));
                cert.max_slack = std::max(cert.max_slack, std::exp(cell) - std::max(g, g_next));
            }
        }
        cert.max_slack = std::max(cert.max_slack, 0.0);
        if (settled) {
            cert.status = GoodStatus::good;
            return cert;
        }
        if (point || 2 * G - 1 > opt.max_grid) {
            cert.status = GoodStatus::unverifiable;
            cert.note = "grid slack could not be controlled";
            return cert;
        }
        G = 2 * G - 1;
    }
}

GreenCertificate is_good(const PotentialWindow& w, long a, long K, double gamma, EnergyInterval energies,
                         std::size_t grid) {
    if (K < 1) throw ConfigError("is_good needs K >= 1");
    if (grid < 2) throw ConfigError("is_good needs a grid of at least two energies");
    SiteInterval I{a - K, a + K};
    if (I.a < 0 || I.b >= static_cast<long>(w.size())) throw WindowTooShort("[a-K, a+K] is not inside the window");
    OperatorWindow op(w, I);
    CertifyOptions opt;
    opt.initial_grid = grid;
    return certify_green_bound(op, a, {a - K, a + K}, 0.5 * std::exp(-gamma * K), energies, opt);
}

}  // namespace ergo
