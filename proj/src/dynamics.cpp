#include "ergo/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ergo/errors.hpp"

namespace ergo {

namespace {

double wrap01(double y) {
    // y is a sum of two numbers in [0,1), so one subtraction suffices
    return y >= 1.0 ? y - 1.0 : y;
}

double iid_draw(Distribution d, std::uint64_t bits) {
    switch (d) {
        case Distribution::uniform:
            return 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
        case Distribution::bernoulli:
            return (bits >> 63) ? 1.0 : -1.0;
    }
    return 0.0;
}

constexpr std::uint64_t kTailSalt = 0x7461696c62697473ULL;
constexpr std::uint64_t kIidSalt = 0x6969647374726d73ULL;
constexpr std::uint64_t kNondegSalt = 0x6e6f6e6465676e72ULL;

}  // namespace

ErgodicSystem ErgodicSystem::doubling(std::uint64_t seed) {
    ErgodicSystem s;
    s.kind = SystemKind::doubling;
    s.seed = seed;
    return s;
}

ErgodicSystem ErgodicSystem::skew_shift(int K, double alpha, std::uint64_t seed) {
    ErgodicSystem s;
    s.kind = SystemKind::skew_shift;
    s.dim = K;
    s.alpha = alpha;
    s.seed = seed;
    s.validate();
    return s;
}

ErgodicSystem ErgodicSystem::iid(Distribution d, std::uint64_t seed) {
    ErgodicSystem s;
    s.kind = SystemKind::iid;
    s.distribution = d;
    s.seed = seed;
    return s;
}

ErgodicSystem ErgodicSystem::rotation(double alpha, std::uint64_t seed) {
    ErgodicSystem s;
    s.kind = SystemKind::rotation;
    s.alpha = alpha;
    s.seed = seed;
    s.validate();
    return s;
}

void ErgodicSystem::validate() const {
    if (kind == SystemKind::skew_shift && dim < 1) throw ConfigError("skew-shift dimension must be >= 1");
    if ((kind == SystemKind::skew_shift || kind == SystemKind::rotation) && !(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("alpha must lie in (0,1)");
}

Point ErgodicSystem::sample_point(Stream& s) const {
    Point p(static_cast<std::size_t>(point_dim()));
    for (auto& x : p) x = s.uniform01();
    return p;
}

std::string to_string(SystemKind k) {
    switch (k) {
        case SystemKind::doubling: return "doubling";
        case SystemKind::skew_shift: return "skew-shift";
        case SystemKind::iid: return "iid";
        case SystemKind::rotation: return "rotation";
    }
    return "?";
}

SystemKind system_kind_from_string(const std::string& s) {
    if (s == "doubling") return SystemKind::doubling;
    if (s == "skew-shift" || s == "skew_shift" || s == "skew") return SystemKind::skew_shift;
    if (s == "iid") return SystemKind::iid;
    if (s == "rotation") return SystemKind::rotation;
    throw ConfigError("unknown system kind '" + s + "'");
}

std::string to_string(Distribution d) { return d == Distribution::uniform ? "uniform" : "bernoulli"; }

Distribution distribution_from_string(const std::string& s) {
    if (s == "uniform") return Distribution::uniform;
    if (s == "bernoulli") return Distribution::bernoulli;
    throw ConfigError("unknown distribution '" + s + "'");
}

LawMoments law_moments(Distribution d) {
    // normalized probability laws on [-1,1]
    if (d == Distribution::uniform) return {0.0, 1.0 / 3.0, 4.0 / 45.0};
    return {0.0, 1.0, 0.0};
}

OrbitCursor::OrbitCursor(const ErgodicSystem& sys, const Point& omega) : sys_(sys), x_(omega) {
    sys_.validate();
    if (static_cast<int>(omega.size()) != sys_.point_dim())
        throw ConfigError("point dimension " + std::to_string(omega.size()) + " does not match system dimension " +
                          std::to_string(sys_.point_dim()));
    if (sys_.kind != SystemKind::iid) {
        for (double c : omega)
            if (!(c >= 0.0 && c < 1.0)) throw ConfigError("torus coordinates must lie in [0,1)");
    }
    switch (sys_.kind) {
        case SystemKind::doubling:
            window_ = static_cast<std::uint64_t>(std::ldexp(omega[0], 64));
            tail_ = Stream(sys_.seed ^ kTailSalt, double_bits(omega[0]));
            break;
        case SystemKind::iid:
            iid_ = Stream(sys_.seed ^ kIidSalt, double_bits(omega[0]));
            x_[0] = iid_draw(sys_.distribution, iid_.bits_at(0));
            break;
        default:
            break;
    }
}

void OrbitCursor::refill_tail() {
    tail_word_ = tail_.next();
    tail_left_ = 64;
}

void OrbitCursor::advance() {
    ++n_;
    switch (sys_.kind) {
        case SystemKind::doubling: {
            if (tail_left_ == 0) refill_tail();
            --tail_left_;
            window_ = (window_ << 1) | ((tail_word_ >> tail_left_) & 1ULL);
            if (n_ <= static_cast<std::size_t>(kExactDoublingSteps)) {
                x_[0] = wrap01(2.0 * x_[0]);
            } else {
                x_[0] = static_cast<double>(window_ >> 11) * 0x1.0p-53;
            }
            break;
        }
        case SystemKind::skew_shift: {
            for (std::size_t k = x_.size() - 1; k >= 1; --k) x_[k] = wrap01(x_[k] + x_[k - 1]);
            x_[0] = wrap01(x_[0] + sys_.alpha);
            break;
        }
        case SystemKind::rotation:
            x_[0] = wrap01(x_[0] + sys_.alpha);
            break;
        case SystemKind::iid:
            x_[0] = iid_draw(sys_.distribution, iid_.bits_at(n_));
            break;
    }
}

std::vector<Point> orbit(const ErgodicSystem& sys, const Point& omega, std::size_t n_steps) {
    if (n_steps < 1) throw ConfigError("orbit needs at least one step");
    OrbitCursor c(sys, omega);
    std::vector<Point> out;
    out.reserve(n_steps);
    for (std::size_t n = 0; n < n_steps; ++n) {
        if (n) c.advance();
        out.push_back(c.current());
    }
    return out;
}

SamplingFunction SamplingFunction::table(std::vector<double> x, std::vector<double> y, std::string source) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("table needs at least two (x, f) rows");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= 0.0 && x[i] < 1.0)) throw ConfigError("table abscissae must lie in [0,1)");
        if (i && !(x[i] > x[i - 1])) throw ConfigError("table abscissae must be strictly ascending");
    }
    SamplingFunction f;
    f.kind = SamplingKind::table;
    f.table_x = std::move(x);
    f.table_y = std::move(y);
    f.source = std::move(source);
    return f;
}

SamplingFunction SamplingFunction::table_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open table file '" + path + "'");
    std::vector<double> xs, ys;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        double a, b;
        if (ls >> a >> b) {
            xs.push_back(a);
            ys.push_back(b);
        }
    }
    return table(std::move(xs), std::move(ys), path);
}

SamplingFunction SamplingFunction::from_name(const std::string& name) {
    if (name == "cosine" || name == "cos") return cosine();
    if (name == "linear-centered" || name == "linear_centered" || name == "linear") return linear_centered();
    if (name == "coordinate") return coordinate();
    if (name.rfind("table:", 0) == 0) return table_from_file(name.substr(6));
    throw ConfigError("unknown sampling function '" + name + "'");
}

std::string SamplingFunction::name() const {
    switch (kind) {
        case SamplingKind::cosine: return "cosine";
        case SamplingKind::linear_centered: return "linear-centered";
        case SamplingKind::coordinate: return "coordinate";
        case SamplingKind::table: return "table:" + source;
    }
    return "?";
}

double SamplingFunction::bound() const {
    if (kind != SamplingKind::table) return 1.0;
    double b = 0.0;
    for (double y : table_y) b = std::max(b, std::abs(y));
    return b;
}

double SamplingFunction::eval(double x) const {
    switch (kind) {
        case SamplingKind::cosine: return std::cos(2.0 * std::numbers::pi * x);
        case SamplingKind::linear_centered: return 2.0 * (x - 0.5);
        case SamplingKind::coordinate: return x;
        case SamplingKind::table: {
            double t = x - std::floor(x);
            const auto& X = table_x;
            const auto& Y = table_y;
            auto it = std::upper_bound(X.begin(), X.end(), t);
            std::size_t hi = static_cast<std::size_t>(it - X.begin());
            double x0, x1, y0, y1;
            if (hi == 0) {  // before the first node: wrap segment
                x0 = X.back() - 1.0, y0 = Y.back(), x1 = X.front(), y1 = Y.front();
            } else if (hi == X.size()) {
                x0 = X.back(), y0 = Y.back(), x1 = X.front() + 1.0, y1 = Y.front();
            } else {
                x0 = X[hi - 1], y0 = Y[hi - 1], x1 = X[hi], y1 = Y[hi];
            }
            return y0 + (y1 - y0) * (t - x0) / (x1 - x0);
        }
    }
    return 0.0;
}

double SamplingFunction::mean(const ErgodicSystem& sys) const {
    constexpr int n = 8192;
    if (sys.kind == SystemKind::iid) {
        if (sys.distribution == Distribution::bernoulli) return 0.5 * (eval(-1.0) + eval(1.0));
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += eval(-1.0 + 2.0 * (i + 0.5) / n);
        return s / n;
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += eval((i + 0.5) / n);
    return s / n;
}

double PotentialWindow::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

PotentialWindow potential(const ErgodicSystem& sys, const SamplingFunction& f, double lambda, const Point& omega,
                          std::size_t N) {
    if (N < 1) throw ConfigError("potential window needs N >= 1");
    if (lambda < 0.0) throw ConfigError("coupling must be nonnegative");
    PotentialWindow w;
    w.lambda = lambda;
    w.origin = {sys, omega, f.name(), f.mean(sys)};
    w.values.resize(N);
    OrbitCursor c(sys, omega);
    for (std::size_t n = 0; n < N; ++n) {
        if (n) c.advance();
        w.values[n] = lambda * f(c.current());
    }
    return w;
}

PotentialWindow potential_from_values(std::vector<double> values, double lambda) {
    PotentialWindow w;
    w.values = std::move(values);
    w.lambda = lambda;
    w.origin.f_name = "explicit";
    return w;
}

void export_potential(std::ostream& os, const PotentialWindow& w) {
    os << "# lambda=" << std::setprecision(17) << w.lambda << " kind=" << to_string(w.origin.system.kind)
       << " seed=" << w.origin.system.seed << " f=" << w.origin.f_name << " N=" << w.values.size() << '\n';
    for (double v : w.values) os << std::setprecision(17) << v << '\n';
}

PotentialWindow import_potential(std::istream& is) {
    PotentialWindow w;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string tok;
            while (hs >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
                if (k == "lambda") w.lambda = std::stod(v);
                else if (k == "kind") w.origin.system.kind = system_kind_from_string(v);
                else if (k == "seed") w.origin.system.seed = std::stoull(v);
                else if (k == "f") w.origin.f_name = v;
            }
            header = true;
            continue;
        }
        w.values.push_back(std::stod(line));
    }
    if (!header) throw ConfigError("potential file lacks the '# lambda=...' header");
    return w;
}

NondegeneracyProfile estimate_nondegeneracy(const SamplingFunction& f, const ErgodicSystem& sys,
                                            std::vector<double> E_grid, const std::vector<double>& eps_grid,
                                            std::size_t samples) {
    if (samples < 1000) throw ConfigError("non-degeneracy estimate needs at least 1000 samples");
    if (eps_grid.empty()) throw ConfigError("empty epsilon grid");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (!(eps_grid[i] > 0.0 && eps_grid[i] < 1.0)) throw ConfigError("epsilons must lie in (0,1)");
        if (i && !(eps_grid[i] < eps_grid[i - 1])) throw ConfigError("epsilon grid must be strictly decreasing");
    }
    Stream s(sys.seed ^ kNondegSalt, 0);
    std::vector<double> vals(samples);
    for (auto& v : vals) {
        Point p = sys.sample_point(s);
        if (sys.kind == SystemKind::iid) {
            OrbitCursor c(sys, p);
            p = c.current();
        }
        v = f(p);
    }
    std::sort(vals.begin(), vals.end());

    // atoms: a single value carrying visible mass
    std::size_t run = 1, best = 1;
    for (std::size_t i = 1; i < vals.size(); ++i) {
        run = (vals[i] == vals[i - 1]) ? run + 1 : 1;
        best = std::max(best, run);
    }
    if (best >= std::max<std::size_t>(5, samples / 1000))
        throw NondegeneracyViolation("sampling function has an atom carrying mass " +
                                     std::to_string(static_cast<double>(best) / samples));

    if (E_grid.empty()) {
        const std::size_t m = 64;
        E_grid.resize(m);
        for (std::size_t i = 0; i < m; ++i)
            E_grid[i] = vals.front() + (vals.back() - vals.front()) * static_cast<double>(i) / (m - 1);
    }
    auto tail = [&](double E, double eps) {
        auto lo = std::lower_bound(vals.begin(), vals.end(), E - eps);
        auto hi = std::upper_bound(vals.begin(), vals.end(), E + eps);
        return static_cast<double>(hi - lo) / static_cast<double>(samples);
    };

    NondegeneracyProfile P;
    P.epsilon_grid = eps_grid;
    P.energy_points = E_grid.size();
    for (double eps : eps_grid) {
        double sup = 0.0, at = E_grid.front();
        for (double E : E_grid) {
            double t = tail(E, eps);
            if (t > sup) sup = t, at = E;
        }
        P.measured_tails.push_back(sup);
        P.worst_energy.push_back(at);
    }
    if (P.measured_tails.back() > 0.0 && P.measured_tails.back() >= P.measured_tails.front() &&
        eps_grid.size() > 1)
        throw NondegeneracyViolation("tail probability does not decrease with epsilon");

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < eps_grid.size(); ++i)
        if (P.measured_tails[i] > 0.0) {
            xs.push_back(std::log(eps_grid[i]));
            ys.push_back(std::log(P.measured_tails[i]));
        }
    if (xs.empty()) {
        P.degenerate_fit = true;
        P.alpha = std::numeric_limits<double>::infinity();
        P.F = 0.0;
        return P;
    }
    if (xs.size() == 1) {
        P.alpha = ys[0] / xs[0];
        P.F = 1.0;
    } else {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
        mx /= xs.size(), my /= ys.size();
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        P.alpha = sxy / sxx;
        P.F = std::exp(my - P.alpha * mx);
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
        P.fit_residual = std::max(P.fit_residual, std::abs(ys[i] - std::log(P.F) - P.alpha * xs[i]));
    return P;
}

}  // namespace ergo
