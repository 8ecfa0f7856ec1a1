#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "ergo/errors.hpp"
#include "ergo/rng.hpp"
#include "ergo/spectral.hpp"

using namespace ergo;

namespace {

std::vector<double> random_values(Stream& s, std::size_t n, double lambda) {
    std::vector<double> v(n);
    for (auto& x : v) x = lambda * s.uniform(-1.0, 1.0);
    return v;
}

// full diagonalization oracle
Eigen::VectorXd eigen_oracle(const std::vector<double>& d) {
    const Eigen::Index n = static_cast<Eigen::Index>(d.size());
    Eigen::VectorXd diag(n), sub = Eigen::VectorXd::Ones(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i < n; ++i) diag[i] = d[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

Eigen::MatrixXd dense_shifted(const std::vector<double>& d, double E) {
    const Eigen::Index n = static_cast<Eigen::Index>(d.size());
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        H(i, i) = d[static_cast<std::size_t>(i)] - E;
        if (i + 1 < n) H(i, i + 1) = H(i + 1, i) = 1.0;
    }
    return H;
}

// free Dirichlet resolvent on [1, n] at E = 2 cos(k): sin(k x_<) sin(k (n+1-x_>)) / (sin k sin(k (n+1)))
double free_green(long n, double k, long x, long y) {
    long a = std::min(x, y), b = std::max(x, y);
    return -std::sin(k * a) * std::sin(k * (n + 1 - b)) / (std::sin(k) * std::sin(k * (n + 1)));
}

}  // namespace

TEST(Eigenvalues, SmallClosedForms) {
    std::vector<double> one{0.7};
    auto ev = eigenvalues(OperatorWindow(one));
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_DOUBLE_EQ(ev[0], 0.7);

    std::vector<double> z3(3, 0.0);
    ev = eigenvalues(OperatorWindow(z3));
    EXPECT_NEAR(ev[0], -std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(ev[1], 0.0, 1e-12);
    EXPECT_NEAR(ev[2], std::sqrt(2.0), 1e-12);
}

TEST(Eigenvalues, FreeLaplacian50) {
    std::vector<double> z(50, 0.0);
    auto ev = eigenvalues(OperatorWindow(z));
    for (int k = 50; k >= 1; --k)
        EXPECT_NEAR(ev[50 - k], 2.0 * std::cos(k * std::numbers::pi / 51.0), 1e-10);
}

TEST(Eigenvalues, AgreeWithFullDiagonalization) {
    Stream s(11);
    for (int rep = 0; rep < 30; ++rep) {
        auto d = random_values(s, 1 + s.next() % 150, 3.0);
        auto ev = eigenvalues(OperatorWindow(d));
        auto ref = eigen_oracle(d);
        for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(ev[i], ref[Eigen::Index(i)], 1e-10 * 5.0);
    }
}

TEST(SturmCount, Examples) {
    std::vector<double> z3(3, 0.0);
    EXPECT_EQ(eigen_count_below(OperatorWindow(z3), 0.0), 1u);
    std::vector<double> d{0.5, -0.3, 0.9};
    EXPECT_EQ(eigen_count_below(OperatorWindow(d), -2.0 - 0.9 - 1e-9), 0u);
    EXPECT_EQ(eigen_count_below(OperatorWindow(d), 2.0 + 0.9 + 1e-9), 3u);
}

TEST(SturmCount, MatchesOracleAndIsMonotone) {
    Stream s(12);
    for (int rep = 0; rep < 100; ++rep) {
        auto d = random_values(s, 1 + s.next() % 200, 2.0);
        OperatorWindow op(d);
        auto ref = eigen_oracle(d);
        std::size_t prev = 0;
        for (int k = 0; k < 20; ++k) {
            double E = -4.0 + 8.0 * k / 19.0 + 1e-3 * s.uniform01();
            std::size_t want = 0;
            for (Eigen::Index i = 0; i < ref.size(); ++i) want += ref[i] < E;
            std::size_t got = eigen_count_below(op, E);
            EXPECT_EQ(got, want);
            EXPECT_GE(got, prev);
            prev = got;
        }
    }
}

TEST(SpectralDistance, ExamplesAndOracle) {
    std::vector<double> z3(3, 0.0);
    EXPECT_NEAR(spectral_distance(OperatorWindow(z3), 1.0), std::sqrt(2.0) - 1.0, 1e-10);
    EXPECT_NEAR(spectral_distance(OperatorWindow(z3), std::sqrt(2.0)), 0.0, 1e-10);
    EXPECT_NEAR(spectral_distance(OperatorWindow(z3), 10.0), 10.0 - std::sqrt(2.0), 1e-10);
    Stream s(13);
    for (int rep = 0; rep < 100; ++rep) {
        auto d = random_values(s, 1 + s.next() % 120, 2.5);
        auto ref = eigen_oracle(d);
        double E = s.uniform(-5.0, 5.0);
        double want = (ref.array() - E).abs().minCoeff();
        EXPECT_NEAR(spectral_distance(OperatorWindow(d), E), want, 1e-10);
    }
}

TEST(Green, ScalarAndInvolution) {
    std::vector<double> one{0.4};
    EXPECT_NEAR(green(OperatorWindow(one, 5), 1.5, 5, 5), 1.0 / (0.4 - 1.5), 1e-15);
    std::vector<double> z2(2, 0.0);
    OperatorWindow op(z2, 3);
    EXPECT_NEAR(green(op, 0.0, 3, 3), 0.0, 1e-15);
    EXPECT_NEAR(green(op, 0.0, 3, 4), 1.0, 1e-15);
    std::vector<double> z3(3, 0.0);
    EXPECT_THROW(green(OperatorWindow(z3), 0.0, 0, 2), NearSingular);
}

TEST(Green, FreeResolventFormula) {
    const long n = 40;
    std::vector<double> z(n, 0.0);
    OperatorWindow op(z, 1);
    const double k = 0.77;
    for (long x = 1; x <= n; x += 7)
        for (long y = 1; y <= n; y += 5)
            EXPECT_NEAR(green(op, 2.0 * std::cos(k), x, y), free_green(n, k, x, y), 1e-9);
}

TEST(Green, SymmetricAndMatchesDenseInverse) {
    Stream s(14);
    for (int rep = 0; rep < 30; ++rep) {
        auto d = random_values(s, 2 + s.next() % 60, 4.0);
        double E = s.uniform(-3.0, 3.0);
        OperatorWindow op(d);
        Eigen::MatrixXd R = dense_shifted(d, E).inverse();
        for (int q = 0; q < 10; ++q) {
            long x = static_cast<long>(s.next() % d.size()), y = static_cast<long>(s.next() % d.size());
            double gxy = green(op, E, x, y), gyx = green(op, E, y, x);
            EXPECT_NEAR(gxy, gyx, 1e-10 * std::abs(gxy));
            EXPECT_NEAR(gxy, R(x, y), 1e-8 * std::max(1.0, std::abs(R(x, y))));
        }
    }
}

TEST(Green, RoutesAgreeOnLongWindows) {
    Stream s(15);
    for (int rep = 0; rep < 40; ++rep) {
        double lambda = s.uniform(0.0, 10.0);
        auto d = random_values(s, 1 + s.next() % 500, lambda);
        double E = s.uniform(-2.0 - lambda, 2.0 + lambda);
        OperatorWindow op(d);
        long x = static_cast<long>(s.next() % d.size()), y = static_cast<long>(s.next() % d.size());
        double a = green_solve(op, E, x, y);
        double c = green_cramer(op, E, x, y).value();
        if (a == 0.0 && c == 0.0) continue;
        EXPECT_LE(std::abs(a - c), 1e-8 * std::max(std::abs(a), std::abs(c)));
    }
}

TEST(Determinant, RecurrenceMatchesDense) {
    Stream s(16);
    auto d = random_values(s, 12, 2.0);
    double E = 0.37;
    SignedLog det = shifted_determinant(d, E);
    double want = dense_shifted(d, E).determinant();
    EXPECT_NEAR(det.value(), want, 1e-10 * std::abs(want));
    // huge windows stay finite in log form
    auto big = random_values(s, 5000, 50.0);
    SignedLog bd = shifted_determinant(big, 0.1);
    EXPECT_TRUE(std::isfinite(bd.log_abs));
    EXPECT_GT(bd.log_abs, 700.0);
}

TEST(ResolventNorm, HadamardBound) {
    Stream s(17);
    for (int rep = 0; rep < 100; ++rep) {
        auto d = random_values(s, 2 + s.next() % 40, s.uniform(0.0, 1.0));
        double E = s.uniform(-2.0, 2.0);
        OperatorWindow op(d);
        if (spectral_distance(op, E) < 1e-9) continue;
        double log_hs = log_resolvent_hs_norm(op, E);
        double log_op = -std::log(spectral_distance(op, E));
        EXPECT_LE(log_op, log_hs + 1e-12);
        EXPECT_LE(log_hs, log_hadamard_resolvent_bound(op, E) + 1e-12);
        double hs_dense = dense_shifted(d, E).inverse().norm();
        EXPECT_NEAR(log_hs, std::log(hs_dense), 1e-9);
    }
}

TEST(Resonance, Examples) {
    auto w = potential_from_values(std::vector<double>(3, 0.0), 0.0);
    EXPECT_FALSE(is_resonant(w, {0, 2}, {5.0, 6.0}, 0.1).resonant);
    auto r = is_resonant(w, {0, 2}, {1.4, 1.5}, 0.01);
    ASSERT_TRUE(r.resonant);
    EXPECT_EQ(r.witness->lambda_interval.a, 0);
    EXPECT_EQ(r.witness->lambda_interval.b, 2);
    EXPECT_LE(r.witness->eigen_lo, std::sqrt(2.0));
    EXPECT_GE(r.witness->eigen_hi, std::sqrt(2.0));
}

TEST(Resonance, MatchesBruteForceAndIsMonotone) {
    Stream s(18);
    for (int rep = 0; rep < 40; ++rep) {
        auto v = random_values(s, 30, 10.0);
        long len = 1 + static_cast<long>(s.next() % 30);
        long a = static_cast<long>(s.next() % (31 - len));
        SiteInterval I{a, a + len - 1};
        double E0 = s.uniform(-12.0, 12.0);
        EnergyInterval En{E0, E0 + s.uniform(0.0, 0.5)};
        double eps = s.uniform(0.001, 0.3);
        bool brute = false;
        for (long p = I.a; p <= I.b && !brute; ++p)
            for (long q = p; q <= I.b && !brute; ++q) {
                std::vector<double> sub(v.begin() + p, v.begin() + q + 1);
                auto ev = eigen_oracle(sub);
                for (Eigen::Index i = 0; i < ev.size(); ++i)
                    if (ev[i] >= En.lo - eps && ev[i] <= En.hi + eps) brute = true;
            }
        auto r = is_resonant(v, I, En, eps);
        EXPECT_EQ(r.resonant, brute);
        if (r.resonant) {
            EXPECT_TRUE(is_resonant(v, {std::max(0L, I.a - 1), I.b}, En, eps).resonant);
            EXPECT_TRUE(is_resonant(v, I, {En.lo - 0.1, En.hi}, eps).resonant);
            EXPECT_TRUE(is_resonant(v, I, En, 2 * eps).resonant);
        }
    }
}

TEST(CombesThomas, Values) {
    auto c = combes_thomas(0.4);
    EXPECT_NEAR(c.gamma, 0.0476551, 1e-6);
    EXPECT_NEAR(c.K, 25.26, 0.01);
    auto d = combes_thomas(4.0);
    EXPECT_NEAR(d.gamma, 0.5 * std::log(2.0), 1e-12);
    EXPECT_LT(d.K, 0.0);
    EXPECT_THROW(combes_thomas(0.0), ConfigError);
}

TEST(CombesThomas, HoldsOnLargeCouplingWindows) {
    Stream s(19);
    int checked = 0;
    for (int rep = 0; rep < 50; ++rep) {
        auto d = random_values(s, 60, 100.0);
        OperatorWindow op(d);
        double E = s.uniform(-100.0, 100.0);
        double delta = spectral_distance(op, E);
        if (delta < 1e-6) continue;
        auto ct = combes_thomas(delta);
        ShiftedSolver S(d, E);
        for (std::size_t k = 0; k < d.size(); k += 3) {
            auto col = S.column(k);
            for (std::size_t l = 0; l < d.size(); ++l) {
                double dist = std::abs(double(k) - double(l));
                if (dist < std::max(ct.K, 1.0)) continue;
                EXPECT_LE(std::abs(col[l]), 0.5 * std::exp(-ct.gamma * dist) * (1 + 1e-12));
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 0);
}

TEST(IsGood, FreeWindowIsNotGood) {
    auto w = potential_from_values(std::vector<double>(60, 0.0), 0.0);
    auto c = is_good(w, 30, 25, 0.1, {0.4, 0.6}, 16);
    EXPECT_NE(c.status, GoodStatus::good);
}

TEST(IsGood, LargeCouplingGapIsGood) {
    // alternating +-lambda keeps the spectrum near +-lambda, far from [-1,1]
    const double lambda = 100.0;
    std::vector<double> v(41);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i % 2 ? 1.0 : -1.0) * lambda;
    auto w = potential_from_values(v, lambda);
    double gamma = std::log(lambda) / 5.0;
    auto c = is_good(w, 20, 10, gamma, {-1.0, 1.0}, 8);
    EXPECT_EQ(c.status, GoodStatus::good) << c.note;
    EXPECT_LE(c.max_slack, 0.1 * c.threshold);
}

TEST(IsGood, HugeRateIsBad) {
    Stream s(20);
    auto w = potential_from_values(random_values(s, 10, 1.0), 1.0);
    auto c = is_good(w, 5, 1, 50.0, {3.5, 3.6}, 4);
    EXPECT_EQ(c.status, GoodStatus::bad);
}

TEST(IsGood, WindowTooShort) {
    auto w = potential_from_values(std::vector<double>(10, 0.0), 0.0);
    EXPECT_THROW(is_good(w, 2, 5, 0.1, {0.0, 0.1}, 4), WindowTooShort);
}

TEST(Certificate, GridAgreesWithDenseSampling) {
    Stream s(21);
    int good = 0;
    for (int rep = 0; rep < 10; ++rep) {
        auto d = random_values(s, 31, 8.0);
        OperatorWindow op(d);
        EnergyInterval En{s.uniform(-1.0, 0.0), 0.0};
        En.hi = En.lo + 0.2;
        auto c = certify_green_bound(op, 15, {0, 30}, 1e-3, En);
        if (c.status != GoodStatus::good) continue;
        ++good;
        // dense sampling never finds a counterexample to a Good certificate
        for (int i = 0; i <= 400; ++i) {
            double E = En.lo + En.length() * i / 400.0;
            EXPECT_LE(std::abs(green_solve(op, E, 15, 0)), 1e-3);
            EXPECT_LE(std::abs(green_solve(op, E, 15, 30)), 1e-3);
        }
    }
    EXPECT_GE(good, 3);
}

TEST(Certificate, DecayAcrossLongBlocks) {
    std::vector<double> d(201);
    for (std::size_t n = 0; n < d.size(); ++n) d[n] = n % 2 ? 1000.0 : -1000.0;
    OperatorWindow op(d);
    // |G(100, 0)| at E = 0 is about 1000^{-101}: one factor 1/|V| per site on the path
    const double g = std::abs(green_solve(op, 0.0, 100, 0));
    EXPECT_NEAR(std::log10(g), -303.0, 0.01);
    auto good = certify_green_bound(op, 100, {0, 200}, 1e-300, {-1.0, 1.0});
    EXPECT_EQ(good.status, GoodStatus::good);
    auto bad = certify_green_bound(op, 100, {0, 200}, 1e-304, {-1.0, 1.0});
    EXPECT_EQ(bad.status, GoodStatus::bad);
}
