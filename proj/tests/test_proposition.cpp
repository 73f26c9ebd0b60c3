#include <doctest.h>

#include <cmath>

#include "poisonforge/errors.hpp"
#include "poisonforge/proposition.hpp"

using namespace poisonforge;
using namespace poisonforge::proposition;

TEST_CASE("one-negative contrastive loss closed forms") {
    const std::vector<double> a = {1, 0}, b = {1, 0}, c = {1, 0};
    CHECK(one_negative_cl_loss(a, b, c) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // dot products 0.9 (negative) and -0.9 (positive): log(1 + e^1.8)
    const std::vector<double> pi = {1, 0};
    const std::vector<double> tau = {-0.9, std::sqrt(1 - 0.81)};
    const std::vector<double> rho = {0.9, std::sqrt(1 - 0.81)};
    CHECK(one_negative_cl_loss(pi, tau, rho) ==
          doctest::Approx(std::log(1.0 + std::exp(1.8))).epsilon(1e-12));

    // monotone in the exponent difference
    double prev = -1.0;
    for (double d : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
        const double s = d / 2.0;
        const std::vector<double> t = {-s, std::sqrt(1 - s * s)};
        const std::vector<double> r = {s, std::sqrt(1 - s * s)};
        const double loss = one_negative_cl_loss(pi, t, r);
        CHECK(loss > prev);
        CHECK(loss > 0.0);
        prev = loss;
    }
}

TEST_CASE("singular extremes: identity, diagonal, and a power-iteration oracle") {
    const auto [i1, in] = singular_extremes({1, 0, 0, 1}, 2);
    CHECK(i1 == doctest::Approx(1.0));
    CHECK(in == doctest::Approx(1.0));

    const auto [d1, dn] = singular_extremes({2, 0, 0, 1}, 2);
    CHECK(d1 == doctest::Approx(2.0));
    CHECK(dn == doctest::Approx(1.0));

    // random 5x5 against power iteration on W^T W and its inverse action
    RngStream rng(3);
    const int n = 5;
    std::vector<double> w(n * n);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);

    auto matvec_wtw = [&](const std::vector<double>& x) {
        std::vector<double> wx(n, 0.0), out(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) wx[i] += w[i * n + j] * x[j];
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) out[j] += w[i * n + j] * wx[i];
        return out;
    };

    // power iteration for the largest eigenvalue of W^T W
    std::vector<double> v(n, 1.0);
    double lambda_max = 0.0;
    for (int it = 0; it < 3000; ++it) {
        auto nv = matvec_wtw(v);
        double norm = 0.0;
        for (double x : nv) norm += x * x;
        norm = std::sqrt(norm);
        for (auto& x : nv) x /= norm;
        lambda_max = norm;
        v = nv;
    }

    // inverse power iteration via Gaussian solves of (W^T W) x = b
    auto solve_wtw = [&](std::vector<double> b) {
        std::vector<double> m(n * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) m[i * n + j] += w[k * n + i] * w[k * n + j];
        for (int col = 0; col < n; ++col) {
            int piv = col;
            for (int r = col + 1; r < n; ++r)
                if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
            for (int c2 = 0; c2 < n; ++c2) std::swap(m[col * n + c2], m[piv * n + c2]);
            std::swap(b[col], b[piv]);
            for (int r = 0; r < n; ++r) {
                if (r == col) continue;
                const double f = m[r * n + col] / m[col * n + col];
                for (int c2 = col; c2 < n; ++c2) m[r * n + c2] -= f * m[col * n + c2];
                b[r] -= f * b[col];
            }
        }
        for (int i = 0; i < n; ++i) b[i] /= m[i * n + i];
        return b;
    };
    std::vector<double> u(n, 1.0);
    double mu = 0.0;
    for (int it = 0; it < 3000; ++it) {
        auto nu = solve_wtw(u);
        double norm = 0.0;
        for (double x : nu) norm += x * x;
        norm = std::sqrt(norm);
        for (auto& x : nu) x /= norm;
        mu = norm; // approximates 1 / lambda_min
        u = nu;
    }

    const auto [s1, sn] = singular_extremes(w, n);
    CHECK(std::abs(s1 - std::sqrt(lambda_max)) < 1e-8);
    CHECK(std::abs(sn - std::sqrt(1.0 / mu)) < 1e-8);

    CHECK_THROWS_AS(singular_extremes({1, 2, 3}, 2), ConfigError);
}

TEST_CASE("prop1_bound closed forms and domain errors") {
    CHECK(prop1_bound({0.0, 4, 1.0, 1.0}) == doctest::Approx(std::log(2.0) / 4).epsilon(1e-12));
    CHECK(prop1_bound({0.0, 2, 2.0, 1.0}) ==
          doctest::Approx((std::log(2.0) + std::log(7.0 / 4.0)) / 2).epsilon(1e-12));

    // sigma_n = 2 n sqrt(E) exactly: pole
    BoundInputs pole{0.01, 2, 1.0, 0.4};
    CHECK_THROWS_AS(prop1_bound(pole), DomainError);
    BoundInputs big{0.3, 4, 9.0, 8.9}; // sqrt(2 n sqrt(E)) > 1
    CHECK_THROWS_AS(prop1_bound(big), DomainError);
}

TEST_CASE("prop1_bound is numerically monotone in E_SL") {
    for (const auto& [n, s1, sn] : std::vector<std::tuple<int, double, double>>{
             {2, 1.0, 1.0}, {2, 2.0, 1.0}, {4, 3.0, 2.0}}) {
        double prev = -1.0;
        for (int k = 0; k < 40; ++k) {
            const double sq_max = 0.9 * std::min(sn / (2.0 * n), 1.0 / (2.0 * n));
            const double e = std::pow(sq_max * k / 40.0, 2);
            const double val = prop1_bound({e, n, s1, sn});
            CHECK(val >= prev);
            prev = val;
        }
    }
}

TEST_CASE("lemma 1 holds on 10^4 random full-rank instances") {
    RngStream rng(7);
    int checked = 0;
    while (checked < 10000) {
        const int n = 2 + rng.uniform_int(4);
        std::vector<double> w(n * n);
        for (auto& v : w) v = rng.uniform(-2.0, 2.0);
        const auto [s1, sn] = singular_extremes(w, n);
        if (sn < 1e-6) continue; // skip near-singular draws
        std::vector<double> z(n);
        for (auto& v : z) v = rng.uniform(-3.0, 3.0);
        CHECK(check_lemma1(w, n, z));
        ++checked;
    }

    // extremal direction and the zero vector
    CHECK(check_lemma1({2, 0, 0, 1}, 2, {1, 0}));
    CHECK(check_lemma1({2, 0, 0, 1}, 2, {0, 0}));
}

TEST_CASE("perfect-fit toys have zero lemma violations") {
    for (const ToyKind kind : {ToyKind::orthogonal, ToyKind::antipodal}) {
        const auto toy = make_toy(kind, 2, 8, 4, 0.0, 0.0, 0.0, 5);
        CHECK(toy.measured_e_sl() == doctest::Approx(0.0));
        RngStream rng(11);
        const auto rates = mc_check_lemmas(toy, 20000, rng);
        CHECK(rates.lemma2_rate == 0.0);
        CHECK(rates.lemma3_rate == 0.0);
        CHECK(rates.lemma4_rate == 0.0);
        CHECK(rates.lemma2_ok);
        CHECK(rates.lemma3_ok);
    }
    RngStream rng(12);
    const auto toy = make_toy(ToyKind::orthogonal, 2, 4, 2, 0.0, 0.0, 0.0, 5);
    CHECK_THROWS_AS(mc_check_lemmas(toy, 10, rng), ConfigError);
}

TEST_CASE("antipodal construction with analytic E_SL stays within lemma rates") {
    // all views rotated by exactly theta: with W = I the loss per view would
    // be (2 - 2 cos theta)/n; under the antipodal W it is enumerated exactly
    const double theta = 0.02;
    auto toy = make_toy(ToyKind::antipodal, 2, 16, 8, 0.0, 1.0, theta, 21);
    const double eps = toy.measured_e_sl();
    CHECK(eps > 0.0);
    CHECK(eps < 1e-3);

    RngStream rng(13);
    const auto rates = mc_check_lemmas(toy, 50000, rng);
    CHECK(rates.lemma2_ok);
    CHECK(rates.lemma3_ok);
    CHECK(rates.lemma4_rate <= rates.lemma4_bound + 3.0 * rates.stderr4);
}

TEST_CASE("proposition check: perfect fit never violates and small-eps stays in rate") {
    const auto perfect = make_toy(ToyKind::orthogonal, 2, 8, 4, 0.0, 0.0, 0.0, 31);
    RngStream rng(17);
    const auto chk = mc_check_proposition(perfect, 20000, rng);
    CHECK(chk.e_sl == doctest::Approx(0.0));
    CHECK(chk.bound == doctest::Approx(std::log(2.0) / 2).epsilon(1e-12));
    CHECK(chk.violation_rate == 0.0);
    CHECK(chk.max_loss < chk.bound);
    CHECK(chk.ok);

    // small controlled loss with occasional outlier views
    auto noisy = make_toy(ToyKind::orthogonal, 2, 32, 16, 2e-3, 1e-4, 0.8, 37);
    RngStream rng2(19);
    const auto chk2 = mc_check_proposition(noisy, 100000, rng2);
    CHECK(chk2.e_sl > 0.0);
    CHECK(chk2.ok);
}

TEST_CASE("non-normalized features violate the toy precondition") {
    auto toy = make_toy(ToyKind::orthogonal, 2, 4, 2, 0.0, 0.0, 0.0, 41);
    toy.features[0] *= 1.5;
    RngStream rng(23);
    CHECK_THROWS_AS(mc_check_proposition(toy, 2000, rng), ConfigError);
}
