#include "poisonforge/proposition.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "poisonforge/errors.hpp"

namespace poisonforge::proposition {

namespace {

constexpr double kSlack = 1e-9; // absorbs floating-point noise in exact inequalities

std::vector<double> apply_classifier(const ToyModel& toy, const double* g) {
    std::vector<double> out(toy.n);
    for (int i = 0; i < toy.n; ++i) {
        double acc = toy.b[i];
        for (int j = 0; j < toy.n; ++j)
            acc += toy.w[static_cast<std::size_t>(i) * toy.n + j] * g[j];
        out[i] = acc;
    }
    return out;
}

double dot(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double mc_stderr(double rate, int trials) {
    return std::sqrt(std::max(rate * (1.0 - rate), 0.0) / trials);
}

} // namespace

// ---------------------------------------------------------------------------
// toy model
// ---------------------------------------------------------------------------

void ToyModel::validate() const {
    if (n < 2) throw ConfigError("toy model needs n >= 2");
    if (static_cast<int>(w.size()) != n * n || static_cast<int>(b.size()) != n)
        throw ConfigError("classifier dimensions inconsistent");
    if (items_per_class < 1 || views < 1) throw ConfigError("toy model needs items and views");
    const std::size_t rows = static_cast<std::size_t>(n_items()) * views;
    if (features.size() != rows * static_cast<std::size_t>(n))
        throw ConfigError("feature table size mismatch");
    for (std::size_t r = 0; r < rows; ++r) {
        const double* f = features.data() + r * n;
        const double norm = std::sqrt(dot(f, f, n));
        if (std::abs(norm - 1.0) > 1e-10)
            throw ConfigError("toy features must be unit-norm to 1e-10");
    }
    if (!(sigma_n > 0.0) || sigma1 < sigma_n)
        throw ConfigError("singular values must satisfy sigma1 >= sigma_n > 0");
}

double ToyModel::measured_e_sl() const {
    double acc = 0.0;
    for (int item = 0; item < n_items(); ++item) {
        const int y = label_of(item);
        for (int v = 0; v < views; ++v) {
            const auto out = apply_classifier(*this, feature(item, v));
            double sq = 0.0;
            for (int j = 0; j < n; ++j) {
                const double d = out[j] - (j == y ? 1.0 : 0.0);
                sq += d * d;
            }
            acc += sq / n;
        }
    }
    return acc / (static_cast<double>(n_items()) * views);
}

ToyModel make_toy(ToyKind kind, int n, int items_per_class, int views, double max_angle,
                  double outlier_fraction, double outlier_angle, std::uint64_t seed) {
    if (kind == ToyKind::antipodal && n != 2)
        throw ConfigError("the antipodal construction is two-dimensional");
    if (n < 2) throw ConfigError("toy model needs n >= 2");

    ToyModel toy;
    toy.n = n;
    toy.items_per_class = items_per_class;
    toy.views = views;
    toy.w.assign(static_cast<std::size_t>(n) * n, 0.0);
    toy.b.assign(n, 0.0);

    // class anchors u_y with h(u_y) = e_y exactly
    std::vector<std::vector<double>> anchors(n, std::vector<double>(n, 0.0));
    // rotation plane per class: (u_y, q_y) orthonormal
    std::vector<std::vector<double>> planes(n, std::vector<double>(n, 0.0));

    if (kind == ToyKind::orthogonal) {
        for (int i = 0; i < n; ++i) toy.w[static_cast<std::size_t>(i) * n + i] = 1.0;
        toy.sigma1 = toy.sigma_n = 1.0;
        for (int y = 0; y < n; ++y) {
            anchors[y][y] = 1.0;
            planes[y][(y + 1) % n] = 1.0;
        }
    } else {
        const double s2 = 1.0 / std::sqrt(3.0);
        toy.w = {1.0, 0.0, 0.0, s2};
        toy.b = {0.5, 0.5};
        toy.sigma1 = 1.0;
        toy.sigma_n = s2;
        anchors[0] = {0.5, -std::sqrt(3.0) / 2.0};
        anchors[1] = {-0.5, std::sqrt(3.0) / 2.0};
        planes[0] = {std::sqrt(3.0) / 2.0, 0.5};
        planes[1] = {std::sqrt(3.0) / 2.0, 0.5};
    }

    RngStream rng(seed);
    const int rows = toy.n_items() * views;
    toy.features.assign(static_cast<std::size_t>(rows) * n, 0.0);
    for (int item = 0; item < toy.n_items(); ++item) {
        const int y = toy.label_of(item);
        for (int v = 0; v < views; ++v) {
            double angle = rng.uniform(-max_angle, max_angle);
            if (outlier_fraction > 0.0 && rng.bernoulli(outlier_fraction))
                angle = rng.bernoulli(0.5) ? outlier_angle : -outlier_angle;
            const double c = std::cos(angle), s = std::sin(angle);
            double* f = toy.features.data() +
                        (static_cast<std::size_t>(item) * views + v) * static_cast<std::size_t>(n);
            for (int j = 0; j < n; ++j) f[j] = c * anchors[y][j] + s * planes[y][j];
        }
    }
    toy.validate();
    return toy;
}

// ---------------------------------------------------------------------------
// losses and bounds
// ---------------------------------------------------------------------------

double one_negative_cl_loss(const std::vector<double>& g_pi_x,
                            const std::vector<double>& g_tau_x,
                            const std::vector<double>& g_rho_xm) {
    const int n = static_cast<int>(g_pi_x.size());
    const double pos = dot(g_pi_x.data(), g_tau_x.data(), n);
    const double neg = dot(g_pi_x.data(), g_rho_xm.data(), n);
    return std::log1p(std::exp(neg - pos));
}

double one_negative_cl_loss(const ToyModel& toy, int x, int x_minus, int view_pi, int view_tau,
                            int view_rho) {
    const double* pi_x = toy.feature(x, view_pi);
    const double* tau_x = toy.feature(x, view_tau);
    const double* rho_xm = toy.feature(x_minus, view_rho);
    const double pos = dot(pi_x, tau_x, toy.n);
    const double neg = dot(pi_x, rho_xm, toy.n);
    return std::log1p(std::exp(neg - pos));
}

std::pair<double, double> singular_extremes(const std::vector<double>& w, int n) {
    if (static_cast<int>(w.size()) != n * n)
        throw ConfigError("singular_extremes expects a square matrix");
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = w[static_cast<std::size_t>(i) * n + j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    return {sv(0), sv(n - 1)};
}

void BoundInputs::validate() const {
    if (n < 1) throw DomainError("n must be positive");
    if (e_sl < 0.0) throw DomainError("E_SL must be non-negative");
    if (!(sigma_n > 0.0) || sigma1 < sigma_n)
        throw DomainError("singular values must satisfy sigma1 >= sigma_n > 0");
    const double sq = std::sqrt(e_sl);
    if (!(sigma_n > 2.0 * n * sq))
        throw DomainError("domain condition sigma_n > 2 n sqrt(E_SL) violated");
    if (std::sqrt(2.0 * n * sq) > 1.0)
        throw DomainError("domain condition sqrt(2 n sqrt(E_SL)) <= 1 violated");
}

double prop1_bound(const BoundInputs& in) {
    in.validate();
    const double sq = std::sqrt(in.e_sl);
    const double n = in.n;
    const double s1 = in.sigma1, sn = in.sigma_n;
    const double first = std::log1p(sn / (sn - 2.0 * n * sq)) / n;
    const double shrink = 1.0 - std::sqrt(2.0 * n * sq);
    const double numer = s1 * s1 * sn - sn * shrink * shrink;
    const double denom = s1 * s1 * sn - 2.0 * n * s1 * s1 * sq;
    const double second = (n - 1.0) / n * std::log1p(numer / denom);
    return first + second;
}

bool check_lemma1(const std::vector<double>& w, int n, const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != n) throw ConfigError("vector dimension mismatch");
    const auto [s1, sn] = singular_extremes(w, n);
    double zn = 0.0, wz = 0.0;
    for (int i = 0; i < n; ++i) zn += z[i] * z[i];
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += w[static_cast<std::size_t>(i) * n + j] * z[j];
        wz += acc * acc;
    }
    zn = std::sqrt(zn);
    wz = std::sqrt(wz);
    return sn * zn <= wz + kSlack && wz <= s1 * zn + kSlack;
}

// ---------------------------------------------------------------------------
// Monte-Carlo checks
// ---------------------------------------------------------------------------

LemmaRates mc_check_lemmas(const ToyModel& toy, int trials, RngStream& rng) {
    toy.validate();
    if (trials < 1000) throw ConfigError("lemma check needs at least 1000 trials");

    LemmaRates rates;
    rates.e_sl = toy.measured_e_sl();
    rates.trials = trials;
    const double eps = rates.e_sl;
    const double sq = std::sqrt(eps);
    const double lemma2_thr = std::sqrt(toy.n * sq);
    const double lemma3_thr = 1.0 - 2.0 * toy.n * sq / toy.sigma_n;
    const double shrink = 1.0 - std::sqrt(2.0 * toy.n * sq);
    const double lemma4_thr = 1.0 - shrink * shrink / (toy.sigma1 * toy.sigma1);

    long v2 = 0, v3 = 0, v4 = 0;
    for (int t = 0; t < trials; ++t) {
        const int x = rng.uniform_int(toy.n_items());
        const int xm = rng.uniform_int(toy.n_items());
        const int pi = rng.uniform_int(toy.views);
        const int tau = rng.uniform_int(toy.views);

        const auto out = apply_classifier(toy, toy.feature(x, pi));
        const int y = toy.label_of(x);
        double sqdist = 0.0;
        for (int j = 0; j < toy.n; ++j) {
            const double d = out[j] - (j == y ? 1.0 : 0.0);
            sqdist += d * d;
        }
        if (std::sqrt(sqdist) >= lemma2_thr + kSlack) ++v2;

        const double pos = dot(toy.feature(x, pi), toy.feature(x, tau), toy.n);
        if (pos <= lemma3_thr - kSlack) ++v3;

        if (toy.label_of(xm) != y) {
            const double neg = dot(toy.feature(x, pi), toy.feature(xm, tau), toy.n);
            if (neg >= lemma4_thr + kSlack) ++v4;
        }
    }

    rates.lemma2_rate = static_cast<double>(v2) / trials;
    rates.lemma3_rate = static_cast<double>(v3) / trials;
    rates.lemma4_rate = static_cast<double>(v4) / trials;
    rates.lemma2_bound = sq;
    rates.lemma3_bound = 2.0 * sq;
    rates.lemma4_bound = 2.0 * sq;
    rates.stderr2 = mc_stderr(rates.lemma2_rate, trials);
    rates.stderr3 = mc_stderr(rates.lemma3_rate, trials);
    rates.stderr4 = mc_stderr(rates.lemma4_rate, trials);
    rates.lemma2_ok = rates.lemma2_rate <= rates.lemma2_bound + 3.0 * rates.stderr2;
    rates.lemma3_ok = rates.lemma3_rate <= rates.lemma3_bound + 3.0 * rates.stderr3;
    return rates;
}

PropositionCheck mc_check_proposition(const ToyModel& toy, int trials, RngStream& rng) {
    toy.validate();
    if (trials < 1000) throw ConfigError("proposition check needs at least 1000 trials");

    PropositionCheck check;
    check.e_sl = toy.measured_e_sl();
    check.trials = trials;
    BoundInputs in{check.e_sl, toy.n, toy.sigma1, toy.sigma_n};
    check.bound = prop1_bound(in);

    const int per_class = toy.items_per_class;
    long violations = 0;
    for (int t = 0; t < trials; ++t) {
        const int x = rng.uniform_int(toy.n_items());
        const int y = toy.label_of(x);
        // negative sample from a different class
        int xm = rng.uniform_int(toy.n_items() - per_class);
        if (xm >= y * per_class) xm += per_class;
        const int pi = rng.uniform_int(toy.views);
        const int tau = rng.uniform_int(toy.views);
        const int rho = rng.uniform_int(toy.views);
        const double loss = one_negative_cl_loss(toy, x, xm, pi, tau, rho);
        check.max_loss = std::max(check.max_loss, loss);
        if (loss >= check.bound) ++violations;
    }
    check.violation_rate = static_cast<double>(violations) / trials;
    check.rate_stderr = mc_stderr(check.violation_rate, trials);
    check.ok =
        check.violation_rate <= 4.0 * std::sqrt(check.e_sl) + 3.0 * check.rate_stderr;
    return check;
}

} // namespace poisonforge::proposition
