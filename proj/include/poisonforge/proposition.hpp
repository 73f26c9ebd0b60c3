#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "poisonforge/rng.hpp"

namespace poisonforge::proposition {

// Finite toy model: a lookup feature map g over (item, view) pairs mapping to
// the unit sphere in R^n, composed with a full-rank affine classifier
// h(z) = W z + b. Classes are balanced by construction, which gives exact
// control over the expected MSE loss via enumeration.
struct ToyModel {
    int n = 2; // feature and class dimension
    std::vector<double> w; // n x n, row-major, full rank
    std::vector<double> b; // n
    double sigma1 = 1.0, sigma_n = 1.0;

    int items_per_class = 1;
    int views = 1;
    std::vector<double> features; // (n_items * views) rows of length n, unit norm

    int n_items() const { return n * items_per_class; }
    int label_of(int item) const { return item / items_per_class; }
    const double* feature(int item, int view) const {
        return features.data() +
               (static_cast<std::size_t>(item) * views + view) * static_cast<std::size_t>(n);
    }

    void validate() const; // unit-norm features (1e-10), consistent sizes
    // exact E_SL = mean over (item, view) of (1/n) ||W g + b - e_y||^2
    double measured_e_sl() const;
};

enum class ToyKind {
    orthogonal, // W = I, class features e_y
    antipodal   // n = 2, W = diag(1, 1/sqrt(3)), b = (1/2, 1/2), features +-(1/2, -sqrt(3)/2)
};

// Features are class anchors rotated by a per-(item, view) angle drawn from
// [-max_angle, max_angle]; a fraction of views instead gets +-outlier_angle.
ToyModel make_toy(ToyKind kind, int n, int items_per_class, int views, double max_angle,
                  double outlier_fraction, double outlier_angle, std::uint64_t seed);

struct BoundInputs {
    double e_sl = 0.0;
    int n = 2;
    double sigma1 = 1.0;
    double sigma_n = 1.0;

    void validate() const; // throws DomainError outside the validity region
};

// One-negative contrastive loss, proof convention: positive pair
// (g(pi(x)), g(tau(x))), negative g(rho(x^-)).
double one_negative_cl_loss(const std::vector<double>& g_pi_x,
                            const std::vector<double>& g_tau_x,
                            const std::vector<double>& g_rho_xm);
double one_negative_cl_loss(const ToyModel& toy, int x, int x_minus, int view_pi, int view_tau,
                            int view_rho);

// extreme singular values of a square matrix (row-major n x n)
std::pair<double, double> singular_extremes(const std::vector<double>& w, int n);

// Proposition 1 upper bound l(E_SL)
double prop1_bound(const BoundInputs& in);

// sigma_n ||z|| <= ||W z|| <= sigma_1 ||z|| within 1e-9 slack
bool check_lemma1(const std::vector<double>& w, int n, const std::vector<double>& z);

struct LemmaRates {
    double e_sl = 0.0;
    int trials = 0;
    double lemma2_rate = 0.0, lemma2_bound = 0.0;
    double lemma3_rate = 0.0, lemma3_bound = 0.0;
    double lemma4_rate = 0.0, lemma4_bound = 0.0;
    double stderr2 = 0.0, stderr3 = 0.0, stderr4 = 0.0;
    bool lemma2_ok = false, lemma3_ok = false;
};

// Empirical violation rates of the Lemma 2-4 events; asserts the Lemma 2/3
// probabilities within 3 Monte-Carlo standard errors.
LemmaRates mc_check_lemmas(const ToyModel& toy, int trials, RngStream& rng);

struct PropositionCheck {
    double e_sl = 0.0;
    double bound = 0.0;
    int trials = 0;
    double violation_rate = 0.0;
    double rate_stderr = 0.0;
    double max_loss = 0.0;
    bool ok = false; // rate <= 4 sqrt(E_SL) + 3 stderr
};

// Draws (x, x^-, pi, tau, rho) with x^- from a different class (see the
// project notes: same-class negatives make the printed bound unattainable)
// and measures the frequency of one_negative_cl_loss >= prop1_bound.
PropositionCheck mc_check_proposition(const ToyModel& toy, int trials, RngStream& rng);

} // namespace poisonforge::proposition
