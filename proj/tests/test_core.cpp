#include <doctest.h>

#include <cmath>
#include <cstring>

#include "poisonforge/kernels.hpp"
#include "poisonforge/parallel.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/tensor.hpp"

using namespace poisonforge;

TEST_CASE("rng streams are deterministic and splittable") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream parent(7);
    RngStream c1 = parent.split();
    RngStream c2 = parent.split();
    bool all_equal = true;
    for (int i = 0; i < 64; ++i)
        if (c1.next_u64() != c2.next_u64()) all_equal = false;
    CHECK_FALSE(all_equal);
}

TEST_CASE("rng uniform and bernoulli ranges") {
    RngStream rng(3);
    double mean = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        mean += u;
    }
    CHECK(std::abs(mean / 20000 - 0.5) < 0.02);

    int hits = 0;
    for (int i = 0; i < 20000; ++i) hits += rng.bernoulli(0.25);
    CHECK(std::abs(hits / 20000.0 - 0.25) < 0.02);

    for (int i = 0; i < 1000; ++i) {
        const int v = rng.uniform_int(7);
        CHECK(v >= 0);
        CHECK(v < 7);
    }
}

TEST_CASE("rng normal moments") {
    RngStream rng(11);
    double m = 0.0, sq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        m += x;
        sq += x * x;
    }
    m /= n;
    CHECK(std::abs(m) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

namespace {

TensorF random_tensor(std::vector<int> shape, RngStream& rng) {
    TensorF t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

bool bitwise_equal(const TensorF& a, const TensorF& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

} // namespace

TEST_CASE("omp kernels match the serial references bitwise") {
    RngStream rng(123);
    const int n = 4, ci = 3, h = 16, w = 16, co = 8, k = 3, pad = 1;
    const TensorF x = random_tensor({n, ci, h, w}, rng);
    const TensorF wt = random_tensor({co, ci, k, k}, rng);
    const TensorF b = random_tensor({co}, rng);

    set_num_threads(0); // hardware default
    TensorF out_omp({n, co, h, w});
    kernels::conv2d_fwd(x.data(), wt.data(), b.data(), out_omp.data(), n, ci, h, w, co, k, pad);
    TensorF out_ser({n, co, h, w});
    kernels::serial::conv2d_fwd(x.data(), wt.data(), b.data(), out_ser.data(), n, ci, h, w, co,
                                k, pad);
    CHECK(bitwise_equal(out_omp, out_ser));

    const TensorF gout = random_tensor({n, co, h, w}, rng);
    TensorF gw1({co, ci, k, k}), gb1({co}), gw2({co, ci, k, k}), gb2({co});
    kernels::conv2d_bwd_params(gout.data(), x.data(), gw1.data(), gb1.data(), n, ci, h, w, co,
                               k, pad);
    kernels::serial::conv2d_bwd_params(gout.data(), x.data(), gw2.data(), gb2.data(), n, ci, h,
                                       w, co, k, pad);
    CHECK(bitwise_equal(gw1, gw2));
    CHECK(bitwise_equal(gb1, gb2));

    TensorF mean1({ci}), var1({ci}), mean2({ci}), var2({ci});
    kernels::bn2d_stats(x.data(), n, ci, h, w, mean1.data(), var1.data());
    kernels::serial::bn2d_stats(x.data(), n, ci, h, w, mean2.data(), var2.data());
    CHECK(bitwise_equal(mean1, mean2));
    CHECK(bitwise_equal(var1, var2));

    TensorF p1({n, ci, h / 2, w / 2}), p2({n, ci, h / 2, w / 2});
    kernels::avgpool2_fwd(x.data(), p1.data(), n, ci, h, w);
    kernels::serial::avgpool2_fwd(x.data(), p2.data(), n, ci, h, w);
    CHECK(bitwise_equal(p1, p2));

    TensorF lo({n, co}), ls({n, co});
    const TensorF lx = random_tensor({n, 32}, rng);
    const TensorF lw = random_tensor({co, 32}, rng);
    const TensorF lb = random_tensor({co}, rng);
    kernels::linear_fwd(lx.data(), lw.data(), lb.data(), lo.data(), n, 32, co);
    kernels::serial::linear_fwd(lx.data(), lw.data(), lb.data(), ls.data(), n, 32, co);
    CHECK(bitwise_equal(lo, ls));
}

TEST_CASE("kernel results are thread-count invariant") {
    RngStream rng(5);
    const int n = 3, ci = 3, h = 12, w = 12, co = 5, k = 3, pad = 1;
    const TensorF x = random_tensor({n, ci, h, w}, rng);
    const TensorF wt = random_tensor({co, ci, k, k}, rng);
    const TensorF b = random_tensor({co}, rng);

    set_num_threads(1);
    TensorF out1({n, co, h, w});
    kernels::conv2d_fwd(x.data(), wt.data(), b.data(), out1.data(), n, ci, h, w, co, k, pad);
    set_num_threads(4);
    TensorF out4({n, co, h, w});
    kernels::conv2d_fwd(x.data(), wt.data(), b.data(), out4.data(), n, ci, h, w, co, k, pad);
    set_num_threads(0);
    CHECK(bitwise_equal(out1, out4));
}

TEST_CASE("conv gradients match finite differences") {
    RngStream rng(9);
    const int n = 2, ci = 2, h = 6, w = 6, co = 3, k = 3, pad = 1;
    const TensorF x = random_tensor({n, ci, h, w}, rng);
    const TensorF wt = random_tensor({co, ci, k, k}, rng);
    const TensorF b = random_tensor({co}, rng);
    const TensorF gout = random_tensor({n, co, h, w}, rng);

    auto functional = [&](const TensorF& xin, const TensorF& win) {
        TensorF out({n, co, h, w});
        kernels::conv2d_fwd(xin.data(), win.data(), b.data(), out.data(), n, ci, h, w, co, k,
                            pad);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += gout[i] * out[i];
        return acc;
    };

    TensorF gin({n, ci, h, w});
    kernels::conv2d_bwd_input(gout.data(), wt.data(), gin.data(), n, ci, h, w, co, k, pad);
    TensorF gw({co, ci, k, k}), gb({co});
    kernels::conv2d_bwd_params(gout.data(), x.data(), gw.data(), gb.data(), n, ci, h, w, co, k,
                               pad);

    const float step = 1e-2f;
    TensorF xp = x;
    for (std::size_t i = 0; i < 20; ++i) {
        const std::size_t j = i * 7 % x.size();
        const float orig = xp[j];
        xp[j] = orig + step;
        const double up = functional(xp, wt);
        xp[j] = orig - step;
        const double dn = functional(xp, wt);
        xp[j] = orig;
        CHECK(std::abs((up - dn) / (2 * step) - gin[j]) < 2e-2);
    }
    TensorF wp = wt;
    for (std::size_t i = 0; i < 20; ++i) {
        const std::size_t j = i * 5 % wt.size();
        const float orig = wp[j];
        wp[j] = orig + step;
        const double up = functional(x, wp);
        wp[j] = orig - step;
        const double dn = functional(x, wp);
        wp[j] = orig;
        CHECK(std::abs((up - dn) / (2 * step) - gw[j]) < 5e-2);
    }
}
