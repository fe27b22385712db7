#include <omp.h>

#include <vector>

#include "doctest.h"
#include "iik/kernels.hpp"
#include "iik/rng.hpp"
#include "iik/tensor.hpp"
#include "testutil.hpp"

using namespace iik;
using testutil::fill_uniform;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed, 99);
    fill_uniform(t, rng, -1.0, 1.0);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    REQUIRE(a.size() == b.size());
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

}  // namespace

TEST_CASE("blocked gemm matches the naive reference") {
    for (auto [m, n, k] : {std::array{3, 5, 7}, std::array{64, 64, 64}, std::array{1, 513, 300},
                           std::array{37, 129, 257}}) {
        const Tensor a = random_tensor({m, k}, 1000 + m);
        const Tensor b = random_tensor({k, n}, 2000 + n);
        Tensor c0({m, n}), c1({m, n});
        kernels::ref::gemm(m, n, k, a.ptr(), b.ptr(), c0.ptr(), false);
        kernels::gemm(m, n, k, a.ptr(), b.ptr(), c1.ptr(), false);
        CHECK(testutil::max_abs_diff(c0, c1) < 1e-12);

        // accumulate mode adds on top of existing contents
        Tensor base = random_tensor({m, n}, 3000);
        Tensor c2 = base, c3 = base;
        kernels::ref::gemm(m, n, k, a.ptr(), b.ptr(), c2.ptr(), true);
        kernels::gemm(m, n, k, a.ptr(), b.ptr(), c3.ptr(), true);
        CHECK(testutil::max_abs_diff(c2, c3) < 1e-12);
    }
}

TEST_CASE("gemm_nt and gemm_tn agree with explicit transposition") {
    const int m = 9, n = 13, k = 21;
    const Tensor a = random_tensor({m, k}, 11);
    const Tensor b = random_tensor({n, k}, 12);
    Tensor bt({k, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) bt.data[static_cast<size_t>(j) * n + i] = b.data[static_cast<size_t>(i) * k + j];
    Tensor c0({m, n}), c1({m, n});
    kernels::ref::gemm(m, n, k, a.ptr(), bt.ptr(), c0.ptr(), false);
    kernels::gemm_nt(m, n, k, a.ptr(), b.ptr(), c1.ptr(), false);
    CHECK(testutil::max_abs_diff(c0, c1) < 1e-12);

    const Tensor a2 = random_tensor({k, m}, 13);
    Tensor a2t({m, k});
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < m; ++j) a2t.data[static_cast<size_t>(j) * k + i] = a2.data[static_cast<size_t>(i) * m + j];
    const Tensor b2 = random_tensor({k, n}, 14);
    Tensor c2({m, n}), c3({m, n});
    kernels::ref::gemm(m, n, k, a2t.ptr(), b2.ptr(), c2.ptr(), false);
    kernels::gemm_tn(m, n, k, a2.ptr(), b2.ptr(), c3.ptr(), false);
    CHECK(testutil::max_abs_diff(c2, c3) < 1e-12);
}

TEST_CASE("im2col conv matches direct convolution") {
    for (const kernels::ConvShape s : {kernels::ConvShape{7, 16, 16, 5, 4, 2, 1},
                                       kernels::ConvShape{3, 17, 13, 4, 5, 1, 2},
                                       kernels::ConvShape{4, 9, 9, 6, 1, 1, 0},
                                       kernels::ConvShape{2, 21, 11, 3, 6, 2, 0}}) {
        const int n = 3;
        const Tensor x = random_tensor({n, s.in_c, s.in_h, s.in_w}, 21);
        const Tensor w = random_tensor({s.out_c, s.in_c, s.kernel, s.kernel}, 22);
        const Tensor b = random_tensor({s.out_c}, 23);
        Tensor y0({n, s.out_c, s.out_h(), s.out_w()});
        Tensor y1 = y0;
        kernels::ref::conv2d_forward(s, n, x.ptr(), w.ptr(), b.ptr(), y0.ptr());
        kernels::conv2d_forward(s, n, x.ptr(), w.ptr(), b.ptr(), y1.ptr());
        CHECK(testutil::max_abs_diff(y0, y1) < 1e-12);
    }
}

TEST_CASE("conv backward passes are exact adjoints of the forward") {
    const kernels::ConvShape s{3, 12, 10, 4, 4, 2, 1};
    const int n = 2;
    const Tensor x = random_tensor({n, s.in_c, s.in_h, s.in_w}, 31);
    const Tensor w = random_tensor({s.out_c, s.in_c, s.kernel, s.kernel}, 32);
    const Tensor gy = random_tensor({n, s.out_c, s.out_h(), s.out_w()}, 33);

    Tensor y({n, s.out_c, s.out_h(), s.out_w()});
    kernels::conv2d_forward<double>(s, n, x.ptr(), w.ptr(), nullptr, y.ptr());

    Tensor gx({n, s.in_c, s.in_h, s.in_w});
    kernels::conv2d_backward_input(s, n, w.ptr(), gy.ptr(), gx.ptr(), false);
    // <conv_w(x), gy> = <x, conv_w^T(gy)> for the linear map in x
    CHECK(dot(y, gy) == doctest::Approx(dot(x, gx)).epsilon(1e-10));

    Tensor gw({s.out_c, s.in_c, s.kernel, s.kernel});
    Tensor gb({s.out_c});
    kernels::conv2d_backward_params(s, n, x.ptr(), gy.ptr(), gw.ptr(), gb.ptr());
    // the same identity for the linear map in w
    CHECK(dot(y, gy) == doctest::Approx(dot(w, gw)).epsilon(1e-10));

    // bias gradient is the per-channel sum of gy
    for (int co = 0; co < s.out_c; ++co) {
        double acc = 0.0;
        const size_t px = static_cast<size_t>(s.out_h()) * s.out_w();
        for (int i = 0; i < n; ++i)
            for (size_t p = 0; p < px; ++p) acc += gy.data[(static_cast<size_t>(i) * s.out_c + co) * px + p];
        CHECK(gb.data[co] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("gaussian blur: reference match, normalization, delta response") {
    const int h = 33, w = 29;
    const Tensor x = random_tensor({1, h, w}, 41);
    Tensor y0({1, h, w}), y1({1, h, w});
    kernels::ref::gaussian_blur(h, w, x.ptr(), y0.ptr(), 2.5);
    kernels::gaussian_blur(h, w, x.ptr(), y1.ptr(), 2.5);
    CHECK(testutil::max_abs_diff(y0, y1) < 1e-12);

    Tensor c({1, h, w}, 0.7);
    Tensor yc({1, h, w});
    kernels::gaussian_blur(h, w, c.ptr(), yc.ptr(), 4.0);
    for (double v : yc.data) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

    // centered delta reproduces the separable tap products
    const auto taps = kernels::gaussian_taps(1.0);
    const int r = static_cast<int>(taps.size()) / 2;
    Tensor d({1, 31, 31});
    d.data[15 * 31 + 15] = 1.0;
    Tensor yd({1, 31, 31});
    kernels::gaussian_blur(31, 31, d.ptr(), yd.ptr(), 1.0);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            CHECK(yd.data[static_cast<size_t>(15 + dy) * 31 + 15 + dx] ==
                  doctest::Approx(taps[dy + r] * taps[dx + r]).epsilon(1e-12));
}

TEST_CASE("bilinear resize: identity, reference match, constant preservation") {
    const Tensor x = random_tensor({3, 15, 11}, 51);
    Tensor same({3, 15, 11});
    kernels::resize_bilinear(3, 15, 11, x.ptr(), 15, 11, same.ptr());
    CHECK(testutil::max_abs_diff(x, same) == 0.0);

    Tensor up0({3, 40, 23}), up1({3, 40, 23});
    kernels::ref::resize_bilinear(3, 15, 11, x.ptr(), 40, 23, up0.ptr());
    kernels::resize_bilinear(3, 15, 11, x.ptr(), 40, 23, up1.ptr());
    CHECK(testutil::max_abs_diff(up0, up1) < 1e-12);

    Tensor c({1, 8, 8}, 0.3);
    Tensor down({1, 3, 5});
    kernels::resize_bilinear(1, 8, 8, c.ptr(), 3, 5, down.ptr());
    for (double v : down.data) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("parallel kernels are bit-reproducible across thread counts") {
    const int m = 61, n = 127, k = 83;
    const Tensor a = random_tensor({m, k}, 61);
    const Tensor b = random_tensor({k, n}, 62);
    const kernels::ConvShape s{5, 20, 18, 7, 4, 2, 1};
    const Tensor x = random_tensor({2, s.in_c, s.in_h, s.in_w}, 63);
    const Tensor w = random_tensor({s.out_c, s.in_c, s.kernel, s.kernel}, 64);

    const int saved = omp_get_max_threads();
    std::vector<Tensor> gemms, convs;
    for (int threads : {1, 2, 5}) {
        omp_set_num_threads(threads);
        Tensor c({m, n});
        kernels::gemm(m, n, k, a.ptr(), b.ptr(), c.ptr(), false);
        gemms.push_back(std::move(c));
        Tensor y({2, s.out_c, s.out_h(), s.out_w()});
        kernels::conv2d_forward<double>(s, 2, x.ptr(), w.ptr(), nullptr, y.ptr());
        convs.push_back(std::move(y));
    }
    omp_set_num_threads(saved);
    for (size_t i = 1; i < gemms.size(); ++i) {
        CHECK(testutil::max_abs_diff(gemms[0], gemms[i]) == 0.0);
        CHECK(testutil::max_abs_diff(convs[0], convs[i]) == 0.0);
    }
}
