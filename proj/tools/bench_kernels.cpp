#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "iik/kernels.hpp"
#include "iik/rng.hpp"

// Times the OpenMP kernels against the serial reference implementations
// on decomposer-shaped workloads and verifies they agree.

using namespace iik;

namespace {

double time_best(const std::function<void()>& fn, int reps) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void fill(std::vector<float>& v, Rng& rng) {
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
}

double max_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

void row(const char* name, double serial, double parallel, double diff) {
    std::printf("%-28s %10.2f ms %10.2f ms %8.2fx   %.2e\n", name, serial * 1e3, parallel * 1e3,
                serial / parallel, diff);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmark: serial reference vs OpenMP"};
    int reps = 3;
    int batch = 8;
    app.add_option("--reps", reps, "repetitions per timing (best kept)");
    app.add_option("--batch", batch, "batch size for conv workloads");
    CLI11_PARSE(app, argc, argv);

    Rng rng(1, 0);
    std::printf("%-28s %13s %13s %9s   %s\n", "kernel", "serial", "openmp", "speedup", "max|diff|");

    {  // gemm on a decoder-sized matmul
        const int M = 256, N = 4096, K = 288;
        std::vector<float> a(static_cast<size_t>(M) * K), b(static_cast<size_t>(K) * N);
        std::vector<float> c0(static_cast<size_t>(M) * N), c1(c0.size());
        fill(a, rng);
        fill(b, rng);
        const double ts = time_best([&] { kernels::ref::gemm<float>(M, N, K, a.data(), b.data(), c0.data(), false); }, reps);
        const double tp = time_best([&] { kernels::gemm<float>(M, N, K, a.data(), b.data(), c1.data(), false); }, reps);
        row("gemm 256x4096x288", ts, tp, max_diff(c0, c1));
    }

    for (const auto& [name, shape] : std::vector<std::pair<std::string, kernels::ConvShape>>{
             {"conv 7->32 k3 128^2", {7, 128, 128, 32, 3, 1, 1}},
             {"conv 32->64 k3 s2 128^2", {32, 128, 128, 64, 3, 2, 1}},
             {"conv 64->64 k3 32^2", {64, 32, 32, 64, 3, 1, 1}},
         }) {
        const size_t in_sz = static_cast<size_t>(batch) * shape.in_c * shape.in_h * shape.in_w;
        const size_t w_sz = static_cast<size_t>(shape.out_c) * shape.patch_len();
        const size_t out_sz =
            static_cast<size_t>(batch) * shape.out_c * shape.out_h() * shape.out_w();
        std::vector<float> in(in_sz), w(w_sz), bias(shape.out_c), out0(out_sz), out1(out_sz);
        fill(in, rng);
        fill(w, rng);
        fill(bias, rng);
        const double ts = time_best(
            [&] { kernels::ref::conv2d_forward<float>(shape, batch, in.data(), w.data(), bias.data(), out0.data()); },
            reps);
        const double tp = time_best(
            [&] { kernels::conv2d_forward<float>(shape, batch, in.data(), w.data(), bias.data(), out1.data()); },
            reps);
        row(name.c_str(), ts, tp, max_diff(out0, out1));
    }

    {  // gaussian blur on a paradigm-sized field
        const int h = 256, w = 256;
        std::vector<double> in(static_cast<size_t>(h) * w), out0(in.size()), out1(in.size());
        for (auto& v : in) v = rng.uniform();
        const double ts = time_best([&] { kernels::ref::gaussian_blur(h, w, in.data(), out0.data(), 12.0); }, reps);
        const double tp = time_best([&] { kernels::gaussian_blur(h, w, in.data(), out1.data(), 12.0); }, reps);
        double d = 0;
        for (size_t i = 0; i < out0.size(); ++i) d = std::max(d, std::abs(out0[i] - out1[i]));
        row("gaussian blur 256^2 s12", ts, tp, d);
    }

    {  // bilinear resize, scale ladder workload
        const int c = 3, ih = 512, iw = 512, oh = 256, ow = 256;
        std::vector<double> in(static_cast<size_t>(c) * ih * iw);
        std::vector<double> out0(static_cast<size_t>(c) * oh * ow), out1(out0.size());
        for (auto& v : in) v = rng.uniform();
        const double ts = time_best([&] { kernels::ref::resize_bilinear(c, ih, iw, in.data(), oh, ow, out0.data()); }, reps);
        const double tp = time_best([&] { kernels::resize_bilinear(c, ih, iw, in.data(), oh, ow, out1.data()); }, reps);
        double d = 0;
        for (size_t i = 0; i < out0.size(); ++i) d = std::max(d, std::abs(out0[i] - out1[i]));
        row("resize 512^2 -> 256^2", ts, tp, d);
    }

    return 0;
}
