// Timing comparison between the OpenMP kernels and their serial references.
// Build and run: cmake --build build --target bench_kernels &&
//                ./build/bench/bench_kernels

#include <chrono>
#include <cmath>
#include <functional>
#include <cstdio>
#include <random>
#include <vector>

#include <omp.h>

#include "fpt/kernels.hpp"

using namespace fpt;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main() {
    std::mt19937_64 rng(1);
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    {
        const std::size_t m = 256, k = 256, n = 256;
        auto a = random_vec(m * k, rng);
        auto b = random_vec(k * n, rng);
        std::vector<double> c(m * n);
        const double s = time_ms(
            [&] {
                kern::serial::gemm_batched(a.data(), b.data(), c.data(), 1, m, k, n, false,
                                           false, 0, 0);
            },
            5);
        const double p = time_ms(
            [&] {
                kern::gemm_batched(a.data(), b.data(), c.data(), 1, m, k, n, false, false, 0,
                                   0);
            },
            5);
        row("gemm 256x256x256", s, p);
    }
    {
        const std::size_t batch = 64, m = 24, k = 64, n = 24;
        auto a = random_vec(batch * m * k, rng);
        auto b = random_vec(batch * k * n, rng);
        std::vector<double> c(batch * m * n);
        const double s = time_ms(
            [&] {
                kern::serial::gemm_batched(a.data(), b.data(), c.data(), batch, m, k, n, false,
                                           false, m * k, k * n);
            },
            20);
        const double p = time_ms(
            [&] {
                kern::gemm_batched(a.data(), b.data(), c.data(), batch, m, k, n, false, false,
                                   m * k, k * n);
            },
            20);
        row("batched gemm 64x(24,64,24)", s, p);
    }
    {
        const std::size_t rows = 4096, cols = 128;
        auto x = random_vec(rows * cols, rng);
        std::vector<double> y(x.size());
        const double s = time_ms(
            [&] { kern::serial::softmax_rows(x.data(), y.data(), rows, cols); }, 20);
        const double p =
            time_ms([&] { kern::softmax_rows(x.data(), y.data(), rows, cols); }, 20);
        row("softmax 4096x128", s, p);
    }
    {
        const std::size_t rows = 4096, cols = 128;
        auto x = random_vec(rows * cols, rng);
        auto gamma = random_vec(cols, rng);
        auto beta = random_vec(cols, rng);
        std::vector<double> y(x.size()), mc(rows), ic(rows);
        const double s = time_ms(
            [&] {
                kern::serial::layer_norm_rows(x.data(), gamma.data(), beta.data(), y.data(),
                                              mc.data(), ic.data(), rows, cols, 1e-5);
            },
            20);
        const double p = time_ms(
            [&] {
                kern::layer_norm_rows(x.data(), gamma.data(), beta.data(), y.data(), mc.data(),
                                      ic.data(), rows, cols, 1e-5);
            },
            20);
        row("layer norm 4096x128", s, p);
    }
    {
        const std::size_t n = 1 << 20;
        auto x = random_vec(n, rng);
        std::vector<double> y(n);
        auto f = [](double v) { return 0.5 * v * (1.0 + std::erf(v * 0.7071067811865476)); };
        const double s =
            time_ms([&] { kern::serial::unary_apply(x.data(), y.data(), n, f); }, 20);
        const double p = time_ms([&] { kern::unary_apply(x.data(), y.data(), n, f); }, 20);
        row("gelu 1M", s, p);
    }

    // sanity: both paths agree bitwise on a spot check
    {
        auto a = random_vec(32 * 48, rng);
        auto b = random_vec(48 * 16, rng);
        std::vector<double> c1(32 * 16), c2(32 * 16);
        kern::gemm_batched(a.data(), b.data(), c1.data(), 1, 32, 48, 16, false, false, 0, 0);
        kern::serial::gemm_batched(a.data(), b.data(), c2.data(), 1, 32, 48, 16, false, false,
                                   0, 0);
        std::printf("bitwise agreement: %s\n", c1 == c2 ? "yes" : "NO");
    }
    return 0;
}
