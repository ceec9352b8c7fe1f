#include <benchmark/benchmark.h>

#include <random>

#include "dmgnet/kernels.hpp"

using namespace dmgnet;
namespace k = dmgnet::kernels;

namespace {

struct Problem {
    Tensor<float> in, dout;
    std::vector<float> w, b;
    int out_c;

    Problem(int side, int in_c, int out_c_) : in(in_c, side, side), dout(out_c_, side, side), out_c(out_c_) {
        std::mt19937_64 rng(1);
        std::normal_distribution<float> d(0.0f, 1.0f);
        for (auto& v : in.data) v = d(rng);
        for (auto& v : dout.data) v = d(rng);
        w.resize(static_cast<std::size_t>(out_c) * in_c * 9);
        b.resize(out_c);
        for (auto& v : w) v = 0.1f * d(rng);
    }
};

// Args: side, in channels, out channels.
void BM_ConvForwardReference(benchmark::State& state) {
    Problem p(state.range(0), state.range(1), state.range(2));
    Tensor<float> out;
    for (auto _ : state) {
        k::reference::conv2d_forward<float>(p.in, p.w, p.b, p.out_c, 3, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}

void BM_ConvForwardParallel(benchmark::State& state) {
    Problem p(state.range(0), state.range(1), state.range(2));
    Tensor<float> out;
    for (auto _ : state) {
        k::conv2d_forward<float>(p.in, p.w, p.b, p.out_c, 3, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}

void BM_ConvBackwardReference(benchmark::State& state) {
    Problem p(state.range(0), state.range(1), state.range(2));
    Tensor<float> din;
    std::vector<float> dw(p.w.size()), db(p.out_c);
    for (auto _ : state) {
        k::reference::conv2d_backward<float>(p.in, p.w, p.dout, 3, dw, db, &din);
        benchmark::DoNotOptimize(din.data.data());
    }
}

void BM_ConvBackwardParallel(benchmark::State& state) {
    Problem p(state.range(0), state.range(1), state.range(2));
    Tensor<float> din;
    std::vector<float> dw(p.w.size()), db(p.out_c);
    for (auto _ : state) {
        k::conv2d_backward<float>(p.in, p.w, p.dout, 3, dw, db, &din);
        benchmark::DoNotOptimize(din.data.data());
    }
}

}  // namespace

#define SHAPES ->Args({128, 3, 16})->Args({128, 16, 16})->Args({64, 32, 32})->Unit(benchmark::kMillisecond)
BENCHMARK(BM_ConvForwardReference) SHAPES;
BENCHMARK(BM_ConvForwardParallel) SHAPES;
BENCHMARK(BM_ConvBackwardReference) SHAPES;
BENCHMARK(BM_ConvBackwardParallel) SHAPES;

BENCHMARK_MAIN();
