#include "vqpl/denot.hpp"
#include "vqpl/eval.hpp"
#include "vqpl/parser.hpp"
#include "vqpl/typecheck.hpp"

#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

namespace {

using namespace vqpl;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string program(const char* name) {
    return slurp(std::string(VQPL_PROGRAMS_DIR) + "/" + name);
}

void BM_ParseCheck(benchmark::State& state) {
    std::string text = program("teleport.vqpl");
    for (auto _ : state) {
        SourceFile sf = parse_program(text);
        CTypePtr ty = check_closed(link_decl(sf, "main"));
        benchmark::DoNotOptimize(ty);
    }
}
BENCHMARK(BM_ParseCheck);

void BM_ExploreCoin(benchmark::State& state) {
    SourceFile sf = parse_program(program("coin.vqpl"));
    CTermPtr m = link_decl(sf, "main");
    for (auto _ : state) {
        ExploreReport rep = explore(m, 50);
        benchmark::DoNotOptimize(rep.residual);
    }
}
BENCHMARK(BM_ExploreCoin);

void BM_ExploreGeometric(benchmark::State& state) {
    SourceFile sf = parse_program(program("rus.vqpl"));
    CTermPtr m = link_decl(sf, "main");
    const int rounds = static_cast<int>(state.range(0));
    for (auto _ : state) {
        ExploreReport rep = explore(m, 1 + 10 * rounds);
        benchmark::DoNotOptimize(rep.residual);
    }
}
BENCHMARK(BM_ExploreGeometric)->Arg(4)->Arg(8)->Arg(12);

void BM_ApplyUnitary(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    StateVector s = StateVector::basis(n, 0);
    GateSpec h = GateSpec::named(GateName::H);
    for (auto _ : state) {
        for (int q = 1; q <= n; q++) s = apply_unitary(s, {q}, h);
        benchmark::DoNotOptimize(s.amp(0));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ApplyUnitary)->Arg(8)->Arg(12)->Arg(16);

void BM_Sample(benchmark::State& state) {
    SourceFile sf = parse_program(program("rus.vqpl"));
    CTermPtr m = link_decl(sf, "main");
    std::uint64_t seed = 0;
    for (auto _ : state) {
        SampleResult r = sample(Program{m}, seed++, 5000);
        benchmark::DoNotOptimize(r.steps);
    }
}
BENCHMARK(BM_Sample);

void BM_TeleportChannel(benchmark::State& state) {
    SourceFile sf = parse_program(program("teleport.vqpl"));
    CTermPtr m = link_decl(sf, "main");
    for (auto _ : state) {
        Superoperator s = interp_value_channel(m);
        benchmark::DoNotOptimize(s.hmat()(0, 0));
    }
}
BENCHMARK(BM_TeleportChannel);

} // namespace

BENCHMARK_MAIN();
