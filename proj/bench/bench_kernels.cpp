// Serial vs OpenMP timings of the parallel kernels. Arg 0 = serial, 1 = parallel.

#include "polyfeti/cutter.hpp"
#include "polyfeti/experiment.hpp"
#include "polyfeti/fetidp.hpp"
#include "polyfeti/mesh.hpp"
#include "polyfeti/vem.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

namespace {

using namespace polyfeti;

struct Problem {
    CutMesh cm;
    int k;
    CoefficientField coeff;
    DofMap dm;
    DofPartition part;
    std::vector<ElementOperators> ops;
    JumpOperator jump;
    FetiSystem sys;

    Problem(CutMesh c, int order, CoefficientField cf)
        : cm(std::move(c)), k(order), coeff(std::move(cf)), dm(cm.mesh, k), part(classify_dofs(cm, dm)),
          ops(build_all_element_operators(cm.mesh, k, coeff)), jump(build_jump_operator(cm, dm, part, coeff)),
          sys(build_feti_system(cm, dm, part, ops))
    {
    }
};

const Problem& problem(int k)
{
    static std::map<int, std::unique_ptr<Problem>> cache;
    auto& slot = cache[k];
    if (!slot) {
        const Rect unit{};
        CutMesh cm = cut(generate_voronoi(4000, 1, 1, unit), SubdomainLayout::grid(6, unit));
        const auto [rho, f] = type_i_data();
        auto coeff = make_coefficients(cm, rho, f);
        slot = std::make_unique<Problem>(std::move(cm), k, std::move(coeff));
    }
    return *slot;
}

Execution exec_of(const benchmark::State& state) { return state.range(1) == 0 ? Execution::Serial : Execution::Parallel; }

void BM_ElementOperators(benchmark::State& state)
{
    const auto& p = problem(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build_all_element_operators(p.cm.mesh, p.k, p.coeff, exec_of(state)));
}

void BM_BuildFetiSystem(benchmark::State& state)
{
    const auto& p = problem(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build_feti_system(p.cm, p.dm, p.part, p.ops, exec_of(state)));
}

void BM_ApplyF(benchmark::State& state)
{
    const auto& p = problem(static_cast<int>(state.range(0)));
    FetiSystem sys = p.sys;
    sys.exec = exec_of(state);
    const Eigen::VectorXd lambda = Eigen::VectorXd::LinSpaced(p.jump.B.rows(), -1.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(apply_F(sys, p.jump, lambda));
}

void BM_Preconditioner(benchmark::State& state)
{
    const auto& p = problem(static_cast<int>(state.range(0)));
    FetiSystem sys = p.sys;
    sys.exec = exec_of(state);
    const Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(p.jump.B.rows(), -1.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(apply_dirichlet_preconditioner(sys, p.jump, r));
}

void BM_SolveFetiDp(benchmark::State& state)
{
    const auto& p = problem(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(solve_feti_dp(p.cm, p.k, p.coeff, CgConfig{}, exec_of(state)));
}

void orders_and_modes(benchmark::internal::Benchmark* b)
{
    b->ArgNames({"k", "parallel"});
    for (int k : {1, 3})
        for (int par : {0, 1}) b->Args({k, par});
    b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ElementOperators)->Apply(orders_and_modes);
BENCHMARK(BM_BuildFetiSystem)->Apply(orders_and_modes);
BENCHMARK(BM_ApplyF)->Apply(orders_and_modes);
BENCHMARK(BM_Preconditioner)->Apply(orders_and_modes);
BENCHMARK(BM_SolveFetiDp)->Apply(orders_and_modes);

BENCHMARK_MAIN();
