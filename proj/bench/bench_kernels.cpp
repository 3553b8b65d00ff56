#include <benchmark/benchmark.h>

#include <vector>

#include "gridstart/network.hpp"
#include "gridstart/parallel.hpp"
#include "gridstart/powerflow.hpp"

namespace gs = gridstart;

namespace {

// The oracle's hot kernel: evaluate a block of (V1, V2) candidates by AC
// power flow at a fixed load. Index-sliced writes, so serial and parallel
// runs produce identical output.
void batch_candidates(benchmark::State& state, bool parallel) {
  const gs::NetworkCase net = gs::three_bus_case(gs::Variant::congested);
  const gs::LoadScenario load = gs::bus3_scenario(net, 50.0, 300.0);
  const int side = static_cast<int>(state.range(0));
  const int n = side * side;

  std::vector<double> slack(n, 0.0);
  const auto body = [&](int i) {
    gs::DispatchSetpoint sp;
    sp.gen_p_mw = {0.0, 40.0};
    sp.gen_v_pu = {1.0 + 0.004 * (i / side), 1.0 + 0.004 * (i % side)};
    gs::PfOptions opt;
    opt.enforce_q_limits = false;
    const gs::PowerFlowSolution pf = gs::solve_power_flow(net, sp, load, opt);
    slack[i] = pf.converged ? pf.slack_p_mw : -1.0;
  };

  for (auto _ : state) {
    if (parallel)
      gs::parallel_for(n, body);
    else
      gs::serial_for(n, body);
    benchmark::DoNotOptimize(slack.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void bench_serial(benchmark::State& state) { batch_candidates(state, false); }
void bench_parallel(benchmark::State& state) { batch_candidates(state, true); }

}  // namespace

BENCHMARK(bench_serial)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(bench_parallel)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
