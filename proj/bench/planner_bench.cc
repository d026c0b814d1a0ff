// Planner throughput: one MPC step (K candidates x H steps) with the serial
// reference path vs the OpenMP path, at the default network size.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "legmpc/config.h"
#include "legmpc/mpc.h"

namespace {

using namespace legmpc;

struct Fixture {
  Config cfg = load_config(default_config_path());
  DynModel model{cfg.architecture(ModelVariant::kPlain), 1};
  Predictor predictor{model};
  StateVector state = observe(start_state(cfg.robot), cfg.robot);
  Waypoints path = make_path(PathKind::kZigzag, 1.0);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Plan(benchmark::State& st, ExecPolicy policy) {
  Fixture& f = fixture();
  MpcConfig cfg = f.cfg.mpc;
  cfg.candidates = static_cast<int>(st.range(0));
  const CandidateSet set = sample_sequences(7, cfg);
  for (auto _ : st) {
    const PlanResult r = plan(f.predictor, f.state, f.path, cfg, set, policy);
    benchmark::DoNotOptimize(r.best_index);
  }
  st.counters["threads"] = policy == ExecPolicy::kParallel ? omp_get_max_threads() : 1;
  st.counters["candidates/s"] =
      benchmark::Counter(static_cast<double>(cfg.candidates), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_SingleSequence(benchmark::State& st) {
  Fixture& f = fixture();
  const CandidateSet set = sample_sequences(7, f.cfg.mpc);
  for (auto _ : st) {
    benchmark::DoNotOptimize(evaluate_sequence(f.predictor, f.state, set.sequence(0), f.path, f.cfg.mpc, false).cost);
  }
}

BENCHMARK_CAPTURE(BM_Plan, serial, ExecPolicy::kSerial)->Arg(64)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Plan, parallel, ExecPolicy::kParallel)->Arg(64)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SingleSequence)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
