// Serial reference vs OpenMP paths: dense kernels, one training step and an
// eval sweep. Run with OMP_NUM_THREADS set to the core count.

#include <benchmark/benchmark.h>

#include "maas/harness.hpp"
#include "maas/kernels.hpp"
#include "maas/synthetic_env.hpp"

using namespace maas;

namespace {

Matrix filled(std::size_t r, std::size_t c) {
  Matrix m(r, c);
  Rng rng(1);
  for (auto& x : m.data) x = rng.uniform(-1.0, 1.0);
  return m;
}

template <ExecPolicy P>
void BM_gemv(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix m = filled(n, n);
  std::vector<double> x(n, 0.5), b(n, 0.1), out(n);
  for (auto _ : st) {
    kernels::gemv(P, m, x, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * n));
}

template <ExecPolicy P>
void BM_add_outer(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix m = filled(n, n);
  std::vector<double> u(n, 0.01), v(n, 0.02);
  for (auto _ : st) {
    kernels::add_outer(P, m, 1e-3, u, v);
    benchmark::DoNotOptimize(m.data.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * n));
}

struct Shipped {
  std::vector<QueryRecord> records = load_dataset(std::string(MAAS_DATA_DIR) + "/synthetic_mix.jsonl");
  std::shared_ptr<SyntheticEnvironment> env = std::make_shared<SyntheticEnvironment>(
      load_profiles(std::string(MAAS_DATA_DIR) + "/synthetic_profile.json"));
};

template <ExecPolicy P>
void BM_train_step(benchmark::State& st) {
  static const Shipped s;
  TrainConfig c;
  c.policy = P;
  c.samples_k = static_cast<std::size_t>(st.range(0));
  SupernetTrainer trainer(c, builtin_registry(), std::make_shared<HashingEmbedder>(), s.env,
                          std::make_shared<MockMutator>());
  std::size_t i = 0;
  for (auto _ : st) benchmark::DoNotOptimize(trainer.train_step(s.records[i++ % s.records.size()]));
}

template <ExecPolicy P>
void BM_eval(benchmark::State& st) {
  static const Shipped s;
  TrainConfig c;
  const auto ck = initial_checkpoint(c);
  for (auto _ : st) benchmark::DoNotOptimize(run_eval(ck, s.records, *s.env, P));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(s.records.size()));
}

}  // namespace

BENCHMARK(BM_gemv<ExecPolicy::serial>)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_gemv<ExecPolicy::parallel>)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_add_outer<ExecPolicy::serial>)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_add_outer<ExecPolicy::parallel>)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_train_step<ExecPolicy::serial>)->Arg(4)->Arg(16);
BENCHMARK(BM_train_step<ExecPolicy::parallel>)->Arg(4)->Arg(16);
BENCHMARK(BM_eval<ExecPolicy::serial>);
BENCHMARK(BM_eval<ExecPolicy::parallel>);

BENCHMARK_MAIN();
