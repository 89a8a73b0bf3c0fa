#include <benchmark/benchmark.h>

#include <random>

#include "ssov/bootstrap.hpp"
#include "ssov/mc.hpp"
#include "ssov/shares_test.hpp"
#include "ssov/shocks_test.hpp"
#include "ssov/tsls.hpp"

namespace {

ssov::InfluenceMatrix make_influence(int b, int q) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  ssov::InfluenceMatrix infl;
  infl.psi_hat.resize(b, q);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < q; ++j) infl.psi_hat(i, j) = nd(rng);
  infl.sigma_hat = Eigen::VectorXd::Ones(q);
  infl.raw_stats = infl.psi_hat.colwise().sum();
  infl.labels.resize(q, "m");
  return infl;
}

void BM_BootstrapEngine(benchmark::State& state) {
  ssov::InfluenceMatrix infl =
      make_influence(static_cast<int>(state.range(0)),
                     static_cast<int>(state.range(1)));
  ssov::BootstrapConfig cfg;
  cfg.B = 1000;
  cfg.seed = 7;
  for (auto _ : state) {
    auto run = ssov::run_max_test(infl, cfg, 1);
    benchmark::DoNotOptimize(run.p_value);
  }
}
BENCHMARK(BM_BootstrapEngine)->Args({48, 20})->Args({48, 794})->Args({100, 20});

void BM_TslsFit(benchmark::State& state) {
  ssov::SyntheticBaseParams params = ssov::builtin_shares_base_params();
  params.n = static_cast<int>(state.range(0));
  ssov::PanelDataset ds = ssov::make_synthetic_base(params);
  ssov::StackedDesign design = ssov::stack_panel(ds);
  for (auto _ : state) {
    auto fit = ssov::fit_tsls(design);
    benchmark::DoNotOptimize(fit.beta);
  }
}
BENCHMARK(BM_TslsFit)->Arg(500)->Arg(2000);

void BM_SharesTest(benchmark::State& state) {
  ssov::PanelDataset ds =
      ssov::make_synthetic_base(ssov::builtin_shares_base_params());
  ssov::SharesTestOptions opts;
  opts.sic_level = 2;
  opts.periods = ssov::PeriodSelection::pooled_time;
  opts.bootstrap.B = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto res = ssov::run_shares_test(ds, opts);
    benchmark::DoNotOptimize(res.p_value);
  }
}
BENCHMARK(BM_SharesTest)->Arg(500);

void BM_RidgeShockResidual(benchmark::State& state) {
  ssov::SyntheticBaseParams params = ssov::builtin_shocks_base_params();
  params.p = static_cast<int>(state.range(0));
  ssov::PanelDataset ds = ssov::make_synthetic_base(params);
  auto fit = ssov::fit_tsls(ssov::stack_panel(ds));
  for (auto _ : state) {
    auto e = ssov::ridge_shock_residual(ds, fit.pi_hat, 1e-5);
    benchmark::DoNotOptimize(e.e_hat(0, 0));
  }
}
BENCHMARK(BM_RidgeShockResidual)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
