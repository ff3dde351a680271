#include <benchmark/benchmark.h>

#include "vmpfc/schemes.hpp"
#include "vmpfc/sim.hpp"

namespace {

using namespace vmpfc;

struct Setup {
  GridPtr grid;
  ModelParams p;
  SchemeParams sp;
  SchemeState state;

  Setup(SchemeKind kind, int n)
      : grid(Grid::make_uniform(2, n, 128.0)),
        state([&] {
          p.alpha = 0.01;
          p.epsilon = 0.9;
          p.h_vac = 5000;
          sp.stab_s = 100;
          sp.dt = 0.05;
          auto [phi0, psi0] = build_initial(RandomPerturbation{0.06, 0.001, 42}, grid);
          SchemeState s = initial_state(kind, phi0, psi0, p, sp);
          return bootstrap_step(kind, s, p, sp).state;
        }()) {}
};

void BM_FFTRoundTrip(benchmark::State& st) {
  const GridPtr grid = Grid::make_uniform(2, static_cast<int>(st.range(0)), 128.0);
  auto [phi, psi] = build_initial(RandomPerturbation{}, grid);
  for (auto _ : st) {
    RealField back = to_physical(to_spectral(phi));
    benchmark::DoNotOptimize(back[0]);
  }
}
BENCHMARK(BM_FFTRoundTrip)->Arg(64)->Arg(128)->Arg(256);

template <SchemeKind Kind>
void BM_CnStep(benchmark::State& st) {
  Setup s(Kind, static_cast<int>(st.range(0)));
  for (auto _ : st) {
    StepReport r = cn_step(Kind, s.state, s.p, s.sp, s.sp.dt);
    benchmark::DoNotOptimize(r.state.aux);
  }
}
BENCHMARK(BM_CnStep<SchemeKind::kSav>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_CnStep<SchemeKind::kGpav>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_CnStep<SchemeKind::kEsav>)->Arg(64)->Arg(128)->Arg(256);

void BM_Energies(benchmark::State& st) {
  Setup s(SchemeKind::kSav, static_cast<int>(st.range(0)));
  for (auto _ : st) {
    Energies e = evaluate_energies(SchemeKind::kSav, s.state, s.p, s.sp);
    benchmark::DoNotOptimize(e.original);
  }
}
BENCHMARK(BM_Energies)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
