// Serial reference vs OpenMP version of each data-parallel kernel.
#include <benchmark/benchmark.h>

#include <array>
#include <cmath>
#include <vector>

#include "hbn/ion_range.hpp"
#include "hbn/plasmonics.hpp"
#include "hbn/pulsed.hpp"
#include "hbn/sensitivity.hpp"

using namespace hbn;

namespace {

IonBeamSpec beam(long ions) {
  IonBeamSpec b;
  b.energy_ev = 1500.0;
  b.n_ions = ions;
  return b;
}

template <bool Parallel>
void BM_ions(benchmark::State& st) {
  const auto b = beam(st.range(0));
  const TargetMaterial t;
  for (auto _ : st) {
    auto h = Parallel ? simulate_ions(b, t) : simulate_ions_serial(b, t);
    benchmark::DoNotOptimize(h.counts.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

std::vector<double> thicknesses() {
  std::vector<double> t;
  for (double x = 10.0; x <= 100.0; x += 10.0) t.push_back(x);
  return t;
}

template <bool Parallel>
void BM_plasmon(benchmark::State& st) {
  const auto t = thicknesses();
  const EnhancementOptions opt;
  for (auto _ : st) {
    auto c = Parallel ? enhancement_vs_thickness(t, opt) : enhancement_vs_thickness_serial(t, opt);
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_sequence(benchmark::State& st) {
  const LevelSystem sys = LevelSystem::thermal(RateConstants{}, 1.0);
  const BlochState b;
  std::vector<double> sweep;
  for (int i = 0; i < st.range(0); ++i) sweep.push_back(2.0 * i);
  for (auto _ : st) {
    auto c = Parallel ? run_sequence(rabi_template(), sys, b, sweep, 1)
                      : run_sequence_serial(rabi_template(), sys, b, sweep, 1);
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_sensitivity(benchmark::State& st) {
  const std::array<ContrastAnchor, 2> anchors{{{2.0, 0.46}, {0.04, 0.10}}};
  const auto resp = calibrate_power_response(0.55, 110e6, anchors);
  std::vector<double> p;
  for (int i = 0; i < st.range(0); ++i) p.push_back(1e-4 * std::pow(10.0, 6.0 * i / (st.range(0) - 1)));
  for (auto _ : st) {
    auto c = Parallel ? sensitivity_vs_mw_power(resp, 3.6e6, p) : sensitivity_vs_mw_power_serial(resp, 3.6e6, p);
    benchmark::DoNotOptimize(c.data());
  }
}

}  // namespace

BENCHMARK(BM_ions<false>)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ions<true>)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_plasmon<false>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_plasmon<true>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sequence<false>)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sequence<true>)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sensitivity<false>)->Arg(100000);
BENCHMARK(BM_sensitivity<true>)->Arg(100000);

BENCHMARK_MAIN();
