// Serial reference loops against the OpenMP kernels. Arguments are
// rows/width/threads; the thread count applies to the OpenMP variants only.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "probekit/kernels.hpp"

namespace {

using probekit::Matrix;
using probekit::Vector;
namespace kernels = probekit::kernels;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

std::vector<int> random_labels(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = static_cast<int>(rng() >> 63);
  return y;
}

// Training-set shapes (2N activations of width d) on one thread.
void shape_args(benchmark::internal::Benchmark* b) {
  for (int rows : {4000, 28000}) {
    for (int width : {384, 1536}) b->Args({rows, width, 1});
  }
}

void parallel_args(benchmark::internal::Benchmark* b) {
  for (int threads : {1, 2, 4}) b->Args({28000, 1536, threads});
}

template <bool Reference>
void BM_ColumnMoments(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), state.range(1), 1);
  if constexpr (!Reference) kernels::set_num_threads(static_cast<int>(state.range(2)));
  for (auto _ : state) {
    auto m = Reference ? kernels::reference::column_moments(x) : kernels::column_moments(x);
    benchmark::DoNotOptimize(m.stds.data());
  }
  state.SetBytesProcessed(state.iterations() * x.size() * static_cast<int64_t>(sizeof(double)));
}

template <bool Reference>
void BM_StandardizeProject(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), state.range(1), 2);
  const Matrix components = random_matrix(50, state.range(1), 3);
  const Vector means = Vector::Zero(x.cols());
  const Vector scales = Vector::Ones(x.cols());
  const std::vector<unsigned char> constant(static_cast<std::size_t>(x.cols()), 0);
  if constexpr (!Reference) kernels::set_num_threads(static_cast<int>(state.range(2)));
  for (auto _ : state) {
    const Matrix z = Reference ? kernels::reference::standardize(x, means, scales, constant)
                               : kernels::standardize(x, means, scales, constant);
    const Matrix p = Reference ? kernels::reference::project(z, components) : kernels::project(z, components);
    benchmark::DoNotOptimize(p.data());
  }
}

template <bool Reference>
void BM_LogisticTerms(benchmark::State& state) {
  const Eigen::Index k = state.range(1) / 5;
  const Matrix phi = random_matrix(state.range(0), k, 4);
  const std::vector<int> y = random_labels(phi.rows(), 5);
  const Vector w = random_matrix(k, 1, 6).col(0) * 0.1;
  if constexpr (!Reference) kernels::set_num_threads(static_cast<int>(state.range(2)));
  for (auto _ : state) {
    auto t = Reference ? kernels::reference::logistic_terms(phi, y, w, 0.1, true)
                       : kernels::logistic_terms(phi, y, w, 0.1, true);
    benchmark::DoNotOptimize(t.loss);
  }
}

BENCHMARK(BM_ColumnMoments<true>)->Name("ColumnMoments/reference")->Apply(shape_args);
BENCHMARK(BM_ColumnMoments<false>)->Name("ColumnMoments/openmp")->Apply(shape_args);
BENCHMARK(BM_ColumnMoments<false>)->Name("ColumnMoments/openmp_threads")->Apply(parallel_args)->UseRealTime();
BENCHMARK(BM_StandardizeProject<true>)->Name("StandardizeProject/reference")->Apply(shape_args);
BENCHMARK(BM_StandardizeProject<false>)->Name("StandardizeProject/openmp")->Apply(shape_args);
BENCHMARK(BM_StandardizeProject<false>)->Name("StandardizeProject/openmp_threads")->Apply(parallel_args)->UseRealTime();
BENCHMARK(BM_LogisticTerms<true>)->Name("LogisticTerms/reference")->Apply(shape_args);
BENCHMARK(BM_LogisticTerms<false>)->Name("LogisticTerms/openmp")->Apply(shape_args);
BENCHMARK(BM_LogisticTerms<false>)->Name("LogisticTerms/openmp_threads")->Apply(parallel_args)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
