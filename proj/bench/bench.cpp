// Serial reference kernels against their OpenMP counterparts. Results must
// agree exactly; timings are best of several runs.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "repmatch/linalg.hpp"
#include "repmatch/model.hpp"
#include "repmatch/pipeline.hpp"

using namespace repmatch;

namespace {

double best_seconds(int runs, const std::function<void()>& body) {
  double best = 1e300;
  for (int i = 0; i < runs; ++i) {
    const auto start = std::chrono::steady_clock::now();
    body();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return best;
}

Matrix random_matrix(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> normal;
  Matrix m(n, n);
  for (double& v : m.entries()) v = normal(gen);
  return m;
}

}  // namespace

int main() {
  std::printf("OpenMP threads available: %d\n\n", omp_get_max_threads());
  std::printf("%-24s %12s %12s %8s %s\n", "kernel", "serial s", "openmp s", "speedup", "identical");

  std::mt19937_64 gen(1);
  for (std::size_t n : {64, 256, 512}) {
    const Matrix a = random_matrix(gen, n);
    const Matrix b = random_matrix(gen, n);
    Matrix serial(1, 1);
    Matrix parallel(1, 1);
    const double ts = best_seconds(3, [&] { serial = matmul_serial(a, b); });
    const double tp = best_seconds(3, [&] { parallel = matmul(a, b); });
    const bool same = std::equal(serial.entries().begin(), serial.entries().end(), parallel.entries().begin());
    std::printf("matmul %-17zu %12.4f %12.4f %8.2f %s\n", n, ts, tp, ts / tp, same ? "yes" : "no");
  }

  const Checkpoint ckpt = pretrain(0, default_generic_task());
  const Dataset data = gen_family(100, 1, 2000, 32, 2, 0.0);
  const AdapterBundle ref = finetune(ckpt, data, TrainConfig::dataset_level()).bundle;
  Ranking serial;
  Ranking parallel;
  const double ts =
      best_seconds(1, [&] { serial = rank_instances_serial(ckpt, data, ref, TrainConfig::instance_level()); });
  const double tp = best_seconds(1, [&] { parallel = rank_instances(ckpt, data, ref, TrainConfig::instance_level()); });
  bool same = serial.entries.size() == parallel.entries.size();
  for (std::size_t i = 0; same && i < serial.entries.size(); ++i)
    same = serial.entries[i].index == parallel.entries[i].index && serial.entries[i].score == parallel.entries[i].score;
  std::printf("%-24s %12.4f %12.4f %8.2f %s\n", "rank_instances 2000", ts, tp, ts / tp, same ? "yes" : "no");
  return same ? 0 : 1;
}
