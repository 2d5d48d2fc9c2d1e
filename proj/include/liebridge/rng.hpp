#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace liebridge {

/// Counter-based seed for stream `index` under `tag`; independent of thread scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index);

/// Seeded Gaussian source. Identical seeds give bit-identical sequences.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }
  /// dim independent N(0, dt) draws.
  Eigen::VectorXd increment(int dim, double dt);
  /// Stream keyed by (this seed, tag, index).
  NoiseStream child(std::string_view tag, std::uint64_t index) const {
    return NoiseStream(derive_seed(seed_, tag, index));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Worker count: LIEBRIDGE_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Runs fn(i) for i in [0, n). Each index must write only its own output slot;
/// the first exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace liebridge
