#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include <Eigen/Core>

#include "rwrp/random.hpp"

namespace rwrp {

struct RunPlan {
  std::string experiment_id = "run";
  std::string estimator;
  std::int64_t replicates = 1;
  std::uint64_t master_seed = 0;
  int workers = 0;  // <= 0: RWRP_DEFAULT_WORKERS, else hardware concurrency
  std::int64_t checkpoint_every = 0;  // 0 disables checkpointing
  std::filesystem::path checkpoint_path;
};

// Count, mean and sum of squared deviations, merged with Chan's update.
class StreamingStats {
 public:
  void add(double x);
  void merge(const StreamingStats& other);

  // Pairwise merge tree over xs in index order.
  static StreamingStats pairwise(std::span<const double> xs);

  std::int64_t count() const { return count_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
  double std_error() const;
  double min() const { return min_; }
  double max() const { return max_; }

  friend bool operator==(const StreamingStats&, const StreamingStats&) = default;

 private:
  std::int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = 0.0;
  double max_ = 0.0;
};

using Payloads = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fills one row of `width` doubles for replicate `index` from its stream seed.
// Must be a pure function of (index, seed).
using ReplicateTask = std::function<void(std::int64_t index, std::uint64_t seed, std::span<double> out)>;

int resolve_workers(int requested);

// Process-wide checkpointing for plans without their own checkpoint settings:
// the k-th such collect() call in the process logs to directory/<id>-<k>.ckpt.
struct CheckpointPolicy {
  std::filesystem::path directory;
  std::int64_t every = 0;  // 0 disables
};
void set_checkpoint_policy(CheckpointPolicy policy);

// Evaluates every replicate on a worker pool and returns the payload rows in
// replicate order. Resumes from plan.checkpoint_path when present.
Payloads collect(const RunPlan& plan, int width, const ReplicateTask& task);

// Scalar convenience: stats of task(index, seed) merged pairwise in index order.
StreamingStats run(const RunPlan& plan, const std::function<double(std::int64_t, std::uint64_t)>& task);

// Ratio sum(numerator)/sum(denominator) with a block-jackknife standard error.
struct RatioEstimate {
  double value;
  double std_error;
};
RatioEstimate jackknife_ratio(const Eigen::Ref<const Eigen::VectorXd>& numerator,
                              const Eigen::Ref<const Eigen::VectorXd>& denominator, int blocks = 50);

}  // namespace rwrp
