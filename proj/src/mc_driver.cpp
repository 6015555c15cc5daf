#include "rwrp/mc_driver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include <zlib.h>

#include "rwrp/errors.hpp"

namespace rwrp {

void StreamingStats::add(double x) {
  StreamingStats one;
  one.count_ = 1;
  one.mean_ = x;
  one.min_ = x;
  one.max_ = x;
  merge(one);
}

void StreamingStats::merge(const StreamingStats& o) {
  if (o.count_ == 0) return;
  if (count_ == 0) {
    *this = o;
    return;
  }
  const double n_a = static_cast<double>(count_);
  const double n_b = static_cast<double>(o.count_);
  const double n = n_a + n_b;
  const double delta = o.mean_ - mean_;
  mean_ += delta * (n_b / n);
  m2_ += o.m2_ + delta * delta * (n_a * n_b / n);
  count_ += o.count_;
  min_ = std::min(min_, o.min_);
  max_ = std::max(max_, o.max_);
}

StreamingStats StreamingStats::pairwise(std::span<const double> xs) {
  StreamingStats s;
  if (xs.empty()) return s;
  if (xs.size() == 1) {
    s.add(xs[0]);
    return s;
  }
  const std::size_t mid = xs.size() / 2;
  s = pairwise(xs.first(mid));
  s.merge(pairwise(xs.subspan(mid)));
  return s;
}

double StreamingStats::std_error() const {
  return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RWRP_DEFAULT_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

constexpr char kMagic[8] = {'R', 'W', 'R', 'P', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string checkpoint_header(const RunPlan& plan, int width) {
  std::string h(kMagic, sizeof kMagic);
  put(h, static_cast<std::uint32_t>(width));
  put(h, static_cast<std::uint64_t>(plan.replicates));
  put(h, plan.master_seed);
  put(h, static_cast<std::uint32_t>(plan.experiment_id.size()));
  h += plan.experiment_id;
  put(h, crc_of(h));
  return h;
}

std::string encode_record(std::int64_t index, std::span<const double> row) {
  std::string rec;
  put(rec, static_cast<std::uint64_t>(index));
  rec.append(reinterpret_cast<const char*>(row.data()), row.size_bytes());
  put(rec, crc_of(rec));
  return rec;
}

// Loads valid records into `out`, marks them done, and truncates any torn tail.
void load_checkpoint(const RunPlan& plan, int width, Payloads& out, std::vector<std::uint8_t>& done) {
  const auto& path = plan.checkpoint_path;
  const std::string header = checkpoint_header(plan, width);
  if (!std::filesystem::exists(path) || std::filesystem::file_size(path) == 0) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (!f) throw ValidationError("cannot write checkpoint " + path.string());
    return;
  }
  std::ifstream f(path, std::ios::binary);
  std::string got(header.size(), '\0');
  f.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!f || got != header) throw ValidationError("checkpoint " + path.string() + " belongs to a different run plan");
  const std::size_t rec_size = sizeof(std::uint64_t) + sizeof(double) * static_cast<std::size_t>(width) +
                               sizeof(std::uint32_t);
  std::uintmax_t good = header.size();
  std::string rec(rec_size, '\0');
  while (f.read(rec.data(), static_cast<std::streamsize>(rec_size))) {
    std::uint32_t crc = 0;
    std::memcpy(&crc, rec.data() + rec_size - sizeof crc, sizeof crc);
    if (crc != crc_of(rec.substr(0, rec_size - sizeof crc))) break;
    std::uint64_t idx = 0;
    std::memcpy(&idx, rec.data(), sizeof idx);
    if (idx >= static_cast<std::uint64_t>(plan.replicates)) break;
    std::memcpy(out.row(static_cast<Eigen::Index>(idx)).data(), rec.data() + sizeof idx,
                sizeof(double) * static_cast<std::size_t>(width));
    done[idx] = 1;
    good += rec_size;
  }
  f.close();
  if (std::filesystem::file_size(path) != good) std::filesystem::resize_file(path, good);
}

CheckpointPolicy g_policy;
std::atomic<std::int64_t> g_policy_calls{0};

RunPlan with_policy(const RunPlan& plan) {
  if (plan.checkpoint_every > 0 || g_policy.every <= 0) return plan;
  RunPlan p = plan;
  p.checkpoint_every = g_policy.every;
  p.checkpoint_path = g_policy.directory / (plan.experiment_id + "-" + std::to_string(g_policy_calls++) + ".ckpt");
  return p;
}

}  // namespace

void set_checkpoint_policy(CheckpointPolicy policy) {
  if (policy.every < 0) throw ValidationError("checkpoint interval must be >= 0");
  if (policy.every > 0) std::filesystem::create_directories(policy.directory);
  g_policy = std::move(policy);
  g_policy_calls = 0;
}

Payloads collect(const RunPlan& original, int width, const ReplicateTask& task) {
  const RunPlan plan = with_policy(original);
  if (plan.replicates < 1) throw ValidationError("replicate count must be >= 1");
  if (width < 1) throw ValidationError("payload width must be >= 1");
  Payloads out = Payloads::Zero(plan.replicates, width);
  std::vector<std::uint8_t> done(static_cast<std::size_t>(plan.replicates), 0);

  const bool checkpointing = plan.checkpoint_every > 0 && !plan.checkpoint_path.empty();
  std::ofstream log;
  if (checkpointing) {
    load_checkpoint(plan, width, out, done);
    log.open(plan.checkpoint_path, std::ios::binary | std::ios::app);
  }

  std::vector<std::int64_t> todo;
  for (std::int64_t i = 0; i < plan.replicates; ++i) {
    if (!done[static_cast<std::size_t>(i)]) todo.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::string pending;
  std::int64_t pending_count = 0;
  std::int64_t failed_index = std::numeric_limits<std::int64_t>::max();
  std::exception_ptr failure;

  auto flush_locked = [&] {
    if (!pending.empty()) {
      log.write(pending.data(), static_cast<std::streamsize>(pending.size()));
      log.flush();
      pending.clear();
      pending_count = 0;
    }
  };

  auto worker = [&] {
    for (;;) {
      if (abort.load(std::memory_order_relaxed)) return;
      const std::size_t k = next.fetch_add(1, std::memory_order_relaxed);
      if (k >= todo.size()) return;
      const std::int64_t i = todo[k];
      const std::uint64_t seed = stream_seed(plan.master_seed, static_cast<std::uint64_t>(i));
      std::span<double> row(out.row(i).data(), static_cast<std::size_t>(width));
      try {
        task(i, seed, row);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
        abort = true;
        return;
      }
      if (checkpointing) {
        std::string rec = encode_record(i, row);
        std::lock_guard lock(mu);
        pending += rec;
        if (++pending_count >= plan.checkpoint_every) flush_locked();
      }
    }
  };

  const int workers = std::min<int>(resolve_workers(plan.workers), static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (checkpointing) flush_locked();

  if (failure) {
    const std::uint64_t seed = stream_seed(plan.master_seed, static_cast<std::uint64_t>(failed_index));
    try {
      std::rethrow_exception(failure);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ReplicateError("replicate " + std::to_string(failed_index) + " (stream seed " + std::to_string(seed) +
                               ") of '" + plan.experiment_id + "' failed: " + e.what(),
                           failed_index, seed);
    }
  }
  return out;
}

StreamingStats run(const RunPlan& plan, const std::function<double(std::int64_t, std::uint64_t)>& task) {
  const Payloads rows = collect(plan, 1, [&](std::int64_t i, std::uint64_t seed, std::span<double> out) {
    out[0] = task(i, seed);
  });
  return StreamingStats::pairwise(std::span<const double>(rows.data(), static_cast<std::size_t>(rows.size())));
}

RatioEstimate jackknife_ratio(const Eigen::Ref<const Eigen::VectorXd>& numerator,
                              const Eigen::Ref<const Eigen::VectorXd>& denominator, int blocks) {
  const Eigen::Index n = numerator.size();
  if (n == 0 || denominator.size() != n) throw ValidationError("jackknife_ratio: size mismatch or empty input");
  const Eigen::Index b = std::min<Eigen::Index>(blocks, n);
  Eigen::VectorXd num_blocks(b), den_blocks(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const Eigen::Index lo = j * n / b;
    const Eigen::Index hi = (j + 1) * n / b;
    num_blocks[j] = numerator.segment(lo, hi - lo).sum();
    den_blocks[j] = denominator.segment(lo, hi - lo).sum();
  }
  const double total_num = num_blocks.sum();
  const double total_den = den_blocks.sum();
  if (total_den == 0.0) throw NumericalError("ratio estimator: denominator sums to zero (no successful samples)");
  RatioEstimate est{total_num / total_den, 0.0};
  if (b < 2) return est;
  Eigen::VectorXd loo(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const double den = total_den - den_blocks[j];
    loo[j] = den > 0.0 ? (total_num - num_blocks[j]) / den : est.value;
  }
  const double mean = loo.mean();
  const double bb = static_cast<double>(b);
  est.std_error = std::sqrt((bb - 1.0) / bb * (loo.array() - mean).square().sum());
  return est;
}

}  // namespace rwrp
