#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace acsplit {

// Samples are reduced in fixed blocks of this many consecutive sample
// indices.  Threads claim whole blocks, block partials are stored by block
// index and merged in a fixed pairwise tree, so estimates are byte-identical
// for any thread count.
inline constexpr std::uint64_t kStatsBlock = 256;

struct BlockStats {
  std::uint64_t n = 0;
  std::uint64_t n_flagged = 0;
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::vector<double> max_abs;

  void init(std::size_t width) {
    n = 0;
    n_flagged = 0;
    sum.assign(width, 0.0);
    sum_sq.assign(width, 0.0);
    max_abs.assign(width, 0.0);
  }

  void add_row(const double* row) {
    ++n;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += row[i];
      sum_sq[i] += row[i] * row[i];
      max_abs[i] = std::max(max_abs[i], std::abs(row[i]));
    }
  }

  void merge(const BlockStats& o) {
    n += o.n;
    n_flagged += o.n_flagged;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sum_sq[i] += o.sum_sq[i];
      max_abs[i] = std::max(max_abs[i], o.max_abs[i]);
    }
  }
};

struct MeanTable {
  std::uint64_t n = 0;
  std::uint64_t n_flagged = 0;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::vector<double> max_abs;
};

inline MeanTable reduce_pairwise(std::vector<BlockStats> blocks) {
  if (blocks.empty()) throw std::invalid_argument("reduce_pairwise: no blocks");
  for (std::size_t stride = 1; stride < blocks.size(); stride *= 2)
    for (std::size_t i = 0; i + stride < blocks.size(); i += 2 * stride)
      blocks[i].merge(blocks[i + stride]);
  const BlockStats& total = blocks.front();
  MeanTable out;
  out.n = total.n;
  out.n_flagged = total.n_flagged;
  const std::size_t width = total.sum.size();
  out.mean.resize(width);
  out.std_error.resize(width);
  out.max_abs = total.max_abs;
  for (std::size_t i = 0; i < width; ++i) {
    if (total.n == 0) {
      out.mean[i] = std::numeric_limits<double>::quiet_NaN();
      out.std_error[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    const double mean = total.sum[i] / double(total.n);
    out.mean[i] = mean;
    if (total.n < 2) {
      out.std_error[i] = std::numeric_limits<double>::infinity();
    } else {
      const double num = total.sum_sq[i] - total.sum[i] * mean;
      const double var = std::max(0.0, num / double(total.n - 1));
      out.std_error[i] = std::sqrt(var / double(total.n));
    }
  }
  return out;
}

// fn(first_sample, count, BlockStats&) fills one block; it must depend only
// on the sample indices, never on the executing thread.
template <typename Fn>
std::vector<BlockStats> run_sample_blocks(std::uint64_t n_samples, int threads,
                                          std::size_t stat_width, Fn&& fn) {
  if (n_samples == 0) throw std::invalid_argument("run_sample_blocks: no samples");
  if (threads < 1) throw std::invalid_argument("run_sample_blocks: threads must be >= 1");
  const std::uint64_t n_blocks = (n_samples + kStatsBlock - 1) / kStatsBlock;
  std::vector<BlockStats> blocks(n_blocks);
  for (auto& b : blocks) b.init(stat_width);

  auto run_block = [&](std::uint64_t b) {
    const std::uint64_t first = b * kStatsBlock;
    const std::uint64_t count = std::min(kStatsBlock, n_samples - first);
    fn(first, count, blocks[b]);
  };

  if (threads == 1 || n_blocks == 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b) run_block(b);
    return blocks;
  }

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (;;) {
        const std::uint64_t b = next.fetch_add(1);
        if (b >= n_blocks || failed.load()) return;
        run_block(b);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
      failed.store(true);
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = int(std::min<std::uint64_t>(std::uint64_t(threads), n_blocks));
  pool.reserve(n_workers);
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return blocks;
}

}  // namespace acsplit
