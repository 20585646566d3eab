#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace wbt {

/// Sample mean with its standard error (sample standard deviation / sqrt(n)).
struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

MeanEstimate estimate_mean(std::span<const double> values);

/// Median of the values (average of the two middle order statistics for even counts).
double median(std::span<const double> values);

/// Summary of a statistic replicated over seeds.
struct ReplicatedStatistic {
  double median = 0.0;
  double mean = 0.0;
  double se = 0.0;
  std::size_t reps = 0;
};

ReplicatedStatistic summarize_replicates(std::span<const double> values);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must be
/// written to index-addressed storage; the reduction order is then independent
/// of the thread count.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// The toolkit's finite stand-in for "tends to zero": the curve's value at the
/// largest n is at most half its value at the smallest n and at most three
/// times the noise baseline.
struct TrendVerdict {
  bool halves = false;
  bool below_baseline = false;
  bool pass() const { return halves && below_baseline; }
};

TrendVerdict trend_test(double first, double last, double baseline);

}  // namespace wbt
