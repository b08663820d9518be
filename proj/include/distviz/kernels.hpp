#pragma once

// Data-parallel inner loops. Every OpenMP kernel has a serial twin with the
// same contract; tests check they agree exactly and bench_kernels times them.

#include "distviz/core.hpp"
#include "distviz/deflate.hpp"
#include "distviz/metrics.hpp"
#include "distviz/segment.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace distviz::kernels {

/// Caps OpenMP threads for subsequent kernels (n <= 0 leaves the runtime default).
void set_threads(int n);
int max_threads();

std::vector<double> adjust_incomes_serial(std::span<const HouseholdRecord> records,
                                          const deflate::DeflatorSet& deflators, Variant variant);
std::vector<double> adjust_incomes_omp(std::span<const HouseholdRecord> records,
                                       const deflate::DeflatorSet& deflators, Variant variant);

using CellEntries = std::vector<segment::WeightedValue>;

std::vector<std::vector<segment::Bucket>> summarize_cells_serial(std::span<const CellEntries> cells,
                                                                 segment::BucketScheme scheme);
std::vector<std::vector<segment::Bucket>> summarize_cells_omp(std::span<const CellEntries> cells,
                                                              segment::BucketScheme scheme);

metrics::CellBootstrap bootstrap_serial(std::span<const segment::WeightedValue> frame,
                                        segment::BucketScheme scheme, int replicates, std::uint64_t seed,
                                        StateYear cell);
metrics::CellBootstrap bootstrap_omp(std::span<const segment::WeightedValue> frame,
                                     segment::BucketScheme scheme, int replicates, std::uint64_t seed,
                                     StateYear cell);

} // namespace distviz::kernels
