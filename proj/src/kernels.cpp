#include "distviz/kernels.hpp"

#include "distviz/rng.hpp"

#include <cmath>
#include <exception>
#include <random>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace distviz::kernels {

namespace {

// Rethrows the exception of the lowest failing index so errors do not depend
// on scheduling.
class FirstError {
public:
    explicit FirstError(std::size_t n) : errors_(n) {}
    void capture(std::size_t i) { errors_[i] = std::current_exception(); }
    void rethrow() const {
        for (const auto& e : errors_)
            if (e)
                std::rethrow_exception(e);
    }

private:
    std::vector<std::exception_ptr> errors_;
};

using Heights = std::vector<std::optional<double>>;

Heights replicate_heights(std::span<const segment::WeightedValue> frame, segment::BucketScheme scheme,
                          std::uint64_t seed, StateYear cell, int r) {
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(cell.state.fips()),
                               static_cast<std::uint64_t>(cell.year), static_cast<std::uint64_t>(r)});
    std::uniform_int_distribution<std::size_t> pick(0, frame.size() - 1);
    std::vector<segment::WeightedValue> sample;
    sample.reserve(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i)
        sample.push_back(frame[pick(rng)]);

    const auto& ks = segment::bucket_points(scheme);
    Heights h(ks.size());
    try {
        auto buckets = segment::summarize(sample, scheme);
        for (std::size_t i = 0; i < buckets.size(); ++i)
            h[i] = buckets[i].height;
    } catch (const NumericError&) {
        // every drawn household had zero weight: no heights in this replicate
    }
    return h;
}

metrics::CellBootstrap reduce(std::span<const segment::WeightedValue> frame, segment::BucketScheme scheme,
                              int replicates, std::uint64_t seed, const std::vector<Heights>& reps) {
    metrics::CellBootstrap out;
    out.replicates = replicates;
    out.seed = seed;
    auto point = segment::summarize(frame, scheme);
    for (std::size_t i = 0; i < point.size(); ++i) {
        metrics::BucketSe b;
        b.k = point[i].k;
        b.point = point[i].height;
        std::vector<double> xs;
        for (const auto& rep : reps)
            if (rep[i])
                xs.push_back(*rep[i]);
        b.valid = static_cast<int>(xs.size());
        if (xs.size() >= 2) {
            // shifted two-pass: exactly zero for constant replicates
            const double shift = xs.front();
            double mean = 0.0;
            for (double x : xs)
                mean += x - shift;
            mean /= static_cast<double>(xs.size());
            double ss = 0.0;
            for (double x : xs) {
                double d = (x - shift) - mean;
                ss += d * d;
            }
            b.se = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        }
        out.buckets.push_back(b);
    }
    return out;
}

void check_bootstrap_args(std::span<const segment::WeightedValue> frame, int replicates) {
    if (frame.empty())
        throw DataError("bootstrap: frame is empty");
    if (replicates < 2)
        throw std::invalid_argument("bootstrap: need at least 2 replicates");
}

} // namespace

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0)
        omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<double> adjust_incomes_serial(std::span<const HouseholdRecord> records,
                                          const deflate::DeflatorSet& deflators, Variant variant) {
    std::vector<double> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        out[i] = deflate::adjust_income(records[i], deflators, variant);
    return out;
}

std::vector<double> adjust_incomes_omp(std::span<const HouseholdRecord> records,
                                       const deflate::DeflatorSet& deflators, Variant variant) {
    const auto n = static_cast<std::ptrdiff_t>(records.size());
    std::vector<double> out(records.size());
    FirstError errors(records.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = deflate::adjust_income(records[i], deflators, variant);
        } catch (...) {
            errors.capture(static_cast<std::size_t>(i));
        }
    }
    errors.rethrow();
    return out;
}

std::vector<std::vector<segment::Bucket>> summarize_cells_serial(std::span<const CellEntries> cells,
                                                                 segment::BucketScheme scheme) {
    std::vector<std::vector<segment::Bucket>> out(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
        out[i] = segment::summarize(cells[i], scheme);
    return out;
}

std::vector<std::vector<segment::Bucket>> summarize_cells_omp(std::span<const CellEntries> cells,
                                                              segment::BucketScheme scheme) {
    const auto n = static_cast<std::ptrdiff_t>(cells.size());
    std::vector<std::vector<segment::Bucket>> out(cells.size());
    FirstError errors(cells.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = segment::summarize(cells[i], scheme);
        } catch (...) {
            errors.capture(static_cast<std::size_t>(i));
        }
    }
    errors.rethrow();
    return out;
}

metrics::CellBootstrap bootstrap_serial(std::span<const segment::WeightedValue> frame,
                                        segment::BucketScheme scheme, int replicates, std::uint64_t seed,
                                        StateYear cell) {
    check_bootstrap_args(frame, replicates);
    std::vector<Heights> reps(static_cast<std::size_t>(replicates));
    for (int r = 0; r < replicates; ++r)
        reps[static_cast<std::size_t>(r)] = replicate_heights(frame, scheme, seed, cell, r);
    return reduce(frame, scheme, replicates, seed, reps);
}

metrics::CellBootstrap bootstrap_omp(std::span<const segment::WeightedValue> frame,
                                     segment::BucketScheme scheme, int replicates, std::uint64_t seed,
                                     StateYear cell) {
    check_bootstrap_args(frame, replicates);
    std::vector<Heights> reps(static_cast<std::size_t>(replicates));
    FirstError errors(reps.size());
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < replicates; ++r) {
        try {
            reps[static_cast<std::size_t>(r)] = replicate_heights(frame, scheme, seed, cell, r);
        } catch (...) {
            errors.capture(static_cast<std::size_t>(r));
        }
    }
    errors.rethrow();
    return reduce(frame, scheme, replicates, seed, reps);
}

} // namespace distviz::kernels
