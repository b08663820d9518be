#include "distviz/metrics.hpp"

#include "distviz/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace distviz::metrics {

namespace {

void check_inputs(std::span<const double> x, std::span<const double> w, GiniOptions opts) {
    if (x.empty())
        throw std::invalid_argument("Gini needs at least one income");
    if (!w.empty() && w.size() != x.size())
        throw std::invalid_argument("Gini: weights and incomes differ in length");
    for (double v : w)
        if (!(v >= 0))
            throw DataError("Gini: weights must be nonnegative");
    if (!opts.allow_negative)
        for (double v : x)
            if (v < 0)
                throw DataError("Gini: negative income (pass allow_negative to accept)");
}

double weight_at(std::span<const double> w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

} // namespace

GiniResult gini_naive(std::span<const double> x, std::span<const double> w, GiniOptions opts) {
    check_inputs(x, w, opts);
    long double pair_sum = 0.0L;
    long double total_w = 0.0L;
    long double total_wx = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const long double wi = weight_at(w, i);
        total_w += wi;
        total_wx += wi * x[i];
        for (std::size_t j = 0; j < x.size(); ++j)
            pair_sum += wi * weight_at(w, j) * std::fabs(static_cast<long double>(x[i]) - x[j]);
    }
    if (total_w <= 0)
        throw NumericError("Gini undefined: total weight is zero");
    if (total_wx == 0)
        throw NumericError("Gini undefined for zero-mean input");
    // 2 W^2 mean == 2 W sum(w x)
    return {static_cast<double>(pair_sum / (2.0L * total_w * total_wx)), x.size(), GiniMethod::naive};
}

GiniResult gini_sorted(std::span<const double> x, std::span<const double> w, GiniOptions opts) {
    check_inputs(x, w, opts);
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, {}, [&](std::size_t i) { return x[i]; });

    long double total_w = 0.0L;
    long double total_wx = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        total_w += weight_at(w, i);
        total_wx += weight_at(w, i) * static_cast<long double>(x[i]);
    }
    if (total_w <= 0)
        throw NumericError("Gini undefined: total weight is zero");
    if (total_wx == 0)
        throw NumericError("Gini undefined for zero-mean input");

    // sum_ij w_i w_j |x_i - x_j| = 2 sum_i w_i x_i (W_below(i) - W_above(i))
    long double below = 0.0L;
    long double acc = 0.0L;
    for (auto i : order) {
        const long double wi = weight_at(w, i);
        const long double above = total_w - below - wi;
        acc += wi * x[i] * (below - above);
        below += wi;
    }
    return {static_cast<double>(acc / (total_w * total_wx)), x.size(), GiniMethod::sorted};
}

GiniResult gini(GiniMethod method, std::span<const double> x, std::span<const double> w, GiniOptions opts) {
    return method == GiniMethod::naive ? gini_naive(x, w, opts) : gini_sorted(x, w, opts);
}

std::vector<LorenzPoint> lorenz_points(std::span<const double> x, std::span<const double> w) {
    check_inputs(x, w, {.allow_negative = true});
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, {}, [&](std::size_t i) { return x[i]; });

    long double total_w = 0.0L;
    long double total_wx = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        total_w += weight_at(w, i);
        total_wx += weight_at(w, i) * static_cast<long double>(x[i]);
    }
    if (total_wx <= 0 || total_w <= 0)
        throw DataError("Lorenz curve needs a positive income total");

    std::vector<LorenzPoint> pts{{0.0, 0.0}};
    long double cw = 0.0L;
    long double cwx = 0.0L;
    for (auto i : order) {
        cw += weight_at(w, i);
        cwx += weight_at(w, i) * static_cast<long double>(x[i]);
        pts.push_back({static_cast<double>(cw / total_w), static_cast<double>(cwx / total_wx)});
    }
    pts.back() = {1.0, 1.0};
    return pts;
}

double lorenz_gini(std::span<const LorenzPoint> pts) {
    long double area = 0.0L;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += static_cast<long double>(pts[i].population - pts[i - 1].population) *
                (static_cast<long double>(pts[i].income) + pts[i - 1].income) / 2.0L;
    return static_cast<double>(2.0L * (0.5L - area));
}

CellBootstrap bootstrap_se(std::span<const segment::WeightedValue> frame, segment::BucketScheme scheme,
                           int replicates, std::uint64_t seed, StateYear cell) {
    return kernels::bootstrap_omp(frame, scheme, replicates, seed, cell);
}

} // namespace distviz::metrics
