#pragma once

// Differentiable tensor ops. Rank-4 ops take (N, C, H, W); matrix ops take
// rank 2. Binary elementwise ops require equal shapes; broadcasting is
// explicit through expand().

#include <cstdint>
#include <vector>

#include "scagan/autograd.hpp"

namespace scagan::ops {

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);

Var leaky_relu(const Var& x, double negative_slope);
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var sqrt(const Var& x);
Var abs(const Var& x);
/// log(max(x, floor)); zero gradient where the clamp is active.
Var log_clamped(const Var& x, double floor);

// Shape and reduction.
Var reshape(const Var& x, Shape shape);
/// Broadcasts size-1 dimensions of `x` up to `shape` (same rank).
Var expand(const Var& x, const Shape& shape);
Var sum(const Var& x);   // -> [1]
Var mean(const Var& x);  // -> [1]

enum class Reduce { Sum, Mean, Min, Max };
/// Rank-2 reduction along `axis`, keeping the reduced dimension as size 1.
Var reduce(const Var& x, int axis, Reduce kind);

/// op(a) * op(b) for rank-2 operands.
Var matmul(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);

// Spatial (rank 4).
/// Zero-padded cross-correlation. `bias` may be undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);
Var instance_norm(const Var& x, double eps);
/// Normalizes with the statistics of the current batch (per channel over N, H, W).
Var batch_norm(const Var& x, double eps);
/// Nearest-neighbour resampling; source index floor(dst * in / out).
Var resize_nearest(const Var& x, int height, int width);
Var upsample2x(const Var& x);
Var avg_pool2(const Var& x);
Var max_pool2(const Var& x);
Var concat_channels(const std::vector<Var>& parts);
Var slice_batch(const Var& x, int index);
/// Mirror padding without repeating the border sample; each pad must be < the dimension.
Var pad_reflect(const Var& x, int top, int bottom, int left, int right);
Var crop(const Var& x, int top, int left, int height, int width);

/// Count of normalization statistic computations (instance or batch) since
/// process start. Used to prove code paths are normalization-free.
std::uint64_t normalization_call_count() noexcept;

}  // namespace scagan::ops
