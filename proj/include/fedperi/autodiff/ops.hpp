#pragma once

#include <cstddef>
#include <span>

#include "fedperi/autodiff/tape.hpp"

// Differentiable primitives. All operands must live on the same tape.
// Broadcasting exists only for bias addition: [m x n] + [1 x n].
namespace fedperi::ad {

Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);

Var sum(Var x);
Var mean(Var x);

// Row `index` of a [V x d] table as a [1 x d] tensor.
Var embedding_lookup(Var table, std::size_t index);
// Batched lookup: row i of the result is table[indices[i]].
Var gather_rows(Var table, std::span<const std::size_t> indices);

// Row-wise softmax with max subtraction.
Var softmax(Var x);

Var concat_cols(std::span<const Var> parts);
// Column j of a [m x n] tensor as [m x 1].
Var column(Var a, std::size_t j);
// out[i, :] = a[i, :] * s[i] for s of shape [m x 1].
Var scale_rows(Var a, Var s);

// Mean binary cross-entropy over every element; predictions are clamped to
// [1e-7, 1 - 1e-7]. `label` is treated as a constant.
Var bce_loss(Var pred, Var label);

inline constexpr double kBceEpsilon = 1e-7;

}  // namespace fedperi::ad
