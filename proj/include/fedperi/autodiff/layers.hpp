#pragma once

#include "fedperi/autodiff/ops.hpp"

namespace fedperi::ad {

// x * w + b with b broadcast over rows.
Var dense(Var x, Var w, Var b);

// GRU weights in row-vector convention: x is [B x f], h is [B x h],
// w_* are [f x h], u_* are [h x h], b_* are [1 x h].
struct GruWeights {
  Var w_z, u_z, b_z;
  Var w_r, u_r, b_r;
  Var w_h, u_h, b_h;
};

// z = sigmoid(x W_z + h U_z + b_z)
// r = sigmoid(x W_r + h U_r + b_r)
// c = tanh(x W_h + (r * h) U_h + b_h)
// h' = (1 - z) * h + z * c, computed as h + z * (c - h)
Var gru_cell(Var x, Var h_prev, const GruWeights& w);

}  // namespace fedperi::ad
