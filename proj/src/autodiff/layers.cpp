#include "fedperi/autodiff/layers.hpp"

namespace fedperi::ad {

Var dense(Var x, Var w, Var b) { return add(matmul(x, w), b); }

Var gru_cell(Var x, Var h_prev, const GruWeights& w) {
  Var z = sigmoid(add(add(matmul(x, w.w_z), matmul(h_prev, w.u_z)), w.b_z));
  Var r = sigmoid(add(add(matmul(x, w.w_r), matmul(h_prev, w.u_r)), w.b_r));
  Var c = tanh(add(add(matmul(x, w.w_h), matmul(mul(r, h_prev), w.u_h)), w.b_h));
  return add(h_prev, mul(z, sub(c, h_prev)));
}

}  // namespace fedperi::ad
