#include "fedperi/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedperi/common/errors.hpp"
#include "fedperi/kernels/gemm.hpp"

namespace fedperi::ad {

namespace {

void same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Var unary_map(Var x, const char* name, F f, Tape::BackwardFn backward) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape().record(std::move(out), {x.id()}, std::move(backward), name);
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
    shape_mismatch("matmul", av.shape(), bv.shape());
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  kernels::gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(out), {ia, ib},
      [ia, ib, m, k, n](Tape& t, std::uint32_t self) {
        auto dc = t.output_grad(self);
        if (t.requires_grad(ia)) kernels::gemm_nt(dc, t.value(ib).data(), t.grad_buffer(ia), m, n, k);
        if (t.requires_grad(ib)) kernels::gemm_tn(t.value(ia).data(), dc, t.grad_buffer(ib), m, k, n);
      },
      "matmul");
}

Var add(Var a, Var b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const auto ia = a.id(), ib = b.id();
  if (av.shape() == bv.shape()) {
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    return a.tape().record(
        std::move(out), {ia, ib},
        [ia, ib](Tape& t, std::uint32_t self) {
          auto dc = t.output_grad(self);
          for (std::uint32_t id : {ia, ib}) {
            if (!t.requires_grad(id)) continue;
            auto g = t.grad_buffer(id);
            for (std::size_t i = 0; i < dc.size(); ++i) g[i] += dc[i];
          }
        },
        "add");
  }
  // Bias broadcast: [m x n] + [1 x n].
  if (av.rank() != 2 || bv.rank() != 2 || bv.rows() != 1 || av.cols() != bv.cols())
    shape_mismatch("add", av.shape(), bv.shape());
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
  return a.tape().record(
      std::move(out), {ia, ib},
      [ia, ib, m, n](Tape& t, std::uint32_t self) {
        auto dc = t.output_grad(self);
        if (t.requires_grad(ia)) {
          auto g = t.grad_buffer(ia);
          for (std::size_t i = 0; i < dc.size(); ++i) g[i] += dc[i];
        }
        if (t.requires_grad(ib)) {
          auto g = t.grad_buffer(ib);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += dc[i * n + j];
        }
      },
      "add");
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_mismatch("sub", av.shape(), bv.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(out), {ia, ib},
      [ia, ib](Tape& t, std::uint32_t self) {
        auto dc = t.output_grad(self);
        if (t.requires_grad(ia)) {
          auto g = t.grad_buffer(ia);
          for (std::size_t i = 0; i < dc.size(); ++i) g[i] += dc[i];
        }
        if (t.requires_grad(ib)) {
          auto g = t.grad_buffer(ib);
          for (std::size_t i = 0; i < dc.size(); ++i) g[i] -= dc[i];
        }
      },
      "sub");
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_mismatch("mul", av.shape(), bv.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(out), {ia, ib},
      [ia, ib](Tape& t, std::uint32_t self) {
        auto dc = t.output_grad(self);
        if (t.requires_grad(ia)) {
          auto g = t.grad_buffer(ia);
          const auto& bv = t.value(ib);
          for (std::size_t i = 0; i < dc.size(); ++i) g[i] += dc[i] * bv[i];
        }
        if (t.requires_grad(ib)) {
          auto g = t.grad_buffer(ib);
          const auto& av = t.value(ia);
          for (std::size_t i = 0; i < dc.size(); ++i) g[i] += dc[i] * av[i];
        }
      },
      "mul");
}

Var scale(Var a, double factor) {
  const auto ia = a.id();
  return unary_map(
      a, "scale", [factor](double v) { return v * factor; },
      [ia, factor](Tape& t, std::uint32_t self) {
        auto dc = t.output_grad(self);
        auto g = t.grad_buffer(ia);
        for (std::size_t i = 0; i < dc.size(); ++i) g[i] += dc[i] * factor;
      });
}

Var sigmoid(Var x) {
  const auto ix = x.id();
  return unary_map(x, "sigmoid", stable_sigmoid, [ix](Tape& t, std::uint32_t self) {
    auto dy = t.output_grad(self);
    const auto& y = t.value(self);
    auto g = t.grad_buffer(ix);
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var x) {
  const auto ix = x.id();
  return unary_map(
      x, "tanh", [](double v) { return std::tanh(v); },
      [ix](Tape& t, std::uint32_t self) {
        auto dy = t.output_grad(self);
        const auto& y = t.value(self);
        auto g = t.grad_buffer(ix);
        for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * (1.0 - y[i] * y[i]);
      });
}

Var relu(Var x) {
  const auto ix = x.id();
  return unary_map(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [ix](Tape& t, std::uint32_t self) {
        auto dy = t.output_grad(self);
        const auto& xv = t.value(ix);
        auto g = t.grad_buffer(ix);
        for (std::size_t i = 0; i < dy.size(); ++i)
          if (xv[i] > 0.0) g[i] += dy[i];
      });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto ix = x.id();
  return x.tape().record(
      Tensor({1, 1}, std::vector<double>{s}), {ix},
      [ix](Tape& t, std::uint32_t self) {
        const double d = t.output_grad(self)[0];
        for (double& g : t.grad_buffer(ix)) g += d;
      },
      "sum");
}

Var mean(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto n = static_cast<double>(x.value().size());
  const auto ix = x.id();
  return x.tape().record(
      Tensor({1, 1}, std::vector<double>{s / n}), {ix},
      [ix, n](Tape& t, std::uint32_t self) {
        const double d = t.output_grad(self)[0] / n;
        for (double& g : t.grad_buffer(ix)) g += d;
      },
      "mean");
}

Var embedding_lookup(Var table, std::size_t index) {
  const std::size_t one[] = {index};
  return gather_rows(table, one);
}

Var gather_rows(Var table, std::span<const std::size_t> indices) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw DimensionError("embedding table must be rank 2");
  const std::size_t vocab = tv.rows(), d = tv.cols();
  if (indices.empty()) throw DimensionError("gather_rows with no indices");
  Tensor out({indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= vocab)
      throw OutOfVocabularyError("category id " + std::to_string(indices[r]) +
                                 " outside vocabulary of size " + std::to_string(vocab));
    std::copy_n(tv.data().begin() + static_cast<std::ptrdiff_t>(indices[r] * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const auto it = table.id();
  return table.tape().record(
      std::move(out), {it},
      [it, d, idx = std::vector<std::size_t>(indices.begin(), indices.end())](Tape& t,
                                                                              std::uint32_t self) {
        auto dy = t.output_grad(self);
        auto g = t.grad_buffer(it);
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t j = 0; j < d; ++j) g[idx[r] * d + j] += dy[r * d + j];
      },
      "gather_rows");
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data().data() + i * n;
    double* o = out.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(row[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  const auto ix = x.id();
  return x.tape().record(
      std::move(out), {ix},
      [ix, m, n](Tape& t, std::uint32_t self) {
        auto dy = t.output_grad(self);
        const auto& y = t.value(self);
        auto g = t.grad_buffer(ix);
        for (std::size_t i = 0; i < m; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += dy[i * n + j] * y[i * n + j];
          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[i * n + j] * (dy[i * n + j] - dot);
        }
      },
      "softmax");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.value().rank() != 2 || p.rows() != m)
      shape_mismatch("concat_cols", parts[0].shape(), p.shape());
    ids.push_back(p.id());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out({m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = pv[i * widths[k] + j];
    offset += widths[k];
  }
  return parts[0].tape().record(
      std::move(out), ids,
      [ids, widths, m, total](Tape& t, std::uint32_t self) {
        auto dy = t.output_grad(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.requires_grad(ids[k])) {
            auto g = t.grad_buffer(ids[k]);
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += dy[i * total + off + j];
          }
          off += widths[k];
        }
      },
      "concat_cols");
}

Var column(Var a, std::size_t j) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (j >= n) throw DimensionError("column index out of range");
  Tensor out({m, 1});
  for (std::size_t i = 0; i < m; ++i) out[i] = av[i * n + j];
  const auto ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, j, m, n](Tape& t, std::uint32_t self) {
        auto dy = t.output_grad(self);
        auto g = t.grad_buffer(ia);
        for (std::size_t i = 0; i < m; ++i) g[i * n + j] += dy[i];
      },
      "column");
}

Var scale_rows(Var a, Var s) {
  same_tape(a, s);
  const Tensor& av = a.value();
  const Tensor& sv = s.value();
  if (av.rank() != 2 || sv.rank() != 2 || sv.cols() != 1 || sv.rows() != av.rows())
    shape_mismatch("scale_rows", av.shape(), sv.shape());
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] * sv[i];
  const auto ia = a.id(), is = s.id();
  return a.tape().record(
      std::move(out), {ia, is},
      [ia, is, m, n](Tape& t, std::uint32_t self) {
        auto dy = t.output_grad(self);
        if (t.requires_grad(ia)) {
          const auto& sv = t.value(is);
          auto g = t.grad_buffer(ia);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += dy[i * n + j] * sv[i];
        }
        if (t.requires_grad(is)) {
          const auto& av = t.value(ia);
          auto g = t.grad_buffer(is);
          for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += dy[i * n + j] * av[i * n + j];
            g[i] += acc;
          }
        }
      },
      "scale_rows");
}

Var bce_loss(Var pred, Var label) {
  same_tape(pred, label);
  const Tensor& pv = pred.value();
  const Tensor& yv = label.value();
  if (pv.shape() != yv.shape()) shape_mismatch("bce_loss", pv.shape(), yv.shape());
  const auto n = static_cast<double>(pv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double p = std::clamp(pv[i], kBceEpsilon, 1.0 - kBceEpsilon);
    total += -(yv[i] * std::log(p) + (1.0 - yv[i]) * std::log(1.0 - p));
  }
  const auto ip = pred.id(), iy = label.id();
  return pred.tape().record(
      Tensor({1, 1}, std::vector<double>{total / n}), {ip},
      [ip, iy, n](Tape& t, std::uint32_t self) {
        const double d = t.output_grad(self)[0] / n;
        const auto& pv = t.value(ip);
        const auto& yv = t.value(iy);
        auto g = t.grad_buffer(ip);
        for (std::size_t i = 0; i < pv.size(); ++i) {
          const double p = pv[i];
          if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) continue;
          g[i] += d * (-yv[i] / p + (1.0 - yv[i]) / (1.0 - p));
        }
      },
      "bce_loss");
}

}  // namespace fedperi::ad
