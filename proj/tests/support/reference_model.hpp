#pragma once

// Independent forward pass of the risk model, written out by hand and
// templated on the scalar type. With long double it serves as a
// finite-difference reference whose rounding noise is far below that of the
// 64-bit engine.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fedperi/riskmodel/model.hpp"

namespace oracle {

template <class T>
struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<T> v;
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : r(rows), c(cols), v(rows * cols, T(0)) {}
  T& at(std::size_t i, std::size_t j) { return v[i * c + j]; }
  const T& at(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

template <class T>
class ReferenceModel {
 public:
  using P = std::map<std::string, Mat<T>>;

  // Splits a flat vector laid out like ModelParams::flatten().
  static P unpack(const fedperi::riskmodel::ModelParams& shapes, const std::vector<T>& flat) {
    P out;
    std::size_t at = 0;
    for (const auto& [name, t] : shapes.tensors) {
      Mat<T> m(t.rows(), t.cols());
      for (auto& x : m.v) x = flat[at++];
      out.emplace(name, std::move(m));
    }
    return out;
  }

  static Mat<T> input(const fedperi::ad::Tensor& t) {
    Mat<T> m(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) m.v[i] = static_cast<T>(t[i]);
    return m;
  }

  static Mat<T> affine(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b) {
    Mat<T> y(x.r, w.c);
    for (std::size_t i = 0; i < x.r; ++i)
      for (std::size_t j = 0; j < w.c; ++j) {
        T s = b.v[j];
        for (std::size_t k = 0; k < x.c; ++k) s += x.at(i, k) * w.at(k, j);
        y.at(i, j) = s;
      }
    return y;
  }

  static Mat<T> tanh_of(Mat<T> x) {
    for (auto& e : x.v) e = std::tanh(e);
    return x;
  }
  static T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

  static Mat<T> hcat(const std::vector<Mat<T>>& parts) {
    std::size_t cols = 0;
    for (const auto& p : parts) cols += p.c;
    Mat<T> out(parts.front().r, cols);
    for (std::size_t i = 0; i < out.r; ++i) {
      std::size_t j = 0;
      for (const auto& p : parts)
        for (std::size_t k = 0; k < p.c; ++k) out.at(i, j++) = p.at(i, k);
    }
    return out;
  }

  static Mat<T> stack(const P& p, const std::string& block, Mat<T> x, std::size_t layers) {
    for (std::size_t l = 0; l < layers; ++l)
      x = tanh_of(affine(x, p.at(block + "." + std::to_string(l) + ".w"), p.at(block + "." + std::to_string(l) + ".b")));
    return x;
  }

  // One GRU step for every row.
  static Mat<T> gru(const P& p, const std::string& pre, const Mat<T>& x, const Mat<T>& h) {
    auto gate = [&](const char* g, const Mat<T>& hin) {
      Mat<T> a = affine(x, p.at(pre + ".w_" + g), p.at(pre + ".b_" + g));
      const Mat<T>& u = p.at(pre + ".u_" + g);
      for (std::size_t i = 0; i < a.r; ++i)
        for (std::size_t j = 0; j < a.c; ++j)
          for (std::size_t k = 0; k < hin.c; ++k) a.at(i, j) += hin.at(i, k) * u.at(k, j);
      return a;
    };
    Mat<T> z = gate("z", h), r = gate("r", h);
    for (auto& e : z.v) e = sigmoid(e);
    for (auto& e : r.v) e = sigmoid(e);
    Mat<T> rh = h;
    for (std::size_t i = 0; i < rh.v.size(); ++i) rh.v[i] *= r.v[i];
    Mat<T> c = tanh_of(gate("h", rh));
    Mat<T> out = h;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = h.v[i] + z.v[i] * (c.v[i] - h.v[i]);
    return out;
  }

  static Mat<T> predict(const P& p, const fedperi::riskmodel::ModelConfig& c, const fedperi::riskmodel::Batch& b) {
    std::vector<Mat<T>> parts{stack(p, "continuous", input(b.continuous), c.continuous_hidden.size()),
                              stack(p, "binary", input(b.binary), c.binary_hidden.size())};
    if (!c.vocab_sizes.empty()) {
      std::vector<Mat<T>> emb;
      for (std::size_t f = 0; f < c.vocab_sizes.size(); ++f) {
        const Mat<T>& table = p.at(fedperi::riskmodel::embedding_name(f));
        Mat<T> e(b.size, table.c);
        for (std::size_t i = 0; i < b.size; ++i)
          for (std::size_t j = 0; j < table.c; ++j) e.at(i, j) = table.at(b.categorical[f][i], j);
        emb.push_back(e);
      }
      parts.push_back(stack(p, "categorical", hcat(emb), 1));
    }
    Mat<T> latent = stack(p, "fusion", hcat(parts), 1);

    if (c.uses_series()) {
      const std::size_t T_ = b.steps.size(), H = c.gru_hidden;
      std::vector<Mat<T>> fwd(T_), bwd(T_);
      Mat<T> h(b.size, H);
      for (std::size_t t = 0; t < T_; ++t) {
        const Mat<T> next = gru(p, "gru.forward", input(b.steps[t]), h);
        for (std::size_t i = 0; i < b.size; ++i)
          if (b.mask[t][i] != 0.0)
            for (std::size_t j = 0; j < H; ++j) h.at(i, j) = next.at(i, j);
        fwd[t] = h;
      }
      h = Mat<T>(b.size, H);
      for (std::size_t s = T_; s-- > 0;) {
        const Mat<T> next = gru(p, "gru.backward", input(b.steps[s]), h);
        for (std::size_t i = 0; i < b.size; ++i)
          if (b.mask[s][i] != 0.0)
            for (std::size_t j = 0; j < H; ++j) h.at(i, j) = next.at(i, j);
        bwd[s] = h;
      }
      Mat<T> pooled(b.size, 2 * H);
      for (std::size_t i = 0; i < b.size; ++i) {
        std::vector<T> e(T_);
        std::vector<bool> on(T_);
        T mx = -INFINITY;
        for (std::size_t t = 0; t < T_; ++t) {
          on[t] = b.mask[t][i] != 0.0;
          if (!on[t]) continue;
          Mat<T> s(1, 2 * H);
          for (std::size_t j = 0; j < H; ++j) {
            s.at(0, j) = fwd[t].at(i, j);
            s.at(0, H + j) = bwd[t].at(i, j);
          }
          const Mat<T> a = tanh_of(affine(s, p.at("attention.w"), p.at("attention.b")));
          const Mat<T>& v = p.at("attention.v");
          T score = 0;
          for (std::size_t k = 0; k < a.c; ++k) score += a.at(0, k) * v.at(k, 0);
          e[t] = score;
          mx = std::max(mx, score);
        }
        T z = 0;
        for (std::size_t t = 0; t < T_; ++t)
          if (on[t]) z += std::exp(e[t] - mx);
        for (std::size_t t = 0; t < T_; ++t) {
          if (!on[t]) continue;
          const T alpha = std::exp(e[t] - mx) / z;
          for (std::size_t j = 0; j < H; ++j) {
            pooled.at(i, j) += alpha * fwd[t].at(i, j);
            pooled.at(i, H + j) += alpha * bwd[t].at(i, j);
          }
        }
      }
      latent = affine(hcat({latent, pooled}), p.at("combine.0.w"), p.at("combine.0.b"));
    }

    Mat<T> out(b.size, c.n_outcomes);
    for (std::size_t k = 0; k < c.n_outcomes; ++k) {
      const Mat<T> hidden = tanh_of(affine(latent, p.at(fedperi::riskmodel::head_name(k, 0, "w")),
                                           p.at(fedperi::riskmodel::head_name(k, 0, "b"))));
      const Mat<T> logit = affine(hidden, p.at(fedperi::riskmodel::head_name(k, 1, "w")),
                                  p.at(fedperi::riskmodel::head_name(k, 1, "b")));
      for (std::size_t i = 0; i < b.size; ++i) out.at(i, k) = sigmoid(logit.at(i, 0));
    }
    return out;
  }

  static T loss(const P& p, const fedperi::riskmodel::ModelConfig& c, const fedperi::riskmodel::Batch& b) {
    const Mat<T> pred = predict(p, c, b);
    const T eps = static_cast<T>(fedperi::ad::kBceEpsilon);
    T total = 0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
      const T q = std::clamp(pred.v[i], eps, T(1) - eps);
      const T y = static_cast<T>(b.labels[i]);
      total += -(y * std::log(q) + (T(1) - y) * std::log(T(1) - q));
    }
    return total / static_cast<T>(pred.v.size());
  }
};

// Central differences of the long double reference loss, step h, one
// parameter at a time.
inline std::vector<double> reference_gradient(const fedperi::riskmodel::ModelParams& params,
                                              const fedperi::riskmodel::ModelConfig& config,
                                              const fedperi::riskmodel::Batch& batch, long double h = 1e-6L) {
  using Ref = ReferenceModel<long double>;
  const std::vector<double> flat = params.flatten();
  std::vector<long double> x(flat.begin(), flat.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double keep = x[i];
    x[i] = keep + h;
    const long double up = Ref::loss(Ref::unpack(params, x), config, batch);
    x[i] = keep - h;
    const long double down = Ref::loss(Ref::unpack(params, x), config, batch);
    x[i] = keep;
    g[i] = static_cast<double>((up - down) / (2.0L * h));
  }
  return g;
}

}  // namespace oracle
