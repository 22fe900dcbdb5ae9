#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "fedperi/common/errors.hpp"
#include "fedperi/riskmodel/checkpoint.hpp"
#include "fedperi/riskmodel/model.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "reference_model.hpp"

using namespace fedperi;
using namespace fedperi::riskmodel;

namespace {

const fixture::Prepared& prepared(Variant v) {
  static const auto pre = fixture::prepare({fixture::tiny_site("A", 300, 21)}, Variant::Preoperative);
  static const auto post = fixture::prepare({fixture::tiny_site("A", 300, 21)}, Variant::Postoperative);
  return v == Variant::Preoperative ? pre : post;
}

std::vector<std::size_t> first_rows(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

TEST_CASE("whole-model gradients match finite differences") {
  for (Variant v : {Variant::Preoperative, Variant::Postoperative}) {
    CAPTURE(to_string(v));
    const auto& p = prepared(v);
    for (std::uint64_t seed : {4, 8}) {
      const Batch batch = make_batch(p.sites[0].train, first_rows(3 + seed), p.config);
      const ModelParams params = init_params(p.config, seed);
      const auto lg = loss_and_grad(params, p.config, batch);
      const auto numeric = oracle::reference_gradient(params, p.config, batch);
      CHECK(oracle::max_elementwise_error(lg.grad, numeric) <= 1e-5);
    }
  }
}

TEST_CASE("the reference forward pass agrees with the engine") {
  using Ref = oracle::ReferenceModel<long double>;
  for (Variant v : {Variant::Preoperative, Variant::Postoperative}) {
    const auto& p = prepared(v);
    const ModelParams params = init_params(p.config, 3);
    const Batch batch = make_batch(p.sites[0].validation, p.config);
    const auto flat = params.flatten();
    const auto ref = Ref::predict(Ref::unpack(params, std::vector<long double>(flat.begin(), flat.end())), p.config, batch);
    const ad::Tensor got = predict(params, p.config, batch);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - static_cast<double>(ref.v[i])) <= 1e-13);
  }
}

TEST_CASE("a record's score does not depend on its batch mates") {
  for (Variant v : {Variant::Preoperative, Variant::Postoperative}) {
    const auto& p = prepared(v);
    const auto params = init_params(p.config, 9);
    const auto& data = p.sites[0].validation;
    const ad::Tensor all = predict(params, p.config, make_batch(data, p.config));
    REQUIRE(all.rows() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::vector<std::size_t> one{i};
      const ad::Tensor single = predict(params, p.config, make_batch(data, one, p.config));
      for (std::size_t k = 0; k < 9; ++k) {
        CHECK(single.at(0, k) == doctest::Approx(all.at(i, k)).epsilon(1e-12));
        CHECK(single.at(0, k) > 0.0);
        CHECK(single.at(0, k) < 1.0);
      }
    }
    const ad::Tensor chunked = predict_dataset(params, p.config, data, 3);
    CHECK(chunked.values().size() == all.values().size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(chunked[i] == doctest::Approx(all[i]).epsilon(1e-12));
  }
}

TEST_CASE("attention weights are a distribution over the observed steps") {
  const auto& p = prepared(Variant::Postoperative);
  const auto params = init_params(p.config, 2);
  const auto& data = p.sites[0].train;
  const Batch batch = make_batch(data, first_rows(12), p.config);
  ad::Tape tape;
  const auto vars = bind_params(tape, params, false);
  const auto out = forward_intraop(vars, p.config, batch);
  const ad::Tensor& a = out.attention.value();
  REQUIRE(a.rows() == 12);
  REQUIRE(a.cols() == batch.steps.size());
  for (std::size_t b = 0; b < 12; ++b) {
    double total = 0.0;
    for (std::size_t t = 0; t < a.cols(); ++t) {
      if (batch.mask[t][b] == 0.0) CHECK(a.at(b, t) == 0.0);
      CHECK(a.at(b, t) >= 0.0);
      total += a.at(b, t);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(data.examples[b].steps <= a.cols());
  }
  CHECK(out.latent.cols() == 2 * p.config.gru_hidden);
}

TEST_CASE("parameter layout, init and checkpoints") {
  const auto& p = prepared(Variant::Postoperative);
  const ModelParams a = init_params(p.config, 5);
  CHECK(a == init_params(p.config, 5));
  CHECK_FALSE(a == init_params(p.config, 6));
  CHECK(a.size() == zero_params(p.config).size());

  ModelParams b = zero_params(p.config);
  b.unflatten(a.flatten());
  CHECK(b == a);
  CHECK_THROWS_AS(b.unflatten(std::vector<double>(3)), DimensionError);

  const auto path = (std::filesystem::temp_directory_path() / "fedperi_ckpt.fpsm").string();
  save_checkpoint(p.config, a, path);
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.config == p.config);
  CHECK(c.params == a);
  std::filesystem::remove(path);

  CHECK(ModelConfig::from_json(p.config.to_json()) == p.config);
  ModelConfig bad = p.config;
  bad.n_outcomes = 8;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK(variant_from_string(to_string(Variant::Postoperative)) == Variant::Postoperative);
}

TEST_CASE("non-finite inputs are reported as divergence") {
  const auto& p = prepared(Variant::Preoperative);
  preprocess::Dataset data = p.sites[0].train;
  data.examples[0].continuous[0] = std::nan("");
  const Batch batch = make_batch(data, first_rows(4), p.config);
  CHECK_THROWS_AS(loss_and_grad(init_params(p.config, 1), p.config, batch), DivergenceError);
}
