// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "depthadapt/adapters.hpp"
#include "depthadapt/ops.hpp"
#include "depthadapt/stage2.hpp"
#include "doctest.h"
#include "support/expect_error.hpp"
#include "support/gradient_cases.hpp"
#include "support/oracles.hpp"

using namespace depthadapt;
using testsupport::catch_error;
using testsupport::random_tensor;

namespace {

Stage2Options options(std::size_t rank, std::size_t refresh = 50, double lr = 1e-4) {
  Stage2Options o;
  o.rank = rank;
  o.refresh_period = refresh;
  o.lr = lr;
  o.correction_scale = lr;
  return o;
}

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.at(i) - b.at(i)));
  return m;
}

double frobenius(const Tensor<double>& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

// Solves (Q^T Q) c = Q^T g column by column with Gaussian elimination and
// returns ||G - Q C||_F. Q need not be orthonormal.
double least_squares_residual(const std::vector<double>& q, std::size_t m, std::size_t r, const std::vector<double>& g,
                              std::size_t n) {
  double err = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> a(r * (r + 1), 0.0);
    for (std::size_t p = 0; p < r; ++p) {
      for (std::size_t s = 0; s < r; ++s)
        for (std::size_t i = 0; i < m; ++i) a[p * (r + 1) + s] += q[i * r + p] * q[i * r + s];
      for (std::size_t i = 0; i < m; ++i) a[p * (r + 1) + r] += q[i * r + p] * g[i * n + j];
    }
    for (std::size_t p = 0; p < r; ++p)
      for (std::size_t s = p + 1; s < r; ++s) {
        const double f = a[s * (r + 1) + p] / a[p * (r + 1) + p];
        for (std::size_t t = p; t <= r; ++t) a[s * (r + 1) + t] -= f * a[p * (r + 1) + t];
      }
    std::vector<double> c(r);
    for (std::size_t p = r; p-- > 0;) {
      double v = a[p * (r + 1) + r];
      for (std::size_t s = p + 1; s < r; ++s) v -= a[p * (r + 1) + s] * c[s];
      c[p] = v / a[p * (r + 1) + p];
    }
    for (std::size_t i = 0; i < m; ++i) {
      double fit = 0.0;
      for (std::size_t p = 0; p < r; ++p) fit += q[i * r + p] * c[p];
      err += (g[i * n + j] - fit) * (g[i * n + j] - fit);
    }
  }
  return std::sqrt(err);
}

void check_orthonormal(const Tensor<double>& p) {
  const std::size_t m = p.dim(0), r = p.dim(1);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = 0; b < r; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += p.at(i * r + a) * p.at(i * r + b);
      CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-6);
    }
}

WeightSlot<double> slot_of(std::string id, Tensor<double> w) {
  const std::size_t m = w.dim(0), n = w.dim(1);
  return {std::move(id), "mlp", m, n, Shape{m, n}, std::move(w)};
}

}  // namespace

TEST_CASE("full_param_direction is the negative gradient") {
  auto w = Tensor<double>::from({2, 2}, {1, 0, 0, 1}, true);
  CHECK(values(full_param_direction(w, backward(sum(square(w))))) == std::vector<double>{-2, 0, 0, -2});

  auto z = Tensor<double>::from({2, 2}, {1, 2, 3, 4}, true);
  const auto zero_grads = backward(sum(mul(z, Tensor<double>::zeros({2, 2}))));
  const auto zero_dir = full_param_direction(z, zero_grads);
  for (double v : zero_dir.data()) CHECK(v == 0.0);

  auto other = Tensor<double>::zeros({2, 2}, true);
  CHECK(catch_error([&] { full_param_direction(other, zero_grads); }).category == ErrorCategory::State);
}

TEST_CASE("a small step along the direction decreases a quadratic loss") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto w = random_tensor({3, 4}, rng);
    const auto target = random_tensor({3, 4}, rng, -1, 1, false);
    auto loss_at = [&](const Tensor<double>& x) { return sum(square(sub(x, target))); };
    const auto d = full_param_direction(w, backward(loss_at(w)));
    const auto stepped = add(w.detach(), scale(d, 1e-3));
    CHECK(loss_at(stepped).item() < loss_at(w).item());
  }
}

TEST_CASE("compose examples") {
  std::mt19937_64 rng(2);
  const auto w = random_tensor({3, 3}, rng, -1, 1, false), d = random_tensor({3, 3}, rng, -1, 1, false);
  CHECK(values(compose(w, d, 1.0, 0.0)) == values(w));
  CHECK(values(compose(w, d, 0.0, 1.0)) == values(d));
  const auto eye = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
  const auto twos = Tensor<double>::full({2, 2}, 2.0);
  CHECK(values(compose(eye, twos, 2.0, 0.5)) == std::vector<double>{3, 1, 1, 3});
  CHECK(values(compose(eye, twos, Tensor<double>::scalar(2.0), Tensor<double>::scalar(0.5))) ==
        std::vector<double>{3, 1, 1, 3});
  CHECK(catch_error([&] { compose(eye, d, 1.0, 0.0); }).category == ErrorCategory::Dimension);
}

TEST_CASE("compose is linear in alpha") {
  // dyadic inputs keep every product and sum exact
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> k(-64, 64);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> wv(6), dv(6);
    for (auto& v : wv) v = k(rng) / 16.0;
    for (auto& v : dv) v = k(rng) / 16.0;
    const auto w = Tensor<double>::from({2, 3}, wv), d = Tensor<double>::from({2, 3}, dv);
    const double a1 = k(rng) / 8.0, a2 = k(rng) / 8.0, b = k(rng) / 8.0;
    const auto lhs = compose(w, d, a1 + a2, b);
    const auto rhs = add(compose(w, d, a1, b), scale(w, a2));
    CHECK(values(lhs) == values(rhs));
  }
}

TEST_CASE("project and reconstruct examples") {
  std::mt19937_64 rng(4);
  const auto p = refresh_projector(random_tensor({5, 4}, rng, -1, 1, false), 2);
  const auto x = random_tensor({2, 4}, rng, -1, 1, false);
  const auto in_span = matmul(p, x);
  CHECK(max_abs_diff(reconstruct(p, project_gradient(in_span, p)), in_span) <= 1e-5);

  const auto basis = Tensor<double>::from({4, 2}, {1, 0, 0, 1, 0, 0, 0, 0});
  const auto g = random_tensor({4, 3}, rng, -1, 1, false);
  const auto sel = values(project_gradient(g, basis));
  CHECK(sel == std::vector<double>(g.data().begin(), g.data().begin() + 6));

  const auto rec0 = reconstruct(p, Tensor<double>::zeros({2, 3}));
  for (double v : rec0.data()) CHECK(v == 0.0);
  const auto once = reconstruct(p, x);
  CHECK(max_abs_diff(reconstruct(p, project_gradient(once, p)), once) <= 1e-5);

  const auto full = refresh_projector(random_tensor({4, 4}, rng, -1, 1, false), 4);
  CHECK(max_abs_diff(reconstruct(full, project_gradient(g, full)), g) <= 1e-5);

  CHECK(catch_error([&] { reconstruct(p, Tensor<double>::zeros({3, 3})); }).category == ErrorCategory::Dimension);
}

TEST_CASE("projection residual matches a least-squares oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_tensor({6, 5}, rng, -1, 1, false);
    const auto p = refresh_projector(random_tensor({6, 5}, rng, -1, 1, false), 2);
    // an oblique basis of the same column space
    const auto mix = Tensor<double>::from({2, 2}, {2.0, 0.5, -1.0, 3.0});
    const auto q = matmul(p, mix);
    const double ours = frobenius(sub(g, reconstruct(p, project_gradient(g, p))));
    CHECK(ours == doctest::Approx(least_squares_residual(values(q), 6, 2, values(g), 5)).epsilon(1e-9));
  }
}

TEST_CASE("refresh_projector captures rank-1 gradients exactly") {
  std::mt19937_64 rng(6);
  const auto u = random_tensor({5, 1}, rng, -1, 1, false), v = random_tensor({1, 4}, rng, -1, 1, false);
  const auto g = matmul(u, v);
  const auto p = refresh_projector(g, 1);
  CHECK(frobenius(sub(g, reconstruct(p, project_gradient(g, p)))) <= 1e-6);
}

TEST_CASE("refresh_projector output is orthonormal with a fixed sign convention") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + trial % 6, n = 2 + (trial * 3) % 6, r = 1 + trial % std::min(m, n);
    const auto p = refresh_projector(random_tensor({m, n}, rng, -1, 1, false), r);
    check_orthonormal(p);
    for (std::size_t c = 0; c < r; ++c) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < m; ++i)
        if (std::fabs(p.at(i * r + c)) > std::fabs(p.at(arg * r + c))) arg = i;
      CHECK(p.at(arg * r + c) > 0.0);
    }
  }
}

TEST_CASE("refresh_projector is optimal against the exhaustive eigenvector oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + trial % 7, n = 2 + (trial * 5) % 7;
    for (std::size_t r : {1u, 2u}) {
      const auto g = random_tensor({m, n}, rng, -1, 1, false);
      const double ours = testsupport::projection_residual(values(refresh_projector(g, r)), r, values(g), m, n);
      CHECK(ours <= testsupport::best_rank_residual(values(g), m, n, r) + 1e-8);
    }
  }
}

TEST_CASE("refresh_projector degenerate inputs") {
  const auto zero = Tensor<double>::zeros({4, 3});
  CHECK(values(refresh_projector(zero, 2)) == std::vector<double>{1, 0, 0, 1, 0, 0, 0, 0});
  const auto prev = Tensor<double>::from({4, 1}, {0, 0, 1, 0});
  CHECK(values(refresh_projector(zero, 1, &prev)) == values(prev));
  CHECK(catch_error([&] { refresh_projector(zero, 4); }).category == ErrorCategory::Rank);
  CHECK(catch_error([&] { refresh_projector(zero, 0); }).category == ErrorCategory::Rank);
  const auto bad = Tensor<double>::from({2, 2}, {1, NAN, 0, 1});
  CHECK(catch_error([&] { refresh_projector(bad, 1); }).category == ErrorCategory::Domain);
}

TEST_CASE("stage2_step refuses unmerged adapters") {
  auto model = build_model<double>(testsupport::tiny_model_config(1));
  auto set = Stage2Set<double>::init(classify_layers(model), options(2));
  const auto x = Tensor<double>::full({1, 3, 8, 8}, 0.5), gt = Tensor<double>::full({1, 8, 8}, 2.0);
  CHECK(catch_error([&] { stage2_step(model, x, gt, set, false); }).category == ErrorCategory::Schedule);
}

TEST_CASE("a zero-gradient update leaves weights, alpha and beta unchanged") {
  std::mt19937_64 rng(9);
  std::vector<WeightSlot<double>> slots = {slot_of("w", random_tensor({4, 5}, rng, -1, 1, false))};
  const auto reg = classify_layers<double>(slots);
  auto set = Stage2Set<double>::init(reg, options(2));
  const auto before = values(slots[0].weight);
  set.update(backward(sum(mul(set.resolve(slots[0]), Tensor<double>::zeros({4, 5})))));
  const auto& s = set.states().at("w");
  CHECK(s.alpha.item() == 1.0);
  CHECK(s.beta.item() == 0.0);
  CHECK(values(set.resolve(slots[0])) == before);
  CHECK(values(slots[0].weight) == before);
}

TEST_CASE("alpha and beta gradients match finite differences end to end") {
  std::mt19937_64 rng(10);
  for (const auto& c : testsupport::model_gradient_cases()) {
    if (c.name != "alpha_beta_end_to_end") continue;
    for (int i = 0; i < 5; ++i) CHECK(c.run(rng) <= c.tolerance);
  }
}

TEST_CASE("stage-2 updates descend a quadratic loss for small learning rates") {
  for (double lr : {1e-4, 1e-3, 1e-2}) {
    std::mt19937_64 rng(11);
    std::vector<WeightSlot<double>> slots = {slot_of("w", random_tensor({4, 5}, rng, -1, 1, false))};
    const auto target = random_tensor({4, 5}, rng, -1, 1, false);
    auto set = Stage2Set<double>::init(classify_layers<double>(slots),
                                       options(2, 50, lr));
    double prev = INFINITY;
    for (int step = 0; step < 5; ++step) {
      auto loss = sum(square(sub(set.resolve(slots[0]), target)));
      INFO("lr " << lr << " step " << step);
      CHECK(loss.item() <= prev);
      prev = loss.item();
      set.update(backward(loss));
    }
  }
}

TEST_CASE("with alpha = 1 and beta = 0 the stage-2 forward equals the stage-1 forward") {
  std::mt19937_64 rng(12);
  auto model = build_model<double>(testsupport::tiny_model_config(3));
  auto adapters = testsupport::random_adapters(model, 2, rng);
  adapters.merge_all(model);
  Stage2Options opt;
  opt.rank = 2;
  auto set = Stage2Set<double>::init(classify_layers(model), opt);
  const auto x = random_tensor({2, 3, 8, 8}, rng, 0, 1, false);
  const auto gt = random_tensor({2, 8, 8}, rng, 0.5, 5.0, false);
  CHECK(max_abs_diff(model.forward_depth(x, &set), model.forward_depth(x)) <= 1e-6);
  stage2_step(model, x, gt, set);
  stage2_step(model, x, gt, set);
  for (auto& [id, s] : set.states()) {
    s.alpha.mutable_data()[0] = 1.0;
    s.beta.mutable_data()[0] = 0.0;
  }
  CHECK(max_abs_diff(model.forward_depth(x, &set), model.forward_depth(x)) <= 1e-6);
}

TEST_CASE("materialize writes the composed weight and resets the state") {
  std::mt19937_64 rng(13);
  auto model = build_model<double>(testsupport::tiny_model_config(4));
  Stage2Options opt;
  opt.rank = 2;
  opt.lr = 1e-2;
  opt.correction_scale = 0.05;
  auto set = Stage2Set<double>::init(classify_layers(model), opt);
  const auto x = random_tensor({2, 3, 8, 8}, rng, 0, 1, false);
  const auto gt = random_tensor({2, 8, 8}, rng, 0.5, 5.0, false);
  for (int i = 0; i < 3; ++i) stage2_step(model, x, gt, set);
  const auto expected = model.forward_depth(x, &set).detach();
  set.materialize(model);
  CHECK(max_abs_diff(model.forward_depth(x), expected) <= 1e-9);
  for (const auto& [id, s] : set.states()) {
    CHECK(s.alpha.item() == 1.0);
    CHECK(s.beta.item() == 0.0);
    CHECK(s.step_counter == 0);
  }
}

TEST_CASE("memory footprint formulas") {
  std::vector<WeightSlot<double>> square = {slot_of("sq", Tensor<double>::zeros({64, 64}))};
  const auto reg = classify_layers<double>(square);
  CHECK(memory_footprint(reg, OptimizerMode::FullAdam, 4).total_floats == 8192);
  CHECK(memory_footprint(reg, OptimizerMode::Projected, 4).total_floats == 770);
  CHECK(catch_error([&] { memory_footprint(reg, OptimizerMode::Projected, 0); }).category ==
        ErrorCategory::Configuration);

  ModelConfig cfg;
  const auto toy = classify_layers(build_model<float>(cfg));
  const auto full = memory_footprint(toy, OptimizerMode::FullAdam, 4);
  const auto proj = memory_footprint(toy, OptimizerMode::Projected, 4);
  std::uint64_t full_sum = 0, proj_sum = 0;
  std::size_t i = 0;
  for (const auto& [m, n] : testsupport::toy_shapes(cfg)) {
    CHECK(full.floats_per_layer[i].second == 2 * m * n);
    CHECK(proj.floats_per_layer[i].second == m * 4 + 2 * 4 * n + 2);
    CHECK(proj.floats_per_layer[i].second < full.floats_per_layer[i].second);
    full_sum += 2 * m * n;
    proj_sum += m * 4 + 8 * n + 2;
    ++i;
  }
  CHECK(full.total_floats == full_sum);
  CHECK(proj.total_floats == proj_sum);
  CHECK(double(proj.total_floats) < 0.15 * double(full.total_floats));
  CHECK(to_json(proj)["total_floats"] == proj_sum);
}

TEST_CASE("init validates rank and refresh period") {
  const auto reg = classify_layers(build_model<double>(testsupport::tiny_model_config(1)));
  CHECK(catch_error([&] { Stage2Set<double>::init(reg, options(0)); }).category ==
        ErrorCategory::Configuration);
  CHECK(catch_error([&] { Stage2Set<double>::init(reg, options(2, 0)); }).category ==
        ErrorCategory::Configuration);
  CHECK(catch_error([&] { Stage2Set<double>::init(reg, options(5)); }).category == ErrorCategory::Rank);
  const auto set = Stage2Set<double>::init(reg, options(2));
  for (const auto& [id, s] : set.states()) check_orthonormal(s.projector);
}
