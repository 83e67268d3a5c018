#include "helpers.hpp"

using namespace icelut;
using namespace icelut::model;
using testing::random_image;

namespace {

// Random full/working/target triple for tests that do not take finite
// differences (a random target is fine when no kink-straddling applies).
testing::FdScene make_scene(std::uint64_t seed) {
  testing::FdScene scene;
  scene.full = random_image(seed, 8, 8);
  scene.working = imaging::bilinear_downsample(scene.full, 4, 4);
  scene.target = random_image(seed + 1, 8, 8);
  return scene;
}

}  // namespace

TEST_SUITE("gradients") {

TEST_CASE("every parameter matches central finite differences") {
  auto m = make_model(testing::tiny_config(), 3);
  testing::randomize_head_and_basis(m, 99);
  auto scene = testing::fd_scene(m, 17);
  auto report = testing::finite_difference_check(m, scene.full, scene.working,
                                                 scene.target);
  INFO("worst parameter index " << report.worst_index << " of "
                                << report.parameters);
  CHECK(report.max_rel < 1e-4);
  CHECK(report.parameters > 400);  // the walk really covers everything
}

TEST_CASE("finite differences also hold for the 3x3 first layer") {
  auto config = testing::tiny_config();
  config.first_layer_kernel = 3;
  auto m = make_model(config, 5);
  testing::randomize_head_and_basis(m, 101);
  auto scene = testing::fd_scene(m, 23);
  auto report = testing::finite_difference_check(m, scene.full, scene.working,
                                                 scene.target);
  CHECK(report.max_rel < 1e-4);
}

TEST_CASE("finite differences also hold in single-byte mode") {
  auto config = testing::tiny_config();
  config.branch_mode = BranchMode::kSingleByte;
  auto m = make_model(config, 7);
  testing::randomize_head_and_basis(m, 103);
  auto scene = testing::fd_scene(m, 29);
  auto report = testing::finite_difference_check(m, scene.full, scene.working,
                                                 scene.target);
  CHECK(report.max_rel < 1e-4);
}

TEST_CASE("identity model on an extreme image has zero gradients") {
  // Bytes 0 and 255 map to themselves exactly, so every residual is zero
  // and the subgradient convention keeps all parameter gradients at zero.
  auto m = make_model(testing::tiny_config(), 11);
  auto full = imaging::ImageU8::create(8, 8);
  for (std::size_t i = 0; i < full.data.size(); ++i)
    full.data[i] = (i % 2 == 0) ? 0 : 255;
  auto working = imaging::bilinear_downsample(full, 4, 4);

  auto result = compute_gradients(m, full, working, full);
  CHECK(result.loss == 0.0);
  auto flat = testing::flatten_gradients(m, result.grads);
  for (double g : flat) CHECK(g == 0.0);
}

TEST_CASE("loss decreases along the negative gradient") {
  auto m = make_model(testing::tiny_config(), 13);
  testing::randomize_head_and_basis(m, 107);
  auto scene = make_scene(31);

  auto base = compute_gradients(m, scene.full, scene.working, scene.target);
  auto params = testing::all_parameters(m);
  auto flat = testing::flatten_gradients(m, base.grads);
  double norm_sq = 0.0;
  for (double g : flat) norm_sq += g * g;
  REQUIRE(norm_sq > 0.0);

  const double step = 1e-3 / std::sqrt(norm_sq);
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= step * flat[i];
  auto moved = compute_gradients(m, scene.full, scene.working, scene.target);
  CHECK(moved.loss < base.loss);
}

TEST_CASE("gradient accumulation and scaling are elementwise") {
  auto m = make_model(testing::tiny_config(), 15);
  testing::randomize_head_and_basis(m, 109);
  auto scene_a = make_scene(37);
  auto scene_b = make_scene(41);

  auto ga = compute_gradients(m, scene_a.full, scene_a.working, scene_a.target);
  auto gb = compute_gradients(m, scene_b.full, scene_b.working, scene_b.target);

  auto sum = zero_gradients(m);
  accumulate_gradients(sum, ga.grads);
  accumulate_gradients(sum, gb.grads);
  scale_gradients(sum, 0.5);

  auto fa = testing::flatten_gradients(m, ga.grads);
  auto fb = testing::flatten_gradients(m, gb.grads);
  auto fs = testing::flatten_gradients(m, sum);
  REQUIRE(fs.size() == fa.size());
  for (std::size_t i = 0; i < fs.size(); ++i)
    CHECK(fs[i] == doctest::Approx(0.5 * (fa[i] + fb[i])).epsilon(1e-12));
}

}  // TEST_SUITE
