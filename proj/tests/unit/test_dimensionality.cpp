#include <doctest.h>

#include <random>

#include <Eigen/QR>

#include "common/oracles.hpp"
#include "core/dimensionality.hpp"
#include "core/error.hpp"

using namespace selekt;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

// Sylvester construction; n must be a power of two.
Eigen::MatrixXd hadamard(int n) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Ones(1, 1);
  while (h.rows() < n) {
    Eigen::MatrixXd next(2 * h.rows(), 2 * h.cols());
    next << h, h, h, -h;
    h = next;
  }
  return h;
}

LayerActivations<float> acts_of(const std::vector<Eigen::MatrixXd>& layers) {
  LayerActivations<float> a;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    a.layer_ids.push_back("conv" + std::to_string(l + 1));
    a.values.push_back(layers[l].cast<float>());
  }
  return a;
}

}  // namespace

TEST_CASE("dims match a full SVD on random low-rank matrices") {
  std::mt19937_64 rng(1);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index rows = 10 + static_cast<Eigen::Index>(rng() % 191);
    const Eigen::Index cols = 2 + static_cast<Eigen::Index>(rng() % 63);
    const Eigen::Index full = std::min(rows - 1, cols);
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(rng() % full);
    // Decaying column scales spread the spectrum.
    Eigen::MatrixXd left = gaussian(rows, rank, rng);
    for (Eigen::Index k = 0; k < rank; ++k) left.col(k) *= std::pow(0.85, static_cast<double>(k));
    const Eigen::MatrixXd m = left * gaussian(rank, cols, rng);
    for (double t : {0.5, 0.9, 0.99}) {
      CAPTURE(trial);
      CAPTURE(t);
      CHECK(dims_to_variance(m, t) == oracle::svd_dims(m, t, true));
      CHECK(dims_to_variance(m, t, {.center = false}) == oracle::svd_dims(m, t, false));
      ++checked;
    }
  }
  CHECK(checked == 600);
}

TEST_CASE("dims hand cases") {
  std::mt19937_64 rng(2);
  SUBCASE("rank one") {
    const Eigen::MatrixXd m = gaussian(50, 1, rng) * gaussian(1, 8, rng);
    CHECK(dims_to_variance(m, 0.9) == 1);
  }
  SUBCASE("identical rows carry no variance") {
    const Eigen::MatrixXd m = Eigen::VectorXd::Ones(30) * gaussian(1, 8, rng);
    CHECK(dims_to_variance(m, 0.9) == 0);
  }
  SUBCASE("ten equal orthogonal directions need nine for 90 percent") {
    // Columns 1..10 of a 16x16 Hadamard matrix: zero mean, mutually
    // orthogonal, equal norm.
    const Eigen::MatrixXd m = hadamard(16).middleCols(1, 10);
    CHECK(dims_to_variance(m, 0.9) == 9);
    CHECK(dims_to_variance(m, 0.95) == 10);
    CHECK(dims_to_variance(m, 0.5) == 5);
  }
}

TEST_CASE("dims are invariant under rotation of the unit space") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m = gaussian(80, 12, rng);
    for (Eigen::Index k = 0; k < 12; ++k) m.col(k) *= std::pow(0.7, static_cast<double>(k));
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(12, 12, rng));
    const Eigen::MatrixXd q = qr.householderQ();
    CHECK(dims_to_variance(m, 0.9) == dims_to_variance(m * q, 0.9));
  }
}

TEST_CASE("dims are non-decreasing in the threshold") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd m = gaussian(60, 20, rng) * gaussian(20, 20, rng);
  int prev = 0;
  for (double t = 0.05; t < 1.0; t += 0.05) {
    const int d = dims_to_variance(m, t);
    CHECK(d >= prev);
    CHECK(d <= 20);
    prev = d;
  }
}

TEST_CASE("dims input validation") {
  CHECK_THROWS_AS(dims_to_variance(Eigen::MatrixXd::Ones(1, 3), 0.9), Error);
  CHECK_THROWS_AS(dims_to_variance(Eigen::MatrixXd::Ones(3, 3), 0.0), Error);
  CHECK_THROWS_AS(dims_to_variance(Eigen::MatrixXd::Ones(3, 3), 1.0), Error);
}

TEST_CASE("clean profile reports dims and fractions per layer") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd l1 = gaussian(40, 1, rng) * gaussian(1, 4, rng);
  const Eigen::MatrixXd l2 = hadamard(16).middleCols(1, 10).replicate(2, 1);
  const auto r = clean_dim_profile(acts_of({l1, l2}));
  REQUIRE(r.layers.size() == 2);
  CHECK(r.kind == MatrixKind::kClean);
  CHECK(r.samples_used == 40);
  CHECK(r.layers[0].dims == 1);
  CHECK(r.layers[0].fraction == 0.25);
  CHECK(r.layers[1].dims == 9);
  CHECK(r.layers[1].units == 10);
  CHECK(r.layers[1].fraction == doctest::Approx(0.9));

  nlohmann::json j = r;
  CHECK(j["perturbation"].is_null());
  const auto back = j.get<DimReport>();
  CHECK(back.layers[1].dims == 9);
  CHECK(back.kind == MatrixKind::kClean);
}

TEST_CASE("difference profiles") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd a = gaussian(50, 6, rng).cwiseAbs();
  const auto clean = acts_of({a});
  SUBCASE("identical perturbation gives zero dims") {
    const auto r = difference_dim_profile(clean, clean, MatrixKind::kAdversarialDiff, "pgd25");
    CHECK(r.layers[0].dims == 0);
    CHECK(r.perturbation == "pgd25");
  }
  SUBCASE("a constant shift per unit has no variance") {
    Eigen::MatrixXd shifted = a;
    shifted.rowwise() += gaussian(1, 6, rng).row(0);
    const auto r = difference_dim_profile(clean, acts_of({shifted}), MatrixKind::kCorruptionDiff,
                                          "brightness3");
    CHECK(r.layers[0].dims == 0);
  }
  SUBCASE("a rank-one perturbation gives one dimension") {
    const Eigen::MatrixXd moved = a + gaussian(50, 1, rng) * gaussian(1, 6, rng);
    const auto r = difference_dim_profile(clean, acts_of({moved}), MatrixKind::kCorruptionDiff,
                                          "fog1");
    CHECK(r.layers[0].dims == 1);
  }
  SUBCASE("mismatched shapes are rejected") {
    CHECK_THROWS_AS(difference_dim_profile(clean, acts_of({a.topRows(49)}),
                                           MatrixKind::kAdversarialDiff, "pgd25"),
                    Error);
    CHECK_THROWS_AS(difference_dim_profile(clean, acts_of({a.leftCols(5)}),
                                           MatrixKind::kAdversarialDiff, "pgd25"),
                    Error);
    CHECK_THROWS_AS(
        difference_dim_profile(clean, acts_of({a, a}), MatrixKind::kAdversarialDiff, "pgd25"),
        Error);
  }
}

TEST_CASE("matrix kind names round trip") {
  for (auto k : {MatrixKind::kClean, MatrixKind::kCorruptionDiff, MatrixKind::kAdversarialDiff})
    CHECK(matrix_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(matrix_kind_from_string("other"), Error);
}
