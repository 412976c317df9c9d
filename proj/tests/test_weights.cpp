#include <doctest.h>

#include "support.hpp"

#include <spillover/weights.hpp>

using namespace spillover;

namespace {

geo::Points line3() {
  geo::Points p(3, 2);
  p << 0, 0, 1, 0, 2, 0;
  return p;
}

}  // namespace

TEST_SUITE("weights") {
  TEST_CASE("inverse distance on three collinear points") {
    const auto w = weights::build_weights(line3(), weights::Scheme::inverse_distance());
    const Matrix d = Matrix(w.matrix());
    CHECK(d(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(d(0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(d(1, 0) == 0.5);
    CHECK(d(1, 2) == 0.5);
    CHECK(d.diagonal().isZero());
  }

  TEST_CASE("threshold keeps only the near neighbor") {
    const auto w = weights::build_weights(line3(), weights::Scheme::thresholded(1.5));
    const Matrix d = Matrix(w.matrix());
    CHECK(d(0, 1) == 1.0);
    CHECK(d(0, 2) == 0.0);
    CHECK(w.neighbor_count(1) == 2);
    const auto tiny = weights::build_weights(line3(), weights::Scheme::thresholded(0.5));
    CHECK(tiny.empty());
    CHECK(tiny.isolates().size() == 3);
  }

  TEST_CASE("scheme strings round-trip") {
    for (const auto& s : {weights::Scheme::inverse_distance(), weights::Scheme::thresholded(2.5),
                          weights::Scheme::inverse_square(), weights::Scheme::knn(5), weights::Scheme::contiguity()}) {
      CHECK(weights::parse_scheme(weights::to_string(s)) == s);
    }
    CHECK_FALSE(weights::parse_scheme("knn:x"));
    CHECK_FALSE(weights::parse_scheme("gaussian"));
  }

  TEST_CASE("invalid inputs throw") {
    geo::Points same(2, 2);
    same << 1, 1, 1, 1;
    CHECK_THROWS_AS(weights::build_weights(same, weights::Scheme::inverse_distance()), InvalidArgument);
    CHECK_THROWS_AS(weights::build_weights(line3(), weights::Scheme::knn(3)), InvalidArgument);
    CHECK_THROWS_AS(weights::build_weights(line3(), weights::Scheme::contiguity()), InvalidArgument);
  }

  TEST_CASE("random layouts match a dense oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const auto p = testing_support::random_points(rng, 60, 20.0);
      const double cutoff = 3.0 + trial;
      const auto w = weights::build_weights(p, weights::Scheme::thresholded(cutoff));
      const Matrix oracle = testing_support::dense_inverse_distance(p, 1, cutoff);
      CHECK((Matrix(w.matrix()) - oracle).cwiseAbs().maxCoeff() <= 1e-14);
      const Matrix sq = Matrix(weights::build_weights(p, weights::Scheme::inverse_square()).matrix());
      CHECK((sq - testing_support::dense_inverse_distance(p, 2)).cwiseAbs().maxCoeff() <= 1e-14);

      // Row sums are one except isolates; zero diagonal.
      const Vector sums = Matrix(w.matrix()).rowwise().sum();
      for (Index i = 0; i < 60; ++i) {
        const bool isolate = std::find(w.isolates().begin(), w.isolates().end(), i) != w.isolates().end();
        CHECK(sums(i) == doctest::Approx(isolate ? 0.0 : 1.0).epsilon(1e-12));
        CHECK(w.matrix().coeff(i, i) == 0.0);
      }

      const Vector x = testing_support::random_vector(rng, 60);
      CHECK((weights::spatial_lag_vector(w, x) - oracle * x).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  TEST_CASE("neighbor sets grow monotonically with the threshold") {
    std::mt19937_64 rng(9);
    const auto p = testing_support::random_points(rng, 80, 30.0);
    std::vector<Index> previous(80, 0);
    for (double d = 1.0; d <= 30.0; d += 1.0) {
      const auto w = weights::build_weights(p, weights::Scheme::thresholded(d));
      for (Index i = 0; i < 80; ++i) {
        CHECK(w.neighbor_count(i) >= previous[static_cast<std::size_t>(i)]);
        previous[static_cast<std::size_t>(i)] = w.neighbor_count(i);
      }
    }
  }

  TEST_CASE("knn and contiguity") {
    std::mt19937_64 rng(21);
    const auto p = testing_support::random_points(rng, 30, 10.0);
    const auto w = weights::build_weights(p, weights::Scheme::knn(4));
    for (Index i = 0; i < 30; ++i) CHECK(w.neighbor_count(i) == 4);
    std::vector<std::vector<std::size_t>> adj{{1}, {0, 2}, {1}};
    const auto c = weights::build_weights(line3(), weights::Scheme::contiguity(), &adj);
    CHECK(Matrix(c.matrix())(1, 0) == 0.5);
    CHECK(Matrix(c.matrix())(0, 1) == 1.0);
  }

  TEST_CASE("row standardization is idempotent") {
    const auto raw = weights::build_weights(line3(), weights::Scheme::inverse_distance(), nullptr, false);
    const SparseRowMatrix once = weights::row_standardize(raw.matrix());
    CHECK(Matrix(weights::row_standardize(once)) == Matrix(once));
  }

  TEST_CASE("incremental lagger equals rebuilt weights") {
    std::mt19937_64 rng(13);
    const auto p = testing_support::random_points(rng, 50, 15.0);
    const Matrix x = testing_support::random_matrix(rng, 50, 3);
    weights::DistanceNeighbors nb(p);
    weights::ThresholdLagger lagger(nb, x);
    for (double d = 0.5; d <= 15.0; d += 0.5) {
      lagger.advance_to(d);
      const Matrix oracle = testing_support::dense_inverse_distance(p, 1, d) * x;
      CHECK((lagger.lag() - oracle).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK_THROWS_AS(lagger.advance_to(1.0), InvalidArgument);
  }
}
