#include <random>

#include "doctest.h"
#include "grassmann_properties.hpp"
#include "oracles.hpp"
#include "repmatch/error.hpp"
#include "repmatch/grassmann.hpp"

using namespace repmatch;

namespace {

AdapterBundle bundle_of(std::vector<LoraAdapter> layers) {
  AdapterBundle b;
  b.model_tag = "m";
  b.rank = layers.front().rank();
  b.layers = std::move(layers);
  return b;
}

Matrix outer(const std::vector<double>& u, const std::vector<double>& v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

}  // namespace

TEST_CASE("phi of a matrix with itself is one") {
  std::mt19937_64 gen(1);
  const Matrix m = matmul(oracle::gaussian_matrix(gen, 7, 3), oracle::gaussian_matrix(gen, 3, 7));
  for (std::size_t k = 1; k <= 3; ++k) CHECK(std::abs(grassmann_phi(m, m, k, k) - 1.0) <= 1e-9);
}

TEST_CASE("orthogonal rank-1 right vectors give zero") {
  const Matrix w1 = outer({1, 2, 3}, {1, 0, 0});
  const Matrix w2 = outer({-1, 0, 4}, {0, 1, 0});
  CHECK(grassmann_phi(w1, w2, 1, 1) <= 1e-15);
}

TEST_CASE("d=6 rank-2 pair matches Gram-Schmidt on the row spaces") {
  std::mt19937_64 gen(2);
  const Matrix w1 = matmul(oracle::gaussian_matrix(gen, 6, 2), oracle::gaussian_matrix(gen, 2, 6));
  const Matrix w2 = matmul(oracle::gaussian_matrix(gen, 6, 2), oracle::gaussian_matrix(gen, 2, 6));
  const auto rows1 = oracle::to_dense(w1);
  const auto rows2 = oracle::to_dense(w2);
  const auto q1 = oracle::gram_schmidt(rows1, 1e-8);
  const auto q2 = oracle::gram_schmidt(rows2, 1e-8);
  REQUIRE(q1.size() == 2);
  REQUIRE(q2.size() == 2);
  const double expected = oracle::subspace_phi(q1, q2);
  CHECK(std::abs(grassmann_phi(w1, w2, 2, 2) - expected) <= 1e-10);
}

TEST_CASE("grid of a matrix with itself has a unit diagonal") {
  std::mt19937_64 gen(3);
  const auto p = oracle::planted(gen, 9, {5, 3, 2, 1});
  const SimilarityGrid g = similarity_grid(p.matrix, p.matrix);
  REQUIRE(g.r == 4);
  for (std::size_t k = 1; k <= 4; ++k) CHECK(std::abs(g.at(k, k) - 1.0) <= 1e-9);
  CHECK(std::abs(layer_repmatch(g) - 1.0) <= 1e-9);
}

TEST_CASE("rank-1 grid is a single squared cosine") {
  const std::vector<double> v1 = {1, 2, 0, -1};
  const std::vector<double> v2 = {0.5, 1, 1, 0};
  const SimilarityGrid g = similarity_grid(outer({1, 0, 2, 1}, v1), outer({3, 1, 0, 1}, v2));
  REQUIRE(g.values.size() == 1);
  const double c = oracle::dot(v1, v2);
  CHECK(std::abs(g.values[0] - c * c / (oracle::dot(v1, v1) * oracle::dot(v2, v2))) <= 1e-12);
}

TEST_CASE("seeded rank-4 fixture pair matches the oracle grid") {
  std::mt19937_64 gen(4);
  const auto p1 = oracle::planted(gen, 10, {4, 3, 2, 1});
  const auto p2 = properties::partner(gen, p1, 10, 4, true);
  const SimilarityGrid g = similarity_grid(p1.matrix, p2.matrix);
  REQUIRE(g.r == 4);
  REQUIRE(g.r_prime == 4);
  double scan = 0.0;
  for (std::size_t i = 1; i <= 4; ++i)
    for (std::size_t j = 1; j <= 4; ++j) {
      const double expected = oracle::subspace_phi(oracle::leading(p1.right, i), oracle::leading(p2.right, j));
      CHECK(std::abs(g.at(i, j) - expected) <= 1e-8);
      scan = std::max(scan, expected);
    }
  CHECK(std::abs(layer_repmatch(g) - scan) <= 1e-8);
}

TEST_CASE("layer_repmatch of an all-zero grid") {
  SimilarityGrid g;
  g.r = 2;
  g.r_prime = 3;
  g.values.assign(6, 0.0);
  CHECK(layer_repmatch(g) == 0.0);
  SimilarityGrid empty;
  CHECK_THROWS_AS(layer_repmatch(empty), DataError);
}

TEST_CASE("grassmann errors") {
  CHECK_THROWS_AS(singular_basis(Matrix(3, 3)), DegenerateError);
  const Matrix w = outer({1, 1, 0}, {0, 1, 1});
  CHECK_THROWS_AS(grassmann_phi(w, w, 2, 1), DataError);
  CHECK_THROWS_AS(grassmann_phi(w, w, 0, 1), DataError);
  CHECK_THROWS_AS(grassmann_phi(w, Matrix::identity(4), 1, 1), DataError);
}

TEST_CASE("left subspace option uses column spaces") {
  const Matrix w1 = outer({1, 0, 0}, {1, 1, 0});
  const Matrix w2 = outer({1, 0, 0}, {0, 0, 1});
  GrassmannOptions left;
  left.subspace = Subspace::left;
  CHECK(grassmann_phi(w1, w2, 1, 1) <= 1e-15);
  CHECK(std::abs(grassmann_phi(w1, w2, 1, 1, left) - 1.0) <= 1e-12);
}

TEST_CASE("model_repmatch aggregates max per layer then mean") {
  std::mt19937_64 gen(5);
  std::vector<LoraAdapter> l1;
  std::vector<LoraAdapter> l2;
  for (int l = 0; l < 3; ++l) {
    l1.emplace_back("h" + std::to_string(l), oracle::gaussian_matrix(gen, 6, 2), oracle::gaussian_matrix(gen, 2, 6));
    l2.emplace_back("h" + std::to_string(l), oracle::gaussian_matrix(gen, 6, 2), oracle::gaussian_matrix(gen, 2, 6));
  }
  const AdapterBundle b1 = bundle_of(l1);
  const AdapterBundle b2 = bundle_of(l2);
  CHECK(std::abs(model_repmatch(b1, b1).model_score - 1.0) <= 1e-9);
  const RepMatchReport r = model_repmatch(b1, b2);
  double mean = 0.0;
  for (std::size_t l = 0; l < 3; ++l) {
    const SimilarityGrid g = similarity_grid(compose(l1[l]), compose(l2[l]));
    CHECK(r.per_layer[l].layer_id == l1[l].layer_id);
    CHECK(std::abs(r.per_layer[l].score - layer_repmatch(g)) <= 1e-12);
    mean += r.per_layer[l].score;
  }
  CHECK(std::abs(r.model_score - mean / 3.0) <= 1e-12);
  CHECK(std::abs(r.model_score - model_repmatch(b2, b1).model_score) <= 1e-9);
  CHECK(r.first.content_hash == content_hash(b1));
}

TEST_CASE("model_repmatch rejects mismatched or degenerate bundles") {
  std::mt19937_64 gen(6);
  const AdapterBundle b1 = bundle_of({LoraAdapter("x", oracle::gaussian_matrix(gen, 4, 1), oracle::gaussian_matrix(gen, 1, 4))});
  const AdapterBundle other = bundle_of({LoraAdapter("y", oracle::gaussian_matrix(gen, 4, 1), oracle::gaussian_matrix(gen, 1, 4))});
  CHECK_THROWS_AS(model_repmatch(b1, other), DataError);
  const AdapterBundle dead = bundle_of({LoraAdapter("x", Matrix(4, 1), oracle::gaussian_matrix(gen, 1, 4))});
  try {
    model_repmatch(b1, dead);
    FAIL("expected DegenerateError");
  } catch (const DegenerateError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
}

TEST_CASE("property suite at rank 1 and rank 4") {
  for (std::size_t r : {1u, 4u}) {
    const properties::SuiteResult result = properties::grassmann_suite(12, r, 100 + r);
    for (const auto& check : result.checks) {
      INFO(check.name << " rank " << r << " worst " << check.worst);
      CHECK(check.pass());
    }
  }
}
