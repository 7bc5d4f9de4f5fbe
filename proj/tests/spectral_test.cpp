#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "igap/spectral.hpp"
#include "oracles.hpp"

using namespace igap;

namespace {

Graph disjoint_triangles() {
  return make_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}, Mat::Zero(6, 1));
}

}  // namespace

TEST_CASE("dense eigendecomposition of the path 0-1-2") {
  const Laplacian L = build_laplacian(oracle::path_graph(3));
  const SpectralBasis b = eig_dense(L);
  // characteristic polynomial gives 0, 1, 3; L(1,0,-1) = 1*(1,0,-1) confirms
  Vec probe(3);
  probe << 1, 0, -1;
  CHECK((L.matvec(probe) - probe).norm() <= 1e-14);

  REQUIRE(b.K() == 3);
  CHECK(b.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.eigenvalues[1] == doctest::Approx(1.0));
  CHECK(b.eigenvalues[2] == doctest::Approx(3.0));
  const double s = 1.0 / std::sqrt(3.0);
  for (int i = 0; i < 3; ++i) CHECK(b.U(i, 0) == doctest::Approx(s));
}

TEST_CASE("zero laplacian has an all-zero spectrum") {
  const Laplacian L = build_laplacian(make_graph(3, {}, Mat::Zero(3, 1)));
  const SpectralBasis b = eig_dense(L);
  CHECK(b.eigenvalues.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("triangle spectrum is (0, 3, 3)") {
  const SpectralBasis b = eig_dense(build_laplacian(oracle::triangle_graph()));
  // trace = 6 pins the sum; connectivity pins one zero
  CHECK(b.eigenvalues.sum() == doctest::Approx(6.0));
  CHECK(b.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.eigenvalues[1] == doctest::Approx(3.0));
  CHECK(b.eigenvalues[2] == doctest::Approx(3.0));
}

TEST_CASE("dense size cap routes callers to lanczos") {
  const Laplacian L = build_laplacian(oracle::path_graph(30));
  CHECK_THROWS_AS(eig_dense(L, 10), ContractError);
}

TEST_CASE("canonical sign: every column's largest entry is positive") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SpectralBasis b = eig_dense(build_laplacian(oracle::random_graph(35, 0.15, 1, seed)));
    for (int j = 0; j < b.K(); ++j) {
      Eigen::Index arg = 0;
      double best = -1.0;
      for (Eigen::Index r = 0; r < b.U.rows(); ++r) {
        if (std::abs(b.U(r, j)) > best) {
          best = std::abs(b.U(r, j));
          arg = r;
        }
      }
      CHECK(b.U(arg, j) > 0.0);
    }
  }
}

TEST_CASE("lanczos on the path n=3, k=2") {
  const SpectralBasis b = eig_lanczos(build_laplacian(oracle::path_graph(3)), 2, 5);
  CHECK(b.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(b.eigenvalues[1] == doctest::Approx(1.0));
}

TEST_CASE("lanczos k=1 on a connected graph finds the constant vector") {
  const Graph g = oracle::random_graph(50, 0.2, 1, 9);
  REQUIRE(connected_components(g) == 1);
  const SpectralBasis b = eig_lanczos(build_laplacian(g), 1, 3);
  CHECK(std::abs(b.eigenvalues[0]) <= 1e-9);
  const double c = 1.0 / std::sqrt(50.0);
  for (int i = 0; i < 50; ++i) CHECK(b.U(i, 0) == doctest::Approx(c).epsilon(1e-6));
}

TEST_CASE("lanczos is deterministic for a fixed seed") {
  const Graph g = oracle::random_graph(80, 0.08, 1, 33);
  const Laplacian L = build_laplacian(g);
  const SpectralBasis a = eig_lanczos(L, 6, 99);
  const SpectralBasis b = eig_lanczos(L, 6, 99);
  CHECK((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.U - b.U).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lanczos matches dense on an Erdos-Renyi graph n=500") {
  const Graph g = oracle::random_graph(500, 0.02, 1, 12);
  const Laplacian L = build_laplacian(g);
  const SpectralBasis dense = eig_dense(L);
  const SpectralBasis lz = eig_lanczos(L, 16, 77);
  for (int i = 0; i < 16; ++i)
    CHECK(std::abs(lz.eigenvalues[i] - dense.eigenvalues[i]) <= 1e-6);
}

TEST_CASE("lanczos vs dense standing property, including multiplicity") {
  struct Cfg {
    NodeId n;
    double p;
    int k;
    std::uint64_t seed;
  };
  for (const Cfg& c : {Cfg{40, 0.15, 6, 1}, Cfg{120, 0.05, 10, 2}, Cfg{300, 0.03, 12, 3}}) {
    const Graph g = oracle::random_graph(c.n, c.p, 1, c.seed);
    const Laplacian L = build_laplacian(g);
    const SpectralBasis dense = eig_dense(L);
    const SpectralBasis lz = eig_lanczos(L, c.k, c.seed + 100);
    for (int i = 0; i < c.k; ++i)
      CHECK(std::abs(lz.eigenvalues[i] - dense.eigenvalues[i]) <= 1e-6);
    // subspace agreement over the leading block, tolerant of degeneracy at
    // the boundary: cut at the last index whose gap to the next exceeds 1e-6
    int cut = c.k;
    while (cut > 1 && dense.eigenvalues[cut] - dense.eigenvalues[cut - 1] < 1e-6) --cut;
    if (cut >= 1) {
      const double angle = max_principal_angle(lz.U.leftCols(cut), dense.U.leftCols(cut));
      CHECK(angle <= 1e-5);
    }
  }
}

TEST_CASE("zero eigenvalue multiplicity equals the component count") {
  SUBCASE("dense") {
    const SpectralBasis b = eig_dense(build_laplacian(disjoint_triangles()));
    int zeros = 0;
    for (int i = 0; i < b.K(); ++i)
      if (b.eigenvalues[i] < 1e-9) ++zeros;
    CHECK(zeros == 2);
  }
  SUBCASE("lanczos sees both zero modes") {
    const SpectralBasis b = eig_lanczos(build_laplacian(disjoint_triangles()), 3, 4);
    CHECK(b.eigenvalues[0] <= 1e-9);
    CHECK(b.eigenvalues[1] <= 1e-9);
    CHECK(b.eigenvalues[2] == doctest::Approx(3.0));
  }
  SUBCASE("three components") {
    Graph g = make_graph(9,
                         {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {6, 7}, {7, 8}, {6, 8}},
                         Mat::Zero(9, 1));
    const SpectralBasis b = eig_lanczos(build_laplacian(g), 4, 21);
    int zeros = 0;
    for (int i = 0; i < 4; ++i)
      if (b.eigenvalues[i] < 1e-9) ++zeros;
    CHECK(zeros == 3);
  }
}

TEST_CASE("gft examples") {
  const SpectralBasis b = eig_dense(build_laplacian(oracle::path_graph(3)));
  SUBCASE("an eigenvector maps to its unit coordinate") {
    const Vec xhat = gft(b, Vec(b.U.col(1)));
    Vec e2 = Vec::Zero(3);
    e2[1] = 1.0;
    CHECK((xhat - e2).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("zero maps to zero") {
    CHECK(gft(b, Vec(Vec::Zero(3))).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("x = (1,0,-1) concentrates sqrt(2) on the lambda=1 component") {
    Vec x(3);
    x << 1, 0, -1;
    const Vec xhat = gft(b, x);
    CHECK(std::abs(xhat[0]) <= 1e-12);
    CHECK(xhat[1] == doctest::Approx(std::sqrt(2.0)));
    CHECK(std::abs(xhat[2]) <= 1e-12);
  }
  SUBCASE("dimension mismatch") { CHECK_THROWS_AS(gft(b, Vec(Vec::Zero(5))), ContractError); }
}

TEST_CASE("igft examples") {
  const Graph g = oracle::random_graph(24, 0.25, 1, 2);
  const SpectralBasis b = eig_dense(build_laplacian(g));
  Rng rng(8);
  Vec x(24);
  for (int i = 0; i < 24; ++i) x[i] = rng.normal();

  SUBCASE("full-basis round trip") {
    CHECK((igft(b, gft(b, x)) - x).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("e1 maps to the constant vector on a connected graph") {
    REQUIRE(connected_components(g) == 1);
    Vec e1 = Vec::Zero(24);
    e1[0] = 1.0;
    const Vec out = igft(truncate(b, 1), Vec(e1.head(1)));
    for (int i = 0; i < 24; ++i) CHECK(out[i] == doctest::Approx(1.0 / std::sqrt(24.0)));
  }
  SUBCASE("truncated round trip is the subspace projector") {
    const SpectralBasis bk = truncate(b, 7);
    const Vec projected = igft(bk, gft(bk, x));
    const Mat P = bk.U * bk.U.transpose();  // explicit projector oracle
    CHECK((projected - oracle::matmul(P, x)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("truncate") {
  const SpectralBasis b = eig_dense(build_laplacian(oracle::path_graph(3)));
  SUBCASE("truncation to full size is the identity") {
    const SpectralBasis t = truncate(b, 3);
    CHECK((t.U - b.U).cwiseAbs().maxCoeff() == 0.0);
    CHECK((t.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("truncation to 1 keeps the nullspace pair") {
    const SpectralBasis t = truncate(b, 1);
    CHECK(t.K() == 1);
    CHECK(t.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("truncate-then-gft equals leading coordinates") {
    Vec x(3);
    x << 0.3, -1.2, 0.5;
    const Vec full = gft(b, x);
    const Vec head = gft(truncate(b, 2), x);
    CHECK((full.head(2) - head).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("out of range") { CHECK_THROWS_AS(truncate(b, 4), ContractError); }
}

TEST_CASE("parseval on full bases") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Graph g = oracle::random_graph(40, 0.1, 1, seed + 30);
    const SpectralBasis b = eig_dense(build_laplacian(g));
    Rng rng(seed);
    Vec x(40);
    for (int i = 0; i < 40; ++i) x[i] = rng.normal();
    CHECK(std::abs(gft(b, x).norm() - x.norm()) <= 1e-8);
  }
}

TEST_CASE("tridiag_ql agrees with the dense solver") {
  Rng rng(44);
  const int n = 12;
  Vec d(n), e(n - 1);
  for (int i = 0; i < n; ++i) d[i] = rng.normal();
  for (int i = 0; i < n - 1; ++i) e[i] = rng.normal();
  Mat T = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) T(i, i) = d[i];
  for (int i = 0; i < n - 1; ++i) T(i, i + 1) = T(i + 1, i) = e[i];

  Vec dd = d, ee = e;
  Mat Z = Mat::Identity(n, n);
  tridiag_ql(dd, ee, Z);
  std::sort(dd.data(), dd.data() + n);

  Eigen::SelfAdjointEigenSolver<Mat> ref(T);
  for (int i = 0; i < n; ++i) CHECK(dd[i] == doctest::Approx(ref.eigenvalues()[i]).epsilon(1e-10));

  // residual check for the unsorted pairs
  Vec d2 = d, e2 = e;
  Mat Z2 = Mat::Identity(n, n);
  tridiag_ql(d2, e2, Z2);
  for (int j = 0; j < n; ++j) {
    CHECK((T * Z2.col(j) - d2[j] * Z2.col(j)).norm() <= 1e-10);
  }
}

TEST_CASE("normalized laplacian spectra") {
  SUBCASE("triangle: (0, 1.5, 1.5)") {
    const SpectralBasis b =
        eig_dense(build_laplacian(oracle::triangle_graph(), LaplacianKind::SymmetricNormalized));
    CHECK(b.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.eigenvalues[1] == doctest::Approx(1.5));
    CHECK(b.eigenvalues[2] == doctest::Approx(1.5));
  }
  SUBCASE("spectra stay within [0, 2]") {
    const Graph g = oracle::random_graph(40, 0.15, 1, 8);
    const SpectralBasis b = eig_dense(build_laplacian(g, LaplacianKind::SymmetricNormalized));
    CHECK(b.eigenvalues[0] >= -1e-9);
    CHECK(b.eigenvalues[b.K() - 1] <= 2.0 + 1e-9);
  }
}

TEST_CASE("basis invariant checker rejects a broken basis") {
  const Laplacian L = build_laplacian(oracle::path_graph(3));
  SpectralBasis b = eig_dense(L);
  b.U(0, 0) += 0.1;  // break orthonormality
  CHECK_THROWS_AS(check_basis(L, b), NumericError);
}
