#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "hlpuf/qstate.hpp"
#include "stat_helpers.hpp"

using namespace hlpuf;
using namespace hlpuf::qstate;
using hlpuf::testing::within_sigmas;

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

Matrix random_hermitian(int dim, Rng& rng) {
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = Complex(rng.normal(), rng.normal());
  return (m + m.adjoint()) / 2.0;
}

PureState random_state(int dim, Rng& rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(rng.normal(), rng.normal());
  return PureState(v / v.norm());
}

DensityMatrix random_density(int dim, int rank, Rng& rng) {
  std::vector<std::pair<PureState, double>> parts;
  double total = 0.0;
  std::vector<double> w;
  for (int r = 0; r < rank; ++r) {
    w.push_back(rng.uniform() + 0.01);
    total += w.back();
  }
  for (int r = 0; r < rank; ++r) parts.emplace_back(random_state(dim, rng), w[static_cast<std::size_t>(r)] / total);
  return mixture(parts);
}

DensityMatrix bb84_value_mixture(int bit) {
  const std::vector<PureState> states{bb84_state(bit, 0), bb84_state(bit, 1)};
  return uniform_mixture(states);
}

}  // namespace

TEST_CASE("bb84_state follows the conjugate coding table") {
  CHECK(bb84_state(0, 0).same_ray(PureState::basis_vector(2, 0)));
  CHECK(bb84_state(1, 0).same_ray(PureState::basis_vector(2, 1)));
  const PureState plus = bb84_state(0, 1);
  CHECK(plus.amplitudes()(0).real() == doctest::Approx(kInvSqrt2).epsilon(1e-12));
  CHECK(plus.amplitudes()(1).real() == doctest::Approx(kInvSqrt2).epsilon(1e-12));
  const PureState minus = bb84_state(1, 1);
  CHECK(minus.amplitudes()(0).real() == doctest::Approx(kInvSqrt2));
  CHECK(minus.amplitudes()(1).real() == doctest::Approx(-kInvSqrt2));
  CHECK_THROWS_AS(bb84_state(2, 0), QuantumError);
}

TEST_CASE("PureState rejects bad input") {
  CHECK_THROWS_AS(PureState(Vector::Ones(2)), QuantumError);
  CHECK_THROWS_AS(PureState(Vector::Zero(3)), QuantumError);
  Vector v = Vector::Zero(8);
  v(7) = Complex(0.0, 1.0);
  CHECK_NOTHROW(PureState{v});
}

TEST_CASE("mixture") {
  const PureState zero = bb84_state(0, 0), one = bb84_state(1, 0), plus = bb84_state(0, 1);

  SUBCASE("pure embedding") {
    const std::vector<std::pair<PureState, double>> parts{{zero, 1.0}};
    const DensityMatrix rho = mixture(parts);
    CHECK(std::abs(rho.entries()(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(rho.entries()(1, 1)) < 1e-12);
  }
  SUBCASE("|0> and |+> at one half") {
    // 0.5 * [[1,0],[0,0]] + 0.5 * [[.5,.5],[.5,.5]]
    const std::vector<std::pair<PureState, double>> parts{{zero, 0.5}, {plus, 0.5}};
    const DensityMatrix rho = mixture(parts);
    const Matrix& m = rho.entries();
    CHECK(std::abs(m(0, 0) - 0.75) < 1e-12);
    CHECK(std::abs(m(0, 1) - 0.25) < 1e-12);
    CHECK(std::abs(m(1, 0) - 0.25) < 1e-12);
    CHECK(std::abs(m(1, 1) - 0.25) < 1e-12);
  }
  SUBCASE("maximally mixed") {
    const std::vector<std::pair<PureState, double>> parts{{zero, 0.5}, {one, 0.5}};
    CHECK((mixture(parts).entries() - Matrix::Identity(2, 2) / 2.0).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("non-normalised probabilities are rejected") {
    const std::vector<std::pair<PureState, double>> parts{{zero, 0.5}, {one, 0.4}};
    CHECK_THROWS_AS(mixture(parts), QuantumError);
    const std::vector<std::pair<PureState, double>> neg{{zero, 1.5}, {one, -0.5}};
    CHECK_THROWS_AS(mixture(neg), QuantumError);
  }
}

TEST_CASE("DensityMatrix validates its invariants") {
  Matrix not_hermitian(2, 2);
  not_hermitian << 0.5, 0.1, 0.2, 0.5;
  CHECK_THROWS_AS(DensityMatrix{not_hermitian}, QuantumError);
  CHECK_THROWS_AS(DensityMatrix{Matrix::Identity(2, 2)}, QuantumError);
  Matrix negative(2, 2);
  negative << 1.5, 0, 0, -0.5;
  CHECK_THROWS_AS(DensityMatrix{negative}, QuantumError);
}

TEST_CASE("hermitian_eigen agrees with an independent solver") {
  Rng rng(7);
  for (int dim : {2, 4, 8}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix h = random_hermitian(dim, rng);
      const EigenSystem mine = hermitian_eigen(h);
      Eigen::SelfAdjointEigenSolver<Matrix> ref(h);
      CHECK((mine.values - ref.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
      // H V = V diag(lambda), V unitary
      CHECK(is_unitary(mine.vectors, 1e-10));
      const Matrix residual = h * mine.vectors - mine.vectors * mine.values.cast<Complex>().asDiagonal();
      CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  CHECK_THROWS_AS(hermitian_eigen(Matrix::Random(2, 2) + Complex(0, 1) * Matrix::Identity(2, 2)), QuantumError);
}

TEST_CASE("trace distance") {
  const DensityMatrix zero = DensityMatrix::pure(bb84_state(0, 0));
  const DensityMatrix one = DensityMatrix::pure(bb84_state(1, 0));
  CHECK(trace_distance(zero, one) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trace_distance(zero, zero) == doctest::Approx(0.0));
  CHECK(trace_distance(bb84_value_mixture(0), bb84_value_mixture(1)) ==
        doctest::Approx(kInvSqrt2).epsilon(1e-12));
  const DensityMatrix eight = DensityMatrix::pure(PureState::basis_vector(8, 0));
  CHECK_THROWS_AS(trace_distance(zero, eight), QuantumError);
}

TEST_CASE("helstrom success") {
  const DensityMatrix zero = DensityMatrix::pure(bb84_state(0, 0));
  const DensityMatrix one = DensityMatrix::pure(bb84_state(1, 0));
  CHECK(helstrom_success(zero, one, 0.5) == doctest::Approx(1.0));
  CHECK(helstrom_success(zero, zero, 0.5) == doctest::Approx(0.5));
  CHECK(helstrom_success(bb84_value_mixture(0), bb84_value_mixture(1), 0.5) ==
        doctest::Approx(0.5 + 1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
  CHECK_THROWS_AS(helstrom_success(zero, one, 1.5), QuantumError);

  SUBCASE("equal priors relate to the trace distance") {
    Rng rng(11);
    for (int dim : {2, 4, 8}) {
      for (int rep = 0; rep < 10; ++rep) {
        const DensityMatrix a = random_density(dim, 3, rng), b = random_density(dim, 2, rng);
        CHECK(helstrom_success(a, b, 0.5) == doctest::Approx(0.5 + 0.5 * trace_distance(a, b)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("helstrom measurement") {
  SUBCASE("orthogonal states") {
    const HelstromMeasurement m(DensityMatrix::pure(bb84_state(0, 0)), DensityMatrix::pure(bb84_state(1, 0)));
    Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
    p0(0, 0) = 1.0;
    p1(1, 1) = 1.0;
    CHECK((m.projector_a() - p0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m.projector_b() - p1).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("BB84 value mixtures project onto the (Z+X)/2 eigenbasis") {
    const HelstromMeasurement m(bb84_value_mixture(0), bb84_value_mixture(1));
    // Oracle: (Z+X)/2 has eigenvalue +1/sqrt2 on (cos pi/8, sin pi/8).
    Vector v(2);
    v << std::cos(std::numbers::pi / 8), std::sin(std::numbers::pi / 8);
    const Matrix expected = v * v.adjoint();
    CHECK((m.projector_a() - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m.projector_a() + m.projector_b() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m.success() == doctest::Approx(0.5 + 1.0 / (2.0 * std::sqrt(2.0))));
  }
  SUBCASE("identical hypotheses: zero eigenvalues vote A") {
    const DensityMatrix rho = bb84_value_mixture(0);
    const HelstromMeasurement m(rho, rho);
    CHECK((m.projector_a() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m.success() == doctest::Approx(0.5));
  }
  SUBCASE("empirical success matches the optimum within 3 sigma") {
    Rng rng(2024);
    for (int dim : {2, 8}) {
      const DensityMatrix a = random_density(dim, 2, rng), b = random_density(dim, 3, rng);
      // Sample the hypotheses by sampling their pure components.
      const HelstromMeasurement m(a, b);
      const EigenSystem ea = hermitian_eigen(a.entries()), eb = hermitian_eigen(b.entries());
      auto sample = [&](const EigenSystem& e) {
        double u = rng.uniform();
        Eigen::Index k = 0;
        for (; k + 1 < e.values.size(); ++k) {
          if (u < std::max(0.0, e.values(k))) break;
          u -= std::max(0.0, e.values(k));
        }
        return PureState(e.vectors.col(k));
      };
      const long trials = 100000;
      long wins = 0;
      for (long t = 0; t < trials; ++t) {
        const bool is_a = rng.bit() == 0;
        const PureState s = sample(is_a ? ea : eb);
        wins += (m.decide(s, rng) == Hypothesis::A) == is_a;
      }
      const double rate = static_cast<double>(wins) / trials;
      CHECK(within_sigmas(rate, helstrom_success(a, b), trials));
    }
  }
}

TEST_CASE("measure") {
  Rng rng(5);
  const Matrix& hadamard = bb84_family().basis(1);
  const Matrix computational = Matrix::Identity(2, 2);

  SUBCASE("eigenstate is deterministic") {
    for (int i = 0; i < 100; ++i) {
      const auto out = measure(bb84_state(0, 1), hadamard, rng);
      CHECK(out.index == 0);
      CHECK(out.post_state.same_ray(bb84_state(0, 1)));
    }
  }
  SUBCASE("|+> in Z is a fair coin") {
    const long trials = 100000;
    long zeros = 0;
    for (long t = 0; t < trials; ++t) zeros += measure(bb84_state(0, 1), computational, rng).index == 0;
    CHECK(std::abs(static_cast<double>(zeros) / trials - 0.5) < 0.01);
  }
  SUBCASE("|0> in the Breidbart basis") {
    Matrix breidbart(2, 2);
    const double c = std::cos(std::numbers::pi / 8), s = std::sin(std::numbers::pi / 8);
    breidbart << c, -s, s, c;
    const long trials = 100000;
    long zeros = 0;
    for (long t = 0; t < trials; ++t) zeros += measure(bb84_state(0, 0), breidbart, rng).index == 0;
    const double expected = c * c;  // analytic |<b_0|0>|^2
    CHECK(expected == doctest::Approx(0.85355339).epsilon(1e-7));
    CHECK(std::abs(static_cast<double>(zeros) / trials - expected) < 0.01);
  }
  SUBCASE("Born frequencies for a battery of random states") {
    for (int dim : {2, 4, 8}) {
      const PureState psi = random_state(dim, rng);
      const Matrix& basis = (dim == 2 ? bb84_family() : dim == 4 ? mub4_family() : mub8_family()).basis(1);
      const auto probs = born_probabilities(psi, basis);
      const long trials = 50000;
      std::vector<long> counts(static_cast<std::size_t>(dim), 0);
      for (long t = 0; t < trials; ++t) ++counts[static_cast<std::size_t>(measure(psi, basis, rng).index)];
      for (int i = 0; i < dim; ++i) {
        CHECK(within_sigmas(static_cast<double>(counts[static_cast<std::size_t>(i)]) / trials,
                            probs[static_cast<std::size_t>(i)], trials));
      }
    }
  }
  SUBCASE("non-orthonormal basis is rejected") {
    Matrix bad(2, 2);
    bad << 1, 1, 0, 1;
    CHECK_THROWS_AS(measure(bb84_state(0, 0), bad, rng), QuantumError);
  }
}

TEST_CASE("MUB families") {
  CHECK(mub_defect(bb84_family()) < 1e-12);
  CHECK(mub_defect(mub4_family()) < 1e-12);
  CHECK(mub4_family().size() == 5);

  const MubFamily& f = mub8_family();
  REQUIRE(f.size() == 9);
  CHECK(f.dim() == 8);
  CHECK((f.basis(0) - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t s = 0; s < f.size(); ++s) {
    CHECK(is_unitary(f.basis(s)));
    for (std::size_t t = s + 1; t < f.size(); ++t) {
      const Matrix cross = f.basis(s).adjoint() * f.basis(t);
      CHECK((cross.cwiseAbs2().array() - 0.125).abs().maxCoeff() < 1e-9);
    }
  }
  CHECK(mub_defect(f) < 1e-9);

  SUBCASE("a corrupted basis is detected") {
    std::vector<Matrix> bases = f.bases();
    bases[4] = bases[2];  // duplicated basis: overlaps 0 or 1
    CHECK(mub_defect(MubFamily(8, bases)) > 0.1);
  }
}
