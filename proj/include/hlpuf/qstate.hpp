#pragma once

// Exact dense quantum toolkit for dimensions 2, 4 and 8.

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hlpuf/random.hpp"

namespace hlpuf::qstate {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

/// Tolerance for algebraic identities (norms, hermiticity, unbiasedness).
inline constexpr double kTolerance = 1e-9;

class QuantumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool is_supported_dim(std::ptrdiff_t dim);

class PureState {
 public:
  /// Throws QuantumError unless dim is 2/4/8 and the vector has unit norm.
  explicit PureState(Vector amplitudes);

  /// Computational basis vector e_index.
  static PureState basis_vector(int dim, int index);

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const Vector& amplitudes() const { return amplitudes_; }

  /// <this|other>
  Complex inner(const PureState& other) const;
  /// |<this|other>|^2
  double overlap(const PureState& other) const;

  /// Equality up to global phase.
  bool same_ray(const PureState& other, double tol = kTolerance) const;

 private:
  Vector amplitudes_;
};

class DensityMatrix {
 public:
  /// Validates hermiticity, unit trace and positive semidefiniteness.
  explicit DensityMatrix(Matrix entries);

  static DensityMatrix pure(const PureState& state);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }

 private:
  Matrix entries_;
};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
struct EigenSystem {
  Eigen::VectorXd values;
  Matrix vectors;  // column i pairs with values[i]
};

/// Cyclic complex Jacobi. Throws QuantumError for non-square or
/// non-Hermitian input.
EigenSystem hermitian_eigen(const Matrix& hermitian);

/// Sum of absolute eigenvalues of a Hermitian matrix.
double trace_norm(const Matrix& hermitian);

/// Sum_i p_i |psi_i><psi_i|. Probabilities must be non-negative and sum to 1.
DensityMatrix mixture(std::span<const std::pair<PureState, double>> components);

/// Uniform mixture helper.
DensityMatrix uniform_mixture(std::span<const PureState> states);

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

/// Optimal success probability for discriminating a (prior prior_a) from b.
double helstrom_success(const DensityMatrix& a, const DensityMatrix& b,
                        double prior_a = 0.5);

/// Outcome of a two-hypothesis measurement.
enum class Hypothesis { A = 0, B = 1 };

/// Projective measurement realising the Helstrom optimum. Eigenvectors of
/// prior_a*a - (1-prior_a)*b with non-negative eigenvalue vote for A
/// (zero eigenvalues included), the rest for B.
class HelstromMeasurement {
 public:
  HelstromMeasurement(const DensityMatrix& a, const DensityMatrix& b,
                      double prior_a = 0.5);

  int dim() const { return static_cast<int>(basis_.rows()); }
  const Matrix& basis() const { return basis_; }
  const Matrix& projector_a() const { return projector_a_; }
  const Matrix& projector_b() const { return projector_b_; }
  /// Theoretical success probability of this measurement.
  double success() const { return success_; }

  /// Probability that a state is declared A.
  double probability_a(const PureState& state) const;

  Hypothesis decide(const PureState& state, Rng& rng) const;

 private:
  Matrix basis_;
  std::vector<Hypothesis> votes_;
  Matrix projector_a_;
  Matrix projector_b_;
  double success_;
};

struct MeasurementOutcome {
  int index;
  PureState post_state;
};

/// True when the columns of `basis` are orthonormal and span the space.
bool is_unitary(const Matrix& basis, double tol = kTolerance);

/// Born-rule measurement in the orthonormal basis given by the columns of
/// `basis`. Throws QuantumError for a non-orthonormal basis or a dimension
/// mismatch.
MeasurementOutcome measure(const PureState& state, const Matrix& basis, Rng& rng);

/// Born probabilities |<b_i|psi>|^2 for every column.
std::vector<double> born_probabilities(const PureState& state, const Matrix& basis);

/// BB84 encoding: basis 0 is {|0>,|1>}, basis 1 is {|+>,|->}.
PureState bb84_state(int bit, int basis);

/// A set of bases whose columns are basis vectors.
class MubFamily {
 public:
  MubFamily(int dim, std::vector<Matrix> bases);

  int dim() const { return dim_; }
  std::size_t size() const { return bases_.size(); }
  const Matrix& basis(std::size_t theta) const { return bases_.at(theta); }
  const std::vector<Matrix>& bases() const { return bases_; }

  /// Column `value` of basis `theta`, i.e. |value^theta>.
  PureState state(std::size_t theta, int value) const;

 private:
  int dim_;
  std::vector<Matrix> bases_;
};

/// Largest deviation from the MUB conditions: unitarity of every basis and
/// |<b_i^s|b_j^t>|^2 = 1/dim for every s != t. Zero for an exact family.
double mub_defect(const MubFamily& family);

/// {I_2, H}: the two BB84 bases.
const MubFamily& bb84_family();
/// Five mutually unbiased bases of dimension 4 built from tensor products of
/// the real and complex Hadamard matrices and a controlled-Z phase.
const MubFamily& mub4_family();
/// Nine mutually unbiased bases of dimension 8, in the fixed order
/// I_8, OOO, U(OOI), V(OIO), W(OII), W(IOO), V(IOI), U(IIO), III.
const MubFamily& mub8_family();

}  // namespace hlpuf::qstate
