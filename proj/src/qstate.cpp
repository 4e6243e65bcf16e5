#include "hlpuf/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace hlpuf::qstate {

namespace {

void require_same_dim(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) {
    throw QuantumError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                       std::to_string(b.dim()));
  }
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix diag(std::initializer_list<double> entries) {
  Eigen::VectorXcd d(static_cast<Eigen::Index>(entries.size()));
  Eigen::Index i = 0;
  for (double e : entries) d(i++) = e;
  return d.asDiagonal();
}

// Real Hadamard "O" and complex Hadamard "I".
Matrix hadamard_real() {
  Matrix m(2, 2);
  m << 1, 1, 1, -1;
  return m / std::sqrt(2.0);
}

Matrix hadamard_complex() {
  const Complex i(0.0, 1.0);
  Matrix m(2, 2);
  m << 1, 1, i, -i;
  return m / std::sqrt(2.0);
}

}  // namespace

bool is_supported_dim(std::ptrdiff_t dim) { return dim == 2 || dim == 4 || dim == 8; }

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
  if (!is_supported_dim(amplitudes_.size())) {
    throw QuantumError("unsupported state dimension " + std::to_string(amplitudes_.size()));
  }
  const double norm2 = amplitudes_.squaredNorm();
  if (std::abs(norm2 - 1.0) > kTolerance) {
    throw QuantumError("state is not normalised (|psi|^2 = " + std::to_string(norm2) + ")");
  }
}

PureState PureState::basis_vector(int dim, int index) {
  if (index < 0 || index >= dim) throw QuantumError("basis index out of range");
  Vector v = Vector::Zero(dim);
  v(index) = 1.0;
  return PureState(std::move(v));
}

Complex PureState::inner(const PureState& other) const {
  if (dim() != other.dim()) throw QuantumError("dimension mismatch in inner product");
  return amplitudes_.dot(other.amplitudes_);  // conjugates the left operand
}

double PureState::overlap(const PureState& other) const { return std::norm(inner(other)); }

bool PureState::same_ray(const PureState& other, double tol) const {
  return dim() == other.dim() && std::abs(overlap(other) - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || !is_supported_dim(entries_.rows())) {
    throw QuantumError("density matrix must be square of dimension 2, 4 or 8");
  }
  if ((entries_ - entries_.adjoint()).cwiseAbs().maxCoeff() > kTolerance) {
    throw QuantumError("density matrix is not Hermitian");
  }
  if (std::abs(entries_.trace() - Complex(1.0)) > kTolerance) {
    throw QuantumError("density matrix trace differs from 1");
  }
  if (hermitian_eigen(entries_).values.minCoeff() < -kTolerance) {
    throw QuantumError("density matrix is not positive semidefinite");
  }
}

DensityMatrix DensityMatrix::pure(const PureState& state) {
  const Vector& v = state.amplitudes();
  return DensityMatrix(v * v.adjoint());
}

// ---------------------------------------------------------------------------
// Hermitian eigen-decomposition

EigenSystem hermitian_eigen(const Matrix& hermitian) {
  if (hermitian.rows() != hermitian.cols()) throw QuantumError("matrix is not square");
  const Eigen::Index n = hermitian.rows();
  const double scale = std::max(1.0, hermitian.cwiseAbs().maxCoeff());
  if ((hermitian - hermitian.adjoint()).cwiseAbs().maxCoeff() > kTolerance * scale) {
    throw QuantumError("matrix is not Hermitian");
  }

  Matrix a = (hermitian + hermitian.adjoint()) / 2.0;
  Matrix v = Matrix::Identity(n, n);

  constexpr int kMaxSweeps = 64;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (off <= 1e-30 * scale * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag <= 1e-300) continue;
        // Phase rotation makes the (p,q) entry real and positive, then a real
        // Jacobi rotation annihilates it.
        const Complex phase = a(p, q) / mag;  // e^{i phi}
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // Columns of the unitary U = D * P restricted to (p, q):
        //   col p = (c, -s * conj(phase)),   col q = (s, c * conj(phase)).
        const Complex up_p = c, uq_p = -s * std::conj(phase);
        const Complex up_q = s, uq_q = c * std::conj(phase);

        // A <- A U (columns p, q)
        for (Eigen::Index r = 0; r < n; ++r) {
          const Complex arp = a(r, p), arq = a(r, q);
          a(r, p) = arp * up_p + arq * uq_p;
          a(r, q) = arp * up_q + arq * uq_q;
        }
        // A <- U^dagger A (rows p, q)
        for (Eigen::Index col = 0; col < n; ++col) {
          const Complex apc = a(p, col), aqc = a(q, col);
          a(p, col) = std::conj(up_p) * apc + std::conj(uq_p) * aqc;
          a(q, col) = std::conj(up_q) * apc + std::conj(uq_q) * aqc;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        // V <- V U
        for (Eigen::Index r = 0; r < n; ++r) {
          const Complex vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp * up_p + vrq * uq_p;
          v(r, q) = vrp * up_q + vrq * uq_q;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto i, auto j) { return a(i, i).real() < a(j, j).real(); });

  EigenSystem out{Eigen::VectorXd(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]).real();
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

double trace_norm(const Matrix& hermitian) {
  return hermitian_eigen(hermitian).values.cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// Mixtures and distances

DensityMatrix mixture(std::span<const std::pair<PureState, double>> components) {
  if (components.empty()) throw QuantumError("mixture needs at least one component");
  const int dim = components.front().first.dim();
  Matrix rho = Matrix::Zero(dim, dim);
  double total = 0.0;
  for (const auto& [state, prob] : components) {
    if (state.dim() != dim) throw QuantumError("mixture components differ in dimension");
    if (!(prob >= 0.0)) throw QuantumError("negative mixture probability");
    total += prob;
    rho += prob * state.amplitudes() * state.amplitudes().adjoint();
  }
  if (std::abs(total - 1.0) > kTolerance) {
    throw QuantumError("mixture probabilities sum to " + std::to_string(total));
  }
  return DensityMatrix(std::move(rho));
}

DensityMatrix uniform_mixture(std::span<const PureState> states) {
  std::vector<std::pair<PureState, double>> parts;
  parts.reserve(states.size());
  const double w = 1.0 / static_cast<double>(states.size());
  for (const auto& s : states) parts.emplace_back(s, w);
  return mixture(parts);
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  require_same_dim(a, b);
  return 0.5 * trace_norm(a.entries() - b.entries());
}

double helstrom_success(const DensityMatrix& a, const DensityMatrix& b, double prior_a) {
  require_same_dim(a, b);
  if (!(prior_a >= 0.0 && prior_a <= 1.0)) throw QuantumError("prior outside [0,1]");
  return 0.5 * (1.0 + trace_norm(prior_a * a.entries() - (1.0 - prior_a) * b.entries()));
}

HelstromMeasurement::HelstromMeasurement(const DensityMatrix& a, const DensityMatrix& b,
                                         double prior_a) {
  require_same_dim(a, b);
  if (!(prior_a >= 0.0 && prior_a <= 1.0)) throw QuantumError("prior outside [0,1]");
  const Matrix gamma = prior_a * a.entries() - (1.0 - prior_a) * b.entries();
  EigenSystem eig = hermitian_eigen(gamma);
  const Eigen::Index n = gamma.rows();
  basis_ = std::move(eig.vectors);
  projector_a_ = Matrix::Zero(n, n);
  projector_b_ = Matrix::Zero(n, n);
  votes_.resize(static_cast<std::size_t>(n));
  // Eigenvalues within numerical noise of zero count as zero, hence vote A.
  const double zero_tol = 1e-12;
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool vote_a = eig.values(k) >= -zero_tol;
    votes_[static_cast<std::size_t>(k)] = vote_a ? Hypothesis::A : Hypothesis::B;
    const Matrix proj = basis_.col(k) * basis_.col(k).adjoint();
    (vote_a ? projector_a_ : projector_b_) += proj;
  }
  success_ = prior_a * (projector_a_ * a.entries()).trace().real() +
             (1.0 - prior_a) * (projector_b_ * b.entries()).trace().real();
}

double HelstromMeasurement::probability_a(const PureState& state) const {
  const Vector& v = state.amplitudes();
  return v.dot(projector_a_ * v).real();
}

Hypothesis HelstromMeasurement::decide(const PureState& state, Rng& rng) const {
  if (state.dim() != dim()) throw QuantumError("dimension mismatch in Helstrom measurement");
  const auto probs = born_probabilities(state, basis_);
  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < probs.size(); ++k) {
    if (u < probs[k]) break;
    u -= probs[k];
  }
  return votes_[k];
}

// ---------------------------------------------------------------------------
// Measurement

bool is_unitary(const Matrix& basis, double tol) {
  if (basis.rows() != basis.cols()) return false;
  const Matrix gram = basis.adjoint() * basis;
  return (gram - Matrix::Identity(basis.rows(), basis.cols())).cwiseAbs().maxCoeff() <= tol;
}

std::vector<double> born_probabilities(const PureState& state, const Matrix& basis) {
  if (basis.rows() != state.dim()) throw QuantumError("basis dimension differs from state");
  const Vector amps = basis.adjoint() * state.amplitudes();
  std::vector<double> probs(static_cast<std::size_t>(amps.size()));
  for (Eigen::Index i = 0; i < amps.size(); ++i) probs[static_cast<std::size_t>(i)] = std::norm(amps(i));
  return probs;
}

MeasurementOutcome measure(const PureState& state, const Matrix& basis, Rng& rng) {
  if (basis.rows() != state.dim()) throw QuantumError("basis dimension differs from state");
  if (!is_unitary(basis)) throw QuantumError("measurement basis is not orthonormal");
  const auto probs = born_probabilities(state, basis);
  double u = rng.uniform();
  int k = 0;
  for (; k + 1 < static_cast<int>(probs.size()); ++k) {
    if (u < probs[static_cast<std::size_t>(k)]) break;
    u -= probs[static_cast<std::size_t>(k)];
  }
  return {k, PureState(basis.col(k))};
}

PureState bb84_state(int bit, int basis) {
  if ((bit != 0 && bit != 1) || (basis != 0 && basis != 1)) {
    throw QuantumError("BB84 bit and basis must be 0 or 1");
  }
  return bb84_family().state(static_cast<std::size_t>(basis), bit);
}

// ---------------------------------------------------------------------------
// Mutually unbiased bases

MubFamily::MubFamily(int dim, std::vector<Matrix> bases) : dim_(dim), bases_(std::move(bases)) {
  if (!is_supported_dim(dim)) throw QuantumError("unsupported MUB dimension");
  for (const auto& b : bases_) {
    if (b.rows() != dim || b.cols() != dim) throw QuantumError("basis matrix has wrong shape");
  }
}

PureState MubFamily::state(std::size_t theta, int value) const {
  if (value < 0 || value >= dim_) throw QuantumError("basis column out of range");
  return PureState(basis(theta).col(value));
}

double mub_defect(const MubFamily& family) {
  const double target = 1.0 / family.dim();
  double worst = 0.0;
  const auto& bases = family.bases();
  for (const auto& b : bases) {
    const Matrix gram = b.adjoint() * b;
    worst = std::max(worst, (gram - Matrix::Identity(b.rows(), b.cols())).cwiseAbs().maxCoeff());
  }
  for (std::size_t s = 0; s < bases.size(); ++s) {
    for (std::size_t t = s + 1; t < bases.size(); ++t) {
      const Matrix cross = bases[s].adjoint() * bases[t];
      worst = std::max(worst, (cross.cwiseAbs2().array() - target).abs().maxCoeff());
    }
  }
  return worst;
}

const MubFamily& bb84_family() {
  static const MubFamily family(2, {Matrix::Identity(2, 2), hadamard_real()});
  return family;
}

const MubFamily& mub4_family() {
  static const MubFamily family = [] {
    const Matrix o = hadamard_real();
    const Matrix i = hadamard_complex();
    const Matrix cz = diag({1, 1, 1, -1});
    return MubFamily(4, {Matrix::Identity(4, 4), kron(o, o), kron(i, i), cz * kron(o, i),
                         cz * kron(i, o)});
  }();
  return family;
}

const MubFamily& mub8_family() {
  static const MubFamily family = [] {
    const Matrix o = hadamard_real();
    const Matrix i = hadamard_complex();
    const Matrix u = diag({1, 1, 1, 1, 1, -1, -1, 1});
    const Matrix v = diag({1, 1, 1, -1, 1, -1, 1, 1});
    const Matrix w = diag({1, 1, 1, -1, 1, 1, -1, 1});
    auto k3 = [](const Matrix& a, const Matrix& b, const Matrix& c) { return kron(kron(a, b), c); };
    return MubFamily(8, {Matrix::Identity(8, 8), k3(o, o, o), u * k3(o, o, i), v * k3(o, i, o),
                         w * k3(o, i, i), w * k3(i, o, o), v * k3(i, o, i), u * k3(i, i, o),
                         k3(i, i, i)});
  }();
  return family;
}

}  // namespace hlpuf::qstate
