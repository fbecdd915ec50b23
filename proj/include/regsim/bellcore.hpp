#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "regsim/error.hpp"

// Small dense density matrices, two-qubit Bell-diagonal states and the
// noisy gate/initialization/measurement channels built on them.
//
// Qubit 0 is the most significant bit of a computational basis index.

namespace regsim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

inline constexpr int kMaxQubits = 6;
inline constexpr double kMatrixTol = 1e-10;
inline constexpr double kProbTol = 1e-12;

// Bell basis order: Phi+, Phi-, Psi+, Psi-.
enum class Bell { phi_plus = 0, phi_minus = 1, psi_plus = 2, psi_minus = 3 };

struct FidelityVector {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;

  static FidelityVector from_array(const std::array<double, 4>& w) { return {w[0], w[1], w[2], w[3]}; }
  std::array<double, 4> weights() const { return {a, b, c, d}; }
  double operator[](int k) const { return weights()[static_cast<std::size_t>(k)]; }
  double fidelity() const { return a; }
  double infidelity() const { return 1.0 - a; }
  double sum() const { return a + b + c + d; }

  void validate(double tol = kProbTol) const {
    for (double w : weights())
      detail::require(w >= -tol && w <= 1.0 + tol, "fidelity vector weight outside [0,1]");
    detail::require(std::abs(sum() - 1.0) <= tol, "fidelity vector weights must sum to 1");
  }
};

enum class RawModel { dephasing, depolarizing, werner };

inline std::string_view to_string(RawModel m) {
  switch (m) {
    case RawModel::dephasing: return "dephasing";
    case RawModel::depolarizing: return "depolarizing";
    case RawModel::werner: return "werner";
  }
  return "?";
}

inline RawModel parse_raw_model(std::string_view s) {
  if (s == "dephasing") return RawModel::dephasing;
  if (s == "depolarizing") return RawModel::depolarizing;
  if (s == "werner") return RawModel::werner;
  throw InvalidArgument("unknown raw model '" + std::string(s) + "'");
}

struct NoiseParams {
  RawModel raw_model = RawModel::depolarizing;
  double F = 0.95;
  double p_L = 0.0;
  double p_I = 0.0;
  double p_M = 0.0;

  void validate() const {
    detail::require(F > 0.5 && F <= 1.0, "raw fidelity F must lie in (1/2, 1]");
    detail::require_probability(p_L, "p_L");
    detail::require_probability(p_I, "p_I");
    detail::require_probability(p_M, "p_M");
  }
};

inline FidelityVector make_raw_pair(RawModel model, double F) {
  if (!(F > 0.0 && F <= 1.0)) throw InvalidArgument("raw fidelity must lie in (0,1]");
  if (model == RawModel::dephasing) return {F, 1.0 - F, 0.0, 0.0};
  const double r = (1.0 - F) / 3.0;
  return {F, r, r, r};
}

inline FidelityVector make_raw_pair(const NoiseParams& noise) { return make_raw_pair(noise.raw_model, noise.F); }

namespace gates {

inline Mat2 I() { return Mat2::Identity(); }
inline Mat2 X() { Mat2 m; m << 0, 1, 1, 0; return m; }
inline Mat2 Y() { Mat2 m; m << 0, cplx(0, -1), cplx(0, 1), 0; return m; }
inline Mat2 Z() { Mat2 m; m << 1, 0, 0, -1; return m; }
inline Mat2 H() {
  const double s = 1.0 / std::sqrt(2.0);
  Mat2 m;
  m << s, s, s, -s;
  return m;
}
inline Mat2 pauli(int k) {
  switch (k & 3) {
    case 1: return X();
    case 2: return Y();
    case 3: return Z();
    default: return I();
  }
}

// Controlled-U with the first (more significant) qubit as control.
inline Mat4 controlled(const Mat2& u) {
  Mat4 m = Mat4::Zero();
  m(0, 0) = 1;
  m(1, 1) = 1;
  m.block<2, 2>(2, 2) = u;
  return m;
}
inline Mat4 CNOT() { return controlled(X()); }
inline Mat4 CZ() { return controlled(Z()); }

inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return m;
}

}  // namespace gates

inline Eigen::Vector4cd bell_vector(Bell which) {
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  switch (which) {
    case Bell::phi_plus: v(0) = s; v(3) = s; break;
    case Bell::phi_minus: v(0) = s; v(3) = -s; break;
    case Bell::psi_plus: v(1) = s; v(2) = s; break;
    case Bell::psi_minus: v(1) = s; v(2) = -s; break;
  }
  return v;
}

class DensityMatrix {
 public:
  DensityMatrix() : DensityMatrix(1, Matrix::Identity(2, 2) * 0.5) {}

  DensityMatrix(int n_qubits, Matrix m) : n_(n_qubits), m_(std::move(m)) {
    detail::require(n_ >= 1 && n_ <= kMaxQubits, "density matrix supports 1..6 qubits");
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n_);
    detail::require(m_.rows() == dim && m_.cols() == dim, "density matrix dimension does not match qubit count");
  }

  static DensityMatrix pure(const Vector& psi) {
    const auto dim = static_cast<std::size_t>(psi.size());
    int n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    detail::require((std::size_t{1} << n) == dim, "state vector length must be a power of two");
    const double norm = psi.norm();
    detail::require(norm > 0.0, "zero state vector");
    Vector v = psi / norm;
    return DensityMatrix(n, v * v.adjoint());
  }

  static DensityMatrix basis(int n_qubits, std::size_t index) {
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n_qubits);
    Matrix m = Matrix::Zero(dim, dim);
    m(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
    return DensityMatrix(n_qubits, std::move(m));
  }

  static DensityMatrix maximally_mixed(int n_qubits) {
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n_qubits);
    return DensityMatrix(n_qubits, Matrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return std::size_t{1} << n_; }
  const Matrix& matrix() const { return m_; }
  cplx operator()(std::size_t r, std::size_t c) const {
    return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  double trace() const { return m_.trace().real(); }

  double expectation(const Vector& psi) const { return (psi.adjoint() * m_ * psi)(0, 0).real(); }

  // Hermitian, unit trace, PSD, all within tol.
  bool is_valid(double tol = kMatrixTol) const {
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(m_.trace() - cplx(1.0, 0.0)) > tol) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
  }

  void validate(double tol = kMatrixTol) const {
    if (!is_valid(tol)) throw InvalidArgument("matrix is not a valid density matrix");
  }

  DensityMatrix normalized() const {
    const double t = trace();
    if (!(t > 0.0)) throw ImpossibleBranch("cannot normalize a zero-trace operator");
    return DensityMatrix(n_, m_ / t);
  }

 private:
  int n_;
  Matrix m_;
};

namespace detail {

inline std::size_t bit_of(int n_qubits, int q) { return std::size_t{1} << (n_qubits - 1 - q); }

inline void check_qubit(int n_qubits, int q) {
  require(q >= 0 && q < n_qubits, "qubit index out of range");
}

inline void apply_left(Matrix& m, int n, const Mat2& u, int q) {
  const std::size_t bq = bit_of(n, q);
  const auto dim = static_cast<std::size_t>(m.rows());
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    for (std::size_t r = 0; r < dim; ++r) {
      if (r & bq) continue;
      const auto r0 = static_cast<Eigen::Index>(r);
      const auto r1 = static_cast<Eigen::Index>(r | bq);
      const cplx v0 = m(r0, col), v1 = m(r1, col);
      m(r0, col) = u(0, 0) * v0 + u(0, 1) * v1;
      m(r1, col) = u(1, 0) * v0 + u(1, 1) * v1;
    }
  }
}

// Gate basis |x_i x_j> with qubit i as the more significant bit.
inline void apply_left(Matrix& m, int n, const Mat4& u, int i, int j) {
  const std::size_t bi = bit_of(n, i), bj = bit_of(n, j);
  const auto dim = static_cast<std::size_t>(m.rows());
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    for (std::size_t r = 0; r < dim; ++r) {
      if ((r & bi) || (r & bj)) continue;
      const std::array<Eigen::Index, 4> idx = {
          static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r | bj),
          static_cast<Eigen::Index>(r | bi), static_cast<Eigen::Index>(r | bi | bj)};
      std::array<cplx, 4> v;
      for (int k = 0; k < 4; ++k) v[k] = m(idx[k], col);
      for (int k = 0; k < 4; ++k) {
        cplx acc = 0;
        for (int l = 0; l < 4; ++l) acc += u(k, l) * v[l];
        m(idx[k], col) = acc;
      }
    }
  }
}

template <class Apply>
Matrix conjugate(const Matrix& rho, Apply&& left) {
  Matrix a = rho;
  left(a);
  Matrix b = a.adjoint();
  left(b);
  return b.adjoint();
}

// Zero every row and column whose bit for qubit q differs from value.
inline Matrix project(const Matrix& rho, int n, int q, int value) {
  const std::size_t bq = bit_of(n, q);
  Matrix out = rho;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const bool keep = ((static_cast<std::size_t>(r) & bq) != 0) == (value != 0);
    if (!keep) {
      out.row(r).setZero();
      out.col(r).setZero();
    }
  }
  return out;
}

}  // namespace detail

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  detail::require(a.n_qubits() + b.n_qubits() <= kMaxQubits, "tensor product exceeds the qubit cap");
  const Matrix& A = a.matrix();
  const Matrix& B = b.matrix();
  Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return DensityMatrix(a.n_qubits() + b.n_qubits(), std::move(out));
}

inline DensityMatrix apply_unitary(const DensityMatrix& rho, const Mat2& u, int q) {
  detail::check_qubit(rho.n_qubits(), q);
  const int n = rho.n_qubits();
  return DensityMatrix(n, detail::conjugate(rho.matrix(), [&](Matrix& m) { detail::apply_left(m, n, u, q); }));
}

inline DensityMatrix apply_unitary(const DensityMatrix& rho, const Mat4& u, int i, int j) {
  detail::check_qubit(rho.n_qubits(), i);
  detail::check_qubit(rho.n_qubits(), j);
  detail::require(i != j, "two-qubit gate needs distinct qubits");
  const int n = rho.n_qubits();
  return DensityMatrix(n, detail::conjugate(rho.matrix(), [&](Matrix& m) { detail::apply_left(m, n, u, i, j); }));
}

// Tr_Q[rho] (x) I_Q / 2^|Q|, with the identity placed back on the same qubits.
inline DensityMatrix replace_with_mixed(const DensityMatrix& rho, const std::vector<int>& qubits) {
  const int n = rho.n_qubits();
  std::size_t mask = 0;
  for (int q : qubits) {
    detail::check_qubit(n, q);
    mask |= detail::bit_of(n, q);
  }
  const std::size_t dim = rho.dim();
  std::vector<std::size_t> subsets;
  for (std::size_t x = mask;; x = (x - 1) & mask) {
    subsets.push_back(x);
    if (x == 0) break;
  }
  const double w = 1.0 / static_cast<double>(subsets.size());
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t A = 0; A < dim; ++A) {
    for (std::size_t B = 0; B < dim; ++B) {
      if ((A & mask) != (B & mask)) continue;
      cplx acc = 0;
      for (std::size_t x : subsets)
        acc += rho((A & ~mask) | x, (B & ~mask) | x);
      out(static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(B)) = w * acc;
    }
  }
  return DensityMatrix(n, std::move(out));
}

// (1 - p_L) U rho U^dag + p_L Tr_ij[rho] (x) I_ij / 4
inline DensityMatrix apply_noisy_gate(const DensityMatrix& rho, const Mat4& u, int i, int j, double p_L) {
  detail::require_probability(p_L, "p_L");
  DensityMatrix ideal = apply_unitary(rho, u, i, j);
  if (p_L == 0.0) return ideal;
  DensityMatrix mixed = replace_with_mixed(rho, {i, j});
  return DensityMatrix(rho.n_qubits(), (1.0 - p_L) * ideal.matrix() + p_L * mixed.matrix());
}

namespace detail {

// Partial trace of an arbitrary (possibly unnormalized) operator.
inline Matrix partial_trace(const Matrix& rho, int n, const std::vector<int>& traced) {
  std::size_t mask = 0;
  for (int q : traced) {
    check_qubit(n, q);
    mask |= bit_of(n, q);
  }
  std::vector<std::size_t> kept_bits;
  for (int q = 0; q < n; ++q)
    if (!(mask & bit_of(n, q))) kept_bits.push_back(bit_of(n, q));
  const int n_out = static_cast<int>(kept_bits.size());
  require(n_out >= 1, "cannot trace out every qubit");
  const std::size_t dim_out = std::size_t{1} << n_out;
  std::vector<std::size_t> full(dim_out, 0);
  for (std::size_t a = 0; a < dim_out; ++a)
    for (int k = 0; k < n_out; ++k)
      if (a & (std::size_t{1} << (n_out - 1 - k))) full[a] |= kept_bits[static_cast<std::size_t>(k)];
  std::vector<std::size_t> subsets;
  for (std::size_t x = mask;; x = (x - 1) & mask) {
    subsets.push_back(x);
    if (x == 0) break;
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dim_out), static_cast<Eigen::Index>(dim_out));
  for (std::size_t a = 0; a < dim_out; ++a) {
    for (std::size_t b = 0; b < dim_out; ++b) {
      cplx acc = 0;
      for (std::size_t x : subsets)
        acc += rho(static_cast<Eigen::Index>(full[a] | x), static_cast<Eigen::Index>(full[b] | x));
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc;
    }
  }
  return out;
}

}  // namespace detail

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& traced) {
  Matrix out = detail::partial_trace(rho.matrix(), rho.n_qubits(), traced);
  int n_out = rho.n_qubits() - static_cast<int>(traced.size());
  return DensityMatrix(n_out, std::move(out));
}

inline DensityMatrix noisy_init(double p_I) {
  detail::require_probability(p_I, "p_I");
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0 - p_I;
  m(1, 1) = p_I;
  return DensityMatrix(1, std::move(m));
}

struct MeasureBranch {
  int outcome = 0;
  double probability = 0.0;
  // Normalized state after reporting `outcome`; the measured qubit is kept.
  // Equals the input state when probability is zero.
  DensityMatrix post_state;
};

// Projective Z measurement whose reported bit is flipped with probability p_M,
// i.e. the POVM P0 = (1-p_M)|0><0| + p_M|1><1|.
inline std::array<MeasureBranch, 2> noisy_measure(const DensityMatrix& rho, int q, double p_M) {
  detail::check_qubit(rho.n_qubits(), q);
  detail::require_probability(p_M, "p_M");
  const int n = rho.n_qubits();
  const Matrix proj0 = detail::project(rho.matrix(), n, q, 0);
  const Matrix proj1 = detail::project(rho.matrix(), n, q, 1);
  std::array<MeasureBranch, 2> out;
  for (int r = 0; r < 2; ++r) {
    const Matrix& right = r == 0 ? proj0 : proj1;
    const Matrix& wrong = r == 0 ? proj1 : proj0;
    Matrix unnorm = (1.0 - p_M) * right + p_M * wrong;
    const double p = unnorm.trace().real();
    out[static_cast<std::size_t>(r)].outcome = r;
    out[static_cast<std::size_t>(r)].probability = p;
    out[static_cast<std::size_t>(r)].post_state = p > 0.0 ? DensityMatrix(n, unnorm / p) : rho;
  }
  return out;
}

inline DensityMatrix bell_embed(const FidelityVector& fv) {
  Matrix m = Matrix::Zero(4, 4);
  const auto w = fv.weights();
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector4cd v = bell_vector(static_cast<Bell>(k));
    m += w[static_cast<std::size_t>(k)] * (v * v.adjoint());
  }
  return DensityMatrix(2, std::move(m));
}

inline FidelityVector bell_extract(const DensityMatrix& rho) {
  detail::require(rho.n_qubits() == 2, "bell_extract needs a two-qubit state");
  std::array<double, 4> w{};
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector4cd v = bell_vector(static_cast<Bell>(k));
    w[static_cast<std::size_t>(k)] = (v.adjoint() * rho.matrix() * v)(0, 0).real();
  }
  return FidelityVector::from_array(w);
}

// Same as bell_extract but for an unnormalized two-qubit operator.
inline std::array<double, 4> bell_weights(const Matrix& m) {
  std::array<double, 4> w{};
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector4cd v = bell_vector(static_cast<Bell>(k));
    w[static_cast<std::size_t>(k)] = (v.adjoint() * m * v)(0, 0).real();
  }
  return w;
}

}  // namespace regsim
