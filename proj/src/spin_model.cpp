#include "hbn/spin_model.hpp"

#include <algorithm>
#include <cmath>

#include "hbn/error.hpp"

namespace hbn {

void ZfsSpinParams::validate() const {
  if (!(d_gs > 0.0)) throw Error(ErrorKind::InvalidArgument, "d_gs must be positive");
  if (!(e_gs >= 0.0)) throw Error(ErrorKind::InvalidArgument, "e_gs must be non-negative");
  if (!(e_gs < d_gs)) throw Error(ErrorKind::InvalidArgument, "e_gs must be below d_gs");
  if (!(g_factor > 0.0)) throw Error(ErrorKind::InvalidArgument, "g_factor must be positive");
}

double MagneticField::magnitude() const noexcept { return std::sqrt(bx * bx + by * by + bz * bz); }

Matrix3c hamiltonian_matrix(const ZfsSpinParams& params, const MagneticField& field) {
  using cd = std::complex<double>;
  const double gamma = params.gyromagnetic();
  const double r2 = 1.0 / std::sqrt(2.0);
  // B.S with S_x, S_y for spin 1; B_- = B_x - i B_y couples neighbouring m_s.
  const cd b_minus = gamma * r2 * cd(field.bx, -field.by);
  const double bz = gamma * field.bz;

  Matrix3c h;
  h << cd(params.d_gs + bz), b_minus, cd(params.e_gs),
       std::conj(b_minus), cd(0.0), b_minus,
       cd(params.e_gs), std::conj(b_minus), cd(params.d_gs - bz);
  return h;
}

ResonancePair resonance_frequencies_axial(const ZfsSpinParams& params, double b_z) {
  const double zeeman = params.gyromagnetic() * b_z;
  const double half = std::hypot(params.e_gs, zeeman);
  return {params.d_gs - half, params.d_gs + half};
}

ResonancePair resonance_frequencies_general(const ZfsSpinParams& params,
                                            const MagneticField& field) {
  const Eigen::SelfAdjointEigenSolver<Matrix3c> solver(hamiltonian_matrix(params, field));
  const Eigen::Vector3d& energies = solver.eigenvalues();
  const Matrix3c& vectors = solver.eigenvectors();

  int zero_level = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::norm(vectors(1, i)) > std::norm(vectors(1, zero_level))) zero_level = i;
  }

  const double tol = 1e-9 * params.d_gs;
  double nu[2];
  int k = 0;
  for (int i = 0; i < 3; ++i) {
    if (i == zero_level) continue;
    nu[k] = std::abs(energies(i) - energies(zero_level));
    if (nu[k] < tol) {
      throw Error(ErrorKind::DegenerateLevels,
                  "m_s = 0 level coincides with another level; transitions are ambiguous");
    }
    ++k;
  }
  return {std::min(nu[0], nu[1]), std::max(nu[0], nu[1])};
}

double field_from_splitting(const ZfsSpinParams& params, double splitting) {
  const double half = 0.5 * splitting;
  if (!(half >= params.e_gs)) {
    throw Error(ErrorKind::BelowZeroFieldSplitting,
                "splitting is below the zero-field value 2 E");
  }
  return std::sqrt((half - params.e_gs) * (half + params.e_gs)) / params.gyromagnetic();
}

}  // namespace hbn
