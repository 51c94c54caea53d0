#include "cvtp/grf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "cvtp/rng.hpp"

namespace cvtp {

double CorrelogramModel::operator()(double d) const {
  if (d <= 0.0) return 1.0;
  return c0 * std::exp(-std::pow(d / d0, s0));
}

void CorrelogramModel::validate() const {
  if (!(c0 > 0.0) || !(c0 <= 1.0)) throw ValidationError("correlogram model: c0 must be in (0,1]");
  if (!(d0 > 0.0) || !std::isfinite(d0))
    throw ValidationError("correlogram model: d0 must be positive");
  if (!(s0 > 0.0) || !(s0 <= 2.0)) throw ValidationError("correlogram model: s0 must be in (0,2]");
}

struct GrfSampler::Impl {
  Grid grid;
  Eigen::MatrixXd chol_lower;

  Impl(const Grid& g, const CorrelogramModel& model) : grid(g) {
    model.validate();
    const int n = grid.n_cells();
    if (n > 10000)
      throw CapacityError("grf: " + std::to_string(n) +
                          " in-mask cells exceeds the dense-factorization cap of 10000");

    Eigen::MatrixXd cov(n, n);
    for (int a = 0; a < n; ++a) {
      const Vec2 pa = grid.center(a);
      cov(a, a) = 1.0;
      for (int b = a + 1; b < n; ++b) {
        const double c = model(distance(pa, grid.center(b)));
        cov(a, b) = c;
        cov(b, a) = c;
      }
    }

    double jitter = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      Eigen::MatrixXd work = cov;
      if (jitter > 0.0) work.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(work);
      if (llt.info() == Eigen::Success) {
        chol_lower = llt.matrixL();
        return;
      }
      jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    }
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                               cov, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .minCoeff();
    throw NumericalError("grf: covariance not positive definite after jitter; smallest eigenvalue ~= " +
                         std::to_string(min_eig));
  }
};

GrfSampler::GrfSampler(const Grid& grid, const CorrelogramModel& model)
    : impl_(std::make_unique<Impl>(grid, model)) {}

GrfSampler::~GrfSampler() = default;

ObservationMatrix GrfSampler::sample(int n_time, std::uint64_t seed) const {
  if (n_time < 3) throw ValidationError("grf: n_time must be >= 3");
  const int n = impl_->grid.n_cells();

  Eigen::MatrixXd gauss(n, n_time);
  Rng rng(derive_seed(seed, 0x67726673ULL));  // one stream for the whole draw
  for (int t = 0; t < n_time; ++t)
    for (int c = 0; c < n; ++c) gauss(c, t) = rng.normal();

  const Eigen::MatrixXd field = impl_->chol_lower * gauss;

  std::vector<double> cell_major(static_cast<std::size_t>(n) * n_time);
  for (int c = 0; c < n; ++c)
    for (int t = 0; t < n_time; ++t)
      cell_major[static_cast<std::size_t>(c) * n_time + t] = field(c, t);
  return ObservationMatrix(impl_->grid, n_time, std::move(cell_major));
}

ObservationMatrix generate_grf(const FieldSpec& spec) {
  GrfSampler sampler(spec.grid, spec.model);
  return sampler.sample(spec.n_time, spec.seed);
}

}  // namespace cvtp
