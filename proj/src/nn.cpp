#include "egoact/nn.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace egoact {

template <typename T>
void orthogonal_init(Tensor<T>& t, Rng& rng) {
  if (t.shape.size() != 2) throw std::invalid_argument("orthogonal_init: rank-2 tensor required");
  const int rows = t.shape[0], cols = t.shape[1];
  const int n = std::max(rows, cols), m = std::min(rows, cols);

  Eigen::MatrixXd a(n, m);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < m; ++c) a(r, c) = rng.normal();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
  // Fix signs so the factorization is unique (diag(R) > 0).
  Eigen::MatrixXd r = qr.matrixQR().topRows(m).template triangularView<Eigen::Upper>();
  for (int c = 0; c < m; ++c) {
    if (r(c, c) < 0) q.col(c) = -q.col(c);
  }

  for (int rr = 0; rr < rows; ++rr) {
    for (int cc = 0; cc < cols; ++cc) {
      const double v = rows <= cols ? q(cc, rr) : q(rr, cc);
      t.at2(rr, cc) = static_cast<T>(v);
    }
  }
}

template void orthogonal_init<float>(Tensor<float>&, Rng&);
template void orthogonal_init<double>(Tensor<double>&, Rng&);

double grad_check(const GradCheckSpec& spec) {
  std::vector<std::size_t> order(spec.coords.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (order.size() > spec.max_coords) {
    Rng rng(spec.seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
    order.resize(spec.max_coords);
  }

  spec.compute_grads();
  std::vector<double> analytic(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) analytic[i] = *spec.coords[order[i]].second;

  double worst = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    double* value = spec.coords[order[i]].first;
    const double saved = *value;
    *value = saved + spec.eps;
    const double up = spec.loss();
    *value = saved - spec.eps;
    const double down = spec.loss();
    *value = saved;

    const double numeric = (up - down) / (2.0 * spec.eps);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

}  // namespace egoact
