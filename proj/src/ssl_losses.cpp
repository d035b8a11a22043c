#include "essl/ssl_losses.hpp"

#include <cmath>
#include <string>

#include "essl/error.hpp"

namespace essl {

namespace {

void check_pair(const FeatureBatch& z1, const FeatureBatch& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw ValidationError("view shapes differ: " + std::to_string(z1.rows()) + "x" +
                          std::to_string(z1.cols()) + " vs " + std::to_string(z2.rows()) + "x" +
                          std::to_string(z2.cols()));
  }
  if (z1.rows() < 2) throw ValidationError("feature batch needs at least 2 rows");
  if (z1.cols() < 1) throw ValidationError("feature batch needs at least 1 column");
  if (!z1.allFinite() || !z2.allFinite()) throw ValidationError("non-finite feature value");
}

struct RowNormalized {
  Eigen::MatrixXd unit;
  Eigen::VectorXd norms;
};

RowNormalized normalize_rows(const FeatureBatch& z) {
  RowNormalized out{z, z.rowwise().norm()};
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!(out.norms(i) > 0.0)) {
      throw DegenerateFeatureError("zero-norm row " + std::to_string(i) + " cannot be normalized");
    }
    out.unit.row(i) /= out.norms(i);
  }
  return out;
}

// Pull a gradient w.r.t. unit rows back through u = z / |z|.
Eigen::MatrixXd unnormalize_rows_grad(const Eigen::MatrixXd& g_unit, const RowNormalized& n) {
  Eigen::MatrixXd g = g_unit;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double along = n.unit.row(i).dot(g_unit.row(i));
    g.row(i) = (g_unit.row(i) - along * n.unit.row(i)) / n.norms(i);
  }
  return g;
}

struct ColumnStandardized {
  Eigen::MatrixXd unit;   // centered columns scaled to unit Euclidean norm
  Eigen::VectorXd norms;  // norms of the centered columns
};

ColumnStandardized standardize_columns(const FeatureBatch& z) {
  Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
  ColumnStandardized out{centered, centered.colwise().norm().transpose()};
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double scale = z.col(j).cwiseAbs().maxCoeff();
    if (!(out.norms(j) > 1e-12 * scale) || out.norms(j) == 0.0) {
      throw DegenerateFeatureError("feature column " + std::to_string(j) +
                                   " has zero variance over the batch");
    }
    out.unit.col(j) /= out.norms(j);
  }
  return out;
}

Eigen::MatrixXd unstandardize_columns_grad(const Eigen::MatrixXd& g_unit,
                                           const ColumnStandardized& s) {
  Eigen::MatrixXd g(g_unit.rows(), g_unit.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    const double along = s.unit.col(j).dot(g_unit.col(j));
    g.col(j) = (g_unit.col(j) - along * s.unit.col(j)) / s.norms(j);
  }
  // Centering: subtract each column's mean gradient.
  g.rowwise() -= g.colwise().mean();
  return g;
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw ValidationError("loss weights must be finite and nonnegative");
  }
  if (alpha == 0.0 && beta == 0.0) throw ValidationError("loss weights cannot both be zero");
}

LossGrad info_nce(const FeatureBatch& z1, const FeatureBatch& z2, double temperature) {
  check_pair(z1, z2);
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  const auto n1 = normalize_rows(z1);
  const auto n2 = normalize_rows(z2);
  const Eigen::Index n = z1.rows();

  // logits(i, j) = cos(z1_i, z2_j) / temperature
  const Eigen::MatrixXd logits = n1.unit * n2.unit.transpose() / temperature;

  // Row i: anchor z1_i against all z2_j. Column j: anchor z2_j against all z1_i.
  double loss = 0.0;
  Eigen::MatrixXd p_row(n, n);
  Eigen::MatrixXd p_col(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lse = log_sum_exp(logits.row(i));
    loss += lse - logits(i, i);
    p_row.row(i) = (logits.row(i).array() - lse).exp().matrix();
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::RowVectorXd col = logits.col(j).transpose();
    const double lse = log_sum_exp(col);
    loss += lse - logits(j, j);
    p_col.col(j) = (col.array() - lse).exp().matrix().transpose();
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  loss *= scale;

  // d loss / d logits
  Eigen::MatrixXd g_logits = scale * (p_row + p_col);
  g_logits.diagonal().array() -= 2.0 * scale;

  const Eigen::MatrixXd g_u1 = g_logits * n2.unit / temperature;
  const Eigen::MatrixXd g_u2 = g_logits.transpose() * n1.unit / temperature;
  return {loss, unnormalize_rows_grad(g_u1, n1), unnormalize_rows_grad(g_u2, n2)};
}

Eigen::MatrixXd cross_correlation(const FeatureBatch& z1, const FeatureBatch& z2) {
  check_pair(z1, z2);
  const auto s1 = standardize_columns(z1);
  const auto s2 = standardize_columns(z2);
  return s1.unit.transpose() * s2.unit;
}

LossGrad barlow_twins(const FeatureBatch& z1, const FeatureBatch& z2, double epsilon) {
  check_pair(z1, z2);
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  const auto s1 = standardize_columns(z1);
  const auto s2 = standardize_columns(z2);
  const Eigen::MatrixXd c = s1.unit.transpose() * s2.unit;

  Eigen::MatrixXd g_c = 2.0 * epsilon * c;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (i == j) {
        const double r = 1.0 - c(i, i);
        loss += r * r;
        g_c(i, i) = -2.0 * r;
      } else {
        loss += epsilon * c(i, j) * c(i, j);
      }
    }
  }
  const Eigen::MatrixXd g_u1 = s2.unit * g_c.transpose();
  const Eigen::MatrixXd g_u2 = s1.unit * g_c;
  return {loss, unstandardize_columns_grad(g_u1, s1), unstandardize_columns_grad(g_u2, s2)};
}

EsslLoss essl_loss(const FeatureBatch& z1, const FeatureBatch& z2, const LossWeights& w,
                   double temperature, double epsilon) {
  w.validate();
  const auto gen = info_nce(z1, z2, temperature);
  const auto dis = barlow_twins(z1, z2, epsilon);
  return {w.alpha * gen.loss + w.beta * dis.loss, gen.loss, dis.loss,
          w.alpha * gen.grad1 + w.beta * dis.grad1, w.alpha * gen.grad2 + w.beta * dis.grad2};
}

}  // namespace essl
