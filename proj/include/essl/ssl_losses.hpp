#pragma once

// InfoNCE and Barlow Twins on small dense batches, each with a hand-derived
// gradient with respect to both views.

#include <Eigen/Dense>

namespace essl {

// batch_size x feature_dim; row b is the embedding of sample b.
using FeatureBatch = Eigen::MatrixXd;

inline constexpr double kDefaultTemperature = 0.07;
inline constexpr double kDefaultRedundancyWeight = 0.0051;

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const;  // nonnegative, not both zero
};

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad1;  // d loss / d z1
  Eigen::MatrixXd grad2;  // d loss / d z2
};

// Symmetrized InfoNCE with similarity exp(cos(u, v) / temperature). Row i of
// z1 and row i of z2 are the positive pair; every other cross-view row is a
// negative. The loss averages both directions over the batch.
LossGrad info_nce(const FeatureBatch& z1, const FeatureBatch& z2, double temperature);

// C(i, j) = sum_b a(b,i) c(b,j) / (|a_i| |c_j|) on batch-centered columns.
Eigen::MatrixXd cross_correlation(const FeatureBatch& z1, const FeatureBatch& z2);

// sum_i (1 - C_ii)^2 + epsilon * sum_{i != j} C_ij^2.
LossGrad barlow_twins(const FeatureBatch& z1, const FeatureBatch& z2, double epsilon);

struct EsslLoss {
  double total = 0.0;
  double gen = 0.0;  // InfoNCE value
  double dis = 0.0;  // Barlow Twins value
  Eigen::MatrixXd grad1;
  Eigen::MatrixXd grad2;
};

// alpha * InfoNCE + beta * BarlowTwins, with the matching gradient.
EsslLoss essl_loss(const FeatureBatch& z1, const FeatureBatch& z2, const LossWeights& w,
                   double temperature = kDefaultTemperature,
                   double epsilon = kDefaultRedundancyWeight);

}  // namespace essl
