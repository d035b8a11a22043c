#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "essl/error.hpp"
#include "essl/ssl_losses.hpp"

using namespace essl;
using Eigen::MatrixXd;

namespace {

MatrixXd random_batch(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Plain loops straight from the definition, no shared code with the library.
double info_nce_reference(const MatrixXd& z1, const MatrixXd& z2, double tau) {
  const auto n = z1.rows();
  auto cosine = [&](Eigen::Index i, Eigen::Index j) {
    double dot = 0, a = 0, b = 0;
    for (Eigen::Index k = 0; k < z1.cols(); ++k) {
      dot += z1(i, k) * z2(j, k);
      a += z1(i, k) * z1(i, k);
      b += z2(j, k) * z2(j, k);
    }
    return dot / std::sqrt(a * b);
  };
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0, col = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      row += std::exp(cosine(i, j) / tau);
      col += std::exp(cosine(j, i) / tau);
    }
    const double pos = std::exp(cosine(i, i) / tau);
    total += -std::log(pos / row) - std::log(pos / col);
  }
  return total / (2.0 * static_cast<double>(n));
}

double barlow_reference(const MatrixXd& z1, const MatrixXd& z2, double eps) {
  const auto n = z1.rows();
  const auto d = z1.cols();
  double loss = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double m1 = 0, m2 = 0;
      for (Eigen::Index b = 0; b < n; ++b) {
        m1 += z1(b, i) / static_cast<double>(n);
        m2 += z2(b, j) / static_cast<double>(n);
      }
      double num = 0, s1 = 0, s2 = 0;
      for (Eigen::Index b = 0; b < n; ++b) {
        num += (z1(b, i) - m1) * (z2(b, j) - m2);
        s1 += (z1(b, i) - m1) * (z1(b, i) - m1);
        s2 += (z2(b, j) - m2) * (z2(b, j) - m2);
      }
      const double c = num / std::sqrt(s1 * s2);
      loss += i == j ? (1 - c) * (1 - c) : eps * c * c;
    }
  }
  return loss;
}

using LossFn = std::function<double(const MatrixXd&, const MatrixXd&)>;

// Max-norm relative error between an analytic gradient and central differences.
double gradient_error(const LossFn& f, const MatrixXd& z1, const MatrixXd& z2,
                      const MatrixXd& g1, const MatrixXd& g2, double h = 1e-5) {
  double num = 0.0;
  double den = 0.0;
  auto probe = [&](MatrixXd a, MatrixXd b, bool first, const MatrixXd& g) {
    MatrixXd& m = first ? a : b;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double v = m.data()[i];
      m.data()[i] = v + h;
      const double up = f(a, b);
      m.data()[i] = v - h;
      const double down = f(a, b);
      m.data()[i] = v;
      const double fd = (up - down) / (2 * h);
      num = std::max(num, std::abs(fd - g.data()[i]));
      den = std::max(den, std::abs(fd));
    }
  };
  probe(z1, z2, true, g1);
  probe(z1, z2, false, g2);
  return num / std::max(den, 1e-12);
}

}  // namespace

TEST_CASE("InfoNCE closed forms") {
  SUBCASE("equal similarities give ln 2 for one negative") {
    MatrixXd z(2, 2);
    z << 1, 0, 1, 0;
    CHECK(std::abs(info_nce(z, z, kDefaultTemperature).loss - std::log(2.0)) < 1e-12);
  }
  SUBCASE("orthogonal negatives") {
    const int k = 4;
    MatrixXd z = MatrixXd::Identity(k, k);
    const double loss = info_nce(z, z, kDefaultTemperature).loss;
    CHECK(loss < 1e-5);
    CHECK(loss == doctest::Approx(std::log1p((k - 1) * std::exp(-1.0 / 0.07))).epsilon(1e-9));
    CHECK(loss > 0.0);
  }
  SUBCASE("matches the loop reference") {
    std::mt19937_64 rng(51);
    for (int i = 0; i < 20; ++i) {
      const auto a = random_batch(rng, 8, 4);
      const auto b = random_batch(rng, 8, 4);
      for (double tau : {0.07, 0.5, 2.0}) {
        CHECK(info_nce(a, b, tau).loss ==
              doctest::Approx(info_nce_reference(a, b, tau)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("InfoNCE input checks") {
  MatrixXd a = MatrixXd::Ones(4, 3);
  MatrixXd b = MatrixXd::Ones(4, 3);
  b.row(2).setZero();
  CHECK_THROWS_AS(info_nce(a, b, 0.07), DegenerateFeatureError);
  CHECK_THROWS_AS(info_nce(a, MatrixXd::Ones(4, 2), 0.07), ValidationError);
  CHECK_THROWS_AS(info_nce(MatrixXd::Ones(1, 3), MatrixXd::Ones(1, 3), 0.07), ValidationError);
  CHECK_THROWS_AS(info_nce(a, a, 0.0), ValidationError);
  MatrixXd nan = a;
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(info_nce(nan, a, 0.07), ValidationError);
}

TEST_CASE("cross-correlation") {
  MatrixXd z(4, 2);
  z << 1, 1, -1, 1, 1, -1, -1, -1;
  CHECK(cross_correlation(z, z).isApprox(MatrixXd::Identity(2, 2), 1e-14));
  CHECK(cross_correlation(z, -z).isApprox(-cross_correlation(z, z), 1e-14));

  std::mt19937_64 rng(52);
  MatrixXd col = random_batch(rng, 6, 1);
  MatrixXd same = col.replicate(1, 3);
  CHECK(cross_correlation(same, same).isApprox(MatrixXd::Ones(3, 3), 1e-12));

  for (int i = 0; i < 20; ++i) {
    const auto c = cross_correlation(random_batch(rng, 8, 4), random_batch(rng, 8, 4));
    CHECK(c.maxCoeff() <= 1.0 + 1e-12);
    CHECK(c.minCoeff() >= -1.0 - 1e-12);
  }

  MatrixXd flat = random_batch(rng, 5, 3);
  flat.col(1).setConstant(2.0);
  CHECK_THROWS_AS(cross_correlation(flat, random_batch(rng, 5, 3)), DegenerateFeatureError);
}

TEST_CASE("Barlow Twins closed forms") {
  MatrixXd z(4, 2);
  z << 1, 1, -1, 1, 1, -1, -1, -1;
  CHECK(std::abs(barlow_twins(z, z, kDefaultRedundancyWeight).loss) < 1e-12);

  std::mt19937_64 rng(53);
  const int d = 5;
  MatrixXd same = random_batch(rng, 6, 1).replicate(1, d);
  CHECK(barlow_twins(same, same, 0.0051).loss == doctest::Approx(0.0051 * d * (d - 1)));

  for (int i = 0; i < 20; ++i) {
    const auto a = random_batch(rng, 8, 4);
    const auto b = random_batch(rng, 8, 4);
    const double l = barlow_twins(a, b, 0.0051).loss;
    CHECK(l >= 0.0);
    CHECK(l == doctest::Approx(barlow_reference(a, b, 0.0051)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(barlow_twins(z, z, 0.0), ValidationError);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(54);
  for (int i = 0; i < 30; ++i) {
    const auto a = random_batch(rng, 8, 4);
    const auto b = random_batch(rng, 8, 4);

    const auto nce = info_nce(a, b, kDefaultTemperature);
    CHECK(gradient_error([](const MatrixXd& x, const MatrixXd& y) {
      return info_nce(x, y, kDefaultTemperature).loss;
    }, a, b, nce.grad1, nce.grad2) < 1e-4);

    const auto bt = barlow_twins(a, b, kDefaultRedundancyWeight);
    CHECK(gradient_error([](const MatrixXd& x, const MatrixXd& y) {
      return barlow_twins(x, y, kDefaultRedundancyWeight).loss;
    }, a, b, bt.grad1, bt.grad2) < 1e-4);

    const LossWeights w{0.85, 0.87};
    const auto both = essl_loss(a, b, w);
    CHECK(gradient_error([&](const MatrixXd& x, const MatrixXd& y) {
      return essl_loss(x, y, w).total;
    }, a, b, both.grad1, both.grad2) < 1e-4);
  }
}

TEST_CASE("weighted combination") {
  std::mt19937_64 rng(55);
  const auto a = random_batch(rng, 8, 4);
  const auto b = random_batch(rng, 8, 4);
  const auto nce = info_nce(a, b, kDefaultTemperature);
  const auto bt = barlow_twins(a, b, kDefaultRedundancyWeight);

  auto gen_only = essl_loss(a, b, {1.0, 0.0});
  CHECK(gen_only.total == nce.loss);
  CHECK(gen_only.grad1 == nce.grad1);
  auto dis_only = essl_loss(a, b, {0.0, 1.0});
  CHECK(dis_only.total == bt.loss);
  CHECK(dis_only.grad2 == bt.grad2);

  auto mixed = essl_loss(a, b, {0.85, 0.87});
  CHECK(mixed.total == doctest::Approx(0.85 * nce.loss + 0.87 * bt.loss).epsilon(1e-15));
  CHECK(mixed.gen == nce.loss);
  CHECK(mixed.dis == bt.loss);

  CHECK_THROWS_AS(essl_loss(a, b, {0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(essl_loss(a, b, {-0.1, 1.0}), ValidationError);
}

TEST_CASE("loss is linear in the weights") {
  std::mt19937_64 rng(56);
  std::uniform_real_distribution<double> w(0.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_batch(rng, 8, 4);
    const auto b = random_batch(rng, 8, 4);
    const LossWeights p{w(rng) + 0.01, w(rng)};
    const LossWeights q{w(rng), w(rng) + 0.01};
    const auto lp = essl_loss(a, b, p);
    const auto lq = essl_loss(a, b, q);
    const auto sum = essl_loss(a, b, {p.alpha + q.alpha, p.beta + q.beta});
    CHECK(sum.total == doctest::Approx(lp.total + lq.total).epsilon(1e-12));
    CHECK((sum.grad1 - lp.grad1 - lq.grad1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((sum.grad2 - lp.grad2 - lq.grad2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("losses ignore the order of the batch") {
  std::mt19937_64 rng(57);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_batch(rng, 8, 4);
    const auto b = random_batch(rng, 8, 4);
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd pa(8, 4), pb(8, 4);
    for (int r = 0; r < 8; ++r) {
      pa.row(r) = a.row(perm[static_cast<std::size_t>(r)]);
      pb.row(r) = b.row(perm[static_cast<std::size_t>(r)]);
    }
    CHECK(info_nce(pa, pb, 0.07).loss == doctest::Approx(info_nce(a, b, 0.07).loss).epsilon(1e-12));
    CHECK(barlow_twins(pa, pb, 0.0051).loss ==
          doctest::Approx(barlow_twins(a, b, 0.0051).loss).epsilon(1e-12));
  }
}
