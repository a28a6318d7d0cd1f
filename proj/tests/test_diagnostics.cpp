#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "helpers.hpp"
#include "summclust/design.hpp"
#include "summclust/diagnostics.hpp"
#include "summclust/model_spec.hpp"
#include "summclust/ols.hpp"

using namespace summclust;

TEST_CASE("intercept-only leverage is proportional to cluster size") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(10, 1);
  Eigen::VectorXd y(10);
  std::vector<int> ids;
  for (int r = 0; r < 10; ++r) {
    y(r) = r;
    ids.push_back(r < 3 ? 1 : (r < 6 ? 2 : 3));  // sizes 3, 3, 4
  }
  const PreparedDesign design = prepare_design(std::move(X), std::move(y), ids);
  const FittedModel model = fit_ols(design);
  const Eigen::VectorXd L = leverage(design, model);
  CHECK_THAT(L(0), Catch::Matchers::WithinAbs(0.3, 1e-14));
  CHECK_THAT(L(1), Catch::Matchers::WithinAbs(0.3, 1e-14));
  CHECK_THAT(L(2), Catch::Matchers::WithinAbs(0.4, 1e-14));
}

TEST_CASE("singleton-cluster leverage equals the hat diagonal") {
  Rng rng(73);
  const int n = 15;
  Eigen::MatrixXd X(n, 3);
  for (int r = 0; r < n; ++r) {
    X(r, 0) = rng.next_normal();
    X(r, 1) = rng.next_bernoulli(0.5);
    X(r, 2) = 1.0;
  }
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) y(r) = rng.next_normal();
  std::vector<int> ids(n);
  for (int r = 0; r < n; ++r) ids[r] = r + 1;
  const PreparedDesign design = prepare_design(X, y, ids);
  const FittedModel model = fit_ols(design);
  const Eigen::VectorXd L = leverage(design, model);
  const Eigen::VectorXd h = test_helpers::hat_diagonals(X);
  CHECK((L - h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("balanced constant-plus-dummy design has L_g = 2 Ng / N") {
  // every cluster has the same treated share, so only size matters
  const int G = 4;
  const int per = 4;
  Eigen::MatrixXd X(G * per, 2);
  Eigen::VectorXd y(G * per);
  std::vector<int> ids;
  Rng rng(79);
  for (int g = 0; g < G; ++g) {
    for (int i = 0; i < per; ++i) {
      const int r = g * per + i;
      X(r, 0) = i < 2 ? 1.0 : 0.0;  // dbar_g = 1/2 everywhere
      X(r, 1) = 1.0;
      y(r) = rng.next_normal();
      ids.push_back(g + 1);
    }
  }
  const PreparedDesign design = prepare_design(std::move(X), std::move(y), ids);
  const FittedModel model = fit_ols(design);
  const Eigen::VectorXd L = leverage(design, model);
  const Eigen::VectorXd Lp = partial_leverage(design, 0);
  for (int g = 0; g < G; ++g) {
    CHECK_THAT(L(g), Catch::Matchers::WithinAbs(2.0 * per / (G * per), 1e-12));
    CHECK_THAT(Lp(g), Catch::Matchers::WithinAbs(1.0 * per / (G * per), 1e-12));
  }
}

TEST_CASE("leverage audits: sum k, brute-force block traces") {
  Rng rng(83);
  for (int trial = 0; trial < 15; ++trial) {
    const PreparedDesign design = test_helpers::random_design(rng);
    const FittedModel model = fit_ols(design);
    const Eigen::VectorXd L = leverage(design, model);
    CHECK_THAT(L.sum(), Catch::Matchers::WithinAbs(design.k(), 1e-10));
    CHECK(L.minCoeff() >= -1e-12);
    for (int g = 0; g < std::min(design.G, 3); ++g) {
      CHECK_THAT(L(g), Catch::Matchers::WithinAbs(test_helpers::explicit_hg_trace(design, g), 1e-10));
    }

    const Eigen::VectorXd Lp = partial_leverage(design, design.j);
    CHECK_THAT(Lp.mean(), Catch::Matchers::WithinAbs(1.0 / design.G, 1e-12));
    CHECK(Lp.minCoeff() >= -1e-12);
  }
}

TEST_CASE("single-regressor partial leverage is the x share") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, 3.0, 4.0;
  const PreparedDesign design = prepare_design(std::move(X), std::move(y), {1, 1, 2, 2});
  const Eigen::VectorXd Lp = partial_leverage(design, 0);
  CHECK_THAT(Lp(0), Catch::Matchers::WithinAbs(0.5, 1e-14));
  CHECK_THAT(Lp(1), Catch::Matchers::WithinAbs(0.5, 1e-14));
}

TEST_CASE("partial leverage is invariant to rescaling columns") {
  Rng rng(89);
  const PreparedDesign design = test_helpers::random_design(rng);
  const Eigen::VectorXd Lp = partial_leverage(design, design.j);

  Eigen::MatrixXd X2 = design.X;
  X2.col(design.j) *= -3.0;
  if (design.k() > 1) X2.col(design.k() - 1) *= 0.25;
  const PreparedDesign scaled =
      prepare_design(std::move(X2), design.y, design.cluster_of_row, design.j);
  const Eigen::VectorXd Lp2 = partial_leverage(scaled, design.j);
  CHECK((Lp - Lp2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("partial leverage refuses an unidentified coefficient") {
  // hand-built design whose test column carries no variation at all
  PreparedDesign design;
  design.X = Eigen::MatrixXd::Zero(4, 1);
  design.y = Eigen::VectorXd::Ones(4);
  design.cluster_of_row = {0, 0, 1, 1};
  design.cluster_rows = {{0, 1}, {2, 3}};
  design.cluster_labels = {"1", "2"};
  design.G = 2;
  design.Ng = {2, 2};
  design.gram = design.X.transpose() * design.X;
  design.colnames = {"x1"};
  CHECK_THROWS_WITH(partial_leverage(design, 0),
                    Catch::Matchers::ContainsSubstring("not identified"));
}

TEST_CASE("summary statistics, worked by hand") {
  Eigen::VectorXd v(2);
  v << 1.0, 4.0;
  const Summary s = summarize(v);
  CHECK(s.min == 1.0);
  CHECK(s.max == 4.0);
  CHECK_THAT(s.mean, Catch::Matchers::WithinAbs(2.5, 1e-15));
  REQUIRE(s.coefvar);
  // V_s = (1.5^2 + 1.5^2) / (1 * 2.5^2) = 0.72
  CHECK_THAT(*s.coefvar, Catch::Matchers::WithinAbs(std::sqrt(0.72), 1e-13));

  Eigen::VectorXd q(4);
  q << 1.0, 2.0, 3.0, 4.0;  // h = (G-1)p interpolation
  const Summary sq = summarize(q);
  CHECK_THAT(sq.q1, Catch::Matchers::WithinAbs(1.75, 1e-15));
  CHECK_THAT(sq.median, Catch::Matchers::WithinAbs(2.5, 1e-15));
  CHECK_THAT(sq.q3, Catch::Matchers::WithinAbs(3.25, 1e-15));

  const Summary flat = summarize(Eigen::VectorXd::Constant(5, 2.0));
  REQUIRE(flat.coefvar);
  CHECK(*flat.coefvar == 0.0);

  Eigen::VectorXd balanced(2);
  balanced << -1.0, 1.0;  // zero mean: scaled variance undefined
  CHECK_FALSE(summarize(balanced).coefvar);
  CHECK_FALSE(summarize(Eigen::VectorXd::Constant(1, 3.0)).coefvar);
}

TEST_CASE("alternative means, worked by hand") {
  Eigen::VectorXd v(2);
  v << 1.0, 4.0;
  const AltMeans m = alternative_means(v);
  REQUIRE(m.harmonic);
  REQUIRE(m.geometric);
  CHECK_THAT(*m.harmonic, Catch::Matchers::WithinAbs(1.6, 1e-14));
  CHECK_THAT(*m.geometric, Catch::Matchers::WithinAbs(2.0, 1e-14));
  CHECK_THAT(m.quadratic, Catch::Matchers::WithinAbs(std::sqrt(8.5), 1e-14));
  CHECK_THAT(*m.harmonic_ratio, Catch::Matchers::WithinAbs(1.6 / 2.5, 1e-14));

  const AltMeans flat = alternative_means(Eigen::VectorXd::Constant(3, 7.0));
  CHECK_THAT(*flat.harmonic_ratio, Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK_THAT(*flat.geometric_ratio, Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK_THAT(*flat.quadratic_ratio, Catch::Matchers::WithinAbs(1.0, 1e-14));

  Eigen::VectorXd neg(3);
  neg << 1.0, -2.0, 4.0;  // harmonic/geometric undefined, quadratic fine
  const AltMeans mn = alternative_means(neg);
  CHECK_FALSE(mn.harmonic);
  CHECK_FALSE(mn.geometric);
  CHECK_THAT(mn.quadratic, Catch::Matchers::WithinAbs(std::sqrt(21.0 / 3.0), 1e-14));
}

TEST_CASE("effective clusters: balanced designs lose nothing") {
  // identical X_g blocks cluster by cluster; no constant, because with an
  // intercept the gamma(1) of identical clusters are identically zero
  const int G = 5;
  Eigen::MatrixXd X(3 * G, 1);
  Eigen::VectorXd y(3 * G);
  std::vector<int> ids;
  for (int g = 0; g < G; ++g) {
    for (int i = 0; i < 3; ++i) {
      const int r = 3 * g + i;
      X(r, 0) = i + 1.0;
      y(r) = 0.1 * r;
      ids.push_back(g + 1);
    }
  }
  const PreparedDesign design = prepare_design(std::move(X), std::move(y), ids);
  const FittedModel model = fit_ols(design);
  const EffectiveClusters ec = effective_clusters(design, model, 0.5);
  CHECK_THAT(ec.gstar0, Catch::Matchers::WithinAbs(G, 1e-10));
  REQUIRE(ec.gstar1);
  CHECK_THAT(*ec.gstar1, Catch::Matchers::WithinAbs(G, 1e-10));
  REQUIRE(ec.gstar_rho);
  CHECK_THAT(*ec.gstar_rho, Catch::Matchers::WithinAbs(G, 1e-10));
}

TEST_CASE("gamma interpolation and the partial-leverage identity") {
  Rng rng(97);
  for (int trial = 0; trial < 15; ++trial) {
    const PreparedDesign design = test_helpers::random_design(rng);
    const FittedModel model = fit_ols(design);
    const EffectiveClusters ec = effective_clusters(design, model, 0.4);

    // gamma(0.4) is the exact linear interpolation
    const Eigen::VectorXd mixed = 0.4 * ec.gamma1 + 0.6 * ec.gamma0;
    const auto vs = scaled_variance(mixed);
    REQUIRE(vs);
    REQUIRE(ec.gstar_rho);
    CHECK_THAT(*ec.gstar_rho, Catch::Matchers::WithinRel(design.G / (1.0 + *vs), 1e-12));

    // two routes to G*(0): gamma(0) versus the partial leverages
    const Eigen::VectorXd Lp = partial_leverage(design, design.j);
    const double gstar_from_lp = design.G / (1.0 + *scaled_variance(Lp));
    CHECK_THAT(ec.gstar0, Catch::Matchers::WithinAbs(gstar_from_lp, 1e-10));

    CHECK(ec.gstar0 <= design.G + 1e-12);
    CHECK(ec.gstar0 > 0.0);
    if (ec.gstar1) CHECK(*ec.gstar1 <= design.G + 1e-12);
  }
}

TEST_CASE("explicit interpolation example") {
  Eigen::VectorXd g0(3), g1(3);
  g0 << 2.0, 2.0, 2.0;
  g1 << 4.0, 4.0, 4.0;
  // gamma(0.5) = 0.5*4 + 0.5*2 = 3 cluster by cluster
  const Eigen::VectorXd mixed = 0.5 * g1 + 0.5 * g0;
  CHECK(mixed.isApproxToConstant(3.0, 1e-15));
}

TEST_CASE("rho is validated and nested fixed effects suppress rho > 0") {
  Rng rng(199);
  const PreparedDesign design = test_helpers::random_design(rng);
  const FittedModel model = fit_ols(design);
  CHECK_THROWS_WITH(effective_clusters(design, model, 1.5),
                    Catch::Matchers::ContainsSubstring("rho must be in [0,1]"));
  CHECK_THROWS_AS(effective_clusters(design, model, -0.1), std::invalid_argument);

  // absorbing the cluster variable flags the design as nested
  std::vector<double> y, x, cid;
  Rng rng2(211);
  for (int g = 1; g <= 5; ++g) {
    for (int i = 0; i < 4; ++i) {
      x.push_back(rng2.next_normal());
      y.push_back(rng2.next_normal());
      cid.push_back(g);
    }
  }
  const Dataset data = test_helpers::make_dataset({"y", "x", "cid"}, {y, x, cid});
  ModelSpec spec;
  spec.coef_var = "x";
  spec.yvar = "y";
  spec.cluster = "cid";
  spec.absorb = "cid";
  const PreparedDesign absorbed = build_design(data, spec);
  const FittedModel amodel = fit_ols(absorbed);
  const EffectiveClusters ec = effective_clusters(absorbed, amodel, 0.7);
  CHECK(ec.fe_nested);
  CHECK_FALSE(ec.gstar1);
  CHECK_FALSE(ec.gstar_rho);
  CHECK(ec.gstar0 > 0.0);
}

TEST_CASE("fevar nested within clusters also suppresses rho > 0") {
  std::vector<double> y, x, fine, crossing, cid;
  Rng rng(223);
  for (int g = 1; g <= 4; ++g) {
    for (int i = 0; i < 6; ++i) {
      y.push_back(rng.next_normal());
      x.push_back(rng.next_normal());
      cid.push_back(g);
      fine.push_back(g * 10 + (i < 3 ? 0 : 1));  // two sub-groups per cluster
      crossing.push_back(i < 3 ? 0 : 1);         // spans all clusters
    }
  }
  const Dataset data =
      test_helpers::make_dataset({"y", "x", "fine", "crossing", "cid"},
                                 {y, x, fine, crossing, cid});
  ModelSpec spec;
  spec.coef_var = "x";
  spec.yvar = "y";
  spec.cluster = "cid";

  spec.fevars = {"fine"};
  CHECK(build_design(data, spec).fe_nested);

  spec.fevars = {"crossing"};
  CHECK_FALSE(build_design(data, spec).fe_nested);
}
