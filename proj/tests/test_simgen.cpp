#include "test_util.hpp"
#include <proxymtl/simgen.hpp>
#include <proxymtl/solver.hpp>
#include <gtest/gtest.h>

using namespace proxymtl;
using namespace proxymtl::sim;

namespace {

ScenarioConfig small_config()
{
    ScenarioConfig sc;
    sc.p = 6;
    sc.Q = 3;
    sc.n = 40;
    sc.n_tilde = 30;
    sc.coef = {CoefKind::Kind::SparseRows, 2};
    return sc;
}

} // namespace

TEST(SeedTree, StreamsAreReproducibleAndDistinct)
{
    const SeedTree a(7), b(7), c(8);
    auto r1 = a.stream({1, 2}), r2 = b.stream({1, 2}), r3 = a.stream({2, 1}), r4 = c.stream({1, 2});
    const auto x1 = r1(), x2 = r2(), x3 = r3(), x4 = r4();
    EXPECT_EQ(x1, x2);
    EXPECT_NE(x1, x3);
    EXPECT_NE(x1, x4);
    auto s1 = a.stream({1}), s2 = a.stream({1, 0});
    EXPECT_NE(s1(), s2());
}

TEST(GenCoef, SparseRows)
{
    Rng rng(1);
    const CoefMatrix B = gen_coef(10, 3, {CoefKind::Kind::SparseRows, 4}, rng);
    int nonzero_rows = 0;
    for (Index i = 0; i < 10; ++i) {
        const bool nz = B.row(i).norm() > 0;
        nonzero_rows += nz;
        if (nz) {
            EXPECT_TRUE((B.row(i).array() != 0).all());
        }
    }
    EXPECT_EQ(nonzero_rows, 4);
    EXPECT_EQ(gen_coef(5, 2, {CoefKind::Kind::SparseRows, 0}, rng), CoefMatrix::Zero(5, 2));
    EXPECT_THROW(gen_coef(5, 2, {CoefKind::Kind::SparseRows, 6}, rng), Error);
}

TEST(GenCoef, LowRank)
{
    Rng rng(2);
    const CoefMatrix B = gen_coef(10, 6, {CoefKind::Kind::LowRank, 2}, rng);
    Eigen::JacobiSVD<Matrix> svd(B);
    const Vector s = svd.singularValues();
    EXPECT_GT(s(1), 1e-8);
    EXPECT_LT(s(2), 1e-10 * s(0));
    EXPECT_THROW(gen_coef(10, 6, {CoefKind::Kind::LowRank, 7}, rng), Error);
    EXPECT_THROW(gen_coef(10, 6, {CoefKind::Kind::LowRank, 0}, rng), Error);
}

TEST(GenCoef, Reproducible)
{
    Rng a(3), b(3);
    EXPECT_EQ(gen_coef(8, 4, {CoefKind::Kind::LowRank, 2}, a), gen_coef(8, 4, {CoefKind::Kind::LowRank, 2}, b));
}

TEST(PopulationCov, Ar1)
{
    const Matrix S = population_cov({CovSpec::Kind::AR1, 0.5}, 4);
    EXPECT_DOUBLE_EQ(S(0, 3), 0.125);
    EXPECT_DOUBLE_EQ(S(2, 1), 0.5);
    EXPECT_DOUBLE_EQ(S(1, 1), 1.0);
    EXPECT_THROW(population_cov({CovSpec::Kind::AR1, 1.0}, 4), Error);
    EXPECT_EQ(population_cov({}, 3), Matrix::Identity(3, 3));
}

TEST(GenTaskData, ShapesAndOverlap)
{
    ScenarioConfig sc = small_config();
    sc.rho = 0.5;
    Rng shift(0), rng(4);
    const Population pop = make_population(sc, shift);
    const Vector beta = Vector::Ones(sc.p);
    const TaskData d = gen_task_data(sc, pop, beta, rng);
    EXPECT_EQ(d.X.rows(), 40);
    EXPECT_EQ(d.X_tilde.rows(), 30);
    EXPECT_EQ(d.Y.size(), 40);
    EXPECT_EQ(d.overlap, 15);
    EXPECT_EQ(d.X_tilde.topRows(15), d.X.topRows(15));
    EXPECT_EQ(count_shared_rows(d.X, d.X_tilde), 15);
    EXPECT_EQ(summarize(d.X, d.Y, d.X_tilde).overlap_count, 15);
}

TEST(GenTaskData, NoiselessResponse)
{
    ScenarioConfig sc = small_config();
    sc.noise_sd = 0.0;
    Rng shift(0), rng(5);
    const Population pop = make_population(sc, shift);
    const Vector beta = Vector::LinSpaced(sc.p, -1, 1);
    const TaskData d = gen_task_data(sc, pop, beta, rng);
    EXPECT_LE((d.Y - d.X * beta).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(count_shared_rows(d.X, d.X_tilde), 0);
}

TEST(GenTaskData, FullOverlapCopiesDiscoveryRows)
{
    ScenarioConfig sc = small_config();
    sc.n_tilde = sc.n;
    sc.rho = 1.0;
    Rng shift(0), rng(6);
    const Population pop = make_population(sc, shift);
    const TaskData d = gen_task_data(sc, pop, Vector::Ones(sc.p), rng);
    EXPECT_EQ(d.X_tilde, d.X);
}

TEST(GenTaskData, RejectsInvalidConfigs)
{
    ScenarioConfig sc = small_config();
    sc.rho = 0.5;
    sc.sigma2 = {CovSpec::Kind::ShiftedFrobenius, 1.0};
    try {
        sc.check();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OverlapWithShift);
    }
    sc = small_config();
    sc.rho = 1.0;
    sc.n_tilde = 100; // 100 overlapping rows but only 40 discovery rows
    EXPECT_THROW(sc.check(), Error);
    sc = small_config();
    sc.rho = 1.5;
    EXPECT_THROW(sc.check(), Error);
}

TEST(GenTaskData, LargerProxyExtendsSmaller)
{
    ScenarioConfig a = small_config(), b = small_config();
    b.n_tilde = 60;
    Rng shift(0);
    const Population pop = make_population(a, shift);
    Rng r1(7), r2(7);
    const TaskData da = gen_task_data(a, pop, Vector::Ones(6), r1);
    const TaskData db = gen_task_data(b, pop, Vector::Ones(6), r2);
    EXPECT_EQ(da.X, db.X);
    EXPECT_EQ(da.Y, db.Y);
    EXPECT_EQ(db.X_tilde.topRows(30), da.X_tilde);
}

TEST(Summarize, Examples)
{
    const Matrix X = Matrix::Identity(2, 2);
    Vector Y(2);
    Y << 1, 2;
    const TaskSummary t = summarize(X, Y, X);
    EXPECT_DOUBLE_EQ(t.s(0), 0.5);
    EXPECT_DOUBLE_EQ(t.s(1), 1.0);
    EXPECT_EQ(t.sigma, 0.5 * Matrix::Identity(2, 2));
    EXPECT_EQ(t.overlap_count, 2);

    Matrix row(1, 2);
    row << 1, 1;
    EXPECT_EQ(summarize(row, Vector::Ones(1), row).sigma, Matrix::Ones(2, 2));
    EXPECT_THROW(summarize(X, Vector::Ones(3), X), Error);
}

TEST(Gamma, ExamplesAndMonotonicity)
{
    Vector beta(2);
    beta << 1, 1;
    EXPECT_DOUBLE_EQ(gamma_factor(100, 200, 0.0, beta), 4.0);
    EXPECT_DOUBLE_EQ(gamma_factor(100, 100, 1.0, beta), 1.0);
    EXPECT_DOUBLE_EQ(gamma_factor(100, 200, 0.5, Vector::Zero(2)), 1.0);
    double prev = 1e300;
    for (double nt : {50.0, 100.0, 200.0, 400.0}) {
        const double g = gamma_factor(100, nt, 0.0, beta);
        EXPECT_LT(g, prev);
        prev = g;
    }
    prev = 1e300;
    for (double rho : {0.0, 0.25, 0.5, 1.0}) {
        const double g = gamma_factor(100, 100, rho, beta);
        EXPECT_LT(g, prev);
        prev = g;
    }
    EXPECT_THROW(gamma_factor(0, 100, 0, beta), Error);
}

TEST(Xi, Examples)
{
    const Matrix I = Matrix::Identity(2, 2);
    CoefMatrix B = CoefMatrix::Zero(2, 1);
    B(0, 0) = 1;
    const Matrix xi = xi_matrix({2 * I}, {I}, B);
    EXPECT_EQ(xi.col(0), Vector::Unit(2, 0));
    EXPECT_EQ(xi_matrix({I}, {I}, B), Matrix::Zero(2, 1));
    EXPECT_THROW(xi_matrix({I, I}, {I}, B), Error);
}

TEST(ShiftedCov, HitsTargetAndStaysPsd)
{
    const Matrix S1 = population_cov({CovSpec::Kind::AR1, 0.3}, 10);
    Rng rng(8);
    EXPECT_EQ(make_shifted_cov(S1, 0.0, rng), S1);
    for (double target : {0.5, 2.0, 10.0, 50.0}) {
        const Matrix S2 = make_shifted_cov(S1, target, rng);
        EXPECT_NEAR((S1 - S2).norm() / target, 1.0, 0.01);
        EXPECT_EQ(S2, S2.transpose());
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(S2).eigenvalues().minCoeff(), -1e-10);
    }
    EXPECT_THROW(make_shifted_cov(S1, -1.0, rng), Error);
}

TEST(PredictionMse, Cases)
{
    const CoefMatrix B = CoefMatrix::Ones(2, 2);
    const Matrix X = Matrix::Identity(2, 2);
    Vector y1(2), y2(2);
    y1 << 1, 1;
    y2 << 3, 1;
    const MseReport r = prediction_mse(B, {X, X}, {y1, y2});
    EXPECT_DOUBLE_EQ(r.per_task[0], 0.0);
    EXPECT_DOUBLE_EQ(r.per_task[1], 2.0);
    EXPECT_DOUBLE_EQ(r.mean, 1.0);
    EXPECT_THROW(prediction_mse(B, {X}, {y1}), Error);
    EXPECT_THROW(prediction_mse(B, {X, X}, {y1, Vector::Ones(3)}), Error);
}

TEST(Simulation, FullOverlapBundleEqualsIndividualBundle)
{
    ScenarioConfig sc = small_config();
    sc.n_tilde = sc.n;
    sc.rho = 1.0;
    Rng shift(0), rng(9);
    const Population pop = make_population(sc, shift);
    std::vector<Matrix> Xs;
    std::vector<Vector> Ys;
    TaskBundle proxy;
    proxy.p = sc.p;
    for (int q = 0; q < 3; ++q) {
        const TaskData d = gen_task_data(sc, pop, Vector::Ones(sc.p), rng);
        Xs.push_back(d.X);
        Ys.push_back(d.Y);
        proxy.tasks.push_back(summarize(d.X, d.Y, d.X_tilde));
    }
    proxy = validate_bundle(std::move(proxy));
    const TaskBundle ind = individual_bundle(Xs, Ys);
    for (int q = 0; q < 3; ++q) {
        EXPECT_EQ(proxy.tasks[q].s, ind.tasks[q].s);
        EXPECT_EQ(proxy.tasks[q].sigma, ind.tasks[q].sigma);
    }
}

TEST(ScenarioJson, RoundTrip)
{
    ScenarioConfig sc = small_config();
    sc.sigma1 = {CovSpec::Kind::AR1, 0.4};
    sc.sigma2 = {CovSpec::Kind::ShiftedFrobenius, 3.0};
    sc.coef = {CoefKind::Kind::LowRank, 2};
    sc.noise_sd = 0.5;
    sc.seed = 99;
    const ScenarioConfig back = scenario_from_json(to_json(sc));
    EXPECT_EQ(to_json(back), to_json(sc));
    EXPECT_EQ(back.sigma2, sc.sigma2);

    const ScenarioConfig tau = scenario_from_json({{"n", 50}, {"tau", 2.0}});
    EXPECT_EQ(tau.n_tilde, 100);
    EXPECT_THROW(scenario_from_json({{"coef", {{"kind", "banded"}}}}), Error);
    EXPECT_THROW(scenario_from_json({{"p", "many"}}), Error);
}
