#include "test_util.hpp"
#include <proxymtl/io.hpp>
#include <gtest/gtest.h>
#include <filesystem>
#include <fstream>

using namespace proxymtl;
namespace fs = std::filesystem;

namespace {

TaskSummary task(Matrix sigma, Vector s)
{
    TaskSummary t;
    t.sigma = std::move(sigma);
    t.s = std::move(s);
    t.n_discovery = 10;
    t.n_proxy = 10;
    return t;
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::InvalidArgument;
}

fs::path scratch(const std::string& name)
{
    fs::path d = fs::temp_directory_path() / ("proxymtl_core_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST(ValidateBundle, IdentityAcceptedUnchanged)
{
    TaskBundle b{3, {task(Matrix::Identity(3, 3), Vector::Ones(3))}};
    const TaskBundle v = validate_bundle(b);
    EXPECT_EQ(v.tasks[0].sigma, Matrix::Identity(3, 3));
    EXPECT_EQ(v.tasks[0].s, Vector::Ones(3));
}

TEST(ValidateBundle, RejectsMixedDimensions)
{
    TaskBundle b{3, {task(Matrix::Identity(3, 3), Vector::Ones(3)), task(Matrix::Identity(4, 4), Vector::Ones(4))}};
    EXPECT_EQ(code_of([&] { validate_bundle(b); }), ErrorCode::DimensionMismatch);
}

TEST(ValidateBundle, SymmetrizesExactly)
{
    Matrix S(2, 2);
    S << 1, 0.5, 0.4999999999, 1;
    const TaskBundle v = validate_bundle(TaskBundle{2, {task(S, Vector::Zero(2))}});
    const Matrix& out = v.tasks[0].sigma;
    EXPECT_EQ(out(0, 1), out(1, 0));
    EXPECT_NEAR(out(0, 1), 0.49999999995, 1e-16);
    EXPECT_EQ(out(0, 0), 1.0);
}

TEST(ValidateBundle, RejectsIndefiniteAndNonFinite)
{
    Matrix S = Matrix::Identity(2, 2);
    S(1, 1) = -1e-3;
    EXPECT_EQ(code_of([&] { validate_bundle(TaskBundle{2, {task(S, Vector::Zero(2))}}); }), ErrorCode::NotPSD);

    Matrix N = Matrix::Identity(2, 2);
    N(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(code_of([&] { validate_bundle(TaskBundle{2, {task(N, Vector::Zero(2))}}); }), ErrorCode::NonFinite);

    Vector s = Vector::Zero(2);
    s(0) = std::numeric_limits<double>::infinity();
    EXPECT_EQ(code_of([&] { validate_bundle(TaskBundle{2, {task(Matrix::Identity(2, 2), s)}}); }),
              ErrorCode::NonFinite);
}

TEST(ValidateBundle, ClampsTinyNegativeEigenvalues)
{
    Matrix S = Matrix::Zero(2, 2);
    S(0, 0) = 1.0;
    S(1, 1) = -5e-9;
    const TaskBundle v = validate_bundle(TaskBundle{2, {task(S, Vector::Zero(2))}});
    Eigen::SelfAdjointEigenSolver<Matrix> es(v.tasks[0].sigma);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-15);
}

TEST(ValidateBundle, RejectsOverlapLargerThanSamples)
{
    TaskSummary t = task(Matrix::Identity(2, 2), Vector::Zero(2));
    t.overlap_count = 11;
    EXPECT_EQ(code_of([&] { validate_bundle(TaskBundle{2, {t}}); }), ErrorCode::InvalidArgument);
}

TEST(ValidateBundle, IdempotentAndExactlySymmetric)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const Index p = 2 + trial % 6;
        Matrix S = testutil::random_psd(p, rng, p / 2 + 1); // rank deficient
        S += testutil::random_matrix(p, p, rng, 1e-10);     // asymmetric roundoff-sized noise
        const TaskBundle once = validate_bundle(TaskBundle{p, {task(S, Vector::Ones(p))}});
        const TaskBundle twice = validate_bundle(once);
        const Matrix& m = once.tasks[0].sigma;
        EXPECT_EQ((m - m.transpose()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(once.tasks[0].sigma, twice.tasks[0].sigma);
    }
}

TEST(BundleIo, RoundTrip)
{
    std::mt19937_64 rng(3);
    TaskBundle b = testutil::random_bundle(4, 3, rng);
    b.tasks[1].overlap_count = 20;
    const fs::path dir = scratch("roundtrip");
    io::save_bundle(b, dir);
    const TaskBundle back = io::load_bundle(dir);
    ASSERT_EQ(back.num_tasks(), 3);
    EXPECT_EQ(back.p, 4);
    for (std::size_t q = 0; q < 3; ++q) {
        EXPECT_EQ(back.tasks[q].s, b.tasks[q].s);
        EXPECT_EQ(back.tasks[q].sigma, b.tasks[q].sigma);
        EXPECT_EQ(back.tasks[q].n_discovery, b.tasks[q].n_discovery);
        EXPECT_EQ(back.tasks[q].n_proxy, b.tasks[q].n_proxy);
        EXPECT_EQ(back.tasks[q].overlap_count, b.tasks[q].overlap_count);
    }
    // Manifest path works as well as the directory.
    EXPECT_EQ(io::load_bundle(dir / "manifest.json").tasks[2].s, b.tasks[2].s);
}

TEST(BundleIo, MissingSigmaFile)
{
    std::mt19937_64 rng(3);
    const fs::path dir = scratch("missing");
    io::save_bundle(testutil::random_bundle(3, 2, rng), dir);
    fs::remove(dir / "sigma_2.csv");
    EXPECT_EQ(code_of([&] { io::load_bundle(dir); }), ErrorCode::MissingFile);
}

TEST(BundleIo, MissingManifest)
{
    const fs::path dir = scratch("nomanifest");
    EXPECT_EQ(code_of([&] { io::load_bundle(dir); }), ErrorCode::MissingFile);
}

TEST(BundleIo, RaggedCsvIsParseError)
{
    std::mt19937_64 rng(3);
    const fs::path dir = scratch("ragged");
    io::save_bundle(testutil::random_bundle(3, 1, rng), dir);
    std::ofstream(dir / "sigma_1.csv") << "1,0,0\n0,1\n0,0,1\n";
    EXPECT_EQ(code_of([&] { io::load_bundle(dir); }), ErrorCode::ParseError);
    std::ofstream(dir / "sigma_1.csv") << "1,0,0\n0,abc,0\n0,0,1\n";
    EXPECT_EQ(code_of([&] { io::load_bundle(dir); }), ErrorCode::ParseError);
}

TEST(BundleIo, MalformedManifest)
{
    const fs::path dir = scratch("badjson");
    std::ofstream(dir / "manifest.json") << "{\"p\": 3, \"tasks\": [ {\"s\": 1 ";
    EXPECT_EQ(code_of([&] { io::load_bundle(dir); }), ErrorCode::ParseError);
}

TEST(BundleIo, DimensionMismatchAcrossFiles)
{
    std::mt19937_64 rng(5);
    const fs::path dir = scratch("dims");
    io::save_bundle(testutil::random_bundle(3, 1, rng), dir);
    std::ofstream(dir / "s_1.csv") << "1\n2\n3\n4\n";
    EXPECT_EQ(code_of([&] { io::load_bundle(dir); }), ErrorCode::DimensionMismatch);
}

TEST(Csv, SeventeenDigitsRoundTripExactly)
{
    std::mt19937_64 rng(11);
    const Matrix m = testutil::random_matrix(5, 4, rng, 1e3);
    EXPECT_EQ(io::parse_csv_matrix(io::to_csv(m), "mem"), m);
}
