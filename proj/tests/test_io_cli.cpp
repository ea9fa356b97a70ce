#include <nwot/cli.hpp>
#include <nwot/io.hpp>

#include <gtest/gtest.h>

#include "support/random.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

fs::path tmp_dir() {
    const char* env = std::getenv("NWOT_TEST_TMP");
    fs::path dir = env ? fs::path(env) : fs::temp_directory_path() / "nwot_io_cli";
    fs::create_directories(dir);
    return dir;
}

fs::path tmp(const std::string& name) { return tmp_dir() / name; }

struct CliRun {
    int code = 0;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "nwot");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    CliRun r;
    r.code = nwot::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nwot::PointsFile parse(const std::string& text) {
    std::istringstream in(text);
    return nwot::parse_points_csv(in);
}

TEST(PointsCsv, ParsesCoordinatesLabelsAndWeights) {
    const auto f = parse("x1,label,x0,weight\n1.5,2,0.5,0.25\n-1,0,3,0.75\n");
    EXPECT_EQ(f.data.points(), (nwot::PointMatrix(2, 2) << 0.5, 1.5, 3, -1).finished());
    EXPECT_EQ(*f.labels, (std::vector<int>{2, 0}));
    EXPECT_EQ(f.data.weights(), Eigen::Vector2d(0.25, 0.75));
    EXPECT_FALSE(f.warning);
}

TEST(PointsCsv, UniformWeightsWhenAbsent) {
    const auto f = parse("x0\n1\n2\n3\n4\n");
    EXPECT_EQ(f.data.weights(), Eigen::Vector4d::Constant(0.25));
    EXPECT_FALSE(f.labels);
}

TEST(PointsCsv, RenormalisesWithWarning) {
    const auto f = parse("x0,weight\n0,1\n1,3\n");
    EXPECT_EQ(f.data.weights(), Eigen::Vector2d(0.25, 0.75));
    ASSERT_TRUE(f.warning);
    EXPECT_NE(f.warning->find("renormalised"), std::string::npos);
    EXPECT_FALSE(parse("x0,weight\n0,0.5\n1,0.5000000001\n").warning);
}

TEST(PointsCsv, MalformedInputsThrow) {
    EXPECT_THROW(parse(""), nwot::InvalidArgument);
    EXPECT_THROW(parse("x0,x1\n"), nwot::InvalidArgument);
    EXPECT_THROW(parse("x0,y\n1,2\n"), nwot::IoError);
    EXPECT_THROW(parse("x0,x2\n1,2\n"), nwot::IoError);
    EXPECT_THROW(parse("x0,x1\n1,2\n3\n"), nwot::IoError);
    EXPECT_THROW(parse("x0\nabc\n"), nwot::IoError);
    EXPECT_THROW(parse("x0,weight\n1,-1\n2,2\n"), nwot::IoError);
    EXPECT_THROW(parse("x0,label\n1,0.5\n"), nwot::IoError);
}

TEST(PointsCsv, RoundTripIsExact) {
    std::mt19937_64 rng(1);
    const auto d = nwot_test::random_distribution(rng, 50, 3);
    std::vector<int> labels(50);
    for (int i = 0; i < 50; ++i) {
        labels[static_cast<std::size_t>(i)] = i % 4;
    }
    const auto path = tmp("roundtrip.csv");
    nwot::write_points_csv(path, d, &labels, true);
    EXPECT_FALSE(fs::exists(fs::path(path.string() + ".tmp")));
    const auto back = nwot::read_points_csv(path);
    EXPECT_EQ(back.data.points(), d.points());
    EXPECT_EQ(*back.labels, labels);
    EXPECT_LE((back.data.weights() - d.weights()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Report, JsonRoundTripIsLossless) {
    const double tricky[] = {0.1, 1.0 / 3.0, 2.0 / 3.0, 1e-300, 123456.78901234567, std::nextafter(1.0, 2.0)};
    nwot::json values = nwot::json::array();
    for (double v : tricky) {
        values.push_back(v);
    }
    const auto path = tmp("lossless.json");
    nwot::write_report(path, nwot::make_report("test", nwot::json::object(), nwot::json{{"values", values}}));
    const auto back = nwot::read_report(path);
    for (std::size_t i = 0; i < std::size(tricky); ++i) {
        EXPECT_EQ(back["results"]["values"][i].get<double>(), tricky[i]);
    }
    EXPECT_EQ(back["version"], nwot::kVersion);
}

TEST(Report, ValidationCatchesBrokenInvariants) {
    nwot::json good = nwot::make_report("x", nwot::json::object(),
                                        nwot::json{{"pi", {0.25, 0.75}}, {"trace", {3.0, 2.0, 2.0}}, {"trace_non_increasing", true}});
    EXPECT_TRUE(nwot::validate_report(good).empty());
    auto bad_pi = good;
    bad_pi["results"]["pi"] = {0.5, 0.75};
    EXPECT_EQ(nwot::validate_report(bad_pi).size(), 1u);
    auto bad_flag = good;
    bad_flag["results"]["trace"] = {1.0, 2.0};
    EXPECT_EQ(nwot::validate_report(bad_flag).size(), 1u);
    auto missing = good;
    missing.erase("config");
    EXPECT_EQ(nwot::validate_report(missing).size(), 1u);
}

TEST(Cli, GenWritesLabelledPoints) {
    const auto path = tmp("gen.csv");
    const auto r = cli({"gen", "--preset", "grid9", "--n", "120", "--seed", "7", "--out", path.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto f = nwot::read_points_csv(path);
    EXPECT_EQ(f.data.size(), 120);
    EXPECT_EQ(f.data.dim(), 2);
    ASSERT_TRUE(f.labels);
    EXPECT_EQ(*f.labels, nwot::preset("grid9", 120, 7).labels);
    EXPECT_EQ(f.data.points(), nwot::preset("grid9", 120, 7).data.points());
}

TEST(Cli, EmptyCsvIsAnError) {
    const auto path = tmp("empty.csv");
    std::ofstream(path).close();
    const auto r = cli({"wasserstein", "--a", path.string(), "--b", path.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err, "error: empty dataset\n");
}

TEST(Cli, UnknownFlagAndMissingFileAreErrors) {
    const auto r = cli({"nw", "--bogus", "1"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    const auto m = cli({"wasserstein", "--a", tmp("nope.csv").string(), "--b", tmp("nope.csv").string()});
    EXPECT_EQ(m.code, 2);
    EXPECT_EQ(m.err.rfind("error: cannot open", 0), 0u);
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"nw", "--a", "a", "--b", "b", "--k", "0"}).code, 2);
}

TEST(Cli, HelpDocumentsExitCodes) {
    const auto r = cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("11 SAME_COMPONENTS_DIFFERENT_PROPORTIONS"), std::string::npos);
}

TEST(Cli, WassersteinPrintsValueAndPlan) {
    const auto a = tmp("wa.csv"), b = tmp("wb.csv"), plan = tmp("plan.csv");
    std::ofstream(a) << "x0\n0\n1\n";
    std::ofstream(b) << "x0\n2\n3\n";
    const auto r = cli({"wasserstein", "--a", a.string(), "--b", b.string(), "--p", "2", "--plan", plan.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "value=4\n");
    EXPECT_EQ(slurp(plan), "row,col,mass\n0,0,0.5\n1,1,0.5\n");
}

TEST(Cli, RenormalisationWarningGoesToStderr) {
    const auto a = tmp("ww.csv");
    std::ofstream(a) << "x0,weight\n0,2\n1,2\n";
    const auto r = cli({"wasserstein", "--a", a.string(), "--b", a.string()});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning:"), std::string::npos);
    EXPECT_EQ(r.out, "value=0\n");
}

TEST(Cli, NwReportValidatesAndIsDeterministic) {
    const auto a = tmp("nwa.csv"), b = tmp("nwb.csv");
    ASSERT_EQ(cli({"gen", "--preset", "twomode_src", "--n", "120", "--seed", "1", "--out", a.string()}).code, 0);
    ASSERT_EQ(cli({"gen", "--preset", "twomode_tgt", "--n", "120", "--seed", "2", "--out", b.string()}).code, 0);
    std::vector<nwot::json> reports;
    for (const char* name : {"nw1.json", "nw2.json"}) {
        const auto rep = tmp(name);
        const auto r = cli({"nw", "--a", a.string(), "--b", b.string(), "--k", "2", "--restarts", "2",
                            "--points-per-component", "8", "--seed", "3", "--report", rep.string()});
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_EQ(r.out.rfind("nw=", 0), 0u);
        auto j = nwot::read_report(rep);
        EXPECT_TRUE(nwot::validate_report(j).empty());
        EXPECT_EQ(j["command"], "nw");
        EXPECT_EQ(j["config"]["seed"], 3);
        EXPECT_EQ(j["results"]["trace_non_increasing"], true);
        j.erase("timestamp");
        reports.push_back(j);
    }
    EXPECT_EQ(reports[0].dump(), reports[1].dump());
}

TEST(Cli, FitAndClusterReportMetrics) {
    const auto data = tmp("three.csv"), labels = tmp("labels.csv"), rep = tmp("fit.json"), crep = tmp("cluster.json");
    ASSERT_EQ(cli({"gen", "--preset", "threemode", "--n", "300", "--seed", "4", "--out", data.string()}).code, 0);
    const auto f = cli({"fit", "--data", data.string(), "--k", "3", "--restarts", "2", "--points-per-component", "8",
                        "--report", rep.string()});
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_NE(f.out.find("pi_error="), std::string::npos);
    const auto fj = nwot::read_report(rep);
    EXPECT_TRUE(nwot::validate_report(fj).empty());
    EXPECT_LT(fj["results"]["recovery"]["pi_error"].get<double>(), 0.05);

    const auto c = cli({"cluster", "--data", data.string(), "--k", "3", "--lambda-reg", "0.1", "--restarts", "2",
                        "--points-per-component", "8", "--out", labels.string(), "--report", crep.string()});
    ASSERT_EQ(c.code, 0) << c.err;
    const auto back = nwot::read_points_csv(labels);
    ASSERT_TRUE(back.labels);
    EXPECT_EQ(back.labels->size(), 300u);
    const auto cj = nwot::read_report(crep);
    EXPECT_TRUE(nwot::validate_report(cj).empty());
    EXPECT_GE(cj["results"]["scores"]["purity"].get<double>(), 0.95);
}

TEST(Cli, SweepWritesCurve) {
    const auto a = tmp("sweep.csv"), curve = tmp("nw_vs_k.csv"), rep = tmp("sweep.json");
    ASSERT_EQ(cli({"gen", "--preset", "threemode", "--n", "150", "--seed", "5", "--out", a.string()}).code, 0);
    const auto r = cli({"sweep", "--a", a.string(), "--b", a.string(), "--kmin", "1", "--kmax", "4", "--restarts", "2",
                        "--points-per-component", "8", "--family", "affine", "--curve", curve.string(), "--report",
                        rep.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("selected_k=3"), std::string::npos) << r.out;
    const auto text = slurp(curve);
    EXPECT_EQ(text.rfind("k,nw,first_diff\n1,", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
    EXPECT_TRUE(nwot::validate_report(nwot::read_report(rep)).empty());
    EXPECT_EQ(cli({"sweep", "--a", a.string(), "--b", a.string(), "--kmin", "3", "--kmax", "2"}).code, 2);
}

TEST(Cli, CompareExitCodeEncodesVerdict) {
    const auto a = tmp("ring_a.csv"), b = tmp("ring_b.csv"), rep = tmp("compare.json");
    ASSERT_EQ(cli({"gen", "--preset", "ring8_s1_d1", "--n", "400", "--seed", "1", "--out", a.string()}).code, 0);
    ASSERT_EQ(cli({"gen", "--preset", "ring8_s1_d2", "--n", "400", "--seed", "2", "--out", b.string()}).code, 0);
    const std::vector<std::string> base{"compare", "--a", a.string(), "--b", b.string(), "--k", "8", "--restarts", "3"};
    auto with_report = base;
    with_report.insert(with_report.end(), {"--report", rep.string()});
    const auto r = cli(with_report);
    EXPECT_EQ(r.code, 11) << r.out << r.err;
    EXPECT_NE(r.out.find("verdict=SAME_COMPONENTS_DIFFERENT_PROPORTIONS"), std::string::npos);
    const auto j = nwot::read_report(rep);
    EXPECT_EQ(j["results"]["verdict"], "SAME_COMPONENTS_DIFFERENT_PROPORTIONS");
    EXPECT_TRUE(nwot::validate_report(j).empty());

    auto quiet = base;
    quiet.push_back("--no-verdict-exit");
    EXPECT_EQ(cli(quiet).code, 0);
    EXPECT_EQ(cli({"compare", "--a", a.string(), "--b", a.string(), "--k", "2", "--restarts", "1"}).code, 10);
}

TEST(Cli, DaDemoReportsReweighting) {
    const auto src = tmp("src.csv"), tgt = tmp("tgt.csv"), rep = tmp("da.json");
    ASSERT_EQ(cli({"gen", "--preset", "twomode_src", "--n", "400", "--seed", "1", "--out", src.string()}).code, 0);
    ASSERT_EQ(cli({"gen", "--preset", "twomode_tgt", "--n", "400", "--seed", "2", "--out", tgt.string()}).code, 0);
    const auto r = cli({"da-demo", "--source", src.string(), "--target", tgt.string(), "--report", rep.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nwot::read_report(rep);
    EXPECT_TRUE(nwot::validate_report(j).empty());
    EXPECT_NEAR(j["results"]["estimated_pi"][1].get<double>(), 0.8, 0.05);
    EXPECT_LT(j["results"]["cross_mode_mass"].get<double>(), j["results"]["baseline_cross_mode_mass"].get<double>());

    const auto unlabeled = tmp("unlabeled.csv");
    std::ofstream(unlabeled) << "x0,x1\n0,0\n1,1\n";
    const auto e = cli({"da-demo", "--source", unlabeled.string(), "--target", tgt.string()});
    EXPECT_EQ(e.code, 2);
    EXPECT_EQ(e.err, "error: source file needs a label column\n");
}

} // namespace
