#include <gtest/gtest.h>

#include <filesystem>
#include <json.hpp>
#include <set>
#include <sstream>

#include "lhsgp/cli.hpp"
#include "lhsgp/errors.hpp"
#include "lhsgp/io.hpp"

namespace lhsgp {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lhsgp_cli_" + std::string(::testing::UnitTest::GetInstance()
                                           ->current_test_info()
                                           ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  fs::path dir_;
};

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1.0}) {
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
}

TEST(Io, CsvQuotingAndErrors) {
  io::CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"x,y", "say \"hi\""}, {"1", "2"}};
  const io::CsvTable back = io::parse_csv(io::to_csv(t));
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_THROW(io::parse_csv("a,b\n1\n"), InvalidInput);
  const io::CsvTable bad = io::parse_csv("a\n1\nfoo\n");
  try {
    bad.numeric_column(0);
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST_F(CliTest, SimulateWritesDatasetAndSidecar) {
  const CliResult r = cli({"simulate", "--scenario", "pcgp", "--n", "20", "--d", "5", "--seed",
                     "1", "--out", path("sim")});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path csv = path("sim/pcgp_n20_d5_seed1.csv");
  const io::CsvTable t = io::read_csv(csv);
  EXPECT_EQ(t.rows.size(), 20u);
  // id, x_true, x_tilde and two blocks of five outputs
  EXPECT_EQ(t.header.size(), 13u);
  EXPECT_TRUE(fs::exists(io::sidecar_path(csv)));
  EXPECT_TRUE(fs::exists(path("sim/manifest.json")));
}

TEST_F(CliTest, SimulateRoundTripsExactly) {
  ASSERT_EQ(cli({"simulate", "--scenario", "dgp", "--n", "8", "--d", "3", "--seed", "4",
                 "--out", path("sim")})
                .code,
            0);
  const SimDataset ref = generate(ScenarioConfig::make(Process::dGP, 8, 3, 4));
  const io::LoadedDataset back = io::read_dataset(path("sim/dgp_n8_d3_seed4.csv"));
  ASSERT_TRUE(back.sim.has_value());
  const SimDataset& ds = *back.sim;
  EXPECT_EQ(ds.x_true, ref.x_true);
  EXPECT_EQ(ds.x_tilde, ref.x_tilde);
  EXPECT_EQ(ds.y_f, ref.y_f);
  EXPECT_EQ(ds.y_g, ref.y_g);
  EXPECT_EQ(ds.f, ref.f);
  EXPECT_EQ(ds.C, ref.C);
  EXPECT_EQ(ds.truth(), ref.truth());
  EXPECT_EQ(ds.seed, 4u);
}

TEST_F(CliTest, SimulateTrialsUseConsecutiveSeeds) {
  ASSERT_EQ(cli({"simulate", "--scenario", "pcgp", "--n", "5", "--d", "2", "--seed", "10",
                 "--trials", "4", "--out", path("sim")})
                .code,
            0);
  for (int s = 10; s < 14; ++s)
    EXPECT_TRUE(fs::exists(path("sim/pcgp_n5_d2_seed" + std::to_string(s) + ".csv")));
  EXPECT_FALSE(fs::exists(path("sim/pcgp_n5_d2_seed14.csv")));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({"simulate", "--scenario", "pcgp", "--n", "20", "--d", "5", "--seed", "1"})
                .code,
            2);
  EXPECT_EQ(cli({"simulate", "--scenario", "xgp", "--n", "20", "--d", "5", "--seed", "1",
                 "--out", path("x")})
                .code,
            2);
  EXPECT_EQ(cli({"simulate", "--scenario", "pcgp", "--lambda", "5", "--n", "20", "--d", "5",
                 "--seed", "1", "--out", path("x")})
                .code,
            2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"sbc", "--model", "pchsgp", "--trials", "5", "--n", "10", "--d", "2",
                 "--out", path("sbc")})
                .code,
            2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, FitRetainsPostWarmupDrawsAndIsDeterministic) {
  ASSERT_EQ(cli({"simulate", "--scenario", "pcgp", "--n", "5", "--d", "1", "--seed", "2",
                 "--out", path("sim")})
                .code,
            0);
  const std::vector<std::string> base = {"fit",    "--model", "shsgp", "--data",
                                         path("sim/pcgp_n5_d1_seed2.csv"),
                                         "--m",    "5",       "--seed", "9"};
  auto with_out = [&](const std::string& out) {
    auto a = base;
    a.insert(a.end(), {"--out", out});
    return a;
  };
  const CliResult r1 = cli(with_out(path("fit1")));
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_NE(r1.err.find("ignores the y_g block"), std::string::npos);
  const io::CsvTable draws = io::read_csv(path("fit1/draws.csv"));
  EXPECT_EQ(draws.rows.size(), 1000u);

  const nlohmann::json diag =
      nlohmann::json::parse(io::read_text(path("fit1/diagnostics.json")));
  std::set<std::string> named;
  for (const auto& p : diag.at("parameters")) named.insert(p.at("name").get<std::string>());
  for (const auto& h : draws.header) EXPECT_TRUE(named.count(h)) << h;
  EXPECT_TRUE(diag.contains("wall_time_seconds"));
  EXPECT_TRUE(diag.contains("basis_clamp_count"));
  EXPECT_TRUE(diag.at("accuracy").contains("rmse_x"));

  ASSERT_EQ(cli(with_out(path("fit2"))).code, 0);
  EXPECT_EQ(io::read_text(path("fit1/draws.csv")), io::read_text(path("fit2/draws.csv")));

  const CliResult rep = cli({"replay", "--manifest", path("fit1/manifest.json"), "--out",
                       path("fit3")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(io::read_text(path("fit1/draws.csv")), io::read_text(path("fit3/draws.csv")));
  EXPECT_EQ(io::read_text(path("fit1/summary.csv")), io::read_text(path("fit3/summary.csv")));
}

TEST_F(CliTest, FitChainsAndShortRuns) {
  ASSERT_EQ(cli({"simulate", "--scenario", "dgp", "--n", "6", "--d", "2", "--seed", "3",
                 "--out", path("sim")})
                .code,
            0);
  const CliResult r = cli({"fit", "--model", "pdhsgp", "--data", path("sim/dgp_n6_d2_seed3.csv"),
                     "--m", "5", "--iters", "200", "--warmup", "100", "--chains", "2",
                     "--seed", "1", "--out", path("fit")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_csv(path("fit/draws.csv")).rows.size(), 200u);
  const auto header = io::read_csv(path("fit/draws.csv")).header;
  EXPECT_NE(std::find(header.begin(), header.end(), "rho[2]"), header.end());
  EXPECT_NE(std::find(header.begin(), header.end(), "C[2,1]"), header.end());
}

TEST_F(CliTest, CompositeModelNeedsBothBlocks) {
  io::write_atomic(path("one.csv"), "id,x_tilde,y_f_1\n1,0.5,1.0\n2,1.5,2.0\n3,2.5,0.0\n");
  const CliResult r = cli({"fit", "--model", "pchsgp", "--data", path("one.csv"), "--iters", "50",
                     "--warmup", "25", "--out", path("fit")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("needs y_g"), std::string::npos);
}

TEST_F(CliTest, SbcIsDeterministicAndReports) {
  const std::vector<std::string> args = {"sbc",     "--model", "shsgp", "--trials", "20",
                                         "--n",     "3",       "--d",   "1",        "--m",
                                         "5",       "--iters", "200",   "--warmup", "100",
                                         "--seed",  "5",       "--no-strict"};
  auto a1 = args;
  a1.insert(a1.end(), {"--out", path("a")});
  auto a2 = args;
  a2.insert(a2.end(), {"--out", path("b"), "--threads", "1"});
  ASSERT_EQ(cli(a1).code, 0);
  ASSERT_EQ(cli(a2).code, 0);
  EXPECT_EQ(io::read_text(path("a/ranks.csv")), io::read_text(path("b/ranks.csv")));
  const nlohmann::json rep = nlohmann::json::parse(io::read_text(path("a/sbc_report.json")));
  EXPECT_EQ(rep.at("H").get<int>(), 20);
  bool has_x = false;
  for (const auto& c : rep.at("classes")) has_x |= c.at("class") == "x";
  EXPECT_TRUE(has_x);
}

TEST(PriorOverrides, ParsesKeys) {
  const PriorSet p = cli::apply_prior_overrides(PriorSet::pcgp_simulation(),
                                                "# comment\nrho_f.loc = 2.5\n"
                                                "alpha_g.scale=0.5  # tail\n"
                                                "latent=uniform\nuniform.hi=3\n"
                                                "mean.positive=false\n");
  EXPECT_EQ(p.f.rho.loc, 2.5);
  EXPECT_EQ(p.g.alpha.scale, 0.5);
  EXPECT_EQ(p.latent, LatentPriorKind::Uniform);
  EXPECT_EQ(p.uniform_hi, 3.0);
  EXPECT_FALSE(p.mean_positive);
  EXPECT_THROW(cli::apply_prior_overrides(PriorSet{}, "nope=1"), InvalidInput);
  EXPECT_THROW(cli::apply_prior_overrides(PriorSet{}, "rho_f.loc=abc"), InvalidInput);
  EXPECT_THROW(cli::apply_prior_overrides(PriorSet{}, "rho_f.scale=0"), InvalidInput);
}

class CaseStudyTest : public CliTest {
 protected:
  void write_pair(int cells, bool mismatch = false) {
    std::string a = "cell_id,exp_time,g1,g2,g3\n";
    std::string b = "cell_id,exp_time,g1,g2,g3\n";
    for (int i = 0; i < cells; ++i) {
      const double t = static_cast<double>(i) / (cells - 1);
      const std::string id = "c" + std::to_string(i);
      a += id + ',' + io::format_double(t) + ',' + io::format_double(3 + std::sin(6 * t)) + ',' +
           io::format_double(10 * t * t) + ',' + io::format_double(std::cos(4 * t + i)) + '\n';
      const std::string idb = (mismatch && i == 0) ? "zz" : id;
      b += idb + ',' + io::format_double(t) + ',' + io::format_double(6 * std::cos(6 * t)) +
           ',' + io::format_double(20 * t) + ',' + io::format_double(i % 3) + '\n';
    }
    io::write_atomic(path("a.csv"), a);
    // reversed row order exercises the join
    io::CsvTable tb = io::parse_csv(b);
    std::reverse(tb.rows.begin(), tb.rows.end());
    io::write_atomic(path("b.csv"), io::to_csv(tb));
  }
};

TEST_F(CaseStudyTest, JoinSelectStandardize) {
  write_pair(30);
  const auto d = cli::load_case_study(path("a.csv"), path("b.csv"), {"g1", "g2"}, 0, 1);
  ASSERT_EQ(d.y_f.rows(), 30);
  ASSERT_EQ(d.y_f.cols(), 2);
  EXPECT_EQ(d.cell_ids[3], "c3");
  for (const Eigen::MatrixXd* m : {&d.y_f, &d.y_g}) {
    for (Eigen::Index c = 0; c < m->cols(); ++c) {
      const Eigen::ArrayXd col = m->col(c).array();
      EXPECT_LT(std::abs(col.mean()), 1e-12);
      EXPECT_NEAR(std::sqrt(col.square().sum() / (col.size() - 1)), 1.0, 1e-12);
    }
  }
  // the joined second file row for c3 carries g2 = 20 t before scaling; t rises with the id
  EXPECT_LT(d.y_g(2, 1), d.y_g(3, 1));
}

TEST_F(CaseStudyTest, SubsampleIsDeterministic) {
  write_pair(40);
  const auto a = cli::load_case_study(path("a.csv"), path("b.csv"), {}, 12, 7);
  const auto b = cli::load_case_study(path("a.csv"), path("b.csv"), {}, 12, 7);
  const auto c = cli::load_case_study(path("a.csv"), path("b.csv"), {}, 12, 8);
  EXPECT_EQ(a.cell_ids.size(), 12u);
  EXPECT_EQ(a.cell_ids, b.cell_ids);
  EXPECT_NE(a.cell_ids, c.cell_ids);
  EXPECT_EQ(a.genes.size(), 3u);
}

TEST_F(CaseStudyTest, Errors) {
  write_pair(10, true);
  EXPECT_THROW(cli::load_case_study(path("a.csv"), path("b.csv"), {}, 0, 1), InvalidInput);
  write_pair(10);
  try {
    cli::load_case_study(path("a.csv"), path("b.csv"), {"g9"}, 0, 1);
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("g1, g2, g3"), std::string::npos);
  }
  io::write_atomic(path("bad.csv"), "cell_id,exp_time,g1\nc0,0.5,1\nc1,0.7,oops\n");
  try {
    cli::load_case_study(path("bad.csv"), path("bad.csv"), {"g1"}, 0, 1);
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  io::write_atomic(path("late.csv"), "cell_id,exp_time,g1\nc0,0.5,1\nc1,1.7,2\n");
  EXPECT_THROW(cli::load_case_study(path("late.csv"), path("late.csv"), {"g1"}, 0, 1),
               InvalidInput);
}

TEST_F(CaseStudyTest, RunsEndToEnd) {
  write_pair(12);
  const CliResult r = cli({"casestudy", "--unspliced", path("a.csv"), "--spliced", path("b.csv"),
                     "--genes", "g1,g2", "--m", "5", "--iters", "200", "--warmup", "100",
                     "--seed", "3", "--out", path("cs")});
  ASSERT_EQ(r.code, 0) << r.err;
  const io::CsvTable t = io::read_csv(path("cs/ordering.csv"));
  EXPECT_EQ(t.rows.size(), 12u);
  const Eigen::VectorXd mean = t.numeric_column(t.column("mean"));
  EXPECT_GE(mean.minCoeff(), 0.0);
  EXPECT_LE(mean.maxCoeff(), 1.0);
  EXPECT_EQ(cli({"casestudy", "--spliced", path("b.csv"), "--out", path("cs2")}).code, 2);
  EXPECT_EQ(cli({"casestudy", "--unspliced", path("a.csv"), "--spliced", path("b.csv"),
                 "--genes", "nope", "--out", path("cs3")})
                .code,
            1);
}

}  // namespace
}  // namespace lhsgp
