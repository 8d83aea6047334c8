#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gvarsv/chain.hpp"
#include "gvarsv/io/csv.hpp"
#include "gvarsv/io/fetch.hpp"
#include "gvarsv/io/persist.hpp"
#include "gvarsv/io/synthetic.hpp"

using namespace gvarsv;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("gvarsv_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

const char* kTrade = "country,AA,BB\nAA,0,3\nBB,1,0\n";

}  // namespace

TEST(Csv, SplitsQuotedFields) {
  EXPECT_EQ(split_csv_line("a, \"b,c\" ,d"), (std::vector<std::string>{"a", "b,c", "d"}));
  EXPECT_EQ(split_csv_line("\"say \"\"hi\"\"\",x"), (std::vector<std::string>{"say \"hi\"", "x"}));
  EXPECT_TRUE(std::isnan(parse_double("NA", "t")));
  EXPECT_TRUE(std::isnan(parse_double("", "t")));
  EXPECT_THROW(parse_double("1.2.3", "t"), UserError);
  EXPECT_EQ(parse_double(format_double(0.1 + 0.2), "t"), 0.1 + 0.2);
}

TEST(Csv, MonthParsing) {
  EXPECT_EQ(format_month(parse_month("2007-03-31", "t")), "2007-03");
  EXPECT_THROW(parse_month("2007-13", "t"), UserError);
  EXPECT_THROW(monthly_grid({parse_month("2000-01", "t"), parse_month("2000-03", "t")}, "t"), UserError);
}

TEST(Panel, PivotsLongFormat) {
  TempDir tmp;
  std::string csv = "date,country,variable,value\n";
  for (int t = 1; t <= 3; ++t)
    for (const char* c : {"AA", "BB"}) {
      csv += "2001-0" + std::to_string(t) + "," + c + ",ip," + std::to_string(t * 10 + (c[0] == 'B')) + "\n";
      csv += "2001-0" + std::to_string(t) + "," + c + ",cpi,1\n";
    }
  RunConfig cfg;
  cfg.trade_path = tmp.write("trade.csv", kTrade);
  cfg.variables = {{"ip", Transform::kLevel}, {"cpi", Transform::kLog}};
  const PanelData p = load_panel(tmp.write("panel.csv", csv), cfg);
  EXPECT_EQ(p.T(), 3);
  EXPECT_EQ(p.N(), 2);
  EXPECT_EQ(p.k(), 2);
  EXPECT_EQ(p.value(2, 1, 0), 31.0);
  EXPECT_EQ(p.value(0, 0, 1), 0.0);  // log(1)
  EXPECT_EQ(p.dates.front(), "2001-01");
  EXPECT_EQ(p.trade_flows(0, 1), 4.0);  // total trade, both directions
}

TEST(Panel, YearOnYearDropsFirstYear) {
  TempDir tmp;
  std::string csv = "date,country,variable,value\n";
  for (int t = 0; t < 14; ++t) {
    char date[8];
    std::snprintf(date, sizeof date, "%04d-%02d", 2000 + t / 12, t % 12 + 1);
    csv += std::string(date) + ",AA,cpi," + format_double(t < 12 ? 1.0 : 2.0) + "\n";
  }
  RunConfig cfg;
  cfg.variables = {{"cpi", Transform::kYoy}};
  const PanelData p = load_panel(tmp.write("panel.csv", csv), cfg);
  ASSERT_EQ(p.T(), 2);
  EXPECT_EQ(p.dates.front(), "2001-01");
  EXPECT_EQ(p.value(0, 0, 0), 1.0);  // doubling
  EXPECT_EQ(p.trade_flows.rows(), 1);
}

TEST(Panel, MissingCellsAreListed) {
  TempDir tmp;
  const std::string csv =
      "date,country,variable,value\n2001-01,AA,ip,1\n2001-01,BB,ip,2\n2001-02,AA,ip,NA\n2001-03,AA,ip,3\n2001-03,BB,ip,4\n";
  RunConfig cfg;
  cfg.trade_path = tmp.write("trade.csv", kTrade);
  const std::string msg = message_of([&] { load_panel(tmp.write("panel.csv", csv), cfg); });
  EXPECT_NE(msg.find("2 missing"), std::string::npos) << msg;
  EXPECT_NE(msg.find("(2001-02, AA, ip)"), std::string::npos) << msg;
  EXPECT_NE(msg.find("(2001-02, BB, ip)"), std::string::npos) << msg;
}

TEST(Panel, RejectsGapsDuplicatesAndMissingTrade) {
  TempDir tmp;
  RunConfig cfg;
  cfg.trade_path = tmp.write("trade.csv", kTrade);
  EXPECT_NE(message_of([&] { load_panel(tmp.write("gap.csv", "date,country,variable,value\n2001-01,AA,ip,1\n2001-03,AA,ip,1\n"), cfg); })
                .find("non-monthly"),
            std::string::npos);
  EXPECT_NE(message_of([&] { load_panel(tmp.write("dup.csv", "date,country,variable,value\n2001-01,AA,ip,1\n2001-01,AA,ip,2\n"), cfg); })
                .find("duplicate"),
            std::string::npos);
  RunConfig no_trade;
  EXPECT_THROW(load_panel(tmp.write("two.csv", "date,country,variable,value\n2001-01,AA,ip,1\n2001-01,BB,ip,2\n"), no_trade), UserError);
}

TEST(Trade, ReordersToConfiguredCountries) {
  TempDir tmp;
  const auto path = tmp.write("trade.csv", "AA,BB,CC\n0,1,2\n3,0,4\n5,6,0\n");
  const Eigen::MatrixXd m = load_trade_flows(path, {"CC", "AA", "BB"});
  EXPECT_EQ(m(0, 1), 5.0);
  EXPECT_EQ(m(1, 0), 2.0);
  EXPECT_EQ(m(2, 0), 4.0);
  EXPECT_THROW(load_trade_flows(path, {"AA", "ZZ"}), UserError);
}

TEST(Yields, NelsonSiegelFactorsEnterPanel) {
  TempDir tmp;
  std::string yields = "date,country,maturity_months,yield\n";
  const double mats[] = {3, 12, 24, 60, 120};
  for (int t = 1; t <= 2; ++t)
    for (double m : mats)
      yields += "2001-0" + std::to_string(t) + ",AA," + format_double(m) + "," +
                format_double(ns_loadings(m).dot(Eigen::Vector3d(4.0 + t, -1.0, 0.5))) + "\n";
  RunConfig cfg;
  cfg.yields_path = tmp.write("yields.csv", yields);
  cfg.variables = {{"ip", Transform::kLevel}, {"ns_level", Transform::kLevel}, {"ns_slope", Transform::kLevel}};
  const PanelData p =
      load_panel(tmp.write("panel.csv", "date,country,variable,value\n2001-01,AA,ip,1\n2001-02,AA,ip,2\n"), cfg);
  EXPECT_NEAR(p.value(1, 0, 1), 6.0, 1e-8);
  EXPECT_NEAR(p.value(0, 0, 2), -1.0, 1e-8);

  const YieldPanel yp = load_yields(cfg.yields_path);
  EXPECT_EQ(yp.M(), 5);
  EXPECT_EQ(yp.T(), 2);
}

TEST(Config, ParsesAndResolvesPaths) {
  TempDir tmp;
  tmp.write("p.csv", "x");
  const auto path = tmp.write("run.json", R"({
    "data": {"panel": "p.csv", "countries": ["AA"], "variables": ["ip", {"name": "cpi", "transform": "yoy"}]},
    "model": {"P": 1, "Q": 1, "d": 2},
    "mcmc": {"n_iter": 100, "n_burn": 50, "thin": 5, "seed": 9},
    "irf": {"horizon": 24, "mode": "ar", "rho": 0.9},
    "dic_grid": [{"d": 1}, {"d": 3}]
  })");
  const RunConfig c = load_run_config(path);
  EXPECT_EQ(c.panel_path, tmp.path() / "p.csv");
  EXPECT_EQ(c.spec.d, 2);
  EXPECT_EQ(c.mcmc.retained(), 10);
  EXPECT_EQ(c.variables[1].transform, Transform::kYoy);
  EXPECT_EQ(c.irf.horizon, 24);
  ASSERT_EQ(c.dic_grid.size(), 2u);
  EXPECT_EQ(c.dic_grid[1].d, 3);
  EXPECT_EQ(c.dic_grid[1].P, 1);  // inherits the model block

  EXPECT_THROW(run_config_from_json(json::parse(R"({"mcmc": {"n_iter": 10, "n_burn": 20}})")), UserError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"irf": {"mode": "x"}})")), UserError);
  EXPECT_THROW(load_run_config(tmp.write("bad.json", R"({"data": {"panel": "nope.csv"}})")), UserError);
}

TEST(Synthetic, SameSeedSameData) {
  SyntheticSpec spec;
  spec.dims.T = 80;
  const auto a = generate_synthetic(spec, 5), b = generate_synthetic(spec, 5), c = generate_synthetic(spec, 6);
  EXPECT_EQ(panel_to_csv(a.panel), panel_to_csv(b.panel));
  EXPECT_NE(panel_to_csv(a.panel), panel_to_csv(c.panel));
}

TEST(Synthetic, ArOneRecoveredByYuleWalker) {
  SyntheticSpec spec;
  spec.dims = Dimensions{1, 2, 1, 1, 1, 5000};
  spec.time_varying = false;
  spec.stochastic_volatility = false;
  spec.sigma_h = 1e-12;
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(2, 4);
  c0(0, 1) = 0.6;
  c0(1, 2) = -0.3;
  spec.c0 = c0;
  spec.loadings = Eigen::MatrixXd::Zero(2, 1);
  const PanelData p = generate_synthetic(spec, 7).panel;
  for (int r = 0; r < 2; ++r) {
    const Eigen::VectorXd y = p.y.col(r).array() - p.y.col(r).mean();
    const double rho1 = y.head(y.size() - 1).dot(y.tail(y.size() - 1)) / y.squaredNorm();
    EXPECT_NEAR(rho1, r == 0 ? 0.6 : -0.3, 0.05);
  }
}

TEST(Synthetic, InMeanChannelHasTheSignOfBeta) {
  SyntheticSpec spec;
  spec.dims = Dimensions{2, 2, 1, 1, 1, 400};
  spec.time_varying = false;
  spec.stochastic_volatility = false;
  spec.sigma_h = 0.02;  // keeps exp(h) factor noise from swamping the mean channel
  spec.loading_scale = 0.1;
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(4, spec.dims.Ktilde());
  c0.col(spec.dims.impact_index()) << 1.0, -1.0, 1.0, -1.0;
  spec.c0 = c0;
  const auto d = generate_synthetic(spec, 8);
  const Eigen::VectorXd h = d.truth.vol.h;
  for (int r = 0; r < 4; ++r) {
    const Eigen::VectorXd y = d.panel.y.col(r).tail(h.size());
    const double c = (y.array() - y.mean()).matrix().dot((h.array() - h.mean()).matrix());
    EXPECT_EQ(c > 0, r % 2 == 0) << r;
  }
}

TEST(Synthetic, UnstableCoefficientsRejected) {
  SyntheticSpec spec;
  spec.dims = Dimensions{2, 1, 1, 1, 1, 50};
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(2, spec.dims.Ktilde());
  c0(0, 1) = c0(1, 1) = 1.5;
  spec.c0 = c0;
  EXPECT_THROW(generate_synthetic(spec, 1), UserError);
}

class PersistTest : public ::testing::Test {
 protected:
  static PosteriorChain make_chain() {
    SyntheticSpec syn;
    syn.dims = Dimensions{2, 2, 1, 1, 1, 40};
    const Model model(generate_synthetic(syn, 3).panel, ModelSpec{1, 1, 1});
    McmcConfig config;
    config.n_iter = 30;
    config.n_burn = 10;
    config.thin = 4;
    return run_chain(model, config);
  }
};

TEST_F(PersistTest, RoundTripIsBitwise) {
  TempDir tmp;
  const PosteriorChain chain = make_chain();
  ASSERT_EQ(chain.draws.size(), 5u);
  const json m1 = persist_chain(chain, tmp.path());
  EXPECT_EQ(m1["retained"], 5);
  EXPECT_EQ(m1["version"], kManifestVersion);
  const PosteriorChain back = load_chain(tmp.path());
  ASSERT_EQ(back.draws.size(), chain.draws.size());
  EXPECT_EQ(back.spec_hash, chain.spec_hash);
  EXPECT_EQ(back.dims, chain.dims);
  EXPECT_EQ(back.weights, chain.weights);
  EXPECT_EQ(back.dic.dbar, chain.dic.dbar);
  for (std::size_t n = 0; n < chain.draws.size(); ++n)
    EXPECT_EQ(to_json(back.draws[n]).dump(), to_json(chain.draws[n]).dump()) << n;

  // Saving what was loaded reproduces the manifest.
  EXPECT_EQ(persist_chain(back, tmp.path() / "again").dump(), m1.dump());
}

TEST_F(PersistTest, CorruptionNamesTheFile) {
  TempDir tmp;
  persist_chain(make_chain(), tmp.path());
  {
    std::fstream f(tmp.path() / "h.f64", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('\x7f');
  }
  const std::string msg = message_of([&] { load_chain(tmp.path()); });
  EXPECT_NE(msg.find("h.f64"), std::string::npos) << msg;

  fs::resize_file(tmp.path() / "c0.f64", 8);
  EXPECT_NE(message_of([&] { load_chain(tmp.path()); }).find("c0.f64"), std::string::npos);
  fs::remove(tmp.path() / "manifest.json");
  EXPECT_THROW(load_chain(tmp.path()), UserError);
}

TEST(Fetch, CacheHitSkipsNetwork) {
  TempDir tmp;
  FetchRequest req{"IPUS", "2000-01", "2000-03", "https://example.invalid/{id}?from={start}", false, tmp.path()};
  tmp.write(cache_key(req), "date,value\n2000-01-01,1\n");
  int calls = 0;
  const FetchResult r = fetch_remote_series(req, [&](const std::string&) {
    ++calls;
    return HttpResponse{500, {}, {}};
  });
  EXPECT_TRUE(r.cache_hit);
  EXPECT_EQ(calls, 0);
}

TEST(Fetch, StubTransportStatuses) {
  TempDir tmp;
  FetchRequest req{"IP/US", "2000-01", "2000-03", "https://example.invalid/{id}?from={start}&to={end}", true, tmp.path()};
  std::string seen;
  auto stub = [&](int status, std::string body) {
    return [&seen, status, body](const std::string& url) {
      seen = url;
      return HttpResponse{status, body, {}};
    };
  };
  EXPECT_THROW(fetch_remote_series(req, stub(404, "")), NotFoundError);
  EXPECT_EQ(seen, "https://example.invalid/IP/US?from=2000-01&to=2000-03");
  EXPECT_NE(message_of([&] { fetch_remote_series(req, stub(503, "")); }).find("HTTP 503"), std::string::npos);

  const std::string raw = "DATE,VALUE\n2000-01-01,1.5\n2000-02-01,1.7\n2000-02-15,1.8\n2000-03-01,2.0\n";
  const FetchResult r = fetch_remote_series(req, stub(200, raw));
  EXPECT_FALSE(r.cache_hit);
  EXPECT_EQ(read_text(r.path), raw);

  // The pivoted series loads as a panel; the repeated month keeps its last value.
  const auto panel_path = tmp.write("panel.csv", "date,country,variable,value\n" + pivot_series_csv(raw, "US", "ip"));
  const PanelData p = load_panel(panel_path, RunConfig{});
  EXPECT_EQ(p.T(), 3);
  EXPECT_EQ(p.value(1, 0, 0), 1.8);

  req.network_enabled = false;
  req.series_id = "OTHER";
  EXPECT_THROW(fetch_remote_series(req, stub(200, raw)), UserError);
}
