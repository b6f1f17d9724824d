#include "tvvine/config.hpp"
#include "tvvine/ingest.hpp"
#include "tvvine/serialize.hpp"
#include "tvvine/synth.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tvvine;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "tvvine_cli_tests";

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + TVVINE_CLI_PATH + "\" " + args + " > \"" +
                          (kWork / "last_stdout.txt").string() + "\" 2> \"" + (kWork / "last_stderr.txt").string() +
                          "\"";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

// A small three-series panel shared by the process tests.
fs::path small_panel() {
  static const fs::path path = [] {
    fs::create_directories(kWork);
    synth::SynthOptions o;
    o.rows = 301;
    auto d = synth::generate(synth::default_model(), o);
    std::vector<ingest::NamedSeries> s(d.levels.series.begin(), d.levels.series.begin() + 3);
    const auto f = kWork / "small.csv";
    ingest::write_panel(f.string(), d.levels.dates, s);
    return f;
  }();
  return path;
}

std::string fast_fit_flags() { return "--families gaussian,gumbel --input \"" + small_panel().string() + "\""; }

}  // namespace

TEST(Config, TextRoundTrip) {
  RunConfig c;
  c.columns = {"X1", "X3"};
  c.mode = vine::Mode::DVine;
  c.gamma = 0.3;
  c.alphas = {0.95, 0.99};
  c.seed = 7;
  c.window = 123;
  c.families = {copula::Family::Gumbel};
  c.weights = WeightSource::Gdp;
  c.gdp_file = "g.csv";
  EXPECT_EQ(parse_config(config_to_string(c)), c);
  EXPECT_EQ(parse_config(config_to_string(RunConfig{})), RunConfig{});
}

TEST(Config, ParsesCommentsAndOverrides) {
  const auto c = parse_config("# comment\nwindow = 50\n\nmode = cvine  # trailing\nsims=20\n");
  EXPECT_EQ(c.window, 50u);
  EXPECT_EQ(c.mode, vine::Mode::CVine);
  EXPECT_EQ(c.sims, 20u);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.marginals_path(), (fs::path("out") / "marginals.json").string());
}

TEST(Config, Errors) {
  try {
    (void)parse_config("window = 5\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  EXPECT_THROW((void)parse_config("window = abc\n"), ConfigError);
  EXPECT_THROW((void)parse_config("mode = tree\n"), ConfigError);
  EXPECT_THROW((void)parse_config("no equals sign\n"), ConfigError);
  RunConfig c;
  c.alphas = {1.5};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Serialize, MarginalsRoundTrip) {
  const auto m = synth::default_model().marginals;
  const auto text = io::marginals_to_string(m);
  const auto back = io::marginals_from_string(text);
  ASSERT_EQ(back.size(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(back[i].name, m[i].name);
    EXPECT_EQ(back[i].omega, m[i].omega);
    EXPECT_EQ(back[i].phi, m[i].phi);
    EXPECT_EQ(back[i].nu, m[i].nu);
  }
  EXPECT_EQ(io::marginals_to_string(back), text);
}

TEST(Serialize, VineRoundTrip) {
  const auto v = synth::default_model().vine;
  const auto text = io::vine_to_string(v);
  const auto back = io::vine_from_string(text);
  EXPECT_EQ(io::vine_to_string(back), text);
  EXPECT_EQ(back.structure.n, v.structure.n);
}

TEST(Serialize, VersionMismatch) {
  auto j = nlohmann::json::parse(io::vine_to_string(synth::default_model().vine));
  j["format_version"] = io::kFormatVersion + 1;
  EXPECT_THROW((void)io::vine_from_string(j.dump()), io::ArtifactError);
  j["format_version"] = io::kFormatVersion;
  j["kind"] = "marginals";
  EXPECT_THROW((void)io::vine_from_string(j.dump()), io::ArtifactError);
  EXPECT_THROW((void)io::load_vine((kWork / "does_not_exist.json").string()), io::ArtifactError);
}

TEST(Cli, StatsOnToyPanel) {
  fs::create_directories(kWork);
  const auto toy = kWork / "toy.csv";
  {
    std::ofstream f(toy);
    f << "date,A,B\n";
    for (int k = 0; k < 40; ++k)
      f << "2020-01-" << (k < 9 ? "0" : "") << (k % 28) + 1 << ",1,1\n";
  }
  // dates above repeat, so this file is rejected
  EXPECT_NE(run("stats --input \"" + toy.string() + "\" --out \"" + (kWork / "toy_out").string() + "\""), 0);
  {
    std::ofstream f(toy);
    f << "date,A,B\n";
    double a = 1, b = 2;
    for (int k = 0; k < 28; ++k) {
      a *= 1.0 + 0.01 * ((k * 7) % 5 - 2);
      b *= 1.0 + 0.02 * ((k * 3) % 4 - 1.5);
      f << "2020-02-" << (k < 9 ? "0" : "") << k + 1 << "," << a << "," << b << "\n";
    }
  }
  ASSERT_EQ(run("stats --input \"" + toy.string() + "\" --out \"" + (kWork / "toy_out").string() + "\""), 0)
      << slurp(kWork / "last_stderr.txt");
  EXPECT_EQ(count_lines(kWork / "toy_out" / "stats.csv"), 3u);
}

TEST(Cli, EmptyInputFails) {
  fs::create_directories(kWork);
  const auto empty = kWork / "empty.csv";
  std::ofstream(empty).close();
  EXPECT_NE(run("stats --input \"" + empty.string() + "\""), 0);
  const auto err = slurp(kWork / "last_stderr.txt");
  EXPECT_EQ(err.rfind("error: ", 0), 0u) << err;
}

TEST(Cli, MissingArtifactsFail) {
  EXPECT_NE(run("simulate --out \"" + (kWork / "nothing_here").string() + "\""), 0);
  EXPECT_NE(run("backtest --input \"" + small_panel().string() + "\" --out \"" + (kWork / "nothing_here").string() +
                "\""),
            0);
  EXPECT_NE(run("fit --mode spiral"), 0);
}

TEST(Cli, SynthIsDeterministic) {
  const auto a = kWork / "synth_a", b = kWork / "synth_b";
  ASSERT_EQ(run("synth --rows 200 --out \"" + a.string() + "\""), 0);
  ASSERT_EQ(run("synth --rows 200 --out \"" + b.string() + "\""), 0);
  EXPECT_EQ(slurp(a / "synthetic_levels.csv"), slurp(b / "synthetic_levels.csv"));
  EXPECT_EQ(count_lines(a / "synthetic_levels.csv"), 201u);
  ASSERT_EQ(run("synth --rows 200 --seed 9 --out \"" + b.string() + "\""), 0);
  EXPECT_NE(slurp(a / "synthetic_levels.csv"), slurp(b / "synthetic_levels.csv"));
}

TEST(Cli, FitEveryModeThenSimulate) {
  for (const std::string mode : {"rvine", "cvine", "dvine"}) {
    const auto out = kWork / ("fit_" + mode);
    ASSERT_EQ(run("fit " + fast_fit_flags() + " --mode " + mode + " --out \"" + out.string() + "\""), 0)
        << slurp(kWork / "last_stderr.txt");
    const auto v = io::load_vine((out / "vine.json").string());
    EXPECT_EQ(v.structure.n, 3);
    std::size_t edges = 0;
    for (const auto& t : v.edges) edges += t.size();
    EXPECT_EQ(edges, 3u);
    EXPECT_EQ(io::load_marginals((out / "marginals.json").string()).size(), 3u);
    EXPECT_NE(slurp(kWork / "last_stdout.txt").find("AIC"), std::string::npos);
  }
  const auto out = kWork / "fit_rvine";
  ASSERT_EQ(run("simulate --draws 50 --input \"" + small_panel().string() + "\" --out \"" + out.string() + "\""), 0)
      << slurp(kWork / "last_stderr.txt");
  EXPECT_EQ(count_lines(out / "simulated.csv"), 51u);
}

TEST(Cli, BacktestSmokeAndDeterminism) {
  const auto out = kWork / "fit_dvine";
  if (!fs::exists(out / "vine.json")) {
    ASSERT_EQ(run("fit " + fast_fit_flags() + " --mode dvine --out \"" + out.string() + "\""), 0);
  }
  const std::string base = "backtest --input \"" + small_panel().string() + "\" --window 10 --sims 200 --out \"";
  ASSERT_EQ(run(base + out.string() + "\""), 0) << slurp(kWork / "last_stderr.txt");
  const auto first = slurp(out / "var_0.99.csv");
  const auto summary = slurp(out / "summary.csv");
  EXPECT_EQ(count_lines(out / "var_0.99.csv"), 11u);
  EXPECT_NE(summary.find("alpha,fail_times,fail_rate,p_value,LR,loss,mad"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "var_chart.svg"));
  ASSERT_EQ(run(base + out.string() + "\" --threads 2"), 0);
  EXPECT_EQ(slurp(out / "var_0.99.csv"), first);
  EXPECT_EQ(slurp(out / "summary.csv"), summary);
}

TEST(Cli, GdpWeights) {
  const auto out = kWork / "fit_dvine";
  if (!fs::exists(out / "vine.json")) {
    ASSERT_EQ(run("fit " + fast_fit_flags() + " --mode dvine --out \"" + out.string() + "\""), 0);
  }
  const auto gdp = kWork / "gdp.csv";
  {
    std::ofstream f(gdp);
    f << "name,gdp\nX1,1\nX2,2\nX3,1\n";
  }
  const std::string base = "backtest --input \"" + small_panel().string() + "\" --window 5 --sims 100 --alphas 0.95 --out \"" +
                           out.string() + "\" --weights gdp --gdp-file \"";
  ASSERT_EQ(run(base + gdp.string() + "\""), 0) << slurp(kWork / "last_stderr.txt");
  EXPECT_EQ(count_lines(out / "var_0.95.csv"), 6u);
  {
    std::ofstream f(gdp);
    f << "name,gdp\nX1,1\nX2,-2\nX3,1\n";
  }
  EXPECT_NE(run(base + gdp.string() + "\""), 0);
}
