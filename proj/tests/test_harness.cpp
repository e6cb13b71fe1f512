#include <gtest/gtest.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ergodec/harness.hpp"

namespace ergodec::harness {
namespace {

namespace fs = std::filesystem;

TEST(ExperimentConfigTest, ParsesScalarsListsAndRationals) {
  const auto cfg = ExperimentConfig::from_string(
      "window = 64\nweights = [0.3, 0.7]\nparams = [\"1/5\", \"4/5\"]\nmodel = \"beta\"\ntolerance = 0.5\n");
  EXPECT_EQ(cfg.get_size("window", 1), 64u);
  EXPECT_EQ(cfg.get_string("model", "x"), "beta");
  EXPECT_EQ(cfg.get_double("tolerance", 0.0), 0.5);
  EXPECT_EQ(cfg.get_rational_list("weights", {}), (std::vector<Rational>{Rational(3, 10), Rational(7, 10)}));
  EXPECT_EQ(cfg.get_rational_list("params", {}), (std::vector<Rational>{Rational(1, 5), Rational(4, 5)}));
  EXPECT_EQ(cfg.get_size("missing", 9), 9u);
  EXPECT_EQ(cfg.echoed().at("missing"), "9");
  EXPECT_EQ(cfg.echoed().at("weights"), "[3/10,7/10]");
}

TEST(ExperimentConfigTest, SchemaErrors) {
  EXPECT_THROW(ExperimentConfig::from_string("window = 4\n").require_known({"samples"}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_string("[section]\nx = 1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_string("window = -3\n").get_size("window", 1), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_string("window = 4.5\n").get_size("window", 1), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_string("window = [1, 2]\n").get_size("window", 1), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_string("p = \"a/b\"\n").get_rational("p", Rational(0)), ConfigError);
  EXPECT_THROW(run("nope", ExperimentConfig{}, RunOptions{}), ConfigError);
  EXPECT_THROW(run("validate", ExperimentConfig::from_string("bogus = 1\n"), RunOptions{}), ConfigError);
  EXPECT_THROW(run("sigma-finite", ExperimentConfig::from_string("orbits = [1, 1]\nweights = [1, 2]\n"),
                   RunOptions{}),
               ConfigError);
}

ExperimentConfig small_definetti() {
  return ExperimentConfig::from_string(
      "window = 512\nsamples = 300\nschedule = [128, 256, 512]\ntolerance = 0.03\nmc_samples = 1000\n"
      "max_nonconvergence = 0.05\nresidual_tolerance = 0.05\nrecovery_tolerance = 0.1\nprobes = 5\n");
}

double parse_double(const std::string& s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  EXPECT_TRUE(ec == std::errc() && ptr == s.data() + s.size()) << s;
  return v;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted && c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = !quoted;
      } else if (c == ',' && !quoted) {
        cells.emplace_back();
      } else {
        cells.back() += c;
      }
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

TEST(ResultRecordTest, CsvMatchesJsonBitExact) {
  const auto rec = run("definetti", small_definetti(), RunOptions{3, 1});
  const auto j = rec.to_json();
  ASSERT_FALSE(rec.tables.empty());
  for (const auto& t : rec.tables) {
    const auto csv = read_csv(t.to_csv());
    const auto& jt = j["tables"][t.name];
    ASSERT_EQ(csv.size(), jt["rows"].size() + 1);
    EXPECT_EQ(csv[0], jt["columns"].get<std::vector<std::string>>());
    for (std::size_t r = 0; r < jt["rows"].size(); ++r) {
      for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const auto& cell = jt["rows"][r][c];
        if (cell.is_number_float()) {
          const double a = parse_double(csv[r + 1][c]);
          const double b = json::parse(json(cell.get<double>()).dump()).get<double>();
          EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0) << t.name << " row " << r << " col " << c;
        } else if (cell.is_number_integer()) {
          EXPECT_EQ(csv[r + 1][c], std::to_string(cell.get<std::int64_t>()));
        } else {
          EXPECT_EQ(csv[r + 1][c], cell.get<std::string>());
        }
      }
    }
  }
}

TEST(ResultRecordTest, DeterministicAcrossRunsAndWorkers) {
  const auto a = run("definetti", small_definetti(), RunOptions{5, 1}).to_json().dump(2);
  const auto b = run("definetti", small_definetti(), RunOptions{5, 1}).to_json().dump(2);
  const auto c = run("definetti", small_definetti(), RunOptions{5, 4}).to_json().dump(2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  const auto d = run("definetti", small_definetti(), RunOptions{6, 1}).to_json().dump(2);
  EXPECT_NE(a, d);
  EXPECT_EQ(Table::csv_field("r{1,2}"), "\"r{1,2}\"");
  EXPECT_EQ(Table::csv_field("a\"b"), "\"a\"\"b\"");
  EXPECT_EQ(run("validate", ExperimentConfig{}, RunOptions{2, 1}).to_json(),
            run("validate", ExperimentConfig{}, RunOptions{2, 1}).to_json());
}

TEST(ResultRecordTest, RecordShape) {
  const auto rec = run("orbital", ExperimentConfig{}, RunOptions{});
  EXPECT_TRUE(rec.passed()) << rec.to_json().dump(2);
  const auto j = rec.to_json();
  EXPECT_EQ(j["experiment"], "orbital");
  EXPECT_FALSE(j["config"].contains("workers"));
  EXPECT_EQ(j["config"]["window"], "4096");
  EXPECT_EQ(j["summary"]["typical_limit"]["method"], "monte-carlo");
  EXPECT_TRUE(j["summary"]["typical_limit"].contains("stderr"));
  EXPECT_EQ(rec.table("orbital_sparse").columns,
            (std::vector<std::string>{"level", "function", "value", "stderr", "method"}));
}

TEST(ResultRecordTest, WritesArtifacts) {
  const fs::path dir = fs::temp_directory_path() / "ergodec_harness_artifacts";
  fs::remove_all(dir);
  const auto rec = run("kolmogorov", ExperimentConfig::from_string("samples = 200\nwindow = 256\n"), RunOptions{});
  write_artifacts(rec, dir);
  EXPECT_TRUE(fs::exists(dir / "results.json"));
  EXPECT_TRUE(fs::exists(dir / "kolmogorov.txt"));
  std::ifstream in(dir / "results.json");
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(text.str(), rec.to_json().dump(2) + "\n");
  fs::remove_all(dir);
}

int cli(const std::string& args) {
  const std::string cmd = std::string(ERGODEC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodes) {
  const fs::path dir = fs::temp_directory_path() / "ergodec_cli_exit";
  fs::create_directories(dir);
  const auto write = [&dir](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  const std::string out = " --out " + (dir / "out").string();
  EXPECT_EQ(cli("validate" + out), 0);
  EXPECT_EQ(cli("sigma-finite --seed 4" + out), 0);
  EXPECT_EQ(cli("validate --config " + write("bad.toml", "bogus = 1\n") + out), 2);
  EXPECT_EQ(cli("validate --workers 0" + out), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("validate --config " + write("cap.toml", "invariance_window = 9\n") + out), 3);
  EXPECT_EQ(cli("orbital --config " + write("fail.toml", "sparse_schedule = [3, 4]\n") + out), 1);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace ergodec::harness
