#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vaca/config.hpp"
#include "vaca/experiment.hpp"

using namespace vaca;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vaca_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// exit status of the CLI; stderr goes to `err`
int cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(VACA_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, CanonicalTextRoundTrips) {
  for (const auto& [scm, sem] : std::vector<std::pair<std::string, std::string>>{
           {"collider", "LIN"}, {"triangle", "NLIN"}, {"loan", ""}, {"adult", ""}}) {
    const auto cfg = parse_config("[data]\nscm = " + scm + "\nsem = " + sem + "\n");
    const auto back = parse_config(cfg.to_text());
    EXPECT_EQ(back.to_text(), cfg.to_text()) << scm;
    EXPECT_EQ(back.model.to_json(), cfg.model.to_json()) << scm;
  }
  const auto swept = parse_config(
      "[data]\nscm = triangle\nsem = NLIN\n[sweep]\nmodel.dropout = 0.0, 0.1\n[run]\nseeds = 1, 2, 3\n");
  ASSERT_EQ(swept.sweep.size(), 1u);
  EXPECT_EQ(swept.sweep[0].values.size(), 2u);
  EXPECT_EQ(swept.run.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(parse_config(swept.to_text()).to_text(), swept.to_text());
}

TEST(Config, PresetsApplyUnlessDisabled) {
  const auto lin = parse_config("[data]\nscm = collider\nsem = LIN\n");
  EXPECT_TRUE(lin.model.residual);
  EXPECT_EQ(lin.model.decoder_hidden_layers, 2);
  EXPECT_DOUBLE_EQ(lin.model.dropout, 0.2);
  const auto off = parse_config("[data]\nscm = collider\nsem = LIN\n[model]\npreset = false\n");
  EXPECT_EQ(off.model.to_json(), VacaConfig{}.to_json());
  const auto over = parse_config("[data]\nscm = collider\nsem = LIN\n[model]\ndropout = 0.3\n");
  EXPECT_DOUBLE_EQ(over.model.dropout, 0.3);
  EXPECT_TRUE(over.model.residual);
}

TEST(Config, ErrorsNameTheOffendingField) {
  try {
    parse_config("[model]\nlatnt_dim = 3\n");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "model.latnt_dim");
  }
  try {
    parse_config("[model]\ndropout = 0.1\ndropout = 0.2\n");
    FAIL() << "duplicate key accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "model.dropout");
  }
  EXPECT_THROW(parse_config("[sweep]\ndata.samples = 10, 20\n"), ConfigError);
  EXPECT_THROW(parse_config("[nowhere]\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\ndropout = lots\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\nmode = mixed\n"), ConfigError);
}

TEST(Cli, UnknownKeyExitsWithConfigError) {
  const auto dir = scratch("badkey");
  std::ofstream(dir / "bad.cfg") << "[model]\nlatnt_dim = 3\n";
  EXPECT_EQ(cli("train -c " + (dir / "bad.cfg").string(), dir / "err.txt"), 2);
  EXPECT_NE(slurp(dir / "err.txt").find("model.latnt_dim"), std::string::npos);
  EXPECT_EQ(cli("evaluate -m " + (dir / "missing").string(), dir / "err2.txt"), 3);
}

TEST(Cli, GenerateTrainEvaluateQueryAudit) {
  const auto dir = scratch("pipeline");
  const std::string d = dir.string();
  const auto err = dir / "err.txt";
  std::ofstream(dir / "c.cfg") << "[data]\nscm = collider\nsem = LIN\n";
  ASSERT_EQ(cli("generate -c " + d + "/c.cfg -n 400 -o " + d + "/data", err), 0) << slurp(err);
  ASSERT_EQ(cli("train -c " + d + "/c.cfg -d " + d + "/data --set model.max_epochs=2 -o " + d + "/run", err), 0)
      << slurp(err);
  ASSERT_TRUE(fs::exists(dir / "run" / "model" / "params.bin"));
  for (const std::string data_arg : {" -d " + d + "/data", std::string()}) {
    ASSERT_EQ(cli("evaluate -m " + d + "/run/model" + data_arg + " --set eval.samples=50 -o " + d + "/eval", err), 0)
        << slurp(err);
    const auto report = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));
    EXPECT_TRUE(std::isfinite(report.at("mmd_obs").get<double>()));
    EXPECT_TRUE(std::isfinite(report.at("mse_cf").get<double>()));
  }
  ASSERT_EQ(cli("query -m " + d + "/run/model -k int --node X1 --alpha 1.0 -n 30 -o " + d + "/q.csv", err), 0)
      << slurp(err);
  std::ifstream q(dir / "q.csv");
  std::string line;
  int lines = 0;
  while (std::getline(q, line)) ++lines;
  EXPECT_EQ(lines, 31);
  EXPECT_EQ(cli("query -m " + d + "/run/model -k int -o " + d + "/q2.csv", err), 2);
}

TEST(Cli, LoanAuditWritesJson) {
  const auto dir = scratch("audit");
  const std::string d = dir.string();
  const auto err = dir / "err.txt";
  std::ofstream(dir / "c.cfg") << "[data]\nscm = loan\n";
  ASSERT_EQ(cli("generate -c " + d + "/c.cfg -n 400 -o " + d + "/data", err), 0) << slurp(err);
  ASSERT_EQ(cli("train -c " + d + "/c.cfg -d " + d + "/data --set model.max_epochs=1 -o " + d + "/run", err), 0)
      << slurp(err);
  ASSERT_EQ(cli("audit -m " + d + "/run/model -d " + d + "/data -s G --draws 2 -o " + d + "/audit.json", err), 0)
      << slurp(err);
  const auto back = AuditReport::from_json(nlohmann::json::parse(slurp(dir / "audit.json")));
  EXPECT_EQ(back.classifiers.size(), 4u);
  EXPECT_EQ(back.at(InputSelector::FairX).uf, 0.0);
}

TEST(Cli, SweepAggregatesEveryConfiguration) {
  const auto dir = scratch("sweep");
  const std::string d = dir.string();
  const auto err = dir / "err.txt";
  std::ofstream(dir / "s.cfg") << "[data]\nscm = chain\nsem = LIN\nsamples = 200\n"
                               << "[model]\nmax_epochs = 1\n[eval]\nsamples = 30\n"
                               << "[sweep]\nmodel.dropout = 0.0, 0.1, 0.2\n";
  ASSERT_EQ(cli("sweep -c " + d + "/s.cfg -o " + d + "/out", err), 0) << slurp(err);
  std::ifstream csv(dir / "out" / "aggregate.csv");
  std::string line;
  int rows = -1;  // header
  while (std::getline(csv, line)) rows += line.empty() ? 0 : 1;
  EXPECT_EQ(rows, 3);
}

TEST(Experiment, TrainingIsReproducible) {
  auto cfg = parse_config("[data]\nscm = triangle\nsem = NLIN\nsamples = 300\n[model]\nmax_epochs = 3\n");
  const auto a = scratch("det_a"), b = scratch("det_b");
  cmd_train(cfg, a);
  cmd_train(cfg, b);
  const auto pa = slurp(a / "model" / "params.bin");
  EXPECT_FALSE(pa.empty());
  EXPECT_EQ(pa, slurp(b / "model" / "params.bin"));
}

TEST(Config, GraphFileBuildsAMixedTypeModel) {
  const auto g = load_graph_file(fs::path(VACA_SOURCE_DIR) / "configs" / "german_graph.cfg");
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g.node(3).dim(), 3u);
  EXPECT_EQ(g.node(3).columns[1], ColumnKind::categorical(5));
  EXPECT_EQ(g.parents(2), (std::vector<NodeIndex>{0, 1}));
  EXPECT_NO_THROW(VacaModel(g, VacaConfig{}));
  EXPECT_THROW(load_graph_file(fs::path(VACA_SOURCE_DIR) / "configs" / "loan.cfg"), ConfigError);
}
