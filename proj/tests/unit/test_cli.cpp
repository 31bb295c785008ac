#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "probekit/cli.hpp"
#include "probekit/io.hpp"
#include "probekit/report.hpp"
#include "test_support.hpp"

namespace probekit {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> manifest_lines(const std::filesystem::path& p) {
  std::vector<json> lines;
  std::istringstream in(read_file(p));
  for (std::string line; std::getline(in, line);) lines.push_back(json::parse(line));
  return lines;
}

TEST(Cli, RunPrintsOneRecord) {
  TempDir dir;
  const auto r = cli({"run", "--provider", "synthetic", "--template", "0", "--mode", "paired", "--k", "1", "--seed",
                      "7", "--n-train", "300", "--n-eval", "200", "--manifest", (dir / "m.jsonl").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  ASSERT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
  const json rec = json::parse(r.out);
  EXPECT_EQ(rec["mode"], "paired");
  EXPECT_EQ(rec["k"], 1);
  EXPECT_EQ(rec["eval_accuracy"], 1.0);
  const auto m = manifest_lines(dir / "m.jsonl");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0]["config_digest"], rec["config_digest"]);
  EXPECT_EQ(m[0]["seed"], 7);
  EXPECT_EQ(m[0]["exit_code"], 0);
  EXPECT_TRUE(m[0]["versions"].contains("probekit"));
  EXPECT_TRUE(m[0]["versions"].contains("eigen"));
}

TEST(Cli, UsageErrors) {
  auto r = cli({"frobnicate"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  r = cli({});
  EXPECT_EQ(r.code, kExitUsage);
  TempDir dir;
  const std::string m = (dir / "m.jsonl").string();
  EXPECT_EQ(cli({"run", "--k", "0", "--manifest", m}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--mode", "sideways", "--manifest", m}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--template", "9", "--manifest", m}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--provider", "remote", "--model", "text-embedding-ada-002", "--manifest", m}).code,
            kExitUsage);
  EXPECT_EQ(cli({"report", "--results", (dir / "absent.jsonl").string(), "--manifest", m}).code, kExitFailure);
}

TEST(Cli, HelpAndVersion) {
  auto r = cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("sweep"), std::string::npos);
  r = cli({"--version"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, version_string() + "\n");
}

TEST(Cli, SweepTwiceIsBitIdenticalAndReportsCarryTheDigest) {
  TempDir dir;
  const json cfg = {
      {"providers",
       {{{"kind", "synthetic"}, {"model", "synthetic/a"}, {"synthetic", {{"dim", 24}, {"noise_sigma", 0.5}}}},
        {{"kind", "synthetic"}, {"model", "synthetic/b"}, {"synthetic", {{"dim", 32}, {"noise_sigma", 1.0}}}}}},
      {"templates", {0, 1, {{"id", "custom"}, {"pattern", "Rate: {}"}}}},
      {"modes", {"single", "paired"}},
      {"k", {1, 5, 50}},
      {"seed", 3},
      {"data", {{"n_train", 60}, {"n_eval", 40}}},
      {"max_parallel", 2}};
  write_file_atomic(dir / "sweep.cfg", cfg.dump(2));
  const std::string m = (dir / "manifest.jsonl").string();
  auto a = cli({"sweep", "--config", (dir / "sweep.cfg").string(), "--out", (dir / "a").string(), "--manifest", m});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  auto b = cli({"sweep", "--config", (dir / "sweep.cfg").string(), "--out", (dir / "b").string(), "--manifest", m,
                "--max-parallel", "1"});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(read_file(dir / "a" / "results.jsonl"), read_file(dir / "b" / "results.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "timings.jsonl"));

  const auto lines = manifest_lines(m);
  ASSERT_EQ(lines.size(), 2u);
  const std::string digest = lines[0]["config_digest"];
  EXPECT_EQ(lines[1]["config_digest"], digest);

  const auto rep = cli({"report", "--results", (dir / "a" / "results.jsonl").string(), "--out",
                        (dir / "report").string(), "--group-by", "model,k", "--manifest", m});
  ASSERT_EQ(rep.code, kExitOk) << rep.err;
  for (const char* f : {"summary.csv", "fig_mode_violin.csv", "fig_scaling_by_k.csv", "fig_variance_vs_k.csv",
                        "fig_accuracy_by_prompt.csv"}) {
    const Table t = parse_table(read_file(dir / "report" / f));
    EXPECT_EQ(t.config_digest, digest) << f;
  }
  EXPECT_EQ(parse_table(read_file(dir / "report" / "summary.csv")).rows.size(), 2u * 3u);
  EXPECT_EQ(manifest_lines(m).back()["config_digest"], digest);
}

TEST(Cli, ExplicitFigureWithoutItsAxisIsAUsageError) {
  TempDir dir;
  const std::string m = (dir / "m.jsonl").string();
  const std::string results = (dir / "r.jsonl").string();
  ASSERT_EQ(cli({"run", "--k", "1", "--n-train", "40", "--n-eval", "20", "--out", results, "--manifest", m}).code,
            kExitOk);
  const auto r = cli({"report", "--results", results, "--out", (dir / "rep").string(), "--fig", "variance_vs_k",
                      "--manifest", m});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("MissingAxis"), std::string::npos);
}

TEST(Cli, PreparedFilesReproduceInMemoryData) {
  TempDir dir;
  const std::string m = (dir / "m.jsonl").string();
  ASSERT_EQ(cli({"prepare-data", "--synthetic", "--n-train", "80", "--n-eval", "30", "--seed", "5", "--out",
                 (dir / "data").string(), "--manifest", m})
                .code,
            kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "util_test_hard.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "train_labeled.csv"));
  const std::vector<std::string> common{"run", "--seed", "5", "--k", "1,4", "--mode", "both", "--manifest", m};
  auto with_files = common;
  with_files.insert(with_files.end(), {"--data-dir", (dir / "data").string()});
  auto in_memory = common;
  in_memory.insert(in_memory.end(), {"--n-train", "80", "--n-eval", "30"});
  const auto a = cli(with_files);
  const auto b = cli(in_memory);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);

  const auto prep = cli({"prepare-data", "--data-dir", (dir / "data").string(), "--out", (dir / "labeled").string(),
                         "--seed", "5", "--manifest", m});
  ASSERT_EQ(prep.code, kExitOk) << prep.err;
  EXPECT_NE(prep.out.find("train pairs=80"), std::string::npos);
  EXPECT_EQ(read_file(dir / "labeled" / "test_labeled.csv"), read_file(dir / "data" / "test_labeled.csv"));
}

TEST(Cli, ExportedEmbeddingsReplayThroughTheFileProvider) {
  TempDir dir;
  const std::string m = (dir / "m.jsonl").string();
  const std::vector<std::string> data{"--n-train", "50", "--n-eval", "20", "--seed", "2", "--template", "1"};
  auto embed = std::vector<std::string>{"embed", "--provider", "synthetic", "--dim", "16", "--noise", "0.4",
                                        "--export", (dir / "e.jsonl").string(), "--manifest", m};
  embed.insert(embed.end(), data.begin(), data.end());
  ASSERT_EQ(cli(embed).code, kExitOk);

  auto syn = std::vector<std::string>{"run", "--provider", "synthetic", "--dim", "16", "--noise", "0.4", "--k", "3",
                                      "--manifest", m};
  syn.insert(syn.end(), data.begin(), data.end());
  auto file = std::vector<std::string>{"run", "--provider", "file", "--model", "synthetic/planted", "--dim", "16",
                                       "--embeddings", (dir / "e.jsonl").string(), "--k", "3", "--manifest", m};
  file.insert(file.end(), data.begin(), data.end());
  const auto a = cli(syn);
  const auto b = cli(file);
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(json::parse(a.out)["eval_accuracy"], json::parse(b.out)["eval_accuracy"]);
  EXPECT_EQ(json::parse(a.out)["train_loss"], json::parse(b.out)["train_loss"]);

  auto missing = file;
  missing[std::find(missing.begin(), missing.end(), "--template") - missing.begin() + 1] = "2";
  const auto c = cli(missing);
  EXPECT_EQ(c.code, kExitFailure);
  EXPECT_NE(c.out.find("CacheMiss"), std::string::npos);
}

TEST(Cli, MissingDataDirectoryIsAnEnvironmentFailure) {
  TempDir dir;
  const auto r = cli({"run", "--data-dir", (dir / "nowhere").string(), "--manifest", (dir / "m.jsonl").string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("FileNotFound"), std::string::npos);
}

TEST(Cli, ArtifactsForASingleCell) {
  TempDir dir;
  const std::string m = (dir / "m.jsonl").string();
  const auto r = cli({"run", "--k", "2", "--noise", "0.3", "--n-train", "40", "--n-eval", "20", "--artifacts",
                      (dir / "a.json").string(), "--manifest", m});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto art = parse_artifacts(read_file(dir / "a.json"));
  EXPECT_EQ(art.reducer.k(), 2u);
  EXPECT_EQ(cli({"run", "--k", "1,2", "--artifacts", (dir / "b.json").string(), "--manifest", m}).code, kExitUsage);
}

}  // namespace
}  // namespace probekit
