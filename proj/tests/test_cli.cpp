#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(SELCONV_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "selconv_cli_test";
    fs::remove_all(dir_);
    const CliRun s = run("synth --classes 3 --per-class 5 --grid 12x10 --channels 32 --burst-rate 0.2 --seed 3 "
                      "--heldout-classes 3 --heldout-per-class 6 --out " + dir_.string());
    ASSERT_EQ(s.code, 0) << s.out;
    const CliRun t = run("train --manifest " + (dir_ / "heldout.json").string() + " --out " + (dir_ / "m.scm").string() +
                      " --pca-d 8 --codebook-k 6 --truncate-head 4 --whiten off");
    ASSERT_EQ(t.code, 0) << t.out;
  }
  static fs::path dir_;
  static std::string p(const char* name) { return (dir_ / name).string(); }
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, SynthLayout) {
  EXPECT_TRUE(fs::exists(dir_ / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir_ / "tensors" / "c0_0.scf"));
  EXPECT_TRUE(fs::exists(dir_ / "keypoints" / "c2_4.txt"));
  EXPECT_EQ(fs::file_size(dir_ / "tensors" / "c0_0.scf"), 20u + 12 * 10 * 32 * 4);
}

TEST_F(Cli, EvaluateOutputFormat) {
  const CliRun r = run("evaluate --model " + p("m.scm") + " --manifest " + p("manifest.json"));
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 4u);
  const std::regex row(R"(c\d_0\t\d\.\d{4})");
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(std::regex_match(ls[i], row)) << ls[i];
  EXPECT_TRUE(std::regex_match(ls.back(), std::regex(R"(mAP\t\d\.\d{4})"))) << ls.back();
}

TEST_F(Cli, IndexAndQuery) {
  ASSERT_EQ(run("index --model " + p("m.scm") + " --manifest " + p("manifest.json") + " --out " + p("i.sci")).code, 0);
  const CliRun r = run("query --model " + p("m.scm") + " --index " + p("i.sci") + " --tensor " +
                    p("tensors/c1_2.scf") + " --top 3");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[0].substr(0, ls[0].find('\t')), "c1_2");  // database image finds itself
}

TEST_F(Cli, ConfigFileAndOverrides) {
  std::ofstream(p("cfg.json")) << R"({"mask": "sum", "pca_d": 8, "codebook_k": 4, "truncate_head": 0})";
  EXPECT_EQ(run("train --config " + p("cfg.json") + " --manifest " + p("heldout.json") + " --out " + p("m2.scm") +
                " --pool sum")
                .code,
            0);
  std::ofstream(p("bad.json")) << R"({"colour": "red"})";
  EXPECT_EQ(run("train --config " + p("bad.json") + " --manifest " + p("heldout.json") + " --out " + p("x.scm")).code, 2);
  EXPECT_EQ(run("train --manifest " + p("heldout.json") + " --out " + p("x.scm") + " --pn-alpha 3").code, 2);
}

TEST_F(Cli, HeldoutDiscipline) {
  EXPECT_EQ(run("evaluate --model " + p("m.scm") + " --manifest " + p("heldout.json")).code, 2);
  // the evaluation manifest has no held-out images to train on
  EXPECT_EQ(run("train --manifest " + p("manifest.json") + " --out " + p("x.scm")).code, 2);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("evaluate --model " + p("missing.scm") + " --manifest " + p("manifest.json")).code, 3);
  EXPECT_EQ(run("bench --model " + p("m.scm") + " --manifest " + p("manifest.json") + " --repetitions 0").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("synth --grid 0x4 --out " + p("never")).code, 2);
  std::ofstream(p("junk.scm")) << "not a model";
  EXPECT_EQ(run("evaluate --model " + p("junk.scm") + " --manifest " + p("manifest.json")).code, 2);
}

TEST_F(Cli, AnalyzeOutput) {
  const CliRun r = run("analyze --manifest " + p("manifest.json") + " --mask max --bins 10");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 12u);
  EXPECT_EQ(ls[0], "bin_center\tmass");
  double total = 0.0;
  for (std::size_t i = 1; i <= 10; ++i) total += std::stod(ls[i].substr(ls[i].find('\t') + 1));
  EXPECT_NEAR(total, 1.0, 1e-4);
  EXPECT_EQ(ls.back().rfind("summary\tmask=max", 0), 0u) << ls.back();
}

TEST_F(Cli, BenchOutput) {
  const CliRun r = run("bench --model " + p("m.scm") + " --manifest " + p("manifest.json") + " --repetitions 2");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 8u);
  EXPECT_EQ(ls[0], "stage\tmean_ms\tmedian_ms");
  EXPECT_EQ(ls[2].substr(0, 7), "reduce\t");
}
