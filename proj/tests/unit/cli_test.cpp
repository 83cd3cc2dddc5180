#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "lossprobe/analysis.hpp"
#include "lossprobe/sequence.hpp"
#include "lossprobe/signal.hpp"

#ifdef LOSSPROBE_CLI

namespace {

using lossprobe::testing::TempDir;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  CliResult run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "env -u LOSSPROBE_CONFIG " + std::string(LOSSPROBE_CLI) + " " + args +
                            " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // 3 held-out style sequences of 752 tokens and a model trained on 40 others.
  void make_corpus_and_model() {
    ASSERT_EQ(run("gen-corpus --out " + path("train.jsonl") + " --repeats 94 --n 40 --seed 5").code,
              0);
    ASSERT_EQ(run("gen-corpus --out " + path("held.jsonl") +
                  " --repeats 94 --n 3 --seed 5 --noise-mix 0 --first-index 40")
                  .code,
              0);
    ASSERT_EQ(run("train --corpus " + path("train.jsonl") + " --order 3 --out " + path("m.json"))
                  .code,
              0);
  }

  TempDir dir_;
};

TEST_F(Cli, HelpListsEverySubcommand) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"gen-corpus", "train", "perturb", "score", "conform", "diff", "regions",
                          "sweep", "report", "merge", "audio-inject"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
  EXPECT_EQ(run("--version").code, 0);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("perturb --bogus").code, 1);
  EXPECT_EQ(run("perturb --in a --out b --kind sideways").code, 1);
}

TEST_F(Cli, SweepWithoutConfigExitsOne) {
  const auto r = run("sweep --out " + path("o"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("LOSSPROBE_CONFIG"), std::string::npos);
  EXPECT_EQ(run("sweep --config " + path("missing.yaml") + " --out " + path("o")).code, 1);
}

TEST_F(Cli, PerturbChangesExactlyTheWindow) {
  make_corpus_and_model();
  const auto r = run("perturb --in " + path("held.jsonl") + " --out " + path("p.jsonl") +
                     " --start 250 --len 200 --noise-vocab 64 --spec-out " + path("spec.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = lossprobe::read_sequences(path("held.jsonl"));
  const auto b = lossprobe::read_sequences(path("p.jsonl"));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    std::size_t changed = 0;
    for (std::size_t t = 0; t < a[i].size(); ++t) {
      const bool differs = a[i].tokens()[t] != b[i].tokens()[t];
      changed += differs;
      if (differs) {
        EXPECT_GE(t, 250u);
        EXPECT_LT(t, 450u);
      }
    }
    EXPECT_EQ(changed, 200u);
  }

  // Replaying the written spec reproduces the output.
  ASSERT_EQ(run("perturb --in " + path("held.jsonl") + " --out " + path("p2.jsonl") + " --spec " +
                path("spec.json"))
                .code,
            0);
  EXPECT_EQ(slurp(path("p.jsonl")), slurp(path("p2.jsonl")));
}

TEST_F(Cli, ScoreDiffRegionsPipeline) {
  make_corpus_and_model();
  ASSERT_EQ(run("perturb --in " + path("held.jsonl") + " --out " + path("p.jsonl") +
                " --start 250 --len 50 --noise-vocab 64")
                .code,
            0);
  ASSERT_EQ(run("score --model " + path("m.json") + " --in " + path("held.jsonl") + " --out " +
                path("a.csv"))
                .code,
            0);
  ASSERT_EQ(run("score --model " + path("m.json") + " --in " + path("p.jsonl") + " --out " +
                path("b.csv"))
                .code,
            0);
  EXPECT_EQ(run("diff --original " + path("a.csv") + " --perturbed " + path("b.csv") +
                " --start 250 --len 50")
                .code,
            1);  // several traces per file and no --id
  const auto d = run("diff --original " + path("a.csv") + " --perturbed " + path("b.csv") +
                     " --id toy-000040 --start 250 --len 50 --out " + path("d.csv"));
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_NE(d.out.find("global delta NLL"), std::string::npos);

  const auto g = run("regions --diff " + path("d.csv") + " --start 250 --len 50 --out " +
                     path("regions.json"));
  ASSERT_EQ(g.code, 0) << g.err;
  const auto j = nlohmann::json::parse(slurp(path("regions.json")));
  EXPECT_EQ(j.at("regions").at("peak").at("start"), 250);
  EXPECT_EQ(j.at("regions").at("recovery").at("start"), 300);
}

TEST_F(Cli, DiffOfMismatchedLengthsExitsOne) {
  std::ofstream(path("a.csv")) << "sequence_id,scorer_id,index,nll\ns,m,0,1.0\ns,m,1,2.0\n";
  std::ofstream(path("b.csv")) << "sequence_id,scorer_id,index,nll\ns,m,0,1.0\n";
  const auto r = run("diff --original " + path("a.csv") + " --perturbed " + path("b.csv") +
                     " --start 0 --len 1");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("length"), std::string::npos);
}

TEST_F(Cli, SweepOnShippedConfig) {
  const std::string config = std::string(LOSSPROBE_SOURCE_DIR) + "/configs/toy.yaml";
  const auto r = run("sweep --config " + config + " --out " + path("sweep") + " --formats csv,json,svg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("pearson r=-"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("sweep/report.json")));
  EXPECT_LT(j.at("correlation").at("aggregated").at("pearson").at("statistic").get<double>(), 0.0);
  EXPECT_TRUE(std::filesystem::exists(path("sweep/delta_vs_length.svg")));

  ASSERT_EQ(run("report --report " + path("sweep/report.json") + " --out " + path("re")).code, 0);
  EXPECT_EQ(slurp(path("re/delta_vs_length.svg")), slurp(path("sweep/delta_vs_length.svg")));
  ASSERT_EQ(run("merge --report " + path("sweep/report.json") + " --report " +
                path("sweep/report.json") + " --out " + path("merged"))
                .code,
            0);
  EXPECT_TRUE(std::filesystem::exists(path("merged/report.csv")));
}

TEST_F(Cli, ConformAgainstAdapter) {
  make_corpus_and_model();
  const std::string ext = std::string("--external ") + LOSSPROBE_FAKE_ADAPTER +
                          " --external-arg=--model --external-arg=" + path("m.json");
  const auto ok = run("conform " + ext + " --in " + path("held.jsonl"));
  EXPECT_EQ(ok.code, 0) << ok.err;
  const auto bad = run("conform " + ext + " --external-arg=--mode --external-arg=nan --in " +
                       path("held.jsonl"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("conformance"), std::string::npos);

  // Builtin and adapter traces agree token by token.
  ASSERT_EQ(run("score --model " + path("m.json") + " --in " + path("held.jsonl") + " --out " +
                path("a.csv"))
                .code,
            0);
  ASSERT_EQ(run("score " + ext + " --in " + path("held.jsonl") + " --out " + path("b.csv")).code, 0);
  std::ifstream fa(path("a.csv"));
  std::ifstream fb(path("b.csv"));
  const auto a = lossprobe::analysis::read_trace_csv(fa);
  const auto b = lossprobe::analysis::read_trace_csv(fb);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    for (std::size_t t = 0; t < a[i].size(); ++t) EXPECT_NEAR(a[i].values[t], b[i].values[t], 1e-6);
  }
}

TEST_F(Cli, AudioInjectSplicesMatchedNoise) {
  lossprobe::signal::AudioSignal tone;
  for (int i = 0; i < 32000 * 8; ++i) tone.samples.push_back(0.25 * std::sin(i * 0.05));
  lossprobe::signal::write_wav(path("in.wav"), tone);
  const auto r = run("audio-inject --in " + path("in.wav") + " --out " + path("out.wav") +
                     " --start-token 250 --len-tokens 100 --offset-db -20 --seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lossprobe::signal::read_wav(path("out.wav"));
  ASSERT_EQ(out.size(), tone.size());
  lossprobe::signal::AudioSignal noise;
  noise.samples.assign(out.samples.begin() + 160000, out.samples.begin() + 224000);
  EXPECT_NEAR(lossprobe::signal::rms_db(noise), lossprobe::signal::rms_db(tone) - 20.0, 0.1);
  EXPECT_EQ(out.samples[159999], static_cast<float>(tone.samples[159999]));
  EXPECT_EQ(out.samples[224000], static_cast<float>(tone.samples[224000]));

  EXPECT_EQ(run("audio-inject --in " + path("in.wav") + " --out " + path("o2.wav") +
                " --len-tokens 10 --offset-db -40 --strict")
                .code,
            1);
  EXPECT_EQ(run("audio-inject --in " + path("none.wav") + " --out " + path("o3.wav") +
                " --len-tokens 10")
                .code,
            1);
}

}  // namespace

#endif  // LOSSPROBE_CLI
