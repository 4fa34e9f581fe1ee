#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "lflane/lenslet.hpp"
#include "lflane/lightfield.hpp"
#include "oracles.hpp"

#ifndef LFLANE_CLI
#error "LFLANE_CLI must name the lflane executable"
#endif

using namespace lflane;
namespace fs = std::filesystem;

namespace {

struct run_result {
  int status = -1;
  std::string out;
};

run_result run(const std::string& args) {
  const std::string cmd = std::string(LFLANE_CLI) + " " + args + " 2>/dev/null";
  run_result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

nlohmann::json parse(const run_result& r) { return nlohmann::json::parse(r.out); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const std::string small = "--spatial 32 --focal 20 --angular 3";

}  // namespace

TEST(Cli, SynthSingleFrame) {
  oracle::temp_dir dir("cli");
  const run_result r = run("--out-dir " + q(dir.path) + " synth --sequences 1 --frames 1");
  ASSERT_EQ(r.status, 0);
  const auto j = parse(r);
  EXPECT_EQ(j["light_fields"], 1);
  EXPECT_TRUE(fs::exists(dir / "seq_0000/frame_00.lfh"));
  EXPECT_TRUE(fs::exists(dir / "seq_0000/frame_00.label.json"));
}

TEST(Cli, ConfigFileWithFlagOverride) {
  oracle::temp_dir dir("cli");
  {
    std::ofstream c(dir / "synth.json");
    c << R"({"n_sequences": 2, "frames": 2, "spatial_res": 24, "angular_res": 3, "camera": {"focal_length": 15}})";
  }
  const run_result r = run("--config " + q(dir / "synth.json") + " --out-dir " + q(dir / "ds") + " synth --frames 1");
  ASSERT_EQ(r.status, 0);
  const auto j = parse(r);
  EXPECT_EQ(j["sequences"], 2);
  EXPECT_EQ(j["frames_per_sequence"], 1);
  EXPECT_EQ(load_lightfield(dir / "ds/seq_0001/frame_00.lfh").height(), 24);
}

TEST(Cli, LensletMacroOneIsCentralView) {
  oracle::temp_dir dir("cli");
  const light_field lf = oracle::random_field(5, 10, 12, 1, 3);
  save_lightfield(lf, dir / "in.lfh");
  const run_result r = run("lenslet --macro 1 " + q(dir / "in.lfh") + " " + q(dir / "out.lsh"));
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(load_lenslet(dir / "out.lsh").pixels == central_view(lf));
  EXPECT_EQ(run("lenslet --macro 7 " + q(dir / "in.lfh") + " " + q(dir / "bad.lsh")).status, 1);
  EXPECT_FALSE(fs::exists(dir / "bad.lsh"));
  EXPECT_EQ(run("lenslet " + q(dir / "missing.lfh") + " " + q(dir / "x.lsh")).status, 2);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run("synth --no-such-flag 3").status, 1);
  EXPECT_EQ(run("synth --sequences 1").status, 1);  // no --out-dir
  EXPECT_EQ(run("--help").status, 0);
}

TEST(Cli, GradcheckPassesAndReportsPerLayer) {
  const run_result r = run("gradcheck --seeds 1");
  ASSERT_EQ(r.status, 0);
  const auto j = parse(r);
  EXPECT_TRUE(j["passed"].get<bool>());
  for (const char* k : {"conv2d_s1_p1", "fc", "relu_chain", "maxpool2x2", "lstm_cell", "bptt_t3"})
    EXPECT_LT(j["max_rel_error_per_check"][k].get<double>(), 1e-4) << k;
  // A step this large cannot reach the tolerance: nonzero exit.
  EXPECT_EQ(run("gradcheck --seeds 1 --step 0.5").status, 3);
  EXPECT_EQ(run("gradcheck --step 0").status, 1);
}

TEST(Cli, TrainEvaluateCompareRoundTrip) {
  oracle::temp_dir dir("cli");
  ASSERT_EQ(run("--seed 4 --out-dir " + q(dir / "ds") + " synth --sequences 5 --frames 3 " + small).status, 0);
  std::vector<std::string> reports;
  for (const char* m : {"regular2d", "lf_single", "lf_temporal"}) {
    const fs::path rd = dir / (std::string("run_") + m);
    const run_result t = run("--seed 1 --out-dir " + q(rd) + " train --data " + q(dir / "ds/dataset.json") +
                             " --modality " + m + " --epochs 2 --batch-size 4 --feature-dim 8 --train-fraction 0.6");
    ASSERT_EQ(t.status, 0) << m;
    for (const char* f : {"config.json", "history.csv", "model.ckpt", "model.bin", "train_split.json", "test_split.json"})
      EXPECT_TRUE(fs::exists(rd / f)) << f;
    const fs::path ed = dir / (std::string("eval_") + m);
    const run_result e = run("--out-dir " + q(ed) + " evaluate --checkpoint " + q(rd / "model.ckpt") + " --data " +
                             q(rd / "test_split.json"));
    ASSERT_EQ(e.status, 0) << m;
    EXPECT_EQ(parse(e)["n_predictions"], 2);
    EXPECT_TRUE(fs::exists(ed / "per_sample.csv"));
    reports.push_back(q(ed / "report.json"));
  }
  const run_result c = run("--out-dir " + q(dir / "cmp") + " compare " + reports[0] + " " + reports[1] + " " + reports[2]);
  ASSERT_EQ(c.status, 0);
  EXPECT_TRUE(parse(c).contains("ordering_temporal_single_regular"));
  EXPECT_TRUE(fs::exists(dir / "cmp/comparison.svg"));
  EXPECT_TRUE(fs::exists(dir / "cmp/comparison.csv"));
  EXPECT_EQ(run("--out-dir " + q(dir / "one") + " compare " + reports[0]).status, 1);
  EXPECT_FALSE(fs::exists(dir / "one/comparison.json"));

  // A report from a different split is refused and nothing is written.
  const run_result t2 = run("--seed 9 --out-dir " + q(dir / "run_other") + " train --data " +
                            q(dir / "ds/dataset.json") + " --modality regular2d --epochs 0 --feature-dim 8 --train-fraction 0.6");
  ASSERT_EQ(t2.status, 0);
  ASSERT_EQ(run("--out-dir " + q(dir / "eval_other") + " evaluate --checkpoint " + q(dir / "run_other/model.ckpt") +
                " --data " + q(dir / "run_other/test_split.json"))
                .status,
            0);
  const nlohmann::json a = nlohmann::json::parse(read_text_file(dir / "eval_other/report.json"));
  const nlohmann::json b = nlohmann::json::parse(read_text_file(dir / "eval_regular2d/report.json"));
  if (a["split_id"] != b["split_id"]) {
    EXPECT_EQ(run("--out-dir " + q(dir / "mixed") + " compare " + q(dir / "eval_other/report.json") + " " + reports[1])
                  .status,
              2);
    EXPECT_FALSE(fs::exists(dir / "mixed/comparison.json"));
  }

  // Modality mismatch and missing inputs are data errors with no report.
  EXPECT_EQ(run("--out-dir " + q(dir / "bad") + " evaluate --checkpoint " + q(dir / "run_lf_single/model.ckpt") +
                " --data " + q(dir / "run_lf_single/test_split.json") + " --modality lf_temporal")
                .status,
            2);
  EXPECT_FALSE(fs::exists(dir / "bad/report.json"));
  EXPECT_EQ(run("--out-dir " + q(dir / "bad") + " evaluate --checkpoint " + q(dir / "nope.ckpt") + " --data " +
                q(dir / "ds/dataset.json"))
                .status,
            2);
}

TEST(Cli, TrainFailuresWriteNothing) {
  oracle::temp_dir dir("cli");
  ASSERT_EQ(run("--out-dir " + q(dir / "ds") + " synth --sequences 3 --frames 2 " + small).status, 0);
  EXPECT_EQ(run("--out-dir " + q(dir / "r1") + " train --data " + q(dir / "ds/dataset.json") +
                " --modality lf_single --epochs 2 --lr 1e300 --feature-dim 8")
                .status,
            3);
  EXPECT_FALSE(fs::exists(dir / "r1/model.ckpt"));
  EXPECT_FALSE(fs::exists(dir / "r1/history.csv"));
  EXPECT_EQ(run("--out-dir " + q(dir / "r2") + " train --data " + q(dir / "ds/dataset.json") + " --modality cnn").status,
            1);
  EXPECT_EQ(run("--out-dir " + q(dir / "r3") + " train --data " + q(dir / "missing.json") + " --modality lf_single")
                .status,
            2);
}

TEST(Cli, ViewWritesPng) {
  oracle::temp_dir dir("cli");
  save_lightfield(oracle::random_field(3, 6, 5, 1, 1), dir / "a.lfh");
  ASSERT_EQ(run("view " + q(dir / "a.lfh") + " " + q(dir / "a.png") + " --u 0 --v 2").status, 0);
  const std::string bytes = read_text_file(dir / "a.png");
  ASSERT_GT(bytes.size(), 8u);
  EXPECT_EQ(bytes.substr(1, 3), "PNG");
  EXPECT_EQ(run("view " + q(dir / "a.lfh") + " " + q(dir / "b.png") + " --u 5").status, 2);
}
