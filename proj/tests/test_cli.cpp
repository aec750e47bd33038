#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chordvae/checkpoint.hpp"
#include "chordvae/chord_vocab.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout and stderr
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(CHORDVAE_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

// Every regular file under `dir`, relative path -> bytes, with `dir` itself
// replaced by a placeholder since manifests record absolute paths.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  const std::string root = dir.string();
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string bytes = slurp(e.path());
    for (auto p = bytes.find(root); p != std::string::npos; p = bytes.find(root, p))
      bytes.replace(p, root.size(), "<dir>");
    out[fs::relative(e.path(), dir).string()] = std::move(bytes);
  }
  return out;
}

const char* kQuickTrain =
    " --epochs 2 --batch-songs 4 --hidden 8 --latent 4 --frames-per-clip 40 --seed 3";

// Small corpus shared by the tests in this file.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    const RunResult r = run("synth --songs 12 --frames 60 --seed 7 --out " + corpus().string());
    ASSERT_EQ(r.code, 0) << r.output;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path corpus() { return dir_->path() / "shared_corpus"; }
  static TempDir* dir_;
  TempDir tmp_;
};
TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, SynthWritesOneFilePerSongAndIsReproducible) {
  const fs::path a = tmp_ / "a", b = tmp_ / "b";
  ASSERT_EQ(run("synth --songs 100 --frames 200 --seed 7 --out " + a.string()).code, 0);
  ASSERT_EQ(run("synth --songs 100 --frames 200 --seed 7 --out " + b.string()).code, 0);
  std::size_t songs = 0;
  for (const auto& e : fs::directory_iterator(a)) songs += e.path().extension() == ".cvae";
  EXPECT_EQ(songs, 100u);
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
  EXPECT_EQ(snapshot(a), snapshot(b));
  const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(m.at("run").at("command"), "synth");
  EXPECT_TRUE(m.at("run").at("wall_clock").is_null());
}

TEST_F(Cli, ExitCodesForUsageAndValidationErrors) {
  const RunResult neg = run("synth --noise-std -1 --out " + (tmp_ / "x").string());
  EXPECT_EQ(neg.code, 3) << neg.output;
  EXPECT_FALSE(fs::exists(tmp_ / "x"));
  EXPECT_EQ(run("train --out " + (tmp_ / "y").string()).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("--help").code, 0);
  const RunResult io = run("train --corpus " + (tmp_ / "missing").string() + " --out " +
                           (tmp_ / "z").string());
  EXPECT_EQ(io.code, 4) << io.output;
  EXPECT_FALSE(fs::exists(tmp_ / "z"));
}

TEST_F(Cli, RefusesToOverwriteWithoutForce) {
  const fs::path out = tmp_ / "out";
  ASSERT_EQ(run("synth --songs 2 --frames 5 --out " + out.string()).code, 0);
  const auto before = snapshot(out);
  EXPECT_EQ(run("synth --songs 3 --frames 5 --out " + out.string()).code, 2);
  EXPECT_EQ(snapshot(out), before);
  EXPECT_EQ(run("synth --songs 3 --frames 5 --force --out " + out.string()).code, 0);
  EXPECT_NE(snapshot(out), before);
}

TEST_F(Cli, TrainNamesEachCondition) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"--mode ace-sl", "ACE-SL"},
      {"--mode vae-sl --prior uniform", "VAE-UN-SL"},
      {"--mode vae-sl --prior markov --p-self 0.9", "VAE-MR-SL"},
      {"--mode vae-ssl --prior uniform --annotated-fraction 0.5", "VAE-UN-SSL"},
      {"--mode vae-ssl --prior markov --p-self 0.9 --annotated-fraction 0.5", "VAE-MR-SSL"}};
  int i = 0;
  for (const auto& [flags, condition] : cases) {
    const fs::path out = tmp_ / ("run" + std::to_string(i++));
    const RunResult r = run("train --corpus " + corpus().string() + " --out " + out.string() + " " +
                            flags + kQuickTrain);
    ASSERT_EQ(r.code, 0) << r.output;
    const chordvae::Checkpoint ck = chordvae::load_checkpoint(out / "checkpoint.cvck");
    EXPECT_EQ(ck.manifest.at("condition"), condition);
    const auto rm = nlohmann::json::parse(slurp(out / "run_manifest.json"));
    EXPECT_EQ(rm.at("config").at("condition"), condition);
    EXPECT_EQ(rm.at("seed"), 3);
    const auto log = lines(slurp(out / "train_log.csv"));
    ASSERT_EQ(log.size(), 3u);
    EXPECT_EQ(log[0], "epoch,mode,objective,reconstruction,kl_z,entropy_s,prior_s,xent,lr,grad_norm");
    EXPECT_TRUE(fs::exists(out / "split.json"));
  }
}

TEST_F(Cli, TrainFlagCombinations) {
  const RunResult ace = run("train --corpus " + corpus().string() + " --out " +
                            (tmp_ / "ace").string() + " --mode ace-sl --prior markov" + kQuickTrain);
  EXPECT_EQ(ace.code, 0);
  EXPECT_NE(ace.output.find("warning"), std::string::npos) << ace.output;
  EXPECT_NE(ace.output.find("--prior"), std::string::npos);

  const RunResult bad = run("train --corpus " + corpus().string() + " --out " +
                            (tmp_ / "bad").string() + " --mode vae-sl --prior uniform --p-self 0.5" +
                            kQuickTrain);
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("--p-self"), std::string::npos) << bad.output;
  EXPECT_FALSE(fs::exists(tmp_ / "bad"));

  const RunResult uni = run("train --corpus " + corpus().string() + " --out " +
                            (tmp_ / "uni").string() + " --mode vae-sl --prior uniform" + kQuickTrain);
  ASSERT_EQ(uni.code, 0);
  const auto rm = nlohmann::json::parse(slurp(tmp_ / "uni" / "run_manifest.json"));
  EXPECT_DOUBLE_EQ(rm.at("config").at("training").at("p_self").get<double>(), 1.0 / 97.0);
}

TEST_F(Cli, ConfigFileSitsBetweenFlagsAndDefaults) {
  const fs::path cfg = tmp_ / "train.ini";
  std::ofstream(cfg) << "[train]\nepochs=1\nhidden=6\n";
  const std::string base = "--config " + cfg.string() + " train --corpus " + corpus().string() +
                           " --mode ace-sl --latent 4 --batch-songs 4 --frames-per-clip 40";
  ASSERT_EQ(run(base + " --out " + (tmp_ / "a").string()).code, 0);
  ASSERT_EQ(run(base + " --epochs 2 --out " + (tmp_ / "b").string()).code, 0);
  const auto a = nlohmann::json::parse(slurp(tmp_ / "a" / "run_manifest.json"));
  const auto b = nlohmann::json::parse(slurp(tmp_ / "b" / "run_manifest.json"));
  EXPECT_EQ(a.at("config").at("training").at("epochs"), 1);
  EXPECT_EQ(b.at("config").at("training").at("epochs"), 2);
  EXPECT_EQ(a.at("config").at("encoder").at("hidden"), 6);
  EXPECT_EQ(a.at("config").at("encoder").at("layers"), 1);
}

TEST_F(Cli, EstimateEvalInspectPipeline) {
  const fs::path run_dir = tmp_ / "run", est = tmp_ / "est", est2 = tmp_ / "est2";
  ASSERT_EQ(run("train --corpus " + corpus().string() + " --out " + run_dir.string() +
                " --mode vae-sl" + kQuickTrain)
                .code,
            0);
  const std::string ck = (run_dir / "checkpoint.cvck").string();

  // Label files: one Harte label per frame, both variants, posterior rows on the simplex.
  const RunResult e = run("estimate --checkpoint " + ck + " --input " + corpus().string() +
                          " --posteriors --out " + est.string());
  ASSERT_EQ(e.code, 0) << e.output;
  const auto argmax = lines(slurp(est / "song_0000.argmax.lab"));
  const auto viterbi = lines(slurp(est / "song_0000.viterbi.lab"));
  EXPECT_EQ(argmax.size(), 60u);
  EXPECT_EQ(viterbi.size(), 60u);
  for (const std::string& l : viterbi) EXPECT_NO_THROW(chordvae::parse_label(l)) << l;
  const auto post = lines(slurp(est / "song_0000.posteriors.csv"));
  ASSERT_EQ(post.size(), 61u);
  EXPECT_EQ(split(post[0]).size(), 97u);
  for (std::size_t n = 1; n < post.size(); ++n) {
    double s = 0.0;
    for (const std::string& c : split(post[n])) s += std::stod(c);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }

  // --no-viterbi writes the argmax variant only.
  ASSERT_EQ(run("estimate --checkpoint " + ck + " --input " + corpus().string() +
                " --no-viterbi --out " + est2.string())
                .code,
            0);
  EXPECT_TRUE(fs::exists(est2 / "song_0003.argmax.lab"));
  EXPECT_FALSE(fs::exists(est2 / "song_0003.viterbi.lab"));
  EXPECT_FALSE(fs::exists(est2 / "song_0003.posteriors.csv"));

  // Estimates against themselves score 1.
  const RunResult self = run("eval --estimates " + est.string() + " --reference " + est.string() +
                             " --out " + (tmp_ / "self").string());
  ASSERT_EQ(self.code, 0) << self.output;
  EXPECT_NE(self.output.find("triads_accuracy: 1\n"), std::string::npos) << self.output;

  // Criterion selection controls the per-song columns.
  for (const std::string crit : {"majmin", "triads"}) {
    const fs::path out = tmp_ / ("eval_" + crit);
    ASSERT_EQ(run("eval --estimates " + est.string() + " --reference " + corpus().string() +
                  " --criterion " + crit + " --out " + out.string())
                  .code,
              0);
    EXPECT_EQ(lines(slurp(out / "per_song.csv"))[0],
              "song_id,frames," + crit + "_matched," + crit + "_scored," + crit + "_accuracy");
    const std::string summary = slurp(out / "summary.txt");
    EXPECT_NE(summary.find("condition: VAE-MR-SL"), std::string::npos) << summary;
    EXPECT_NE(summary.find("seed: 3"), std::string::npos);
  }

  // Songs missing from the reference are named.
  const fs::path small = tmp_ / "small";
  ASSERT_EQ(run("synth --songs 10 --frames 60 --seed 7 --out " + small.string()).code, 0);
  const RunResult mismatch = run("eval --estimates " + est2.string() + " --reference " +
                                 small.string() + " --out " + (tmp_ / "mm").string());
  EXPECT_EQ(mismatch.code, 3);
  EXPECT_NE(mismatch.output.find("missing from reference: song_0010, song_0011"), std::string::npos)
      << mismatch.output;
  EXPECT_FALSE(fs::exists(tmp_ / "mm"));

  // A listed label file that vanished is an I/O error.
  fs::remove(est2 / "song_0005.argmax.lab");
  const RunResult gone = run("eval --estimates " + est2.string() + " --reference " +
                             corpus().string() + " --out " + (tmp_ / "gone").string());
  EXPECT_EQ(gone.code, 4);
  EXPECT_NE(gone.output.find("song_0005.argmax.lab"), std::string::npos) << gone.output;
  EXPECT_FALSE(fs::exists(tmp_ / "gone"));

  // Templates: 9 rows of 36 values in (0,1).
  ASSERT_EQ(run("inspect --checkpoint " + ck + " --out " + (tmp_ / "insp").string()).code, 0);
  const auto tmpl = lines(slurp(tmp_ / "insp" / "templates.csv"));
  ASSERT_EQ(tmpl.size(), 10u);
  for (std::size_t r = 1; r < tmpl.size(); ++r) {
    const auto cells = split(tmpl[r]);
    ASSERT_EQ(cells.size(), 37u);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = std::stod(cells[c]);
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  EXPECT_EQ(split(tmpl[1])[0], "C:maj");
  EXPECT_EQ(split(tmpl[9])[0], "N");
}

TEST_F(Cli, CheckpointMismatchExitCode) {
  const fs::path fake = tmp_ / "fake.cvck";
  std::ofstream(fake) << "not a checkpoint";
  const RunResult r = run("estimate --checkpoint " + fake.string() + " --input " +
                          corpus().string() + " --out " + (tmp_ / "e").string());
  EXPECT_EQ(r.code, 5) << r.output;
  EXPECT_FALSE(fs::exists(tmp_ / "e"));
  EXPECT_EQ(run("inspect --checkpoint " + fake.string() + " --out " + (tmp_ / "i").string()).code, 5);
}

TEST_F(Cli, RerunsAreByteIdentical) {
  auto pipeline = [&](const std::string& tag, const std::string& threads) {
    const fs::path base = tmp_ / tag;
    EXPECT_EQ(run("train --corpus " + corpus().string() + " --out " + (base / "run").string() +
                  " --mode vae-ssl --annotated-fraction 0.5" + kQuickTrain + threads)
                  .code,
              0);
    EXPECT_EQ(run("estimate --checkpoint " + (base / "run" / "checkpoint.cvck").string() +
                  " --input " + corpus().string() + " --subset test --posteriors --out " +
                  (base / "est").string())
                  .code,
              0);
    EXPECT_EQ(run("eval --estimates " + (base / "est").string() + " --reference " +
                  corpus().string() + " --out " + (base / "eval").string())
                  .code,
              0);
    return snapshot(base);
  };
  const auto a = pipeline("a", "");
  const auto b = pipeline("b", " --threads 3");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST_F(Cli, VocabListsAllLabels) {
  const RunResult r = run("vocab");
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(r.output);
  ASSERT_EQ(rows.size(), 98u);
  EXPECT_EQ(rows[1], "0,C:maj");
  EXPECT_EQ(rows[97], "96,N");
}

TEST_F(Cli, ThreadCountFromEnvironmentIsValidatedAndHarmless) {
  const std::string args = "estimate --checkpoint " + (tmp_ / "run" / "checkpoint.cvck").string() +
                           " --input " + corpus().string() + " --out ";
  ASSERT_EQ(run("train --corpus " + corpus().string() + " --out " + (tmp_ / "run").string() +
                " --mode ace-sl" + kQuickTrain)
                .code,
            0);
  EXPECT_EQ(run(args + (tmp_ / "a").string() + " --threads 2").code, 0);
  const std::string bad_env = std::string("CHORDVAE_THREADS=0 ") + CHORDVAE_CLI_PATH;
  const std::string good_env = std::string("CHORDVAE_THREADS=3 ") + CHORDVAE_CLI_PATH;
  const std::string cmd_bad = bad_env + " " + args + (tmp_ / "b").string() + " >/dev/null 2>&1";
  const std::string cmd_env = good_env + " " + args + (tmp_ / "c").string() + " >/dev/null 2>&1";
  EXPECT_EQ(WEXITSTATUS(std::system(cmd_bad.c_str())), 2);
  EXPECT_FALSE(fs::exists(tmp_ / "b"));
  ASSERT_EQ(WEXITSTATUS(std::system(cmd_env.c_str())), 0);
  EXPECT_EQ(snapshot(tmp_ / "a"), snapshot(tmp_ / "c"));
}
