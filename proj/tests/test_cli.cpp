#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ren/checkpoint.hpp"
#include "ren/config.hpp"
#include "ren/experiment.hpp"

using namespace ren;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

long count_lines(const std::string& text) {
  long n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string out = "/tmp/ren_cli_out_" + std::to_string(counter);
  const std::string err = "/tmp/ren_cli_err_" + std::to_string(counter);
  ++counter;
  const std::string cmd =
      std::string(REN_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  const int rc = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string fresh_dir(const std::string& name) {
  const std::string dir = "/tmp/ren_cli_" + name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string tiny_config_text(const std::string& out_dir) {
  return "dataset.family = one_moon\n"
         "dataset.n = 64\n"
         "dataset.seed = 9\n"
         "train.epochs = 3\n"
         "train.burnin = 1\n"
         "train.batch_size = 16\n"
         "train.r = 2\n"
         "model.L = 2\n"
         "model.variant = dpvae\n"
         "model.flow_blocks = 2\n"
         "eval.n_generate = 40\n"
         "eval.seed = 5\n"
         "output_dir = " +
         out_dir + "\n";
}

std::string write_config(const std::string& dir, const std::string& text) {
  const std::string path = dir + "/exp.cfg";
  std::ofstream out(path, std::ios::trunc);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("train").code == 2);
  CHECK(run_cli("eval").code == 2);
  CHECK(run_cli("inspect").code == 2);

  SUBCASE("missing config file names the path") {
    const CmdResult r = run_cli("train --config /nonexistent/exp.cfg");
    CHECK(r.code == 2);
    CHECK(r.err.find("/nonexistent/exp.cfg") != std::string::npos);
  }
  SUBCASE("invalid config lists every violation") {
    const std::string dir = fresh_dir("badcfg");
    const std::string cfg = write_config(
        dir, "dataset.family = one_moon\nmodel.L = 0\ntrain.lr_ren = 0\n");
    const CmdResult r = run_cli("train --config " + cfg);
    CHECK(r.code == 2);
    CHECK(r.err.find("model.L") != std::string::npos);
    CHECK(r.err.find("train.lr_ren") != std::string::npos);
  }
}

TEST_CASE("gen-data writes deterministic toy files") {
  const std::string dir = fresh_dir("gendata");
  const CmdResult r =
      run_cli("gen-data --dataset one_moon --out " + dir +
              " --n-generate 50 --seed 5");
  REQUIRE(r.code == 0);
  const std::string path = dir + "/one_moon.tsv";
  CHECK(r.out.find(path) != std::string::npos);
  const std::string first = slurp(path);
  CHECK(count_lines(first) == 50);
  CHECK(lines_of(first)[0].find('\t') != std::string::npos);

  const CmdResult again =
      run_cli("gen-data --dataset one_moon --out " + dir +
              " --n-generate 50 --seed 5");
  REQUIRE(again.code == 0);
  CHECK(slurp(path) == first);

  SUBCASE("image subsample round-trips through fresh idx files") {
    // Six 2x2 images, three balanced classes; subsample keeps one per class.
    std::vector<std::uint8_t> pixels;
    for (int i = 0; i < 6; ++i)
      for (int p = 0; p < 4; ++p)
        pixels.push_back(static_cast<std::uint8_t>(40 * i + p));
    write_idx(dir + "/im", pixels, 6, 2, 2);
    write_idx_labels(dir + "/lb", {0, 0, 1, 1, 2, 2});
    const std::string cfg = write_config(
        dir,
        "dataset.family = mnist\n"
        "dataset.train_images = " + dir + "/im\n"
        "dataset.train_labels = " + dir + "/lb\n"
        "dataset.n = 3\n"
        "output_dir = " + dir + "/sub\n");
    const CmdResult g = run_cli("gen-data --config " + cfg);
    REQUIRE(g.code == 0);
    const ImageSet back = load_idx(dir + "/sub/train-images-idx3-ubyte",
                                   dir + "/sub/train-labels-idx1-ubyte");
    CHECK(back.images.n == 3);
    CHECK(back.height == 2);
    CHECK(back.width == 2);
    const std::set<long> classes(back.labels.begin(), back.labels.end());
    CHECK(classes == std::set<long>{0, 1, 2});
  }
}

TEST_CASE("train produces checkpoint, log, and manifest; reruns are identical") {
  const std::string dir = fresh_dir("train");
  const std::string run = dir + "/run";
  const std::string cfg = write_config(dir, tiny_config_text(run));

  const CmdResult r = run_cli("train --config " + cfg);
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(run + "/model.ckpt"));
  REQUIRE(fs::exists(run + "/train_log.jsonl"));
  REQUIRE(fs::exists(run + "/manifest.json"));

  CHECK(count_lines(slurp(run + "/train_log.jsonl")) == 3);

  const nlohmann::json manifest =
      nlohmann::json::parse(slurp(run + "/manifest.json"));
  CHECK(manifest.at("epochs").get<long>() == 3);
  CHECK(manifest.at("seed").get<std::uint64_t>() == 42);
  CHECK(manifest.at("final_alpha").size() == 2);
  CHECK(manifest.at("wall_seconds").get<double>() > 0.0);
  const std::string ckpt_hash = manifest.at("checkpoint_hash").get<std::string>();
  CHECK(ckpt_hash == file_hash(run + "/model.ckpt"));
  CHECK(r.out.find("checkpoint_hash: " + ckpt_hash) != std::string::npos);

  const ExperimentConfig loaded = load_config(cfg);
  CHECK(manifest.at("config_hash").get<std::string>() == config_hash(loaded));
  CHECK(manifest.at("config").get<std::string>() == config_echo(loaded));

  SUBCASE("retraining with the same config reproduces the checkpoint bytes") {
    fs::copy_file(run + "/model.ckpt", dir + "/first.ckpt");
    const CmdResult again = run_cli("train --config " + cfg);
    REQUIRE(again.code == 0);
    CHECK(file_hash(run + "/model.ckpt") == file_hash(dir + "/first.ckpt"));
  }
  SUBCASE("a different seed changes the checkpoint") {
    const CmdResult other =
        run_cli("train --config " + cfg + " --seed 7 --out " + dir + "/run7");
    REQUIRE(other.code == 0);
    CHECK(file_hash(dir + "/run7/model.ckpt") != ckpt_hash);
  }

  SUBCASE("eval scores the checkpoint and appends result records") {
    const CmdResult e = run_cli("eval --checkpoint " + run +
                                "/model.ckpt --config " + cfg);
    REQUIRE(e.code == 0);
    CHECK(e.out.find("recon_mse:") != std::string::npos);
    CHECK(e.out.find("l_star:") != std::string::npos);
    CHECK(e.out.find("energy_distance:") != std::string::npos);

    const auto records = lines_of(slurp(run + "/results.jsonl"));
    REQUIRE(records.size() == 4);
    std::set<std::string> metrics;
    for (const auto& line : records) {
      const nlohmann::json rec = nlohmann::json::parse(line);
      metrics.insert(rec.at("metric").get<std::string>());
      CHECK(rec.at("config_hash").get<std::string>() == config_hash(loaded));
      CHECK(rec.at("seed").get<std::uint64_t>() == 5);
    }
    CHECK(metrics == std::set<std::string>{"recon_mse", "l_star",
                                           "energy_distance",
                                           "relevance_report"});

    // Same seed, same records: the second run appends an identical block.
    const CmdResult e2 = run_cli("eval --checkpoint " + run +
                                 "/model.ckpt --config " + cfg);
    REQUIRE(e2.code == 0);
    const auto both = lines_of(slurp(run + "/results.jsonl"));
    REQUIRE(both.size() == 8);
    for (int i = 0; i < 4; ++i) CHECK(both[i] == both[i + 4]);
  }

  SUBCASE("dump-plots writes the four data files with the right row counts") {
    const CmdResult d = run_cli("dump-plots --checkpoint " + run +
                                "/model.ckpt --config " + cfg +
                                " --n-generate 25 --out " + dir + "/plots");
    REQUIRE(d.code == 0);
    const auto recon = lines_of(slurp(dir + "/plots/reconstructions.tsv"));
    REQUIRE(recon.size() == 64);
    long tabs = 0;
    for (char c : recon[0])
      if (c == '\t') ++tabs;
    CHECK(tabs == 3);  // x0 x1 xhat0 xhat1

    const auto lat = lines_of(slurp(dir + "/plots/latents.tsv"));
    REQUIRE(lat.size() == 65);
    CHECK(lat[0].rfind("# alpha", 0) == 0);

    CHECK(count_lines(slurp(dir + "/plots/generated.tsv")) == 25);

    const auto rel = lines_of(slurp(dir + "/plots/relevance.tsv"));
    REQUIRE(rel.size() == 2);
    CHECK(rel[0].rfind("0\t", 0) == 0);
    CHECK(rel[1].rfind("1\t", 0) == 0);
  }

  SUBCASE("inspect prints the parameter table and stored config") {
    const CmdResult i = run_cli("inspect --checkpoint " + run + "/model.ckpt");
    REQUIRE(i.code == 0);
    CHECK(i.out.find("total_parameters:") != std::string::npos);
    CHECK(i.out.find("current_alpha:") != std::string::npos);
    CHECK(i.out.find("dataset.family = one_moon") != std::string::npos);
    CHECK(i.out.find("encoder.") != std::string::npos);
  }
}

TEST_CASE("a fresh checkpoint with uniform relevance evaluates to l_star = L") {
  const std::string dir = fresh_dir("fresh");
  std::vector<std::string> errors;
  ExperimentConfig cfg = parse_config_text(tiny_config_text(dir + "/run"), errors);
  REQUIRE(errors.empty());

  RngStream init = RngStream(cfg.train.seed).child("init");
  RenModel m = build_model(cfg.model, init);
  Adam opt_vae(cfg.train.lr_vae);
  Adam opt_ren(cfg.train.lr_ren);
  save_checkpoint(dir + "/fresh.ckpt", m, config_echo(cfg), opt_vae, opt_ren);

  const CmdResult e = run_cli("eval --checkpoint " + dir +
                              "/fresh.ckpt --out " + dir + "/out");
  REQUIRE(e.code == 0);
  CHECK(e.out.find("l_star: 2") != std::string::npos);
}

TEST_CASE("shape mismatch between checkpoint and dataset is a runtime failure") {
  const std::string dir = fresh_dir("mismatch");
  std::vector<std::string> errors;
  ExperimentConfig cfg = parse_config_text(tiny_config_text(dir + "/run"), errors);
  REQUIRE(errors.empty());
  RngStream init = RngStream(cfg.train.seed).child("init");
  RenModel m = build_model(cfg.model, init);
  Adam opt_vae(cfg.train.lr_vae);
  Adam opt_ren(cfg.train.lr_ren);
  save_checkpoint(dir + "/toy.ckpt", m, config_echo(cfg), opt_vae, opt_ren);

  std::vector<std::uint8_t> pixels(4 * 4, 100);
  write_idx(dir + "/im", pixels, 4, 2, 2);
  const std::string imgcfg = write_config(
      dir,
      "dataset.family = mnist\n"
      "dataset.train_images = " + dir + "/im\n"
      "dataset.test_images = " + dir + "/im\n"
      "dataset.n = 0\n"
      "output_dir = " + dir + "/out\n");

  const CmdResult e = run_cli("eval --checkpoint " + dir + "/toy.ckpt --config " +
                              imgcfg);
  CHECK(e.code == 1);
  CHECK(e.err.find("model expects D=2") != std::string::npos);
  CHECK(e.err.find("dataset provides D=4") != std::string::npos);
}
