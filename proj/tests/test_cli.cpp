// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end tests of the faultear binary, run as subprocesses at desk
// scale. FAULTEAR_BIN is injected by the build.

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "faultear/model.hpp"
#include "test_util.hpp"

namespace {

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

RunResult run(const std::string& args, const std::string& stdout_path) {
  const std::string command =
      std::string(FAULTEAR_BIN) + " " + args + " > " + stdout_path + " 2>&1";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(stdout_path);
  std::stringstream ss;
  ss << in.rdbuf();
  result.stdout_text = ss.str();
  return result;
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  return lines;
}

}  // namespace

TEST_CASE("cli: synth is reproducible and counts positions") {
  TempDir dir("cli_synth");
  const std::string out1 = dir.file("a");
  const std::string out2 = dir.file("b");
  auto r1 = run("synth --out " + out1 + " --seed 5 --seconds 1 --positions 1",
                dir.file("log1"));
  CHECK(r1.exit_code == 0);
  auto r2 = run("synth --out " + out2 + " --seed 5 --seconds 1 --positions 1",
                dir.file("log2"));
  CHECK(r2.exit_code == 0);

  int wavs = 0;
  for (const auto& entry : std::filesystem::directory_iterator(out1)) {
    if (entry.path().extension() == ".wav") ++wavs;
  }
  CHECK(wavs == 5);  // one per class at --positions 1

  // Same seed -> byte-identical WAVs.
  for (const auto& entry : std::filesystem::directory_iterator(out1)) {
    if (entry.path().extension() != ".wav") continue;
    const auto twin = std::filesystem::path(out2) / entry.path().filename();
    CHECK(read_file_bytes(entry.path().string()) == read_file_bytes(twin.string()));
  }
  CHECK(std::filesystem::exists(std::filesystem::path(out1) / "manifest.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(out1) / "run_manifest.json"));
}

TEST_CASE("cli: train, eval and infer fit together") {
  TempDir dir("cli_train");
  const std::string data = dir.file("data");
  REQUIRE(run("synth --out " + data + " --seed 9 --seconds 2 --positions 1",
              dir.file("synth.log"))
              .exit_code == 0);

  const std::string out = dir.file("run");
  const auto train = run("train --data " + data + " --out " + out +
                             " --frame-len 480 --epochs 2 --batch 16 --seed 9",
                         dir.file("train.log"));
  CHECK(train.exit_code == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "final.ckpt"));
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "history.csv"));

  // History CSV has exactly --epochs epoch-summary rows (iteration field
  // empty).
  std::ifstream hist((std::filesystem::path(out) / "history.csv").string());
  std::string line;
  std::getline(hist, line);  // header
  int epoch_rows = 0;
  while (std::getline(hist, line)) {
    const std::size_t first = line.find(',');
    if (first != std::string::npos && first + 1 < line.size() &&
        line[first + 1] == ',') {
      ++epoch_rows;
    }
  }
  CHECK(epoch_rows == 2);

  const auto eval = run("eval --ckpt " + out + "/final.ckpt --data " + data +
                            " --split val --out " + dir.file("eval"),
                        dir.file("eval.log"));
  CHECK(eval.exit_code == 0);
  CHECK(eval.stdout_text.find("accuracy=") != std::string::npos);
  CHECK(eval.stdout_text.find("fpr_normal=") != std::string::npos);
  // 5 clips x 2 s / 480-sample frames -> 200 frames, 10% to val.
  CHECK(eval.stdout_text.find("samples=100") != std::string::npos);
  CHECK(std::filesystem::exists(dir.file("eval") + "/confusion_val.csv"));

  // infer: one row per frame of a 1 s clip (100 frames at 480 samples).
  const std::string lone = dir.file("lone");
  REQUIRE(run("synth --out " + lone + " --seed 10 --seconds 1 --positions 1",
              dir.file("lone.log"))
              .exit_code == 0);
  const auto infer = run("infer --ckpt " + out + "/final.ckpt --wav " + lone +
                             "/drive_inner_spall_0.wav",
                         dir.file("infer.log"));
  CHECK(infer.exit_code == 0);
  CHECK(count_lines(infer.stdout_text) == 1 + 100);  // header + rows
  CHECK(infer.stdout_text.rfind("frame_index,predicted_label,probability", 0) == 0);
}

TEST_CASE("cli: lr 0 leaves the checkpoint at its initialization") {
  TempDir dir("cli_lr0");
  const std::string data = dir.file("data");
  REQUIRE(run("synth --out " + data + " --seed 11 --seconds 1 --positions 1",
              dir.file("synth.log"))
              .exit_code == 0);

  // Two runs, lr 0 vs lr 0.01, same seed: the lr-0 run must keep its
  // initial parameters, so its two epochs change nothing.
  const std::string frozen = dir.file("frozen");
  const auto a = run("train --data " + data + " --out " + frozen +
                         " --frame-len 480 --epochs 1 --batch 8 --lr 0 --seed 3",
                     dir.file("a.log"));
  CHECK(a.exit_code == 0);
  const std::string frozen2 = dir.file("frozen2");
  const auto b = run("train --data " + data + " --out " + frozen2 +
                         " --frame-len 480 --epochs 3 --batch 8 --lr 0 --seed 3",
                     dir.file("b.log"));
  CHECK(b.exit_code == 0);
  // Learnable parameters never move with lr 0, whatever the epoch count
  // (batch-norm running statistics are state, not learnables, and do
  // drift).
  faultear::Checkpoint one = faultear::load_checkpoint(frozen + "/final.ckpt");
  faultear::Checkpoint three = faultear::load_checkpoint(frozen2 + "/final.ckpt");
  CHECK(one.model.conv1.weights.data == three.model.conv1.weights.data);
  CHECK(one.model.conv1.bias.data == three.model.conv1.bias.data);
  CHECK(one.model.bn1.scale.data == three.model.bn1.scale.data);
  CHECK(one.model.bn2.offset.data == three.model.bn2.offset.data);
  CHECK(one.model.conv2.weights.data == three.model.conv2.weights.data);
  CHECK(one.model.lstm.input_weights.data == three.model.lstm.input_weights.data);
  CHECK(one.model.lstm.recurrent_weights.data ==
        three.model.lstm.recurrent_weights.data);
  CHECK(one.model.lstm.bias.data == three.model.lstm.bias.data);
  CHECK(one.model.fc.weights.data == three.model.fc.weights.data);
  CHECK(one.model.fc.bias.data == three.model.fc.bias.data);
}

TEST_CASE("cli: identical train flags produce byte-identical outputs") {
  TempDir dir("cli_det");
  const std::string data = dir.file("data");
  REQUIRE(run("synth --out " + data + " --seed 12 --seconds 1 --positions 1",
              dir.file("synth.log"))
              .exit_code == 0);
  const std::string r1 = dir.file("r1");
  const std::string r2 = dir.file("r2");
  REQUIRE(run("train --data " + data + " --out " + r1 +
                  " --frame-len 480 --epochs 2 --batch 8 --seed 77",
              dir.file("t1.log"))
              .exit_code == 0);
  REQUIRE(run("train --data " + data + " --out " + r2 +
                  " --frame-len 480 --epochs 2 --batch 8 --seed 77",
              dir.file("t2.log"))
              .exit_code == 0);
  CHECK(read_file_bytes(r1 + "/final.ckpt") == read_file_bytes(r2 + "/final.ckpt"));
  CHECK(read_file_bytes(r1 + "/history.csv") == read_file_bytes(r2 + "/history.csv"));
}

TEST_CASE("cli: features emits CSV rows and a binary tensor file") {
  TempDir dir("cli_feat");
  const std::string data = dir.file("data");
  REQUIRE(run("synth --out " + data + " --seed 13 --seconds 1 --positions 1",
              dir.file("synth.log"))
              .exit_code == 0);

  const auto csv = run("features --data " + data + " --out " + dir.file("f.csv") +
                           " --frame-len 480 --format csv",
                       dir.file("fc.log"));
  CHECK(csv.exit_code == 0);
  std::ifstream in(dir.file("f.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (rows == 0) {
      // 2N values plus the label.
      CHECK(std::count(line.begin(), line.end(), ',') == 2 * 480);
    }
    ++rows;
  }
  CHECK(rows == 500);  // 5 clips x 100 frames

  const auto bin = run("features --data " + data + " --out " + dir.file("f.bin") +
                           " --frame-len 480 --format bin",
                       dir.file("fb.log"));
  CHECK(bin.exit_code == 0);
  CHECK(std::filesystem::file_size(dir.file("f.bin")) >
        500ull * 2 * 480 * 8);  // payload plus headers
}

TEST_CASE("cli: usage and data errors map to exit codes 1 and 2") {
  TempDir dir("cli_err");
  CHECK(run("train --frame-len 480", dir.file("usage.log")).exit_code == 1);
  CHECK(run("bogus-subcommand", dir.file("bogus.log")).exit_code == 1);
  CHECK(run("eval --ckpt /nonexistent.ckpt --data /nonexistent --split test",
            dir.file("data.log"))
            .exit_code == 2);

  // A non-checkpoint file is BadMagic -> exit 2.
  write_file_bytes(dir.file("junk.ckpt"), {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  CHECK(run("infer --ckpt " + dir.file("junk.ckpt") + " --wav /nonexistent.wav",
            dir.file("magic.log"))
            .exit_code == 2);
}

TEST_CASE("cli: infer on a too-short WAV warns and exits 0 with no rows") {
  TempDir dir("cli_short");
  const std::string data = dir.file("data");
  REQUIRE(run("synth --out " + data + " --seed 14 --seconds 1 --positions 1",
              dir.file("synth.log"))
              .exit_code == 0);
  const std::string out = dir.file("run");
  REQUIRE(run("train --data " + data + " --out " + out +
                  " --frame-len 480 --epochs 1 --batch 8 --seed 1",
              dir.file("train.log"))
              .exit_code == 0);

  // 100 samples < one 480-sample frame.
  const std::string tiny_dir = dir.file("tiny");
  REQUIRE(run("synth --out " + tiny_dir +
                  " --seed 15 --seconds 0.002 --positions 1",
              dir.file("tiny.log"))
              .exit_code == 0);
  const auto infer = run("infer --ckpt " + out + "/final.ckpt --wav " + tiny_dir +
                             "/normal_0.wav",
                         dir.file("infer.log"));
  CHECK(infer.exit_code == 0);
  CHECK(infer.stdout_text.find("warning") != std::string::npos);
  CHECK(infer.stdout_text.find("frame_index,") == std::string::npos);
}
