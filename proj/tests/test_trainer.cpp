#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "invml/datasets.hpp"
#include "invml/error.hpp"
#include "invml/trainer.hpp"

using invml::Matrix;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "invml_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

invml::ErrorCode load_code(const std::filesystem::path& p) {
  try {
    invml::load_checkpoint(p);
  } catch (const invml::Error& e) {
    return e.code();
  }
  FAIL("checkpoint loaded unexpectedly");
  return invml::ErrorCode::InvalidArgument;
}

invml::TrainConfig small_config(std::size_t epochs) {
  invml::TrainConfig c;
  c.epochs = epochs;
  c.k = 5;
  c.seed = 3;
  c.lr = 1e-2;
  c.log_interval = 1;
  c.schedule.epochs_total = epochs;
  return c;
}

}  // namespace

TEST_CASE("first Adam step moves each coordinate by about lr against the gradient") {
  Matrix p{{1.0, -2.0, 0.5}};
  const std::vector<Matrix> g{Matrix{{3.0, -0.01, 100.0}}};
  std::vector<Matrix*> params{&p};
  invml::AdamState s;
  s.lr = 0.1;
  invml::adam_step(params, g, s);
  CHECK(p(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p(0, 1) == doctest::Approx(-1.9).epsilon(1e-5));
  CHECK(p(0, 2) == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(s.step == 1);
}

TEST_CASE("zero gradient from fresh state leaves parameters unchanged") {
  Matrix p = testing::random_matrix(2, 3, 1);
  const Matrix before = p;
  std::vector<Matrix*> params{&p};
  const std::vector<Matrix> g{Matrix(2, 3)};
  invml::AdamState s;
  for (int i = 0; i < 5; ++i) invml::adam_step(params, g, s);
  CHECK(p == before);
}

TEST_CASE("Adam decreases a quadratic") {
  Matrix p{{2.0, -3.0}};
  std::vector<Matrix*> params{&p};
  invml::AdamState s;
  s.lr = 0.05;
  double prev = 13.0;
  for (int i = 0; i < 50; ++i) {
    const std::vector<Matrix> g{Matrix{{2.0 * p(0, 0), 2.0 * p(0, 1)}}};
    invml::adam_step(params, g, s);
    const double f = p(0, 0) * p(0, 0) + p(0, 1) * p(0, 1);
    CHECK(f < prev);
    prev = f;
  }
}

TEST_CASE("Adam rejects mismatched gradient lists") {
  Matrix p(1, 1);
  std::vector<Matrix*> params{&p};
  const std::vector<Matrix> g;
  invml::AdamState s;
  CHECK_THROWS_AS(invml::adam_step(params, g, s), invml::Error);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto data = invml::gen_swiss_roll(80, 1);
  auto a = invml::InvMLEncoder::initialized(3, 2, 4, 2);
  auto b = a;
  const auto ra = invml::train(a, data.x, small_config(15));
  const auto rb = invml::train(b, data.x, small_config(15));
  CHECK(a.body() == b.body());
  CHECK(a.head() == b.head());
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) CHECK(ra.history[i].loss.total == rb.history[i].loss.total);
}

TEST_CASE("training reduces the isometry loss") {
  const auto data = invml::gen_swiss_roll(100, 4);
  auto enc = invml::InvMLEncoder::initialized(3, 2, 4, 5);
  auto cfg = small_config(60);
  cfg.schedule.use_extra = false;
  cfg.schedule.mu_min = cfg.schedule.mu_max = 0.0;
  const auto r = invml::train(enc, data.x, cfg);
  CHECK(r.history.back().loss.lis < r.history.front().loss.lis);
}

TEST_CASE("history has one row per logged epoch plus the last") {
  const auto data = invml::gen_swiss_roll(60, 1);
  auto enc = invml::InvMLEncoder::initialized(3, 2, 4, 1);
  auto cfg = small_config(11);
  cfg.log_interval = 5;
  const auto r = invml::train(enc, data.x, cfg);
  REQUIRE(r.history.size() == 3);
  CHECK(r.history[0].epoch == 0);
  CHECK(r.history[1].epoch == 5);
  CHECK(r.history[2].epoch == 10);

  const auto p = scratch("history.csv");
  invml::write_history_csv(p, r.history);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,orth,pad,lis,push,extra,total");
}

TEST_CASE("disabled extra heads are never updated") {
  const auto data = invml::gen_swiss_roll(60, 2);
  auto enc = invml::InvMLEncoder::initialized(3, 2, 5, 3);
  const auto heads = enc.extra_heads();
  auto cfg = small_config(10);
  cfg.schedule.use_extra = false;
  invml::train(enc, data.x, cfg);
  CHECK(enc.extra_heads() == heads);
}

TEST_CASE("block mode trains and covers every anchor") {
  const auto data = invml::gen_swiss_roll(90, 3);
  auto enc = invml::InvMLEncoder::initialized(3, 2, 4, 1);
  auto cfg = small_config(5);
  cfg.batch_mode = invml::BatchMode::NeighborhoodBlock;
  cfg.block_size = 30;
  const auto r = invml::train(enc, data.x, cfg);
  CHECK(r.history.size() == 5);
  CHECK(r.adam.step == 15);
}

TEST_CASE("training rejects a dataset of the wrong width") {
  auto enc = invml::InvMLEncoder::initialized(4, 2, 4, 1);
  CHECK_THROWS_AS(invml::train(enc, Matrix(10, 3), small_config(1)), invml::Error);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto data = invml::gen_swiss_roll(50, 1);
  invml::Checkpoint c;
  c.encoder = invml::InvMLEncoder::initialized(3, 2, 5, 7);
  c.adam = invml::train(c.encoder, data.x, small_config(3)).adam;
  c.epoch = 3;
  c.config_echo = "[model]\nlayers = 5\n";
  const auto p = scratch("round.bin");
  invml::save_checkpoint(p, c);
  const auto d = invml::load_checkpoint(p);
  CHECK(d.encoder.body() == c.encoder.body());
  CHECK(d.encoder.head() == c.encoder.head());
  CHECK(d.encoder.extra_heads() == c.encoder.extra_heads());
  CHECK(d.adam.first_moment == c.adam.first_moment);
  CHECK(d.adam.second_moment == c.adam.second_moment);
  CHECK(d.adam.step == c.adam.step);
  CHECK(d.epoch == 3);
  CHECK(d.config_echo == c.config_echo);

  const auto q = scratch("round2.bin");
  invml::save_checkpoint(q, d);
  CHECK(read_bytes(p) == read_bytes(q));
}

TEST_CASE("corrupted checkpoints are rejected") {
  invml::Checkpoint c;
  c.encoder = invml::InvMLEncoder::initialized(3, 2, 4, 1);
  const auto p = scratch("corrupt.bin");
  invml::save_checkpoint(p, c);
  const auto bytes = read_bytes(p);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  write_bytes(scratch("trunc.bin"), truncated);
  CHECK(load_code(scratch("trunc.bin")) == invml::ErrorCode::ChecksumMismatch);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  write_bytes(scratch("flip.bin"), flipped);
  CHECK(load_code(scratch("flip.bin")) == invml::ErrorCode::ChecksumMismatch);

  auto version = bytes;
  version[4] = static_cast<char>(invml::kCheckpointVersion + 1);
  write_bytes(scratch("ver.bin"), version);
  CHECK(load_code(scratch("ver.bin")) == invml::ErrorCode::VersionMismatch);

  auto magic = bytes;
  magic[0] = 'X';
  write_bytes(scratch("magic.bin"), magic);
  CHECK(load_code(scratch("magic.bin")) == invml::ErrorCode::BadMagic);

  CHECK(load_code(scratch("does_not_exist.bin")) == invml::ErrorCode::IoError);
}
