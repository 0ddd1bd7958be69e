#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "otalign/projector.hpp"
#include "otalign/recognizer.hpp"
#include "otalign/serialize.hpp"

using namespace otalign;
namespace fs = std::filesystem;

TEST_CASE("param file round trip") {
  const std::vector<double> a{1.0, -2.5, 3.25, 0.0, 1e-300, 7e300};
  const std::vector<double> b{0.5, 0.5};
  const std::vector<NamedArray> arrays = {{"weights", {2, 3}, a},
                                          {"bias", {2}, b}};
  const fs::path p = fs::temp_directory_path() / "otalign_params_test.bin";
  write_param_file(p, arrays, {{"kind", "test"}, {"extra", 42}});

  const ParamFile pf = read_param_file(p);
  CHECK(pf.meta.at("kind") == "test");
  CHECK(pf.meta.at("extra") == 42);
  CHECK(pf.get("weights").shape == std::vector<std::size_t>{2, 3});
  CHECK(pf.get("weights").data == a);
  CHECK(pf.get("bias").data == b);
  CHECK_THROWS(pf.get("missing"));
  fs::remove(p);
}

TEST_CASE("param file rejects corrupted magic") {
  const fs::path p = fs::temp_directory_path() / "otalign_magic_test.bin";
  std::ofstream(p, std::ios::binary) << "NOPE garbage";
  CHECK_THROWS(read_param_file(p));
  fs::remove(p);
}

TEST_CASE("param file rejects shape/data mismatch on write") {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<NamedArray> arrays = {{"weights", {3, 3}, a}};
  const fs::path p = fs::temp_directory_path() / "otalign_bad_test.bin";
  CHECK_THROWS(write_param_file(p, arrays, {}));
}

TEST_CASE("recognizer checkpoint round trip is bit exact") {
  RecognizerConfig cfg;
  cfg.hidden = 10;
  cfg.descriptor_dim = 7;
  cfg.alphabet.symbols = "abc";
  cfg.phoc = PhocConfig{"abc", {1, 2}};
  const RecognizerParams params = RecognizerParams::init(cfg, Rng(5));

  const fs::path p = fs::temp_directory_path() / "otalign_rec_test.bin";
  save_recognizer(p, params);
  const RecognizerParams back = load_recognizer(p);
  CHECK(back.flatten() == params.flatten());
  CHECK(back.cfg.hidden == cfg.hidden);
  CHECK(back.cfg.alphabet.symbols == cfg.alphabet.symbols);
  CHECK(back.cfg.phoc.levels == cfg.phoc.levels);
  fs::remove(p);
}

TEST_CASE("projector checkpoint round trip is bit exact") {
  const ProjectorParams params =
      ProjectorParams::init(ProjectorConfig{9, 16, 5}, Rng(6));
  const fs::path p = fs::temp_directory_path() / "otalign_proj_test.bin";
  save_projector(p, params);
  const ProjectorParams back = load_projector(p);
  CHECK(back.flatten() == params.flatten());
  CHECK(back.cfg.in_dim == 9);
  CHECK(back.cfg.out_dim == 5);
  fs::remove(p);
}

TEST_CASE("checkpoint kinds are not interchangeable") {
  const ProjectorParams params =
      ProjectorParams::init(ProjectorConfig{4, 8, 2}, Rng(7));
  const fs::path p = fs::temp_directory_path() / "otalign_kind_test.bin";
  save_projector(p, params);
  CHECK_THROWS(load_recognizer(p));
  fs::remove(p);
}
