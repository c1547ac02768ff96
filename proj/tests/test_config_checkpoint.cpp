#include <doctest.h>

#include <fstream>

#include "mmc/checkpoint.hpp"
#include "mmc/config.hpp"
#include "test_support.hpp"

using namespace mmc;
using mmc_test::TempDir;

TEST_SUITE("config and checkpoint") {

TEST_CASE("key=value parsing") {
  KVConfig cfg;
  cfg.parse_string(
      "# a comment\n"
      "\n"
      "fusion.channels = 64\n"
      "  train.lr=0.5  \n"
      "name = hello world \n"
      "flag = true\n",
      "test");
  CHECK(cfg.get_int("fusion.channels", 0) == 64);
  CHECK(cfg.get_real("train.lr", 0.0) == 0.5);
  CHECK(cfg.get_string("name", "") == "hello world");
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("later keys override earlier ones") {
  KVConfig cfg;
  cfg.parse_string("a = 1\na = 2\n", "test");
  CHECK(cfg.get_int("a", 0) == 2);
}

TEST_CASE("parse errors carry origin and line") {
  KVConfig cfg;
  try {
    cfg.parse_string("ok = 1\nnot-a-pair\n", "myfile");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("myfile") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }
}

TEST_CASE("typed getters validate") {
  KVConfig cfg;
  cfg.parse_string("num = 12x\nreal = zz\nflag = maybe\n", "test");
  CHECK_THROWS_AS(cfg.get_int("num", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_real("real", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("flag", false), ConfigError);
  for (const auto& [text, want] : std::vector<std::pair<std::string, bool>>{
           {"true", true}, {"1", true}, {"yes", true}, {"on", true},
           {"false", false}, {"0", false}, {"no", false}, {"off", false}}) {
    KVConfig c2;
    c2.parse_string("b = " + text + "\n", "test");
    CHECK(c2.get_bool("b", !want) == want);
  }
}

TEST_CASE("serialization round-trips losslessly") {
  KVConfig cfg;
  cfg.set("z.last", "v");
  cfg.set_int("a.first", -12);
  cfg.set_real("m.pi", 3.141592653589793);
  cfg.set_bool("m.flag", true);
  const std::string text = cfg.serialize();

  KVConfig back;
  back.parse_string(text, "roundtrip");
  CHECK(back == cfg);
  CHECK(back.serialize() == text);
  CHECK(back.get_real("m.pi", 0.0) == 3.141592653589793);

  // Sorted output.
  CHECK(text.find("a.first") < text.find("m.flag"));
  CHECK(text.find("m.flag") < text.find("z.last"));
}

TEST_CASE("checkpoint save and load round trip") {
  TempDir dir("ckpt_roundtrip");
  CheckpointData data;
  data.config.set("fusion.channels", "8");
  data.state["epoch"] = "3";
  data.state["step"] = "12";
  NamedArray a;
  a.name = "enc.w";
  a.rows = 2;
  a.cols = 3;
  a.data = {1.0f, 2.0f, 3.0f, -4.0f, 0.5f, 6.25f};
  data.arrays.push_back(a);

  const std::string path = dir.sub("model.mmck");
  save_checkpoint(path, data);
  const CheckpointData back = load_checkpoint(path);

  CHECK(back.config.get_string("fusion.channels", "") == "8");
  CHECK(back.state.at("epoch") == "3");
  CHECK(back.state.at("step") == "12");
  REQUIRE(back.arrays.size() == 1);
  const NamedArray* arr = back.find("enc.w");
  REQUIRE(arr != nullptr);
  CHECK(arr->rows == 2);
  CHECK(arr->cols == 3);
  CHECK(arr->data == a.data);
  CHECK(back.find("missing") == nullptr);
}

TEST_CASE("checkpoint detects corruption") {
  TempDir dir("ckpt_corrupt");
  CheckpointData data;
  NamedArray a;
  a.name = "w";
  a.rows = 1;
  a.cols = 2;
  a.data = {1.0f, 2.0f};
  data.arrays.push_back(a);
  const std::string path = dir.sub("model.mmck");
  save_checkpoint(path, data);

  std::string bytes = mmc_test::read_file(path);
  bytes[bytes.size() / 2] ^= 0x40;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes;
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir.sub("missing.mmck")), IoError);
}

TEST_CASE("file hash is stable and content sensitive") {
  TempDir dir("file_hash");
  const std::string p1 = dir.sub("a.bin"), p2 = dir.sub("b.bin");
  {
    std::ofstream o1(p1, std::ios::binary);
    o1 << "hello";
    std::ofstream o2(p2, std::ios::binary);
    o2 << "hellp";
  }
  CHECK(file_hash(p1) == file_hash(p1));
  CHECK(file_hash(p1) != file_hash(p2));
  CHECK(file_hash(p1) == fnv1a("hello"));
}

}  // TEST_SUITE
