#include <doctest.h>

#include <string>

#include "prefgp/config.hpp"

using namespace prefgp;

TEST_CASE("parse reads key = value with comments and blanks") {
  const Config cfg = Config::parse(
      "# a comment\n"
      "seed = 42\n"
      "\n"
      "kernel.family = matern32  # trailing comment\n"
      "svi.fixed_rho = 0.5\n"
      "flag = true\n"
      "list = 1, 2.5, -3\n",
      "inline");
  CHECK(cfg.get_uint64("seed", 0) == 42);
  CHECK(cfg.get_string("kernel.family", "") == "matern32");
  CHECK(cfg.get_double("svi.fixed_rho", 0.0) == 0.5);
  CHECK(cfg.get_bool("flag", false));
  const auto list = cfg.get_double_list("list");
  REQUIRE(list.size() == 3);
  CHECK(list[2] == -3.0);
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("parse errors name the origin and line") {
  try {
    Config::parse("ok = 1\nbroken line\n", "myfile.cfg");
    FAIL("expected InvalidConfigError");
  } catch (const InvalidConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("myfile.cfg:2") != std::string::npos);
  }
}

TEST_CASE("typed getters reject malformed values") {
  const Config cfg = Config::parse("a = notanumber\nb = 1.5\n", "x");
  CHECK_THROWS_AS(cfg.get_double("a", 0.0), InvalidConfigError);
  CHECK_THROWS_AS(cfg.get_int("b", 0), InvalidConfigError);
  CHECK_THROWS_AS(cfg.get_bool("a", false), InvalidConfigError);
}

TEST_CASE("require_known names the unknown key") {
  const Config cfg = Config::parse("seed = 1\nsvi.typo = 2\n", "x");
  constexpr std::string_view allowed[] = {"seed", "svi.batch_size"};
  try {
    cfg.require_known(allowed);
    FAIL("expected InvalidConfigError");
  } catch (const InvalidConfigError& e) {
    CHECK(std::string(e.what()).find("svi.typo") != std::string::npos);
  }
}

TEST_CASE("serialize echoes keys in sorted order") {
  Config cfg = Config::parse("b = 2\na = 1\n", "x");
  cfg.set("c", "3");
  CHECK(cfg.serialize() == "a = 1\nb = 2\nc = 3\n");
}

TEST_CASE("load rejects missing files") {
  CHECK_THROWS_AS(Config::load("/nonexistent/path.cfg"), InvalidConfigError);
}
