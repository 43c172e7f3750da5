#include <doctest.h>

#include <string>

#include "subkam/config.hpp"

using namespace subkam;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
  const auto c = parse_config("instance = euclidean-1d, task = critical\n");
  CHECK(c.instance == "euclidean-1d");
  CHECK(c.task == "critical");
  CHECK(c.hj_resolution == 401);
  CHECK(c.scheme.dt == doctest::Approx(5e-3));
  CHECK(c.t_ladder.back() == 200.0);
  CHECK(c.lambda_ladder.back() == 0.01);
  CHECK(c.lp_n_x.back() == 81);
  CHECK(c.lp_n_u.back() == 41);
  CHECK(c.lp_degree == 4);
  CHECK(c.probe_point.size() == 1);
}

TEST_CASE("unknown key is reported with its line") {
  const auto msg = config_error("instance = euclidean-1d\n[hj]\ngridd_n = 3\n");
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("gridd_n") != std::string::npos);
}

TEST_CASE("type mismatch, unknown names and missing instance") {
  CHECK(config_error("instance = euclidean-1d\nseed = abc\n").find("line 2") != std::string::npos);
  CHECK(config_error("instance = euclidean-1d\n[hj]\nresolution = 2.5\n").find("line 3") != std::string::npos);
  CHECK(config_error("instance = moon\n").find("line 1") != std::string::npos);
  CHECK(config_error("instance = euclidean-1d\ntask = everything\n").find("line 2") != std::string::npos);
  CHECK(config_error("task = critical\n# nothing else\n").find("instance") != std::string::npos);
  CHECK(config_error("instance = euclidean-1d\n[nowhere]\n").find("line 2") != std::string::npos);
}

TEST_CASE("comments, sections and overrides") {
  const auto c = parse_config(
      "# header comment\n"
      "instance = double-well  # trailing\n"
      "seed = 17\n"
      "[hj]\n"
      "resolution = 101, dt = 0.01\n"
      "[critical]\n"
      "t_ladder = 10, 20, 40\n"
      "[barrier]\n"
      "t_max = 40\n");
  CHECK(c.instance == "double-well");
  CHECK(c.seed == 17);
  CHECK(c.hj_resolution == 101);
  CHECK(c.scheme.dt == 0.01);
  CHECK(c.t_ladder == std::vector<double>{10, 20, 40});
  CHECK(c.barrier.t_max == 40.0);
}

TEST_CASE("heisenberg full-pipeline config populates every block and round-trips") {
  const auto c = parse_config("instance = heisenberg\ntask = full-pipeline\n");
  CHECK(c.task == "full-pipeline");
  CHECK(c.probe_point.size() == 3);
  CHECK(c.hj_geometry().d() == 3);
  CHECK(c.hj_resolution == 21);
  CHECK(c.lp_n_x.size() == c.lp_n_u.size());
  CHECK(c.barrier.n_horizons > 0);
  CHECK(c.optimizer.n_steps > 0);
  CHECK(c.probe_spacing > 0.0);
  CHECK(c.calibrate_dt > 0.0);

  const std::string echo = echo_config(c);
  const auto again = parse_config(echo);
  CHECK(echo_config(again) == echo);
  CHECK(again.probe_point == c.probe_point);
  CHECK(again.scheme.dt == c.scheme.dt);
  CHECK(again.barrier.t_min == c.barrier.t_min);
}

TEST_CASE("custom instance tables round-trip") {
  const std::string text =
      "instance = custom\n"
      "[instance]\n"
      "system = euclidean, d = 1, m = 1\n"
      "numerator = [[1, 2]]\n"
      "denominator = [[1, 0], [1, 2]]\n"
      "x_star = 0\n"
      "[critical]\n"
      "x = 0.25\n";
  const auto c = parse_config(text);
  REQUIRE(c.custom.denominator.size() == 2);
  CHECK(c.custom.denominator[1] == std::vector<double>{1, 2});
  const auto echo = echo_config(c);
  CHECK(echo_config(parse_config(echo)) == echo);
}
