#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "ldspin/config.hpp"
#include "ldspin/parallel.hpp"
#include "ldspin/pipelines.hpp"

using namespace ldspin;
using namespace ldspin::testing;

namespace {

const char* kIsingConfig = R"(# nearest-neighbor chain
[model]
site_dim = 2
x = [[1, 0], [0, -1]]
term0.shape = (0) (1)
term0.matrix = [[1,0,0,0],[0,-1,0,0],[0,0,-1,0],[0,0,0,1]]

[run]
beta = 0.016
k = 3
t_grid = -1:0.5:1
x_grid = -0.5 0 0.5
a_grid = 0.05 0.1 0.2
volumes = (2) (4)
delta = 0

[output]
dir = out
)";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("complex entries parse in every documented form") {
  CHECK(parse_complex_entry("1.5") == Complex(1.5, 0));
  CHECK(parse_complex_entry("-2") == Complex(-2, 0));
  CHECK(parse_complex_entry("0.5+1.25i") == Complex(0.5, 1.25));
  CHECK(parse_complex_entry("0.5-1.25i") == Complex(0.5, -1.25));
  CHECK(parse_complex_entry("2i") == Complex(0, 2));
  CHECK(parse_complex_entry("-i") == Complex(0, -1));
  CHECK(parse_complex_entry("1e-3+2e-4i") == Complex(1e-3, 2e-4));
  CHECK_THROWS_AS(parse_complex_entry("abc"), ConfigError);
}

TEST_CASE("matrix literals parse and validate") {
  const OperatorMatrix m = parse_matrix("[[0, 1], [1, 0]]");
  CHECK((m - pauli_x()).norm() == 0.0);
  const OperatorMatrix y = parse_matrix("[[0, -i], [i, 0]]");
  CHECK((y - pauli_y()).norm() == 0.0);
  CHECK_THROWS_AS(parse_matrix("[[1, 2], [3]]"), ConfigError);
  CHECK_THROWS_AS(parse_matrix("[1, 2]"), ConfigError);
}

TEST_CASE("full config text round trip") {
  const auto config = parse_config_text(kIsingConfig);
  CHECK(config.site_dim == 2);
  CHECK((config.x - pauli_z()).norm() == 0.0);
  REQUIRE(config.terms.size() == 1);
  CHECK(config.terms[0].shape == SiteList{Site(0), Site(1)});
  CHECK(config.beta == doctest::Approx(0.016));
  CHECK(config.k == 3);
  CHECK(config.t_grid == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
  CHECK(config.volumes.size() == 2);
  CHECK(config.volumes[1].volume() == 4);
  CHECK(config.out_dir == "out");
  CHECK(config.config_hash != 0);
  CHECK_NOTHROW(config.make_model());
}

TEST_CASE("config errors carry line diagnostics") {
  const char* broken = R"([model]
site_dim = 2
x = [[1, 0], [0, zz]]
)";
  try {
    parse_config_text(broken);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_config_text("[weird]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nbeta 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nbeta = -1\n"), ConfigError);
}

TEST_CASE("certify pipeline writes the certificate") {
  TempDir dir("ldspin_test_certify");
  const auto config = parse_config_text(kIsingConfig);
  CHECK(cmd_certify(config, dir.path.string()) == kExitOk);
  const std::string json = read_file(dir.path / "certificate.json");
  CHECK(json.find("\"beta0\"") != std::string::npos);
  CHECK(json.find("\"feasible\": true") != std::string::npos);
  // Certified beta0 for a = 0.1 sits near 0.033.
  CHECK(json.find("\"a\": 0.1") != std::string::npos);
}

TEST_CASE("certify on the zero potential caps at beta_max") {
  TempDir dir("ldspin_test_certify_free");
  const char* free_config = R"([model]
site_dim = 2
x = [[1, 0], [0, -1]]
[run]
beta = 0
volumes = (2)
beta_max = 50
)";
  const auto config = parse_config_text(free_config);
  CHECK(cmd_certify(config, dir.path.string()) == kExitOk);
  const std::string json = read_file(dir.path / "certificate.json");
  CHECK(json.find("\"beta0\": 50") != std::string::npos);
}

TEST_CASE("run pipeline outputs are deterministic") {
  TempDir dir1("ldspin_test_run1");
  TempDir dir2("ldspin_test_run2");
  const auto config = parse_config_text(kIsingConfig);
  REQUIRE(cmd_run(config, "expand", dir1.path.string()) == kExitOk);
  REQUIRE(cmd_run(config, "expand", dir2.path.string()) == kExitOk);
  const std::string a = read_file(dir1.path / "expand.csv");
  const std::string b = read_file(dir2.path / "expand.csv");
  CHECK(!a.empty());
  CHECK(a == b);
  CHECK(a.find("# config_hash = 0x") != std::string::npos);
  CHECK(a.find("support_tail_bound") != std::string::npos);
}

TEST_CASE("thread count never changes the bytes") {
  TempDir dir1("ldspin_test_threads1");
  TempDir dir4("ldspin_test_threads4");
  const auto config = parse_config_text(kIsingConfig);
  set_thread_count(1);
  REQUIRE(cmd_run(config, "expand", dir1.path.string()) == kExitOk);
  set_thread_count(4);
  REQUIRE(cmd_run(config, "expand", dir4.path.string()) == kExitOk);
  set_thread_count(0);
  CHECK(read_file(dir1.path / "expand.csv") ==
        read_file(dir4.path / "expand.csv"));
}

TEST_CASE("exact pipeline on a free qubit emits log cosh t") {
  TempDir dir("ldspin_test_exact");
  const char* free_config = R"([model]
site_dim = 2
x = [[1, 0], [0, -1]]
[run]
beta = 0
t_grid = 0 1
volumes = (1)
)";
  const auto config = parse_config_text(free_config);
  REQUIRE(cmd_run(config, "exact", dir.path.string()) == kExitOk);
  const std::string csv = read_file(dir.path / "exact.csv");
  // Rows: volume 1 at t = 0 and t = 1; F = log cosh t.
  CHECK(csv.find("1,0,0,") != std::string::npos);
  std::istringstream lines(csv);
  std::string line;
  bool found = false;
  while (std::getline(lines, line)) {
    if (line.rfind("1,1,", 0) != 0) continue;
    const auto second_comma = line.find(',', 2);
    const auto third_comma = line.find(',', second_comma + 1);
    const double f = std::stod(line.substr(second_comma + 1,
                                           third_comma - second_comma - 1));
    CHECK(f == doctest::Approx(std::log(std::cosh(1.0))).epsilon(1e-12));
    found = true;
  }
  CHECK(found);
}

TEST_CASE("psinorm pipeline reports the functional norm") {
  TempDir dir("ldspin_test_psi");
  const char* psi_config = R"([model]
site_dim = 2
x = [[2, 0], [0, -1]]
[run]
beta = 0
volumes = (1)
)";
  const auto config = parse_config_text(psi_config);
  REQUIRE(cmd_run(config, "psinorm", dir.path.string()) == kExitOk);
  const std::string json = read_file(dir.path / "psinorm.json");
  CHECK(json.find("\"norm\": 3.0") != std::string::npos);
}

TEST_CASE("certified-only runs refuse beta above the certificate") {
  TempDir dir("ldspin_test_uncert");
  std::string hot = kIsingConfig;
  const auto pos = hot.find("beta = 0.016");
  hot.replace(pos, std::string("beta = 0.016").size(), "beta = 0.5");
  const auto config = parse_config_text(hot);
  CHECK(cmd_run(config, "expand", dir.path.string()) == kExitCap);
  CHECK(cmd_run(config, "expand", dir.path.string(), true) == kExitOk);
}

TEST_CASE("unknown pipeline is a config error") {
  TempDir dir("ldspin_test_unknown");
  const auto config = parse_config_text(kIsingConfig);
  CHECK(cmd_run(config, "nonsense", dir.path.string()) == kExitConfig);
}

TEST_CASE("dimension caps surface as exit code 2") {
  TempDir dir("ldspin_test_cap");
  std::string big = kIsingConfig;
  const auto pos = big.find("volumes = (2) (4)");
  big.replace(pos, std::string("volumes = (2) (4)").size(),
              "volumes = (14)\ndim_cap = 4096");
  const auto config = parse_config_text(big);
  CHECK(cmd_run(config, "exact", dir.path.string()) == kExitCap);
}
