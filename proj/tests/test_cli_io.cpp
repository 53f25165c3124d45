#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "viakernel/commands.hpp"

using namespace viakernel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "viakernel_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VIAKERNEL_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path config_dir() { return fs::path(VIAKERNEL_PRESET_DIR).parent_path() / "configs"; }

KernelGrid random_kernel(std::uint64_t seed) {
  KernelGrid k;
  k.grid.window = Box{{0, -1, 0.1}, {1, 1, 0.7}};
  k.grid.shape = {3, 5, 7};
  k.grid.absorbing_lo = {false, true, false};
  k.grid.absorbing_hi = {true, false, false};
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.4);
  for (std::size_t c = 0; c < k.grid.cell_count(); ++c) k.mask.push_back(coin(rng) ? 1 : 0);
  k.meta.dt = 0.1 / 3.0;
  k.meta.substeps = 2;
  k.meta.max_iter = 77;
  k.meta.iterations = 5;
  k.meta.converged = true;
  k.meta.controls = {{0.0, 1.0 / 7.0}, {2.5, -1e-300}};
  k.meta.dilation_radius = std::sqrt(2.0);
  k.meta.member_history = {40, 38, 30};
  return k;
}

}  // namespace

TEST_CASE("mask packing is LSB first", "[io]") {
  const std::vector<std::uint8_t> mask{1, 0, 0, 0, 0, 0, 0, 1, 1};
  const auto bytes = pack_mask(mask);
  REQUIRE(bytes.size() == 2);
  CHECK(bytes[0] == 0x81);
  CHECK(bytes[1] == 0x01);
  CHECK(unpack_mask(bytes, 9) == mask);
  CHECK_THROWS(unpack_mask(bytes, 20));
}

TEST_CASE("kernel files round-trip losslessly", "[io]") {
  const auto dir = scratch("roundtrip");
  const auto k = random_kernel(1);
  const auto hdr = write_kernel(k, dir, "k");
  const auto back = read_kernel(hdr);
  CHECK(back.mask == k.mask);
  CHECK(back.grid.window.lo == k.grid.window.lo);
  CHECK(back.grid.window.hi == k.grid.window.hi);
  CHECK(back.grid.shape == k.grid.shape);
  CHECK(back.grid.absorbing_lo == k.grid.absorbing_lo);
  CHECK(back.grid.absorbing_hi == k.grid.absorbing_hi);
  CHECK(back.meta.dt == k.meta.dt);
  CHECK(back.meta.substeps == k.meta.substeps);
  CHECK(back.meta.max_iter == k.meta.max_iter);
  CHECK(back.meta.iterations == k.meta.iterations);
  CHECK(back.meta.converged == k.meta.converged);
  CHECK(back.meta.controls == k.meta.controls);
  CHECK(back.meta.dilation_radius == k.meta.dilation_radius);
  CHECK(back.meta.member_history == k.meta.member_history);
  // write → read → write is byte-identical
  write_kernel(back, dir, "k2");
  CHECK(slurp(dir / "k.mask") == slurp(dir / "k2.mask"));
}

TEST_CASE("corrupt kernel files are rejected", "[io]") {
  const auto dir = scratch("corrupt");
  const auto hdr = write_kernel(random_kernel(2), dir, "k");
  {
    std::ofstream os(dir / "k.mask", std::ios::binary);
    os << "x";
  }
  CHECK_THROWS(read_kernel(hdr));
  CHECK_THROWS(read_kernel(dir / "missing.hdr"));
}

TEST_CASE("slices and centers", "[io]") {
  KernelGrid k;
  k.grid.window = Box{{0, 0}, {2, 3}};
  k.grid.shape = {2, 3};
  k.mask = {1, 0, 0, 1, 1, 0};
  std::ostringstream slice;
  write_slice_csv(slice, k, 0, 1, {0, 0});
  CHECK(slice.str() == "1,0,0\n1,1,0\n");
  std::ostringstream centers;
  write_member_centers_csv(centers, k);
  CHECK(centers.str() == "x1,x2\n0.5,0.5\n1.5,0.5\n1.5,1.5\n");
  std::ostringstream script;
  write_plot_script(script, k, {{"s.csv", 0, 1}});
  CHECK(script.str().find("s.csv") != std::string::npos);
}

TEST_CASE("config parsing", "[io]") {
  SECTION("example configs load") {
    for (const auto* name : {"wolbachia.json", "metzler.json", "relax_kernel.json",
                             "wolbachia_wrong_cone.json"})
      CHECK_NOTHROW(load_config(config_dir() / name));
  }
  SECTION("null bounds mean unbounded") {
    const auto cfg = load_config(config_dir() / "metzler.json");
    REQUIRE(cfg.desirable);
    CHECK(cfg.desirable->box()->state.hi[0] == kInf);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"system": {"name": "nope"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"seed": 1})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(
                        R"({"system": {"name": "linear", "A": [[1]]}, "cone": {"orthant": [1, 1]}})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(
                        R"({"system": {"name": "linear", "A": [[1, 2]]}})")),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_config(json::parse(R"({"system": {"name": "wolbachia", "params": {"k": -1}}})")),
        ConfigError);
  }
}

TEST_CASE("cli exit codes", "[io][cli]") {
  const auto dir = scratch("cli");
  const auto cfg = config_dir();
  CHECK(run_cli("check --config " + (cfg / "wolbachia.json").string() + " --out " +
                (dir / "ok").string()) == 0);
  CHECK(fs::exists(dir / "ok" / "check_report.txt"));
  CHECK(run_cli("check --config " + (cfg / "wolbachia_wrong_cone.json").string() + " --out " +
                (dir / "bad").string()) == 1);
  CHECK(slurp(dir / "bad" / "check_report.txt").find("worst value") != std::string::npos);

  {
    std::ofstream os(dir / "broken.json");
    os << "{ \"system\": ";
  }
  CHECK(run_cli("check --config " + (dir / "broken.json").string()) == 2);
  CHECK(run_cli("check") == 2);
  CHECK(run_cli("frobnicate") == 2);

  CHECK(run_cli("simulate --config " + (cfg / "wolbachia.json").string() + " --out " +
                (dir / "sim").string()) == 0);
  const auto csv = slurp(dir / "sim" / "trajectory.csv");
  CHECK(csv.rfind("t,x1,x2,x3,x4\n", 0) == 0);
  CHECK(run_cli("simulate --config " + (cfg / "wolbachia.json").string() + " --x0 -1,0,0,0 --out " +
                (dir / "sim2").string()) != 0);

  CHECK(run_cli("compare --config " + (cfg / "metzler.json").string() + " --out " +
                (dir / "cmp").string()) == 0);
  CHECK(run_cli("compare --config " + (cfg / "wolbachia_wrong_cone.json").string() + " --out " +
                (dir / "cmp_bad").string()) == 1);
  CHECK(fs::exists(dir / "cmp_bad" / "comparison_defects.csv"));
}

TEST_CASE("cli kernels are deterministic and comparable", "[io][cli]") {
  const auto dir = scratch("cli_kernel");
  const auto cfg = (config_dir() / "relax_kernel.json").string();
  REQUIRE(run_cli("kernel --config " + cfg + " --out " + (dir / "a").string()) == 0);
  REQUIRE(run_cli("kernel --config " + cfg + " --threads 3 --out " + (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a" / "kernel.mask") == slurp(dir / "b" / "kernel.mask"));
  CHECK(fs::exists(dir / "a" / "plot_kernel.py"));
  CHECK(fs::exists(dir / "a" / "kernel_centers.csv"));
  CHECK(run_cli("compare --kernels " + (dir / "a" / "kernel.hdr").string() + " " +
                (dir / "b" / "kernel.hdr").string()) == 0);

  const auto w = dir / "wolb";
  REQUIRE(run_cli("wolbachia --preset default --out " + w.string()) == 0);
  CHECK(fs::exists(w / "case_study_report.txt"));
  CHECK(run_cli("compare --kernels " + (w / "kernel_full.hdr").string() + " " +
                (w / "kernel_reduced.hdr").string()) == 0);
  CHECK(run_cli("compare --kernels " + (w / "kernel_full.hdr").string() + " " +
                (dir / "a" / "kernel.hdr").string()) != 0);
}
