#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "viakernel/commands.hpp"

using namespace viakernel;

namespace {

Vec parse_csv_vec(const std::string& s) {
  Vec out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() && tok.find_first_not_of(" ", used) != std::string::npos)
      throw ConfigError("--x0: cannot parse '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viakernel: conic comparison and viability kernels for controlled ODEs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string preset = "default";
  std::string x0;
  std::vector<std::string> kernels;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "seed for sampled checks");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* check = app.add_subcommand("check", "quasimonotonicity, reduction and equality-condition checks");
  add_common(check, true);
  auto* simulate = app.add_subcommand("simulate", "integrate one trajectory to CSV");
  add_common(simulate, true);
  simulate->add_option("--x0", x0, "initial state, comma separated");
  auto* kernel = app.add_subcommand("kernel", "compute a grid viability kernel");
  add_common(kernel, true);
  auto* compare = app.add_subcommand("compare", "flow comparison (--config) or kernel inclusion (--kernels A.hdr B.hdr)");
  add_common(compare, false);
  compare->add_option("--x0", x0, "initial state, comma separated");
  auto* kernels_opt = compare->add_option("--kernels", kernels, "two kernel header files")->expected(2);
  auto* wolb = app.add_subcommand("wolbachia", "Wolbachia case study end to end");
  add_common(wolb, false);
  wolb->add_option("--preset", preset, "preset name or file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitUsage;
  }

  auto flag_set = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  try {
    Overrides o;
    auto* active = app.get_subcommands().front();
    if (flag_set(active, "--out")) o.out = out;
    if (flag_set(active, "--seed")) o.seed = seed;
    if (flag_set(active, "--threads")) o.threads = threads;
    if (active->get_option_no_throw("--x0") && flag_set(active, "--x0")) o.x0 = parse_csv_vec(x0);

    if (*wolb) return cmd_wolbachia(preset, o, std::cout);

    if (*compare && *kernels_opt) {
      std::optional<std::filesystem::path> dir;
      if (o.out) dir = *o.out;
      return cmd_compare_kernels(kernels[0], kernels[1], dir, std::cout);
    }
    if (config_path.empty()) {
      std::cerr << "error: --config or --kernels is required\n";
      return kExitUsage;
    }
    ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, o);
    if (*check) return cmd_check(cfg, std::cout);
    if (*simulate) return cmd_simulate(cfg, std::cout);
    if (*kernel) return cmd_kernel(cfg, std::cout);
    return cmd_compare_flows(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
}
