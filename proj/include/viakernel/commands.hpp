#pragma once

// Subcommands behind the viakernel executable. Each returns an exit code:
// 0 = pass, 1 = a check or comparison failed, 2 = usage or config error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "viakernel/comparison.hpp"
#include "viakernel/config.hpp"
#include "viakernel/dynamics.hpp"
#include "viakernel/flow.hpp"
#include "viakernel/kernel_io.hpp"
#include "viakernel/viability.hpp"
#include "viakernel/wolbachia.hpp"

namespace viakernel {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<Vec> x0;
};

inline void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.out) cfg.out = *o.out;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.plan.seed = *o.seed;
  }
  if (o.threads) {
    cfg.kernel.threads = *o.threads;
    cfg.check.threads = *o.threads;
  }
  if (o.x0) {
    require_dim(o.x0->size(), cfg.system.n, "--x0");
    if (!cfg.simulate) throw ConfigError("--x0 given but the config has no 'simulate' section");
    cfg.simulate->x0 = *o.x0;
  }
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

inline std::vector<CheckReport> run_hypothesis_checks(const ExperimentConfig& cfg) {
  std::vector<CheckReport> reports;
  const bool orthant = cfg.check_method == "orthant" ||
                       (cfg.check_method == "auto" && cfg.cone.is_orthant());
  reports.push_back(orthant ? check_orthant_quasimonotone(cfg.system, cfg.cone, cfg.plan, cfg.check)
                            : check_general_quasimonotone(cfg.system, cfg.cone, cfg.plan, cfg.check));
  reports.push_back(check_reduction(cfg.system, cfg.cone, cfg.reduction, cfg.plan, cfg.check));
  if (cfg.desirable && cfg.desirable->box())
    reports.push_back(check_equality_condition(*cfg.desirable, cfg.cone, cfg.reduction, cfg.plan));
  return reports;
}

inline bool write_check_reports(const std::vector<CheckReport>& reports, std::ostream& os) {
  bool ok = true;
  for (const auto& r : reports) {
    os << r.summary() << "\n";
    ok = ok && r.passed();
  }
  os << "verdict = " << (ok ? "PASS" : "FAIL") << "\n";
  return ok;
}

inline void write_kernel_bundle(const KernelGrid& k, const std::filesystem::path& dir,
                                const std::string& stem,
                                const std::vector<std::string>& axis_names = {}) {
  write_kernel(k, dir, stem);
  {
    auto os = open_out(dir / (stem + "_centers.csv"));
    write_member_centers_csv(os, k);
  }
  const auto slices = write_all_slices(k, dir, stem);
  auto os = open_out(dir / ("plot_" + stem + ".py"));
  write_plot_script(os, k, slices, axis_names);
}

}  // namespace detail

inline int cmd_check(const ExperimentConfig& cfg, std::ostream& log) {
  const auto reports = detail::run_hypothesis_checks(cfg);
  std::ostringstream text;
  const bool ok = detail::write_check_reports(reports, text);
  auto os = detail::open_out(std::filesystem::path(cfg.out) / "check_report.txt");
  os << text.str();
  log << text.str();
  return ok ? kExitPass : kExitFail;
}

inline int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.simulate) throw ConfigError("config: 'simulate' section required");
  const auto& s = *cfg.simulate;
  const Trajectory tr = integrate(cfg.system, s.x0, s.path, s.dt);
  auto os = detail::open_out(std::filesystem::path(cfg.out) / "trajectory.csv");
  tr.write_csv(os);
  log << "steps = " << tr.states.size() - 1 << "\n";
  if (tr.blew_up) {
    log << "blew_up at t = " << tr.blowup_time << "\n";
    return kExitFail;
  }
  return kExitPass;
}

inline int cmd_kernel(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.grid) throw ConfigError("config: 'grid' section required");
  if (!cfg.desirable) throw ConfigError("config: 'desirable' section required");
  if (cfg.kernel_controls.empty()) throw ConfigError("config: kernel.controls required");
  const KernelGrid k = compute_kernel(cfg.system, *cfg.desirable, *cfg.grid, cfg.kernel_controls,
                                      cfg.kernel);
  detail::write_kernel_bundle(k, cfg.out, "kernel");
  log << "members = " << k.member_count() << " / " << k.grid.cell_count()
      << ", iterations = " << k.meta.iterations << ", converged = " << k.meta.converged << "\n";
  return kExitPass;
}

/// Flow comparison Ψ(t; f, x0, u) ⪯_K Ψ(t; f, y0, φ∘u) from the config.
inline int cmd_compare_flows(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.simulate) throw ConfigError("config: 'simulate' section required");
  const auto& s = *cfg.simulate;
  const ComparisonReport rep =
      compare_controlled(cfg.system, cfg.cone, cfg.reduction, s.x0, s.y0, s.path, s.dt, 0.0);
  const std::filesystem::path dir = cfg.out;
  {
    auto os = detail::open_out(dir / "comparison.txt");
    rep.write_text(os);
  }
  auto os = detail::open_out(dir / "comparison_defects.csv");
  rep.write_defect_csv(os);
  rep.write_text(log);
  return rep.passed() ? kExitPass : kExitFail;
}

/// Inclusion both ways between two stored kernels; passes when A ⊆ B.
inline int cmd_compare_kernels(const std::filesystem::path& a_hdr,
                               const std::filesystem::path& b_hdr,
                               const std::optional<std::filesystem::path>& out,
                               std::ostream& log) {
  const KernelGrid a = read_kernel(a_hdr);
  const KernelGrid b = read_kernel(b_hdr);
  const auto ab = kernel_inclusion(a, b);
  const auto ba = kernel_inclusion(b, a);
  const auto diff = symmetric_difference(a, b);
  std::ostringstream text;
  text << "members_a = " << a.member_count() << "\n"
       << "members_b = " << b.member_count() << "\n"
       << "a_subset_of_b = " << (ab.included ? 1 : 0) << " (witnesses " << ab.witnesses.size()
       << ")\n"
       << "b_subset_of_a = " << (ba.included ? 1 : 0) << " (witnesses " << ba.witnesses.size()
       << ")\n"
       << "symmetric_difference = " << diff.count() << "\n"
       << "symmetric_difference_fraction = " << diff.fraction() << "\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(ab.witnesses.size(), 10); ++i) {
    const Vec c = a.grid.center(ab.witnesses[i]);
    text << "witness_a_not_b = " << detail::join(c) << "\n";
  }
  if (out) {
    auto os = detail::open_out(*out / "kernel_comparison.txt");
    os << text.str();
  }
  log << text.str();
  return ab.included ? kExitPass : kExitFail;
}

/// Full case study: hypothesis checks, the three kernels and the report.
inline int cmd_wolbachia(const std::string& preset, const Overrides& o, std::ostream& log) {
  const WolbachiaParams p = load_preset(preset);
  ExperimentConfig cfg = parse_config(json{{"system", {{"name", "wolbachia"}, {"preset", preset}}},
                                           {"out", "wolbachia_out"}});
  apply_overrides(cfg, o);
  const CaseStudy& cs = *cfg.case_study;
  const std::filesystem::path dir = cfg.out;

  std::ostringstream text;
  text << "preset = " << preset << "\n"
       << "params = alpha_U " << p.alpha_U << ", alpha_W " << p.alpha_W << ", nu " << p.nu
       << ", mu " << p.mu << ", k " << p.k << ", mu_U " << p.mu_U << ", mu_W " << p.mu_W
       << ", u_sharp " << p.u_sharp << "\n"
       << "thresholds = " << detail::join(cs.thresholds.corner()) << "\n";
  const bool hyp = detail::write_check_reports(detail::run_hypothesis_checks(cfg), text);

  const CaseStudyReport rep = compare_case_kernels(cs, *cfg.grid, cfg.kernel_controls, cfg.kernel);
  rep.write_text(text);
  const std::vector<std::string> names{"L_U", "A_U", "L_W", "A_W"};
  detail::write_kernel_bundle(rep.full, dir, "kernel_full", names);
  detail::write_kernel_bundle(rep.sharp, dir, "kernel_sharp", names);
  detail::write_kernel_bundle(rep.reduced, dir, "kernel_reduced", names);
  auto os = detail::open_out(dir / "case_study_report.txt");
  os << text.str();
  log << text.str();
  return hyp && rep.full_in_reduced.included ? kExitPass : kExitFail;
}

}  // namespace viakernel
