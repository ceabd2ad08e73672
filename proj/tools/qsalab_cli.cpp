// Copyright 2026 The qsalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qsalab command-line driver.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 capacity exceeded, 4 schedule stall, 5 other runtime failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsalab.hpp"

namespace fs = std::filesystem;
using namespace qsalab;

namespace {

constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitStall = 4;
constexpr int kExitRuntime = 5;

struct RunConfig {
  std::string instance_path;
  std::string command;
  std::string schedule_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int replications = 1;
  bool reverse = false;
  std::size_t enum_cap = 0;
  RunParams params;

  json to_json() const {
    return {{"instance", instance_path}, {"cmd", command},   {"seed", seed},
            {"replications", replications}, {"reverse", reverse}, {"enum_cap", enum_cap},
            {"params", qsalab::to_json(params)}};
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

ProblemInstance load_instance(const RunConfig& cfg) {
  BuildOptions opts;
  if (cfg.enum_cap > 0) opts.enumeration_cap = cfg.enum_cap;
  return build_instance(read_file(cfg.instance_path), opts);
}

json with_header(json body, const RunConfig& cfg) {
  body["config"] = cfg.to_json();
  body["config_digest"] = json_digest(cfg.to_json());
  return body;
}

// Runs `fn(rng, index)` for each replication and returns results in index order.
template <class Fn>
auto replicate(const RunConfig& cfg, Fn fn) {
  using R = decltype(fn(std::declval<Rng&>(), std::size_t{0}));
  std::vector<std::future<R>> futures;
  for (int i = 0; i < cfg.replications; ++i) {
    futures.push_back(std::async(std::launch::async, [&cfg, &fn, i] {
      Rng rng(cfg.seed, static_cast<std::uint64_t>(i));
      return fn(rng, static_cast<std::size_t>(i));
    }));
  }
  std::vector<R> out;
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

CountingResult count_once(const ProblemInstance& inst, const RunConfig& cfg, Rng& rng) {
  return cfg.reverse ? run_counting_reverse(inst, cfg.params, rng) : run_counting(inst, cfg.params, rng);
}

void emit_schedule(const fs::path& dir, const std::string& stem, const Schedule& s, const OracleTable& oracle,
                   double B, const RunConfig& cfg) {
  json j = to_json(s);
  j["verify"] = to_json(verify_schedule(s, oracle, B));
  write_json(dir / (stem + ".json"), with_header(std::move(j), cfg));
  std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
  write_schedule_csv(csv, s);
}

int cmd_schedule(const RunConfig& cfg) {
  const ProblemInstance base = load_instance(cfg);
  const fs::path dir(cfg.out_dir);
  Rng rng(cfg.seed);
  if (base.kind() == ProblemKind::bayes) {
    const OracleTable oracle(base);
    const BayesResult r = run_bayesian(base, cfg.params, rng);
    emit_schedule(dir, "schedule_adaptive", r.schedule, oracle, 1.0 / cfg.params.p, cfg);
    emit_schedule(dir, "schedule_nonadaptive", nonadaptive_schedule(base, 1.0, false), oracle, 1.0 / cfg.params.p,
                  cfg);
    emit_schedule(dir, "schedule_oracle_greedy", greedy_schedule_oracle(ConvexProfile::from_oracle(oracle), 1.0),
                  oracle, 1.0 / cfg.params.p, cfg);
    std::cout << "adaptive length " << r.schedule.length() << "\n";
    return 0;
  }
  const ProblemInstance inst = cfg.reverse ? reverse_transform(base, locate_reverse_gamma(OracleTable(base))) : base;
  const OracleTable oracle(inst);
  const CountingResult r = count_once(base, cfg, rng);
  const double gamma = r.schedule.gamma;
  const VerifyReport v = verify_schedule(r.schedule, oracle, cfg.params.B);
  emit_schedule(dir, "schedule_adaptive", r.schedule, oracle, cfg.params.B, cfg);
  emit_schedule(dir, "schedule_nonadaptive", nonadaptive_schedule(inst, gamma, !cfg.reverse), oracle, cfg.params.B,
                cfg);
  Schedule greedy = greedy_schedule_oracle(ConvexProfile::from_oracle(oracle), gamma);
  if (!cfg.reverse) greedy.betas.push_back(Beta::infinity());
  emit_schedule(dir, "schedule_oracle_greedy", greedy, oracle, cfg.params.B, cfg);
  std::cout << "adaptive length " << r.schedule.length() << ", outer steps " << r.schedule.outer_steps
            << ", length bound " << r.schedule.length_bound << ", certificates " << (v.ok() ? "pass" : "FAIL")
            << "\n";
  return v.ok() ? 0 : kExitVerify;
}

int cmd_count(const RunConfig& cfg) {
  const ProblemInstance inst = load_instance(cfg);
  const auto results = replicate(cfg, [&](Rng& rng, std::size_t) { return count_once(inst, cfg, rng); });
  json runs = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    json j = to_json(results[i].report);
    j["replication"] = i;
    runs.push_back(std::move(j));
  }
  json body = cfg.replications == 1 ? runs[0] : json{{"replications", std::move(runs)}};
  write_json(fs::path(cfg.out_dir) / "count_report.json", with_header(std::move(body), cfg));
  for (std::size_t i = 0; i < results.size(); ++i)
    std::cout << "replication " << i << ": z_hat " << csv_number(results[i].z_hat) << "\n";
  return 0;
}

int cmd_bayes(const RunConfig& cfg) {
  const ProblemInstance inst = load_instance(cfg);
  const GibbsDistribution post = gibbs(inst, Beta(1.0));
  const Eigen::VectorXcd oracle_state = qsample(post).amplitudes;
  const auto results = replicate(cfg, [&](Rng& rng, std::size_t) { return run_bayesian(inst, cfg.params, rng); });
  json runs = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    json j = to_json(r.report);
    j["schedule_detail"] = to_json(r.schedule);
    j["fidelity"] = fidelity(r.state, oracle_state);
    j["distance"] = phase_aligned_distance(r.state, oracle_state);
    j["replication"] = i;
    runs.push_back(std::move(j));
    std::ofstream csv(fs::path(cfg.out_dir) /
                          (cfg.replications == 1 ? "posterior_amplitudes.csv"
                                                 : "posterior_amplitudes_" + std::to_string(i) + ".csv"),
                      std::ios::binary);
    write_amplitudes_csv(csv, inst, r.state, post.probs);
    std::cout << "replication " << i << ": fidelity " << csv_number(fidelity(r.state, oracle_state))
              << ", schedule length " << r.schedule.length() << "\n";
  }
  json body = cfg.replications == 1 ? runs[0] : json{{"replications", std::move(runs)}};
  write_json(fs::path(cfg.out_dir) / "bayes_report.json", with_header(std::move(body), cfg));
  return 0;
}

struct CheckRow {
  std::string name;
  bool pass = true;
  double value = 0.0;
  double threshold = 0.0;
};

std::vector<double> sample_betas(const ProblemInstance& inst) {
  if (inst.kind() == ProblemKind::bayes) return {0.0, 0.25, 0.5, 0.75, 1.0};
  return {0.0, 0.25, 0.5, 1.0, 2.0};
}

int cmd_verify(const RunConfig& cfg) {
  const ProblemInstance inst = load_instance(cfg);
  const OracleTable oracle(inst);
  std::vector<CheckRow> rows;
  Rng rng(cfg.seed);

  double db = 0.0;
  for (double b : sample_betas(inst)) {
    const TransitionMatrix chain = build_chain(inst, Beta(b));
    db = std::max(db, detailed_balance_residual(chain.probs, chain.stationary.probs));
  }
  rows.push_back({"chain_detailed_balance", db <= 1e-12, db, 1e-12});

  double fd = 0.0, partition = 0.0, convex = 0.0;
  for (double b : sample_betas(inst)) {
    const double h = 1e-5;
    // Central difference, or the second-order one-sided stencil at the left edge.
    const double diff = b >= h ? (oracle.f(b + h) - oracle.f(b - h)) / (2.0 * h)
                               : (-3.0 * oracle.f(b) + 4.0 * oracle.f(b + h) - oracle.f(b + 2.0 * h)) / (2.0 * h);
    fd = std::max(fd, std::abs(diff - oracle.fprime(b)) / std::max(1.0, std::abs(oracle.fprime(b))));
    const double a = exact_partition(inst, Beta(b)).log_z;
    partition = std::max(partition, std::abs(a - oracle.f(b)) / std::max(1.0, std::abs(a)));
    convex = std::max(convex, oracle.f(b + 0.5) - 0.5 * (oracle.f(b) + oracle.f(b + 1.0)));
  }
  rows.push_back({"oracle_fprime_finite_difference", fd <= 1e-6, fd, 1e-6});
  rows.push_back({"oracle_partition_two_paths", partition <= 1e-12, partition, 1e-12});
  rows.push_back({"oracle_convexity", convex <= 1e-12, convex, 1e-12});

  {
    const TransitionMatrix chain = build_chain(inst, Beta(1.0));
    bool ok = true;
    std::vector<int> ts;
    for (int t = 0; t <= 50; ++t) ts.push_back(t);
    for (int r = 0; r < 20; ++r) {
      std::vector<double> nu(chain.size());
      double s = 0.0;
      for (auto& x : nu) s += (x = rng.uniform() + 1e-3);
      for (auto& x : nu) x /= s;
      for (const auto& row : warm_start_check(chain, nu, ts)) ok &= row.holds;
    }
    rows.push_back({"warm_start_inequality", ok, ok ? 0.0 : 1.0, 0.0});
  }

  if (!cfg.schedule_path.empty() || inst.kind() != ProblemKind::bayes) {
    Schedule s;
    double B = cfg.params.B;
    if (!cfg.schedule_path.empty()) {
      json j;
      try {
        j = json::parse(read_file(cfg.schedule_path));
      } catch (const json::exception& e) {
        throw ParseError(std::string("schedule file: ") + e.what());
      }
      s = schedule_from_json(j);
      if (s.mode == ScheduleMode::bayes) B = 1.0 / cfg.params.p;
    } else {
      Rng run_rng(cfg.seed);
      s = run_counting(inst, cfg.params, run_rng).schedule;
    }
    const VerifyReport v = verify_schedule(s, oracle, B);
    double worst_cheb = 1.0, worst_sv = 1.0;
    for (const auto& p : v.pairs) {
      worst_cheb = std::max(worst_cheb, p.chebyshev);
      worst_sv = std::max(worst_sv, p.slow_varying);
    }
    rows.push_back({"schedule_increasing", v.increasing, v.increasing ? 0.0 : 1.0, 0.0});
    rows.push_back({"schedule_chebyshev", v.all_chebyshev, worst_cheb, B});
    rows.push_back({"schedule_slow_varying", v.all_slow_varying, worst_sv, B});
    rows.push_back({"schedule_chebyshev_implies_overlap", v.all_implications, v.all_implications ? 0.0 : 1.0, 0.0});

    if (inst.kind() != ProblemKind::bayes && s.betas.size() >= 2 && s.betas.front() == Beta(0.0) &&
        s.betas.back().is_infinite()) {
      double log_z = oracle.f(Beta(0.0));
      for (std::size_t i = 0; i + 1 < s.betas.size(); ++i) log_z += oracle.f(s.betas[i + 1]) - oracle.f(s.betas[i]);
      const double err = std::abs(std::exp(log_z) / oracle.z(Beta::infinity()) - 1.0);
      rows.push_back({"telescoping_identity", err <= 1e-9, err, 1e-9});
    }
  }

  {
    const double target = 8.0 / (std::numbers::pi * std::numbers::pi);
    double worst = 1.0;
    for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      for (int M : {16, 64}) {
        Eigen::VectorXcd psi(2);
        psi << std::sqrt(1.0 - a), std::sqrt(a);
        const GroverOperator Q(ReflectionOperator::exact(psi), ReflectionOperator::projector({0, 1}), psi);
        int hit = 0;
        const int trials = 2000;
        for (int t = 0; t < trials; ++t)
          if (std::abs(estimate(Q, M, rng).estimate.a_hat - a) <= bhmt_bound(a, M)) ++hit;
        worst = std::min(worst, static_cast<double>(hit) / trials);
      }
    }
    rows.push_back({"ae_success_rate_vs_8_over_pi2", worst >= target - 0.02, worst, target - 0.02});
  }

  bool all = true;
  json matrix = json::array();
  std::ostringstream csv;
  csv << "check,pass,value,threshold\n";
  for (const auto& r : rows) {
    all &= r.pass;
    matrix.push_back({{"check", r.name}, {"pass", r.pass}, {"value", r.value}, {"threshold", r.threshold}});
    csv << r.name << ',' << (r.pass ? "pass" : "fail") << ',' << csv_number(r.value) << ','
        << csv_number(r.threshold) << '\n';
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " value=" << csv_number(r.value)
              << " threshold=" << csv_number(r.threshold) << "\n";
  }
  write_json(fs::path(cfg.out_dir) / "verify_matrix.json",
             with_header(json{{"all_pass", all}, {"checks", std::move(matrix)}}, cfg));
  write_file(fs::path(cfg.out_dir) / "verify_matrix.csv", csv.str());
  return all ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsalab: simulated quantum annealing for partition functions and posteriors"};
  RunConfig cfg;
  app.add_option("--instance", cfg.instance_path, "Instance JSON file")->required();
  app.add_option("--cmd", cfg.command, "Command to run")
      ->required()
      ->check(CLI::IsMember({"schedule", "count", "bayes", "verify"}));
  app.add_option("--seed", cfg.seed, "Random seed");
  app.add_option("--epsilon", cfg.params.epsilon, "Target relative error");
  app.add_option("--eta", cfg.params.eta, "Total failure probability");
  app.add_option("--B", cfg.params.B, "Chebyshev bound B (default e^2)");
  app.add_option("--p", cfg.params.p, "Overlap threshold p (default e^-2)");
  app.add_option("--M", cfg.params.M, "Fourier size of ratio estimates (0 = automatic)");
  app.add_option("--k", cfg.params.k, "Reflection precision (0 = exact reflections)");
  app.add_flag("--reverse", cfg.reverse, "Count |Omega| by reverse annealing");
  app.add_flag("--strict-stall", cfg.params.strict_stall, "Fail instead of taking the minimal step on a stall");
  app.add_option("--replications", cfg.replications, "Independent seeded replications")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", cfg.out_dir, "Output directory");
  app.add_option("--schedule", cfg.schedule_path, "Schedule JSON to check (verify)");
  app.add_option("--enum-cap", cfg.enum_cap, "Enumeration cap (overrides QSALAB_ENUM_CAP)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    cfg.params.validate();
    fs::create_directories(cfg.out_dir);
    if (cfg.command == "schedule") return cmd_schedule(cfg);
    if (cfg.command == "count") return cmd_count(cfg);
    if (cfg.command == "bayes") return cmd_bayes(cfg);
    return cmd_verify(cfg);
  } catch (const ScheduleStallError& e) {
    std::cerr << "schedule stall: " << e.what() << "\n";
    return kExitStall;
  } catch (const CapacityError& e) {
    std::cerr << "capacity exceeded: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const ParseError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedInstanceError& e) {
    std::cerr << "unsupported instance: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
}
