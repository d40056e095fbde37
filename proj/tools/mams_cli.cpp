// Command-line surface: design construction, amendment, simulation, and
// reproduction of the reference tables/figures as CSV plus a run manifest.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mams/amend.hpp"
#include "mams/design.hpp"
#include "mams/simulator.hpp"
#include "mams/twoarm.hpp"

namespace {

using nlohmann::json;

// exit codes per the interface contract
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitCalibration = 3;
constexpr int kExitStoppedTrial = 4;

int classify_error(const std::string& msg) {
  if (msg.find("no amendment") != std::string::npos ||
      msg.find("concluded") != std::string::npos)
    return kExitStoppedTrial;
  if (msg.find("calibrate_boundaries") != std::string::npos ||
      msg.find("noise floor") != std::string::npos ||
      msg.find("lower bound exceeds") != std::string::npos)
    return kExitCalibration;
  return kExitValidation;
}

uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<uint64_t>(rd()) << 32) ^ rd();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open output file: " + path);
  f << text;
}

double resolve_value(const std::string& tok) {
  if (tok == "delta-two-arm") return mams::norm_quantile(0.95) + mams::norm_quantile(0.90);
  if (tok == "delta-mams") return mams::norm_quantile(0.75) * std::sqrt(2.0);
  size_t pos = 0;
  double v = std::stod(tok, &pos);
  if (pos != tok.size()) throw std::invalid_argument("malformed numeric value: " + tok);
  return v;
}

std::vector<double> parse_vector(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (!tok.empty()) out.push_back(resolve_value(tok));
  }
  if (out.empty()) throw std::invalid_argument("empty numeric list");
  return out;
}

// stage-major interim history: "z11,z21;z12,z22" (stages separated by ';')
std::vector<std::vector<double>> parse_history(const std::string& s, int arms) {
  std::vector<std::vector<double>> per_stage;
  std::stringstream ss(s);
  std::string stage;
  while (std::getline(ss, stage, ';'))
    if (!stage.empty()) per_stage.push_back(parse_vector(stage));
  if (per_stage.empty()) throw std::invalid_argument("empty interim history");
  std::vector<std::vector<double>> history(arms);
  for (const auto& st : per_stage) {
    if (static_cast<int>(st.size()) != arms)
      throw std::invalid_argument("interim history row does not match arm count");
    for (int k = 0; k < arms; ++k) history[k].push_back(st[k]);
  }
  return history;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(const std::string& path) const {
    std::ostringstream os;
    for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
    write_file(path, os.str());
  }
};

std::string fmt(double v, int precision) { return mams::format_cell(v, precision); }

struct RunContext {
  std::string command;
  uint64_t seed = 0;
  int64_t nsim = 0;
  bool quiet = false;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::string design_hash;  // fnv-1a of the governing design document, if any
  std::vector<std::string> outputs;

  void note_design(const std::string& doc_text) {
    std::ostringstream h;
    h << std::hex << mams::fnv1a64(doc_text);
    design_hash = h.str();
  }
  void finish(const std::string& manifest_path) const {
    json j;
    j["command"] = command;
    j["seed"] = seed;
    j["nsim"] = nsim;
    j["design_hash"] = design_hash;
    j["outputs"] = outputs;
    j["wall_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
            .count();
    write_file(manifest_path, j.dump(2) + "\n");
  }
};

void print_boundary_table(std::ostream& os, const mams::ClosedTest& test) {
  os << "shared futility l:";
  for (double v : test.futility) os << " " << fmt(v, 4);
  os << "\n";
  for (const auto& [m, b] : test.family) {
    os << "u" << mams::set_label(m) << " (level " << fmt(b.level, 4) << "):";
    for (double v : b.upper) os << " " << fmt(v, 4);
    os << "\n";
  }
}

// ------------------------------------------------------------------ design

struct DesignArgs {
  int stages = 3, arms = 2;
  double n = 10.0, sigma = 1.0, alpha = 0.05;
  std::string shape = "triangular";
  std::string config, out = "design.txt";
};

void load_design_config(const std::string& path, DesignArgs& a) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key == "stages") a.stages = std::stoi(val);
    else if (key == "arms") a.arms = std::stoi(val);
    else if (key == "n") a.n = resolve_value(val);
    else if (key == "sigma") a.sigma = resolve_value(val);
    else if (key == "alpha") a.alpha = resolve_value(val);
    else if (key == "shape") a.shape = val;
    else
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                  "'");
  }
}

int cmd_design(const DesignArgs& a, RunContext& ctx) {
  auto plan = mams::equal_allocation_plan(a.stages, a.arms, a.n, a.sigma);
  mams::CalibrationOptions opts;
  opts.nsim = ctx.nsim;
  opts.seed = ctx.seed;
  auto test = mams::build_closed_test(plan, mams::shape_from_name(a.shape), a.alpha, opts);
  const std::string doc = mams::serialize_closed_test(test);
  write_file(a.out, doc);
  ctx.note_design(doc);
  ctx.outputs.push_back(a.out);
  if (!ctx.quiet) {
    print_boundary_table(std::cout, test);
    std::cout << "design document written to " << a.out << "\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------------- amend

struct AmendArgs {
  std::string config, z, out = "amended.txt";
  int jprime = 1, new_arms = 0;
  int post_stages = 0;    // 0: remaining stages of the original plan
  double post_n = 0.0;    // 0: original per-stage cohort
};

int cmd_amend(const AmendArgs& a, RunContext& ctx) {
  const std::string base_doc = read_file(a.config);
  auto test = mams::parse_closed_test(base_doc);
  ctx.note_design(base_doc);
  auto history = parse_history(a.z, test.plan.arms);
  auto interim = mams::observe_interim(test, history, a.jprime);
  const int post_stages = a.post_stages > 0 ? a.post_stages : test.plan.stages - a.jprime;
  const double post_n = a.post_n > 0.0 ? a.post_n : test.plan.n;
  auto plan_post = mams::equal_allocation_plan(post_stages, test.plan.arms + a.new_arms, post_n,
                                               test.plan.sigma);
  mams::CalibrationOptions opts;
  opts.nsim = ctx.nsim;
  opts.seed = ctx.seed;
  auto amended = mams::amend_design(test, interim, a.new_arms, plan_post, test.shape, opts);
  const std::string doc = mams::serialize_amended_design(amended);
  write_file(a.out, doc);
  ctx.outputs.push_back(a.out);
  if (!ctx.quiet) {
    std::cout << "conditional error rates of the existing tests:\n";
    for (const auto& [m, b] : amended.cond_error)
      std::cout << "  B" << mams::set_label(m) << " = " << fmt(b, 4) << "\n";
    std::cout << "levels assigned to the amended closed test:\n";
    for (const auto& [m, b] : amended.family_post) {
      std::cout << "  " << mams::set_label(m) << ": level " << fmt(b.level, 4);
      if (b.pre_rejected) std::cout << " (already rejected)";
      if (b.vacuous) std::cout << " (cannot reject)";
      std::cout << "\n";
    }
    std::cout << "amended design document written to " << a.out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config, theta, out = "simulate.csv";
};

CsvTable oc_to_csv(const mams::OperatingCharacteristics& oc) {
  CsvTable t;
  std::vector<std::string> row;
  const int arms = static_cast<int>(oc.reject_prob.size());
  for (int k = 0; k < arms; ++k) {
    t.header.push_back("reject_prob_" + std::to_string(k + 1));
    row.push_back(fmt(oc.reject_prob[k], -1));
  }
  for (int k = 0; k < arms; ++k) {
    t.header.push_back("reject_se_" + std::to_string(k + 1));
    row.push_back(fmt(oc.reject_se[k], -1));
  }
  for (int c = 0; c < static_cast<int>(oc.count_dist.size()); ++c) {
    t.header.push_back("count_dist_" + std::to_string(c));
    row.push_back(fmt(oc.count_dist[c], -1));
  }
  t.header.insert(t.header.end(),
                  {"expected_patients", "expected_patients_se", "p_continue", "p_stop_efficacy",
                   "p_stop_futility", "nsim", "seed"});
  row.push_back(fmt(oc.expected_patients, -1));
  row.push_back(fmt(oc.expected_patients_se, -1));
  row.push_back(fmt(oc.p_continue, -1));
  row.push_back(fmt(oc.p_stop_efficacy, -1));
  row.push_back(fmt(oc.p_stop_futility, -1));
  row.push_back(std::to_string(oc.nsim));
  row.push_back(std::to_string(oc.seed));
  t.rows.push_back(row);
  return t;
}

int cmd_simulate(const SimulateArgs& a, RunContext& ctx) {
  const std::string doc = read_file(a.config);
  ctx.note_design(doc);
  const std::string first_line = doc.substr(0, doc.find('\n'));
  mams::OperatingCharacteristics oc;
  if (first_line == "mams-amendment-document v1") {
    auto amended = mams::parse_amended_design(doc);
    auto theta = parse_vector(a.theta);
    oc = mams::simulate_amended(amended, theta, ctx.nsim, ctx.seed);
  } else {
    auto test = mams::parse_closed_test(doc);
    auto theta = parse_vector(a.theta);
    oc = mams::simulate_design(test, theta, ctx.nsim, ctx.seed);
  }
  oc_to_csv(oc).write(a.out);
  ctx.outputs.push_back(a.out);
  if (!ctx.quiet) {
    std::cout << "reject:";
    for (double v : oc.reject_prob) std::cout << " " << fmt(v, 4);
    std::cout << "  E[N]: " << fmt(oc.expected_patients, 2) << "\n";
    std::cout << "results written to " << a.out << "\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------- sweep/curve

struct SweepArgs {
  std::string taus = "0.1,0.25,0.5,0.75,0.9";
  double alpha = 0.05;
  std::string out = "fwer_sweep.csv";
};

int cmd_sweep_fwer(const SweepArgs& a, RunContext& ctx) {
  auto taus = parse_vector(a.taus);
  auto oracle = mams::fwer_sweep(taus, a.alpha);
  CsvTable t;
  t.header = {"tau", "fwer_naive_oracle", "fwer_proposed_sim", "fwer_proposed_se"};
  for (size_t i = 0; i < taus.size(); ++i) {
    auto oc = mams::simulate_two_arm(taus[i], a.alpha, 0.0, 0.0, mams::TwoArmMode::Dunnett,
                                     ctx.nsim, ctx.seed + i);
    const double se = std::sqrt(oc.p_any * (1.0 - oc.p_any) / static_cast<double>(ctx.nsim));
    t.rows.push_back({fmt(taus[i], -1), fmt(oracle[i].fwer, -1), fmt(oc.p_any, -1), fmt(se, -1)});
  }
  t.write(a.out);
  ctx.outputs.push_back(a.out);
  if (!ctx.quiet) std::cout << "FWER sweep written to " << a.out << "\n";
  return kExitOk;
}

struct CondPowerArgs {
  double tau = 0.5, alpha = 0.05;
  std::string xi1 = "delta-two-arm", xi2 = "delta-two-arm";
  double zmin = -3.0, zmax = 4.0;
  int steps = 141;
  std::string out = "cond_power.csv";
};

int cmd_cond_power(const CondPowerArgs& a, RunContext& ctx) {
  if (a.steps < 2) throw std::invalid_argument("cond-power: need at least 2 grid points");
  std::vector<double> zgrid(a.steps);
  for (int i = 0; i < a.steps; ++i)
    zgrid[i] = a.zmin + (a.zmax - a.zmin) * i / static_cast<double>(a.steps - 1);
  auto curve = mams::conditional_power_curve(a.tau, a.alpha, resolve_value(a.xi1),
                                             resolve_value(a.xi2), zgrid);
  CsvTable t;
  t.header = {"z", "cond_error", "p_reject_intersection", "density"};
  for (const auto& p : curve)
    t.rows.push_back({fmt(p.z, -1), fmt(p.cond_error, -1), fmt(p.p_reject_intersection, -1),
                      fmt(p.density, -1)});
  t.write(a.out);
  ctx.outputs.push_back(a.out);
  if (!ctx.quiet) std::cout << "conditional power curve written to " << a.out << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- reproduce

const std::vector<std::vector<double>> kTheta12 = {
    {0, 0, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 0}, {1, 0, 1, 0},
    {0, 1, 1, 0}, {1, 1, 1, 0}, {0, 0, 1, 1}, {1, 0, 1, 1}, {0, 1, 1, 1}, {1, 1, 1, 1}};
const std::vector<std::vector<double>> kTheta9 = {
    {0, 0, 0, 0}, {1, 0, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 0}, {1, 0, 1, 0},
    {1, 1, 1, 0}, {0, 0, 1, 1}, {1, 0, 1, 1}, {1, 1, 1, 1}};

std::string theta_label(const std::vector<double>& t) {
  std::string s = "(";
  for (size_t i = 0; i < t.size(); ++i) s += (i ? " " : "") + std::string(t[i] ? "d" : "0");
  return s + ")";
}

std::vector<double> scale_theta(const std::vector<double>& t, double delta) {
  std::vector<double> out(t.size());
  for (size_t i = 0; i < t.size(); ++i) out[i] = t[i] * delta;
  return out;
}

double binom_se(double p, int64_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

mams::ClosedTest build_reference_design(int stages, int arms, const mams::CalibrationOptions& o) {
  auto plan = mams::equal_allocation_plan(stages, arms, 10.0, 1.0);
  return mams::build_closed_test(plan, mams::BoundaryShape::Triangular, 0.05, o);
}

int cmd_reproduce(const std::string& table, const std::string& out_arg, RunContext& ctx) {
  const double d2 = resolve_value("delta-two-arm");
  const double dm = resolve_value("delta-mams");
  const std::string out = out_arg.empty() ? (table + ".csv") : out_arg;
  CsvTable t;

  if (table == "T1") {
    t.header = {"xi", "p_reject_test_h01", "p_reject_test_h02", "p_reject_test_h012", "fwer",
                "mc_se"};
    const std::vector<std::vector<double>> xis = {{0, 0}, {d2, 0}, {0, d2}};
    int row = 0;
    for (const auto& xi : xis) {
      auto oc = mams::simulate_two_arm(0.5, 0.05, xi[0], xi[1], mams::TwoArmMode::Dunnett,
                                       ctx.nsim, ctx.seed + row);
      // FWER over the hypotheses that are actually true in this row
      double fwer = oc.p_any;
      if (xi[0] > 0 && xi[1] == 0) fwer = oc.p_h2;
      if (xi[1] > 0 && xi[0] == 0) fwer = oc.p_h1;
      t.rows.push_back({theta_label({xi[0], xi[1]}), fmt(oc.p_local_h1, 2), fmt(oc.p_local_h2, 2),
                        fmt(oc.p_intersection, 2), fmt(fwer, 2), fmt(binom_se(fwer, ctx.nsim), 4)});
      ++row;
    }
  } else if (table == "T2") {
    t.header = {"mode", "xi", "p_only_h01", "p_only_h02", "p_both", "p_any", "mc_se"};
    const std::vector<std::vector<double>> xis = {{0, 0}, {d2, 0}, {0, d2}, {d2, d2}};
    for (auto mode : {mams::TwoArmMode::Dunnett, mams::TwoArmMode::Gatekeeping}) {
      int row = 0;
      for (const auto& xi : xis) {
        auto oc = mams::simulate_two_arm(0.5, 0.05, xi[0], xi[1], mode, ctx.nsim, ctx.seed + row);
        t.rows.push_back({mode == mams::TwoArmMode::Dunnett ? "dunnett" : "gatekeeping",
                          theta_label({xi[0], xi[1]}), fmt(oc.p_h1_only, 2), fmt(oc.p_h2_only, 2),
                          fmt(oc.p_both, 2), fmt(oc.p_any, 2),
                          fmt(binom_se(oc.p_any, ctx.nsim), 4)});
        ++row;
      }
    }
  } else if (table == "T3") {
    mams::CalibrationOptions opts;
    opts.nsim = ctx.nsim;
    opts.seed = ctx.seed;
    auto test = build_reference_design(3, 2, opts);
    auto interim = mams::observe_interim(test, {{2.0}, {1.5}}, 1);
    auto plan_post = mams::equal_allocation_plan(2, 4, 10.0, 1.0);
    auto amended = mams::amend_design(test, interim, 2, plan_post, test.shape, opts);
    t.header = {"theta", "p_r1", "p_r2", "p_r3", "p_r4", "expected_patients",
                "reject_none", "reject_one", "reject_two", "reject_three", "reject_four", "mc_se"};
    int row = 0;
    for (const auto& th : kTheta12) {
      auto oc = mams::simulate_amended(amended, scale_theta(th, dm), ctx.nsim, ctx.seed + 100 + row);
      t.rows.push_back({theta_label(th), fmt(oc.reject_prob[0], 2), fmt(oc.reject_prob[1], 2),
                        fmt(oc.reject_prob[2], 2), fmt(oc.reject_prob[3], 2),
                        fmt(oc.expected_patients, 1), fmt(oc.count_dist[0], 2),
                        fmt(oc.count_dist[1], 2), fmt(oc.count_dist[2], 2),
                        fmt(oc.count_dist[3], 2), fmt(oc.count_dist[4], 2),
                        fmt(binom_se(oc.reject_prob[0], ctx.nsim), 4)});
      ++row;
    }
  } else if (table == "T4") {
    mams::CalibrationOptions opts;
    opts.nsim = ctx.nsim;
    opts.seed = ctx.seed;
    auto test = build_reference_design(3, 2, opts);
    t.header = {"theta", "p_continue", "p_stop_efficacy", "p_stop_futility", "mc_se"};
    const std::vector<std::vector<double>> ths = {{0, 0}, {dm, 0}, {dm, dm}};
    int row = 0;
    for (const auto& th : ths) {
      auto oc = mams::simulate_design(test, th, ctx.nsim, ctx.seed + 100 + row);
      t.rows.push_back({theta_label({th[0] / (dm > 0 ? dm : 1), th[1] / (dm > 0 ? dm : 1)}),
                        fmt(oc.p_continue, 2), fmt(oc.p_stop_efficacy, 2),
                        fmt(oc.p_stop_futility, 2), fmt(binom_se(oc.p_continue, ctx.nsim), 4)});
      ++row;
    }
  } else if (table == "T5") {
    mams::CalibrationOptions opts;
    opts.nsim = ctx.nsim;
    opts.seed = ctx.seed;
    auto first = build_reference_design(3, 2, opts);
    auto second = build_reference_design(2, 2, opts);
    t.header = {"theta", "p_r1", "p_r2", "expected_patients_1", "p_r3", "p_r4",
                "expected_patients_2",
                "orig_reject_none", "orig_reject_one", "orig_reject_two",
                "add_reject_none", "add_reject_one", "add_reject_two", "mc_se"};
    const std::vector<std::vector<double>> ths = {{0, 0, 0, 0}, {1, 0, 1, 0}, {1, 1, 1, 1}};
    int row = 0;
    for (const auto& th : ths) {
      auto r = mams::comparator_separate_trials(first, second, scale_theta(th, dm), ctx.nsim,
                                                ctx.seed + 100 + row);
      const auto& oc = r.combined;
      t.rows.push_back({theta_label(th), fmt(oc.reject_prob[0], 2), fmt(oc.reject_prob[1], 2),
                        fmt(r.expected_patients_first, 1), fmt(oc.reject_prob[2], 2),
                        fmt(oc.reject_prob[3], 2), fmt(r.expected_patients_second, 1),
                        fmt(r.count_dist_first[0], 2), fmt(r.count_dist_first[1], 2),
                        fmt(r.count_dist_first[2], 2), fmt(r.count_dist_second[0], 2),
                        fmt(r.count_dist_second[1], 2), fmt(r.count_dist_second[2], 2),
                        fmt(binom_se(oc.reject_prob[0], ctx.nsim), 4)});
      ++row;
    }
  } else if (table == "T6") {
    mams::CalibrationOptions opts;
    opts.nsim = ctx.nsim;
    opts.seed = ctx.seed;
    auto restart = build_reference_design(2, 4, opts);
    t.header = {"theta", "p_r1", "p_r2", "p_r3", "p_r4", "expected_patients",
                "reject_none", "reject_one", "reject_two", "reject_three", "reject_four", "mc_se"};
    int row = 0;
    for (const auto& th : kTheta9) {
      auto oc = mams::simulate_design(restart, scale_theta(th, dm), ctx.nsim, ctx.seed + 100 + row);
      t.rows.push_back({theta_label(th), fmt(oc.reject_prob[0], 2), fmt(oc.reject_prob[1], 2),
                        fmt(oc.reject_prob[2], 2), fmt(oc.reject_prob[3], 2),
                        fmt(oc.expected_patients, 1), fmt(oc.count_dist[0], 2),
                        fmt(oc.count_dist[1], 2), fmt(oc.count_dist[2], 2),
                        fmt(oc.count_dist[3], 2), fmt(oc.count_dist[4], 2),
                        fmt(binom_se(oc.reject_prob[0], ctx.nsim), 4)});
      ++row;
    }
  } else if (table == "prop1") {
    mams::CalibrationOptions opts;
    opts.nsim = 1000000;
    opts.seed = ctx.seed;
    auto test = build_reference_design(3, 2, opts);
    mams::AmendmentRule rule;
    rule.jprime = 1;
    rule.new_arms = 2;
    rule.plan_post = mams::equal_allocation_plan(2, 4, 10.0, 1.0);
    rule.inner_nsim = 5000;
    t.header = {"theta", "p_r1", "p_r2", "p_r3", "p_r4", "expected_patients",
                "reject_none", "reject_one", "reject_two", "reject_three", "reject_four", "mc_se"};
    int row = 0;
    for (const auto& th : kTheta9) {
      auto r = mams::simulate_two_phase(test, rule, scale_theta(th, dm), ctx.nsim,
                                        ctx.seed + 100 + row);
      const auto& oc = r.continuing;
      t.rows.push_back({theta_label(th), fmt(oc.reject_prob[0], 2), fmt(oc.reject_prob[1], 2),
                        fmt(oc.reject_prob[2], 2), fmt(oc.reject_prob[3], 2),
                        fmt(oc.expected_patients, 1), fmt(oc.count_dist[0], 2),
                        fmt(oc.count_dist[1], 2), fmt(oc.count_dist[2], 2),
                        fmt(oc.count_dist[3], 2), fmt(oc.count_dist[4], 2),
                        fmt(binom_se(oc.reject_prob[0], oc.nsim), 4)});
      ++row;
    }
  } else if (table == "F1") {
    std::vector<double> taus;
    for (int i = 1; i <= 99; ++i) taus.push_back(i / 100.0);
    auto sweep = mams::fwer_sweep(taus, 0.05);
    t.header = {"tau", "fwer_naive", "fwer_nominal"};
    for (const auto& p : sweep)
      t.rows.push_back({fmt(p.tau, -1), fmt(p.fwer, -1), fmt(0.05, -1)});
  } else if (table == "F2") {
    std::vector<double> zgrid;
    for (int i = -60; i <= 80; ++i) zgrid.push_back(i / 20.0);
    auto curve = mams::conditional_power_curve(0.5, 0.05, d2, d2, zgrid);
    t.header = {"z", "cond_error", "p_reject_intersection", "density"};
    for (const auto& p : curve)
      t.rows.push_back({fmt(p.z, -1), fmt(p.cond_error, -1), fmt(p.p_reject_intersection, -1),
                        fmt(p.density, -1)});
  } else {
    throw std::invalid_argument(
        "unknown table id '" + table +
        "'; valid ids: T1, T2, T3, T4, T5, T6, prop1, F1, F2");
  }

  t.write(out);
  ctx.outputs.push_back(out);
  if (!ctx.quiet) std::cout << table << " written to " << out << "\n";
  return kExitOk;
}

int64_t default_nsim(const std::string& command, const std::string& table) {
  if (command == "reproduce" && table == "prop1") return 10000;
  if (command == "sweep-fwer") return 100000;
  return 1000000;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-arm multi-stage trial designer: closed testing, conditional-error "
               "amendment, and Monte Carlo operating characteristics"};
  app.require_subcommand(1);

  int64_t nsim = 0;
  uint64_t seed = 0;
  bool have_seed = false, quiet = false;
  app.add_option("--nsim", nsim, "Monte Carlo replicates (default depends on the command)");
  app.add_option("--seed", seed, "RNG seed (omitted: drawn from entropy, recorded in the manifest)")
      ->each([&](const std::string&) { have_seed = true; });
  app.add_flag("--quiet", quiet, "suppress progress output");

  DesignArgs da;
  auto* design = app.add_subcommand("design", "calibrate a closed-testing design");
  design->fallthrough();
  design->add_option("--config", da.config, "key = value template file");
  design->add_option("--stages", da.stages, "number of analyses");
  design->add_option("--arms", da.arms, "number of experimental arms");
  design->add_option("--n", da.n, "patients per arm per stage");
  design->add_option("--sigma", da.sigma, "outcome standard deviation");
  design->add_option("--alpha", da.alpha, "familywise error rate");
  design->add_option("--shape", da.shape, "boundary shape: triangular | pocock | obrien-fleming");
  design->add_option("--out", da.out, "design document path");

  AmendArgs aa;
  auto* amend = app.add_subcommand("amend", "add arms at an interim analysis");
  amend->fallthrough();
  amend->add_option("--config", aa.config, "design document path")->required();
  amend->add_option("--z", aa.z, "interim Z history, stages separated by ';'")->required();
  amend->add_option("--jprime", aa.jprime, "amendment analysis index");
  amend->add_option("--new-arms", aa.new_arms, "number of arms to add");
  amend->add_option("--post-stages", aa.post_stages, "remaining analyses after the amendment");
  amend->add_option("--post-n", aa.post_n, "patients per arm per remaining stage");
  amend->add_option("--out", aa.out, "amended design document path");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "operating characteristics of a document");
  simulate->fallthrough();
  simulate->add_option("--config", sa.config, "design or amended design document")->required();
  simulate->add_option("--theta", sa.theta,
                       "treatment effects (numbers, delta-mams, delta-two-arm)")->required();
  simulate->add_option("--out", sa.out, "CSV output path");

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep-fwer", "two-arm FWER across information fractions");
  sweep->fallthrough();
  sweep->add_option("--tau", wa.taus, "information fractions, comma separated");
  sweep->add_option("--alpha", wa.alpha, "nominal FWER");
  sweep->add_option("--out", wa.out, "CSV output path");

  CondPowerArgs ca;
  auto* cond = app.add_subcommand("cond-power", "conditional error and rejection probability");
  cond->fallthrough();
  cond->add_option("--tau", ca.tau, "information fraction at the interim");
  cond->add_option("--alpha", ca.alpha, "nominal level");
  cond->add_option("--xi1", ca.xi1, "drift of the existing arm");
  cond->add_option("--xi2", ca.xi2, "drift of the added arm");
  cond->add_option("--zmin", ca.zmin, "grid start");
  cond->add_option("--zmax", ca.zmax, "grid end");
  cond->add_option("--steps", ca.steps, "grid points");
  cond->add_option("--out", ca.out, "CSV output path");

  std::string table, rout;
  auto* reproduce = app.add_subcommand("reproduce", "regenerate a reference table or figure");
  reproduce->fallthrough();
  reproduce->add_option("--table", table, "T1 | T2 | T3 | T4 | T5 | T6 | prop1 | F1 | F2")
      ->required();
  reproduce->add_option("--out", rout, "CSV output path (default <id>.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitValidation;
  }

  RunContext ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  ctx.quiet = quiet;
  ctx.seed = have_seed ? seed : entropy_seed();
  ctx.nsim = nsim > 0 ? nsim : default_nsim(ctx.command, table);
  if (ctx.nsim < 1) {
    std::cerr << "error: nsim must be >= 1\n";
    return kExitValidation;
  }

  int rc = kExitValidation;
  std::string out_path;
  try {
    if (ctx.command == "design") {
      if (!da.config.empty()) load_design_config(da.config, da);
      rc = cmd_design(da, ctx);
      out_path = da.out;
    } else if (ctx.command == "amend") {
      rc = cmd_amend(aa, ctx);
      out_path = aa.out;
    } else if (ctx.command == "simulate") {
      rc = cmd_simulate(sa, ctx);
      out_path = sa.out;
    } else if (ctx.command == "sweep-fwer") {
      rc = cmd_sweep_fwer(wa, ctx);
      out_path = wa.out;
    } else if (ctx.command == "cond-power") {
      rc = cmd_cond_power(ca, ctx);
      out_path = ca.out;
    } else if (ctx.command == "reproduce") {
      rc = cmd_reproduce(table, rout, ctx);
      out_path = rout.empty() ? (table + ".csv") : rout;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_error(e.what());
  }
  if (rc == kExitOk) ctx.finish(out_path + ".manifest.json");
  return rc;
}
