#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpcr/harness.hpp"
#include "dpcr/workload.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStream = 3;

std::vector<dpcr::UpdateEvent> load_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open stream file: " + path);
  return dpcr::read_stream(in);
}

std::shared_ptr<const dpcr::QueryClass> build_queries(std::size_t domain,
                                                      std::size_t num_queries,
                                                      std::uint64_t seed) {
  if (num_queries <= 1) return dpcr::QueryClass::counting_only(domain);
  std::vector<dpcr::LinearQuery> qs;
  qs.push_back(dpcr::LinearQuery::counting(domain));
  dpcr::NoiseSource rng(dpcr::derive_seed(seed, 0x9f));
  for (std::size_t i = 1; i < num_queries; ++i) {
    std::vector<double> w(domain);
    for (double& x : w) x = rng.uniform() < 0.5 ? 0.0 : 1.0;
    qs.emplace_back(std::move(w));
  }
  return std::make_shared<dpcr::QueryClass>(std::move(qs));
}

void write_out(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out << content;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double idx = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private continual-release mechanisms"};
  app.require_subcommand(1);

  // --- gen ---
  auto* gen = app.add_subcommand("gen", "generate a workload stream");
  std::string gen_workload = "dense-insert";
  dpcr::WorkloadSpec wspec;
  std::string gen_out = "-";
  gen->add_option("--workload", gen_workload,
                  "dense-insert|sparse-insert|fully-dynamic-churn|"
                  "adversarial-burst");
  gen->add_option("--horizon", wspec.horizon, "stream length T");
  gen->add_option("--domain", wspec.domain_size, "item domain size");
  gen->add_option("--target-n", wspec.target_live, "churn live-set target");
  gen->add_option("--updates", wspec.num_updates, "sparse insertion count");
  gen->add_option("--update-prob", wspec.update_prob,
                  "churn activity probability");
  gen->add_option("--seed", wspec.seed, "generator seed");
  gen->add_option("--out", gen_out, "output path (- for stdout)");

  // --- shared run/bench options ---
  std::string stream_path, mech_s = "fd", static_s = "laplace";
  std::string run_out = "-";
  dpcr::RunConfig rcfg;
  std::size_t num_queries = 1;
  std::uint64_t trials = 1;
  bool explain_budget = false, dump_tree = false;

  auto add_mech_opts = [&](CLI::App* sub) {
    sub->add_option("--mechanism", mech_s, "btm|hybrid|insonly|fd|fd-baseline");
    sub->add_option("--static", static_s, "laplace|gaussian|pmw");
    sub->add_option("--epsilon", rcfg.epsilon, "privacy budget epsilon");
    sub->add_option("--delta", rcfg.delta, "privacy budget delta");
    sub->add_option("--beta", rcfg.beta, "failure probability");
    sub->add_option("--seed", rcfg.seed, "noise seed");
    sub->add_flag("--noiseless", rcfg.noiseless, "suppress all noise");
    sub->add_option("--horizon", rcfg.btm_horizon, "btm horizon");
    sub->add_option("--report-every", rcfg.report_every,
                    "emit a report row every k steps");
    sub->add_option("--num-queries", num_queries,
                    "size of the (seeded) query class; 1 = counting only");
  };

  auto* run = app.add_subcommand("run", "replay a stream through a mechanism");
  run->add_option("--stream", stream_path, "input stream file")->required();
  add_mech_opts(run);
  run->add_option("--out", run_out, "report path (- for stdout)");
  run->add_flag("--explain-budget", explain_budget, "print the budget ledger");
  run->add_flag("--dump-tree", dump_tree, "print the interval-tree table");

  auto* bench = app.add_subcommand(
      "bench", "aggregate errors over repeated trials of a workload");
  std::string bench_workload = "fully-dynamic-churn";
  bench->add_option("--workload", bench_workload, "workload kind");
  bench->add_option("--horizon-t", wspec.horizon, "stream length T");
  bench->add_option("--domain", wspec.domain_size, "item domain size");
  bench->add_option("--target-n", wspec.target_live, "churn live-set target");
  bench->add_option("--trials", trials, "independent trials");
  add_mech_opts(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      wspec.kind = dpcr::workload_kind_from_string(gen_workload);
      std::ostringstream os;
      dpcr::write_stream(os, dpcr::gen_stream(wspec));
      write_out(gen_out, os.str());
      return kExitOk;
    }

    rcfg.mech = dpcr::mech_kind_from_string(mech_s);
    rcfg.static_cfg.kind = dpcr::static_kind_from_string(static_s);

    if (run->parsed()) {
      std::vector<dpcr::UpdateEvent> stream;
      try {
        stream = load_stream(stream_path);
      } catch (const dpcr::InvalidStreamError& e) {
        std::cerr << "invalid stream: " << e.what() << '\n';
        return kExitStream;
      }
      std::size_t domain = 1;
      for (const auto& e : stream)
        if (e.is_update()) domain = std::max<std::size_t>(domain, e.item + 1);
      auto queries = build_queries(domain, num_queries, rcfg.seed);

      if (explain_budget || dump_tree) {
        // replay once through a bare mechanism for the diagnostics
        auto mech = dpcr::make_mechanism(queries, rcfg);
        for (const auto& e : stream) mech->feed(e);
        if (explain_budget) std::cout << mech->ledger()->to_string();
        if (dump_tree) std::cout << mech->dump_tree();
      }
      auto rep = dpcr::run_experiment(stream, queries, rcfg);
      std::ostringstream os;
      dpcr::write_report(os, rep.rows);
      write_out(run_out, os.str());
      return kExitOk;
    }

    // bench
    wspec.kind = dpcr::workload_kind_from_string(bench_workload);
    std::vector<double> finals, maxes;
    for (std::uint64_t trial = 0; trial < trials; ++trial) {
      dpcr::WorkloadSpec ws = wspec;
      ws.seed = dpcr::derive_seed(wspec.seed, trial);
      dpcr::RunConfig rc = rcfg;
      rc.seed = dpcr::derive_seed(rcfg.seed, trial + 1'000'000);
      const auto stream = dpcr::gen_stream(ws);
      auto queries = build_queries(ws.domain_size, num_queries, rc.seed);
      auto rep = dpcr::run_experiment(stream, queries, rc);
      double mx = 0.0;
      for (const auto& row : rep.rows) mx = std::max(mx, row.abs_error);
      maxes.push_back(mx);
      if (!rep.rows.empty()) finals.push_back(rep.rows.back().abs_error);
    }
    std::cout << "trials,median_max_error,p95_max_error,max_max_error,"
                 "median_final_error\n";
    std::cout << trials << ',' << dpcr::fmt_double(percentile(maxes, 0.5))
              << ',' << dpcr::fmt_double(percentile(maxes, 0.95)) << ','
              << dpcr::fmt_double(percentile(maxes, 1.0)) << ','
              << dpcr::fmt_double(percentile(finals, 0.5)) << '\n';
    return kExitOk;
  } catch (const dpcr::InvalidStreamError& e) {
    std::cerr << "invalid stream: " << e.what() << '\n';
    return kExitStream;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}
