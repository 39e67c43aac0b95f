// Acceptance gate: one criterion per function, one pass/fail line each.
// All tolerances and frozen calibration constants live here or in
// calibration.hpp.  Exit status is the number of failed criteria.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "dpcr/harness.hpp"
#include "dpcr/workload.hpp"

using namespace dpcr;

namespace {

int failures = 0;

void report(int idx, bool ok, const std::string& what,
            const std::string& detail) {
  std::printf("criterion %d: %s — %s (%s)\n", idx, ok ? "PASS" : "FAIL",
              what.c_str(), detail.c_str());
  if (!ok) ++failures;
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const std::size_t i =
      std::min(v.size() - 1, static_cast<std::size_t>(p * v.size()));
  return v[i];
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// --- 1: noiseless exactness over 1000 random fully-dynamic streams -------

void criterion1() {
  auto q = QueryClass::counting_only(32);
  long boundaries = 0, bad = 0;
  for (int tr = 0; tr < 1000; ++tr) {
    WorkloadSpec ws;
    ws.kind = WorkloadKind::fully_dynamic_churn;
    ws.horizon = 10'000;
    ws.domain_size = 32;
    ws.target_live = 40;
    ws.seed = derive_seed(100, tr);
    const auto stream = gen_stream(ws);
    FdConfig cfg;
    cfg.noiseless = true;
    FdMechanism m(q, cfg, derive_seed(101, tr));
    Dataset exact(32);
    for (const auto& e : stream) {
      const auto closed = m.feed(e);
      if (e.op == Op::insert) exact.add(e.item);
      if (e.op == Op::remove) exact.remove(e.item);
      if (closed) {
        ++boundaries;
        if (m.query(0).value != static_cast<double>(exact.total())) ++bad;
      }
    }
  }
  report(1, bad == 0 && boundaries > 1000,
         "noiseless fully-dynamic answers exact at every segment boundary",
         std::to_string(boundaries) + " boundaries, " + std::to_string(bad) +
             " mismatches, tolerance 0");
}

// --- 2: tree arithmetic vs brute-force forest construction ---------------

std::vector<std::uint64_t> forest_roots_oracle(std::uint64_t j) {
  std::vector<std::pair<std::uint64_t, unsigned>> stack;
  for (std::uint64_t i = 1; i <= j; ++i) {
    const unsigned lvl = static_cast<unsigned>(std::countr_zero(i)) + 1;
    while (!stack.empty() && stack.back().second < lvl) stack.pop_back();
    stack.emplace_back(i, lvl);
  }
  std::vector<std::uint64_t> out;
  out.reserve(stack.size());
  for (const auto& [idx, lvl] : stack) out.push_back(idx);
  return out;
}

void criterion2() {
  long bad = 0;
  for (std::uint64_t j = 1; j <= 4096; ++j) {
    if (query_node_set(j) != forest_roots_oracle(j)) ++bad;
    const unsigned lvl_oracle =
        static_cast<unsigned>(std::countr_zero(j)) + 1;
    if (level_of(j) != lvl_oracle) ++bad;
  }
  report(2, bad == 0, "query_node_set/level match brute-force enumeration",
         "j <= 4096, " + std::to_string(bad) + " mismatches, tolerance 0");
}

// --- 3: budget exactness + adaptive disjointness --------------------------

void criterion3() {
  int bad = 0;
  auto q = QueryClass::counting_only(8);
  WorkloadSpec ws;
  ws.kind = WorkloadKind::fully_dynamic_churn;
  ws.horizon = 4'000;
  ws.domain_size = 8;
  ws.target_live = 16;
  ws.seed = 300;
  const auto churn = gen_stream(ws);
  WorkloadSpec di = ws;
  di.kind = WorkloadKind::dense_insert;
  const auto dense = gen_stream(di);

  const std::vector<Budget> grid = {Budget(1.0, 0.0), Budget(0.5, 1e-6),
                                    Budget(2.0, 1e-9)};
  for (const auto& b : grid) {
    for (MechKind mech : {MechKind::btm, MechKind::hybrid, MechKind::insonly,
                          MechKind::fd, MechKind::fd_baseline}) {
      RunConfig cfg;
      cfg.mech = mech;
      cfg.epsilon = b.epsilon;
      cfg.delta = b.delta;
      cfg.btm_horizon = 4'096;
      cfg.seed = 301;
      auto m = make_mechanism(q, cfg);
      const auto& stream =
          (mech == MechKind::fd || mech == MechKind::fd_baseline) ? churn
                                                                  : dense;
      for (const auto& e : stream) m->feed(e);
      try {
        const Budget total = m->ledger()->total();
        if (std::abs(total.epsilon - b.epsilon) > 1e-9 ||
            std::abs(total.delta - b.delta) > 1e-9)
          ++bad;
      } catch (const std::exception&) {
        ++bad;
      }
    }
  }

  // 10^3 randomized partitioner runs: declarations always compose
  int disjoint_bad = 0;
  for (int tr = 0; tr < 1000; ++tr) {
    PrivatePartitioner p(1.0, 0.05, NoiseSource(derive_seed(310, tr)));
    NoiseSource drive(derive_seed(311, tr));
    for (Timestamp t = 1; t <= 500; ++t) p.feed(drive.uniform() < 0.3);
    try {
      p.ledger(Budget(1.0, 0.0))->total();
    } catch (const DisjointnessViolation&) {
      ++disjoint_bad;
    }
  }
  report(3, bad == 0 && disjoint_bad == 0,
         "ledger roots equal configured budgets; declarations stay disjoint",
         std::to_string(bad) + " budget mismatches at 1e-9, " +
             std::to_string(disjoint_bad) + " disjointness violations / 1000");
}

// --- 4: SVT accuracy ------------------------------------------------------

void criterion4() {
  const double eps = 1.0, beta = 0.05;
  const int t1 = 1000, trials = 10'000;
  const double sigma = std::sqrt(beta * (1 - beta) / trials);

  // clause 1: all-zero values, theta = (8/eps) ln(2 t1/beta) + 1
  const double theta1 = (8.0 / eps) * std::log(2.0 * t1 / beta) + 1.0;
  int early = 0;
  for (int tr = 0; tr < trials; ++tr) {
    SvtInstance svt(eps, theta1, 1, NoiseSource(derive_seed(400, tr)));
    for (int i = 0; i < t1; ++i)
      if (svt.feed(0.0)) {
        ++early;
        break;
      }
  }
  const double r1 = static_cast<double>(early) / trials;

  // clause 2: a value theta + (6/eps) ln(2/beta) arrives at position t2
  const double theta2 = 100.0;
  const double spike = theta2 + (6.0 / eps) * std::log(2.0 / beta);
  int missed = 0;
  for (int tr = 0; tr < trials; ++tr) {
    SvtInstance svt(eps, theta2, 1, NoiseSource(derive_seed(401, tr)));
    bool halted = false;
    for (int i = 0; i < t1; ++i)
      if (svt.feed(i + 1 == t1 ? spike : 0.0)) {
        halted = true;
        break;
      }
    if (!halted) ++missed;
  }
  const double r2 = static_cast<double>(missed) / trials;

  const bool ok = r1 <= beta + 3 * sigma && r2 <= beta + 3 * sigma;
  report(4, ok, "sparse-vector early-halt and forced-halt rates within beta",
         "early " + fmt(r1) + ", missed " + fmt(r2) + ", limit " +
             fmt(beta + 3 * sigma));
}

// --- 5: partitioning utility ----------------------------------------------

void criterion5() {
  const double eps = 1.0, beta = 0.01;
  int good = 0;
  const int trials = 100;
  for (int tr = 0; tr < trials; ++tr) {
    WorkloadSpec ws;
    ws.kind = WorkloadKind::sparse_insert;
    ws.horizon = 1'000'000;
    ws.num_updates = 100;
    ws.domain_size = 4;
    ws.seed = derive_seed(500, tr);
    const auto stream = gen_stream(ws);
    PrivatePartitioner p(eps, beta, NoiseSource(derive_seed(501, tr)));
    std::vector<Segment> segs;
    for (const auto& e : stream)
      if (auto s = p.feed(e.is_update())) segs.push_back(*s);

    const double seg_cap =
        calib::kPartitionSegmentsC1 *
        (100.0 + std::log2(std::log2(static_cast<double>(ws.horizon))));
    bool ok = static_cast<double>(segs.size()) <= seg_cap;
    for (const auto& s : segs)
      if (static_cast<double>(s.insertion_count) >
          calib::kPartitionInsertionsC2 * (1.0 / eps) *
              std::log(static_cast<double>(s.last) / beta))
        ok = false;
    if (ok) ++good;
  }
  report(5, good >= 99,
         "segment count and per-segment insertions within frozen bounds",
         std::to_string(good) + "/100 trials ok, need >= 99; c1 = " +
             fmt(calib::kPartitionSegmentsC1) + ", c2 = " +
             fmt(calib::kPartitionInsertionsC2));
}

// --- 6: insertion-only dense counting --------------------------------------

void criterion6() {
  auto q = QueryClass::counting_only(8);
  std::vector<double> worst_ratio;
  for (int tr = 0; tr < 200; ++tr) {
    WorkloadSpec ws;
    ws.kind = WorkloadKind::dense_insert;
    ws.horizon = 1 << 14;
    ws.domain_size = 8;
    ws.seed = derive_seed(600, tr);
    const auto stream = gen_stream(ws);
    InsertionOnlyMechanism m(q, Budget(1.0, 0.0), {}, 0.05,
                             NoiseSource(derive_seed(601, tr)));
    double worst = 0;
    std::uint64_t n = 0;
    for (const auto& e : stream) {
      if (e.op == Op::insert) ++n;
      if (m.feed(e)) {
        const double err = std::abs(m.query(0).value - static_cast<double>(n));
        const double env =
            std::pow(std::log2(static_cast<double>(n) + 2), 1.5) +
            std::log2(static_cast<double>(e.t) + 2);
        worst = std::max(worst, err / env);
      }
    }
    worst_ratio.push_back(worst);
  }
  const double p95 = percentile(worst_ratio, 0.95);
  report(6, p95 <= calib::kInsOnlyCountingC,
         "dense counting error within C(log^1.5 n_t + log t)",
         "p95 ratio " + fmt(p95) + " vs frozen C = " +
             fmt(calib::kInsOnlyCountingC));
}

// --- 7: fully-dynamic vs two-stream baseline on churn ----------------------

void criterion7() {
  auto q = QueryClass::counting_only(32);
  std::vector<double> fd_err, bl_err, fd_ratio;
  for (int tr = 0; tr < 50; ++tr) {
    WorkloadSpec ws;
    ws.kind = WorkloadKind::fully_dynamic_churn;
    ws.horizon = 200'000;  // ~1e5 updates at update_prob 0.5
    ws.update_prob = 0.5;
    ws.target_live = 64;
    ws.domain_size = 32;
    ws.seed = derive_seed(700, tr);
    const auto stream = gen_stream(ws);
    FdConfig cfg;
    cfg.epsilon = 1.0;
    FdMechanism fd(q, cfg, derive_seed(701, tr));
    FdBaselineMechanism bl(q, cfg, derive_seed(702, tr));
    Dataset exact(32);
    std::uint64_t updates = 0;
    for (const auto& e : stream) {
      fd.feed(e);
      bl.feed(e);
      if (e.op == Op::insert) {
        exact.add(e.item);
        ++updates;
      }
      if (e.op == Op::remove) {
        exact.remove(e.item);
        ++updates;
      }
    }
    const double ex = static_cast<double>(exact.total());
    fd_err.push_back(std::abs(fd.query(0).value - ex));
    bl_err.push_back(std::abs(bl.query(0).value - ex));
    const double env =
        std::pow(std::log2(ex + 2), 1.5) *
        std::pow(std::log2(static_cast<double>(updates) + 2), 2.0) *
        std::log2(static_cast<double>(ws.horizon) + 2);
    fd_ratio.push_back(fd_err.back() / env);
  }
  const double fd_med = percentile(fd_err, 0.5);
  const double bl_med = percentile(bl_err, 0.5);
  const double ratio_med = percentile(fd_ratio, 0.5);
  const bool beats_baseline = fd_med < bl_med;
  const bool within_envelope = ratio_med <= calib::kFdEnvelopeC;
  report(7, beats_baseline && within_envelope,
         "fully-dynamic beats the ins/del baseline and stays in envelope",
         "fd median " + fmt(fd_med) + " vs baseline median " + fmt(bl_med) +
             "; envelope ratio " + fmt(ratio_med) + " vs C = " +
             fmt(calib::kFdEnvelopeC));
}

// --- 8: static-mechanism tails ---------------------------------------------

void criterion8() {
  bool ok = true;
  std::string detail;
  const int trials = 10'000;

  for (double beta : {0.05, 0.01}) {
    const double sigma = std::sqrt(beta * (1 - beta) / trials);
    // laplace
    {
      const double alpha = std::log(1.0 / beta);
      NoiseSource rng(800);
      int fails = 0;
      for (int i = 0; i < trials; ++i)
        if (std::abs(rng.laplace(1.0)) > alpha) ++fails;
      const double r = static_cast<double>(fails) / trials;
      if (r > beta + 3 * sigma) ok = false;
      detail += "lap@" + fmt(beta) + "=" + fmt(r) + " ";
    }
    // gaussian
    {
      ErrorParams p;
      p.epsilon = 1.0;
      p.delta = 1e-6;
      p.beta = beta;
      const double alpha = error_bound(p, BoundMech::gaussian);
      const double sd = gaussian_sigma(1.0, 1e-6, 1);
      NoiseSource rng(801);
      int fails = 0;
      for (int i = 0; i < trials; ++i)
        if (std::abs(rng.gaussian(sd)) > alpha) ++fails;
      const double r = static_cast<double>(fails) / trials;
      if (r > beta + 3 * sigma) ok = false;
      detail += "gauss@" + fmt(beta) + "=" + fmt(r) + " ";
    }
  }

  // alpha^(k) vs Monte-Carlo sums of k Lap(1) at beta = 0.01
  for (std::uint64_t k : {10ull, 100ull, 1000ull}) {
    ErrorParams p;
    p.epsilon = 1.0;
    p.beta = 0.01;
    p.k = k;
    const double bound = error_bound(p, BoundMech::laplace);
    NoiseSource rng(810 + k);
    const int mc = 5'000;
    std::vector<double> sums(mc);
    for (auto& s : sums) {
      double acc = 0;
      for (std::uint64_t j = 0; j < k; ++j) acc += rng.laplace(1.0);
      s = std::abs(acc);
    }
    const double q99 = percentile(sums, 0.99);
    if (q99 > bound) ok = false;
    detail += "k" + std::to_string(k) + ":" + fmt(q99) + "<=" + fmt(bound) +
              " ";
  }
  report(8, ok, "Laplace/Gaussian tails and alpha^(k) formula hold", detail);
}

// --- 9: PMW envelope --------------------------------------------------------

void criterion9() {
  double worst_ratio = 0, worst_abs = 0;
  NoiseSource gen(900);
  for (int tr = 0; tr < 20; ++tr) {
    Dataset d(64);
    for (int i = 0; i < 10'000; ++i)
      d.add(static_cast<ItemId>(gen.uniform() * 64));
    std::vector<LinearQuery> qs;
    for (int i = 0; i < 256; ++i) {
      std::vector<double> w(64);
      for (double& x : w) x = gen.uniform() < 0.5 ? 0.0 : 1.0;
      qs.emplace_back(std::move(w));
    }
    const QueryClass q(qs);
    NoiseSource src(derive_seed(901, tr));
    const auto r = release_pmw(d, q, Budget(1.0, 1e-6), src);
    double worst = 0;
    for (std::size_t i = 0; i < q.size(); ++i)
      worst =
          std::max(worst, std::abs(r.answer(i) - evaluate_query(q[i], d)));
    ErrorParams p;
    p.epsilon = 1.0;
    p.delta = 1e-6;
    p.beta = 0.05;
    p.data_size = 10'000;
    p.num_queries = 256;
    p.domain_size = 64;
    worst_ratio =
        std::max(worst_ratio, worst / error_bound(p, BoundMech::pmw_approx));
    worst_abs = std::max(worst_abs, worst);
  }
  const bool ok = worst_ratio <= calib::kPmwEnvelopeC && worst_abs <= 10'000.0;
  report(9, ok, "PMW max error within frozen envelope and never above |D|",
         "max ratio " + fmt(worst_ratio) + " vs C = " +
             fmt(calib::kPmwEnvelopeC) + ", max abs " + fmt(worst_abs));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
