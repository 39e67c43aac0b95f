#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpcr/core.hpp"
#include "dpcr/fully_dynamic.hpp"
#include "dpcr/insertion_only.hpp"
#include "dpcr/io.hpp"
#include "dpcr/rng.hpp"
#include "dpcr/static_mech.hpp"

namespace dpcr {

enum class MechKind { btm, hybrid, insonly, fd, fd_baseline };

inline MechKind mech_kind_from_string(const std::string& s) {
  if (s == "btm") return MechKind::btm;
  if (s == "hybrid") return MechKind::hybrid;
  if (s == "insonly") return MechKind::insonly;
  if (s == "fd") return MechKind::fd;
  if (s == "fd-baseline") return MechKind::fd_baseline;
  throw std::invalid_argument("unknown mechanism: " + s);
}

inline StaticKind static_kind_from_string(const std::string& s) {
  if (s == "laplace") return StaticKind::laplace;
  if (s == "gaussian") return StaticKind::gaussian;
  if (s == "pmw") return StaticKind::pmw;
  throw std::invalid_argument("unknown static mechanism: " + s);
}

struct RunConfig {
  MechKind mech = MechKind::fd;
  StaticConfig static_cfg{};
  double epsilon = 1.0;
  double delta = 0.0;
  double beta = 0.05;
  std::uint64_t seed = 1;
  bool noiseless = false;
  Timestamp btm_horizon = 1024;  // btm only
  Timestamp report_every = 1;    // emit a report row every k steps
};

// Uniform streaming facade over the five mechanisms.
class MechanismAdapter {
 public:
  virtual ~MechanismAdapter() = default;
  virtual bool feed(const UpdateEvent& e) = 0;  // true when a boundary closed
  virtual double query(std::size_t qi) const = 0;
  // Bound on updates not yet reflected in answers (open segment).
  virtual double pending_bound() const = 0;
  // High-probability error bound for the current answer; 0 if none is
  // implemented for this static mechanism.
  virtual double theory_bound(double beta) const = 0;
  virtual std::shared_ptr<LedgerNode> ledger() const = 0;
  virtual std::string dump_tree() const { return {}; }
};

namespace detail {

class BtmAdapter final : public MechanismAdapter {
 public:
  BtmAdapter(std::shared_ptr<const QueryClass> q, const RunConfig& c)
      : m_(q, Budget(c.epsilon, c.delta), c.static_cfg,
           NoiseSource(c.seed, c.noiseless), c.btm_horizon) {}
  bool feed(const UpdateEvent& e) override {
    m_.feed(e);
    return true;
  }
  double query(std::size_t qi) const override { return m_.query(qi); }
  double pending_bound() const override { return 0.0; }
  double theory_bound(double beta) const override {
    const auto scales = m_.answer_scales(m_.time());
    return scales.empty() ? 0.0 : laplace_sum_tail_bound(scales, beta);
  }
  std::shared_ptr<LedgerNode> ledger() const override { return m_.ledger(); }

 private:
  BinaryTreeMechanism m_;
};

class HybridAdapter final : public MechanismAdapter {
 public:
  HybridAdapter(std::shared_ptr<const QueryClass> q, const RunConfig& c)
      : m_(q, Budget(c.epsilon, c.delta), c.static_cfg,
           NoiseSource(c.seed, c.noiseless)) {}
  bool feed(const UpdateEvent& e) override {
    m_.feed(e);
    return true;
  }
  double query(std::size_t qi) const override { return m_.query(qi); }
  double pending_bound() const override { return 0.0; }
  double theory_bound(double beta) const override {
    const auto scales = m_.answer_scales();
    return scales.empty() ? 0.0 : laplace_sum_tail_bound(scales, beta);
  }
  std::shared_ptr<LedgerNode> ledger() const override { return m_.ledger(); }

 private:
  HybridMechanism m_;
};

class InsOnlyAdapter final : public MechanismAdapter {
 public:
  InsOnlyAdapter(std::shared_ptr<const QueryClass> q, const RunConfig& c)
      : src_(c.seed, c.noiseless),
        m_(q, Budget(c.epsilon, c.delta), c.static_cfg, c.beta, src_) {}
  bool feed(const UpdateEvent& e) override { return m_.feed(e).has_value(); }
  double query(std::size_t qi) const override { return m_.query(qi).value; }
  double pending_bound() const override {
    return m_.query(0).pending_updates_bound;
  }
  double theory_bound(double beta) const override {
    const auto scales = m_.hybrid().answer_scales();
    return scales.empty() ? 0.0 : laplace_sum_tail_bound(scales, beta);
  }
  std::shared_ptr<LedgerNode> ledger() const override { return m_.ledger(); }

 private:
  NoiseSource src_;
  InsertionOnlyMechanism m_;
};

class FdAdapter final : public MechanismAdapter {
 public:
  FdAdapter(std::shared_ptr<const QueryClass> q, const RunConfig& c)
      : m_(q, FdConfig{c.epsilon, c.delta, c.beta, c.static_cfg, c.noiseless},
           c.seed) {}
  bool feed(const UpdateEvent& e) override { return m_.feed(e).has_value(); }
  double query(std::size_t qi) const override { return m_.query(qi).value; }
  double pending_bound() const override {
    return m_.query(0).pending_updates_bound;
  }
  double theory_bound(double beta) const override {
    return m_.answer_bound(beta);
  }
  std::shared_ptr<LedgerNode> ledger() const override { return m_.ledger(); }
  std::string dump_tree() const override { return m_.dump_tree(); }
  FdMechanism& mech() { return m_; }

 private:
  FdMechanism m_;
};

class FdBaselineAdapter final : public MechanismAdapter {
 public:
  FdBaselineAdapter(std::shared_ptr<const QueryClass> q, const RunConfig& c)
      : m_(q, FdConfig{c.epsilon, c.delta, c.beta, c.static_cfg, c.noiseless},
           c.seed) {}
  bool feed(const UpdateEvent& e) override { return m_.feed(e); }
  double query(std::size_t qi) const override { return m_.query(qi).value; }
  double pending_bound() const override {
    return m_.query(0).pending_updates_bound;
  }
  double theory_bound(double) const override { return 0.0; }
  std::shared_ptr<LedgerNode> ledger() const override { return m_.ledger(); }

 private:
  FdBaselineMechanism m_;
};

}  // namespace detail

inline std::unique_ptr<MechanismAdapter> make_mechanism(
    std::shared_ptr<const QueryClass> queries, const RunConfig& cfg) {
  switch (cfg.mech) {
    case MechKind::btm:
      return std::make_unique<detail::BtmAdapter>(queries, cfg);
    case MechKind::hybrid:
      return std::make_unique<detail::HybridAdapter>(queries, cfg);
    case MechKind::insonly:
      return std::make_unique<detail::InsOnlyAdapter>(queries, cfg);
    case MechKind::fd:
      return std::make_unique<detail::FdAdapter>(queries, cfg);
    case MechKind::fd_baseline:
      return std::make_unique<detail::FdBaselineAdapter>(queries, cfg);
  }
  throw std::invalid_argument("unknown mechanism");
}

struct RunReport {
  std::vector<ReportRow> rows;
  std::string ledger_summary;
};

// Replays a stream through a mechanism and reports estimate vs exact at
// every report_every-th step (and at the final step).  Deterministic: the
// same (stream, config) pair always yields identical rows.
inline RunReport run_experiment(const std::vector<UpdateEvent>& stream,
                                std::shared_ptr<const QueryClass> queries,
                                const RunConfig& cfg) {
  auto mech = make_mechanism(queries, cfg);
  RunReport rep;
  Dataset exact(queries->domain_size());
  std::uint64_t updates = 0;
  Timestamp prev = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& e = stream[i];
    if (e.t != prev + 1)
      throw InvalidStreamError("timestamps must increase by 1 from 1");
    prev = e.t;
    mech->feed(e);
    switch (e.op) {
      case Op::insert:
        exact.add(e.item);
        ++updates;
        break;
      case Op::remove:
        if (exact.count(e.item) == 0)
          throw InvalidStreamError("deletion of absent item");
        exact.remove(e.item);
        ++updates;
        break;
      case Op::noop:
        break;
    }
    const bool last = i + 1 == stream.size();
    if (!last && (cfg.report_every == 0 || e.t % cfg.report_every != 0))
      continue;
    const double bound = mech->theory_bound(cfg.beta);
    for (std::size_t qi = 0; qi < queries->size(); ++qi) {
      ReportRow row;
      row.t = e.t;
      row.updates = updates;
      row.live = exact.total();
      row.query_id = qi;
      row.estimate = mech->query(qi);
      row.exact = evaluate_query((*queries)[qi], exact);
      row.abs_error = std::abs(row.estimate - row.exact);
      row.theory_bound = bound;
      rep.rows.push_back(row);
    }
  }
  rep.ledger_summary = mech->ledger()->to_string();
  return rep;
}

}  // namespace dpcr
