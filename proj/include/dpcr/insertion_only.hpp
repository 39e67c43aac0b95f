#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "dpcr/budget.hpp"
#include "dpcr/core.hpp"
#include "dpcr/static_mech.hpp"
#include "dpcr/svt.hpp"

namespace dpcr {

struct TimeRange {
  Timestamp first = 0;
  Timestamp last = 0;  // inclusive
  Timestamp length() const { return last - first + 1; }
  bool operator==(const TimeRange&) const = default;
};

// Minimal disjoint cover of [origin, t] by dyadic intervals aligned to
// origin.  Greedy largest-aligned-block; a prefix decomposes into one
// interval per set bit of its length.
inline std::vector<TimeRange> dyadic_cover(Timestamp t, Timestamp origin) {
  if (t < origin) throw std::domain_error("dyadic_cover: t < origin");
  std::vector<TimeRange> out;
  Timestamp pos = 0;                // offset from origin
  const Timestamp len = t - origin + 1;
  while (pos < len) {
    Timestamp block = Timestamp{1} << (63 - std::countl_zero(len - pos));
    while (pos % block != 0) block >>= 1;
    out.push_back({origin + pos, origin + pos + block - 1});
    pos += block;
  }
  return out;
}

// Finite-horizon binary tree mechanism over dyadic time intervals.  The
// horizon T is a power of two fixed at construction; dyadic nodes have
// length at most T/2 (a prefix cover never needs the full-range node: it is
// replaced by its two halves), giving exactly log2(T) levels at
// (eps/log2(T), delta/log2(T)) each.
//
// Memory: queries at the current time only ever touch the most recently
// closed node of each level, so that is all we retain — O(log T) releases
// regardless of T.  Queries at strictly earlier times are supported only
// while their nodes are still the latest of their level.
class BinaryTreeMechanism {
 public:
  BinaryTreeMechanism(std::shared_ptr<const QueryClass> queries, Budget budget,
                      StaticConfig static_cfg, NoiseSource src,
                      Timestamp horizon)
      : queries_(std::move(queries)),
        budget_(budget),
        cfg_(static_cfg),
        src_(std::move(src)) {
    horizon_ = std::bit_ceil(std::max<Timestamp>(horizon, 2));
    levels_ = static_cast<std::size_t>(std::countr_zero(horizon_));
    acc_.assign(levels_, Dataset(queries_->domain_size()));
    latest_.resize(levels_);
  }

  Timestamp horizon() const { return horizon_; }
  std::size_t levels() const { return levels_; }
  Timestamp time() const { return t_; }
  Budget node_budget() const {
    return budget_.scaled(1.0 / static_cast<double>(levels_));
  }

  void feed(const Dataset& batch) {
    if (t_ >= horizon_) throw std::domain_error("btm horizon exceeded");
    ++t_;
    for (std::size_t k = 0; k < levels_; ++k) {
      if (!batch.empty())
        for (std::size_t x = 0; x < batch.domain_size(); ++x)
          if (batch.counts()[x])
            acc_[k].add(static_cast<ItemId>(x), batch.counts()[x]);
      if (t_ % (Timestamp{1} << k) == 0) {
        latest_[k].emplace(
            t_, make_release(acc_[k], *queries_, node_budget(), src_, cfg_));
        ++closed_[k];
        acc_[k] = Dataset(queries_->domain_size());
        // At t = T the cover is both top-level halves; pin the first one so
        // the second half's close cannot evict it.
        if (k + 1 == levels_ && t_ == horizon_ / 2)
          first_half_ = latest_[k];
      }
    }
  }

  void feed(const UpdateEvent& e) {
    Dataset batch(queries_->domain_size());
    if (e.op == Op::remove)
      throw InvalidStreamError("btm accepts insertion-only streams");
    if (e.op == Op::insert) batch.add(e.item);
    feed(batch);
  }

  double query(std::size_t qi, Timestamp t) const {
    if (t > t_) throw std::domain_error("btm query beyond current time");
    if (t == 0) return 0.0;
    double sum = 0.0;
    for (const auto& range : cover(t)) sum += node_at(range).answer(qi);
    return sum;
  }
  double query(std::size_t qi) const { return query(qi, t_); }

  // Laplace scales behind query(.., t); meaningful for the laplace static.
  std::vector<double> answer_scales(Timestamp t) const {
    std::vector<double> out;
    if (t == 0) return out;
    for (const auto& range : cover(t))
      out.push_back(node_at(range).noise_scale);
    return out;
  }

  std::shared_ptr<LedgerNode> ledger() const {
    auto root = LedgerNode::sequential("binary-tree mechanism");
    for (std::size_t k = 0; k < levels_; ++k) {
      auto level = LedgerNode::parallel("level len=2^" + std::to_string(k),
                                        node_budget());
      if (latest_[k])
        level->add_child(LedgerNode::leaf(
            "latest of " + std::to_string(closed_[k].v) + " nodes, end=" +
                std::to_string(latest_[k]->first),
            latest_[k]->second.budget));
      root->add_child(level);
    }
    return root;
  }

 private:
  struct Counter {
    std::uint64_t v = 0;
    Counter& operator++() {
      ++v;
      return *this;
    }
  };

  const Release& node_at(const TimeRange& range) const {
    const auto k = static_cast<std::size_t>(std::countr_zero(range.length()));
    if (k + 1 == levels_ && first_half_ && first_half_->first == range.last)
      return first_half_->second;
    if (k >= levels_ || !latest_[k] || latest_[k]->first != range.last)
      throw std::domain_error("btm node evicted or never closed");
    return latest_[k]->second;
  }

  std::vector<TimeRange> cover(Timestamp t) const {
    auto ranges = dyadic_cover(t, 1);
    std::vector<TimeRange> out;
    for (const auto& r : ranges) {
      if (r.length() == horizon_) {  // split the full range into halves
        const Timestamp half = horizon_ / 2;
        out.push_back({r.first, r.first + half - 1});
        out.push_back({r.first + half, r.last});
      } else {
        out.push_back(r);
      }
    }
    return out;
  }

  std::shared_ptr<const QueryClass> queries_;
  Budget budget_;
  StaticConfig cfg_;
  NoiseSource src_;
  Timestamp horizon_ = 0;
  std::size_t levels_ = 0;
  Timestamp t_ = 0;
  std::vector<Dataset> acc_;  // open aligned block per level
  // most recently closed node per level: (end time, release)
  std::vector<std::optional<std::pair<Timestamp, Release>>> latest_;
  // top-level node ending at T/2, needed alongside its sibling at t = T
  std::optional<std::pair<Timestamp, Release>> first_half_;
  std::vector<Counter> closed_ = std::vector<Counter>(64);
};

// Infinite-horizon hybrid mechanism: disjoint ranges of exponentially
// growing size, each holding one whole-range release at (eps/2, delta/2)
// plus one finite binary tree mechanism at (eps/2, delta/2) whose horizon is
// the range length.  Ranges are [1,2], (2,4], (4,8], ...
class HybridMechanism {
 public:
  HybridMechanism(std::shared_ptr<const QueryClass> queries, Budget budget,
                  StaticConfig static_cfg, NoiseSource src)
      : queries_(std::move(queries)),
        budget_(budget),
        cfg_(static_cfg),
        src_(std::move(src)),
        range_acc_(queries_->domain_size()) {
    open_range();
  }

  Timestamp time() const { return t_; }
  std::size_t whole_releases() const { return whole_.size(); }

  void feed(const Dataset& batch) {
    ++t_;
    if (!batch.empty())
      for (std::size_t x = 0; x < batch.domain_size(); ++x)
        if (batch.counts()[x])
          range_acc_.add(static_cast<ItemId>(x), batch.counts()[x]);
    btm_->feed(batch);
    if (t_ == range_end_) {
      whole_.push_back(
          make_release(range_acc_, *queries_, budget_.scaled(0.5), src_, cfg_));
      ++range_index_;
      open_range();
    }
  }

  void feed(const UpdateEvent& e) {
    Dataset batch(queries_->domain_size());
    if (e.op == Op::remove)
      throw InvalidStreamError("hybrid accepts insertion-only streams");
    if (e.op == Op::insert) batch.add(e.item);
    feed(batch);
  }

  double query(std::size_t qi) const {
    double sum = 0.0;
    for (const auto& rel : whole_) sum += rel.answer(qi);
    if (t_ > range_start_ - 1) sum += btm_->query(qi, t_ - (range_start_ - 1));
    return sum;
  }

  std::vector<double> answer_scales() const {
    std::vector<double> out;
    for (const auto& rel : whole_) out.push_back(rel.noise_scale);
    if (t_ > range_start_ - 1) {
      auto inner = btm_->answer_scales(t_ - (range_start_ - 1));
      out.insert(out.end(), inner.begin(), inner.end());
    }
    return out;
  }

  // Closed-form bound on |query error| at the current time, for the
  // laplace static with a counting query; holds with probability 1-beta.
  double count_error_bound(double beta) const {
    const auto scales = answer_scales();
    return laplace_sum_tail_bound(scales, beta);
  }

  // Same bound computed analytically from (epsilon, steps) without an
  // instance; used as the public gamma bound in the per-node algorithm.
  static double count_bound(double epsilon, Timestamp steps, double beta) {
    if (steps == 0) return 0.0;
    std::vector<double> scales;
    // whole ranges closed by `steps`
    Timestamp start = 1, end = 2;
    std::size_t idx = 1;
    while (end <= steps) {
      scales.push_back(2.0 / epsilon);
      ++idx;
      start = end + 1;
      end = Timestamp{1} << idx;
    }
    if (steps >= start) {
      const Timestamp len = std::bit_ceil(std::max<Timestamp>(end - start + 1, 2));
      const double levels = static_cast<double>(std::countr_zero(len));
      const auto cover = dyadic_cover(steps - start + 1, 1);
      std::size_t nodes = 0;
      for (const auto& r : cover) nodes += r.length() == len ? 2 : 1;
      for (std::size_t i = 0; i < nodes; ++i)
        scales.push_back(2.0 * levels / epsilon);
    }
    return laplace_sum_tail_bound(scales, beta);
  }

  std::shared_ptr<LedgerNode> ledger() const {
    auto root = LedgerNode::sequential("hybrid mechanism");
    auto whole = LedgerNode::parallel("whole-range releases",
                                      budget_.scaled(0.5));
    for (std::size_t i = 0; i < whole_.size(); ++i)
      whole->add_child(LedgerNode::leaf("range " + std::to_string(i + 1),
                                        whole_[i].budget));
    auto trees = LedgerNode::parallel("in-range binary trees",
                                      budget_.scaled(0.5));
    trees->add_child(btm_->ledger());
    root->add_child(whole);
    root->add_child(trees);
    return root;
  }

 private:
  void open_range() {
    range_start_ = range_index_ == 1 ? 1 : (Timestamp{1} << (range_index_ - 1)) + 1;
    range_end_ = Timestamp{1} << range_index_;
    range_acc_ = Dataset(queries_->domain_size());
    btm_ = std::make_unique<BinaryTreeMechanism>(
        queries_, budget_.scaled(0.5), cfg_, src_.fork(),
        range_end_ - range_start_ + 1);
  }

  std::shared_ptr<const QueryClass> queries_;
  Budget budget_;
  StaticConfig cfg_;
  NoiseSource src_;
  Timestamp t_ = 0;
  std::size_t range_index_ = 1;
  Timestamp range_start_ = 1;
  Timestamp range_end_ = 2;
  Dataset range_acc_;
  std::unique_ptr<BinaryTreeMechanism> btm_;
  std::vector<Release> whole_;
};

struct Segment {
  std::uint64_t index = 0;  // j, 1-based
  Timestamp first = 0;      // t_{j-1} + 1
  Timestamp last = 0;       // t_j
  std::uint64_t insertion_count = 0;
};

// Infinite private partitioning: iterated SVT with quadratically growing
// deadlines T_j and a pi^2-series failure-probability schedule.
class PrivatePartitioner {
 public:
  PrivatePartitioner(double epsilon, double beta, NoiseSource src)
      : epsilon_(epsilon), beta_(beta), src_(std::move(src)) {
    if (!(epsilon > 0)) throw std::domain_error("epsilon must be > 0");
    if (!(beta > 0 && beta < 1))
      throw std::domain_error("beta must be in (0,1)");
    deadline_ = 2;
    start_instance();
  }

  std::optional<Segment> feed(bool is_update) {
    ++t_;
    count_ += is_update ? 1 : 0;
    const auto halt = svt_->feed(static_cast<double>(count_));
    if (halt || t_ >= deadline_) {
      Segment seg{j_, last_close_ + 1, t_, count_};
      declarations_.emplace_back(seg.first, seg.last);
      last_close_ = t_;
      ++j_;
      deadline_ = t_ * t_;
      count_ = 0;
      start_instance();
      return seg;
    }
    return std::nullopt;
  }

  Timestamp time() const { return t_; }
  std::uint64_t segment_index() const { return j_; }       // current open j
  std::uint64_t segments_closed() const { return j_ - 1; }
  Timestamp deadline() const { return deadline_; }
  double beta_j() const { return beta_j_; }
  double theta_j() const { return theta_j_; }
  std::uint64_t open_insertions() const { return count_; }
  const std::vector<Declaration>& declarations() const { return declarations_; }

  // Bound on how many insertions the open segment may hold: past this,
  // SVT would have tripped with probability 1 - beta_j.
  double open_segment_insertion_bound() const {
    return theta_j_ + (6.0 / epsilon_) * std::log(2.0 / beta_j_);
  }

  std::shared_ptr<LedgerNode> ledger(Budget declared) const {
    auto root =
        LedgerNode::adaptive_parallel("private partitioning (svt)", declared);
    for (const auto& d : declarations_)
      root->add_child(LedgerNode::leaf("svt segment", Budget(epsilon_, 0.0)),
                      d);
    return root;
  }

 private:
  void start_instance() {
    beta_j_ = 6.0 * beta_ /
              (kPi * kPi * static_cast<double>(j_) * static_cast<double>(j_));
    theta_j_ = (7.0 / epsilon_) *
               std::log(2.0 * static_cast<double>(deadline_) / beta_j_);
    svt_.emplace(epsilon_, theta_j_, t_ + 1, src_.fork());
  }

  double epsilon_;
  double beta_;
  NoiseSource src_;
  Timestamp t_ = 0;
  Timestamp last_close_ = 0;
  std::uint64_t j_ = 1;
  Timestamp deadline_ = 2;
  std::uint64_t count_ = 0;
  double beta_j_ = 0, theta_j_ = 0;
  std::optional<SvtInstance> svt_;
  std::vector<Declaration> declarations_;
};

// Composed insertion-only mechanism: private partitioning at (eps/2, 0)
// feeding closed segments as batched super-timestamps into the hybrid
// mechanism at (eps/2, delta).
class InsertionOnlyMechanism {
 public:
  struct Answer {
    double value = 0.0;
    double pending_updates_bound = 0.0;
  };

  InsertionOnlyMechanism(std::shared_ptr<const QueryClass> queries,
                         Budget budget, StaticConfig static_cfg, double beta,
                         NoiseSource src)
      : budget_(budget),
        partitioner_(budget.epsilon / 2.0, beta, src.fork()),
        hybrid_(queries, Budget(budget.epsilon / 2.0, budget.delta),
                static_cfg, src.fork()),
        open_batch_(queries->domain_size()) {}

  // Returns the closed segment when this event completes one.
  std::optional<Segment> feed(const UpdateEvent& e) {
    if (e.op == Op::remove)
      throw InvalidStreamError("insertion-only mechanism got a deletion");
    if (e.op == Op::insert) open_batch_.add(e.item);
    auto seg = partitioner_.feed(e.is_update());
    if (seg) {
      hybrid_.feed(open_batch_);
      open_batch_ = Dataset(open_batch_.domain_size());
    }
    return seg;
  }

  Answer query(std::size_t qi) const {
    return {hybrid_.query(qi), partitioner_.open_segment_insertion_bound()};
  }

  Timestamp time() const { return partitioner_.time(); }
  std::uint64_t segments_closed() const {
    return partitioner_.segments_closed();
  }
  const PrivatePartitioner& partitioner() const { return partitioner_; }
  const HybridMechanism& hybrid() const { return hybrid_; }

  std::shared_ptr<LedgerNode> ledger() const {
    auto root = LedgerNode::sequential("insertion-only mechanism");
    root->add_child(
        partitioner_.ledger(Budget(budget_.epsilon / 2.0, 0.0)));
    root->add_child(hybrid_.ledger());
    return root;
  }

 private:
  Budget budget_;
  PrivatePartitioner partitioner_;
  HybridMechanism hybrid_;
  Dataset open_batch_;
};

}  // namespace dpcr
