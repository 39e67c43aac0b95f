#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include "dpcr/budget.hpp"
#include "dpcr/core.hpp"
#include "dpcr/insertion_only.hpp"
#include "dpcr/static_mech.hpp"

namespace dpcr {

// In-order infinite binary tree arithmetic over segment indices (1-based).

inline unsigned level_of(std::uint64_t i) {
  if (i == 0) throw std::domain_error("node index must be >= 1");
  return static_cast<unsigned>(std::countr_zero(i)) + 1;
}

// Closest ancestor on the left, 0 for left-spine nodes (powers of two).
inline std::uint64_t left_anchor(std::uint64_t i) {
  if (i == 0) throw std::domain_error("node index must be >= 1");
  return i & (i - 1);
}

// Nodes visited by a query at segment j: v_j and every
// ancestor-or-equal on or left of it, obtained by clearing low-order
// suffixes of j.  Ascending order; size <= floor(log2 j) + 1.
inline std::vector<std::uint64_t> query_node_set(std::uint64_t j) {
  if (j == 0) throw std::domain_error("node index must be >= 1");
  std::vector<std::uint64_t> out;
  for (std::uint64_t i = j; i != 0; i &= i - 1) out.push_back(i);
  std::reverse(out.begin(), out.end());
  return out;
}

struct StoredItem {
  ItemId item = 0;
  std::optional<Timestamp> deleted_at;  // segment-boundary time, set once
};

// Deletion-only mechanism at one interval-tree node: a static release over
// the node's items plus two insertion-only mechanisms over the deletions,
// restarted whenever roughly half the round's items are gone.
class NodeMechanism {
 public:
  NodeMechanism(std::uint64_t index, Timestamp batch_time,
                std::shared_ptr<const QueryClass> queries, Budget node_budget,
                StaticConfig static_cfg, double beta, NoiseSource src,
                const std::vector<ItemId>& items, bool noiseless_gamma)
      : index_(index),
        batch_time_(batch_time),
        queries_(std::move(queries)),
        node_budget_(node_budget),
        cfg_(static_cfg),
        beta_(beta),
        src_(std::move(src)),
        noiseless_gamma_(noiseless_gamma) {
    stored_.reserve(items.size());
    for (ItemId x : items) {
      live_idx_[x].push_back(stored_.size());
      stored_.push_back({x, std::nullopt});
    }
    live_count_ = stored_.size();
    start_round();
  }

  // Feed this node the (netted) deletions of segment s_j, then evaluate the
  // restart predicate.
  void process_segment(const std::vector<ItemId>& deletions,
                       std::uint64_t seg_index, Timestamp t_j) {
    if (halted_) return;
    Dataset dels(queries_->domain_size());
    for (ItemId x : deletions) {
      auto it = live_idx_.find(x);
      if (it == live_idx_.end() || it->second.empty()) continue;
      stored_[it->second.front()].deleted_at = t_j;
      it->second.pop_front();
      --live_count_;
      dels.add(x);
    }
    q_ins_->feed(dels);
    lap_ins_->feed(dels);

    const double n_del = lap_ins_->query(0);
    if (n_del > n_tilde_ / 2.0 + 2.0 * gamma(seg_index, round_)) {
      ++round_;
      const double eps_r = round_epsilon(round_);
      n_tilde_ =
          static_cast<double>(live_count_) + src_.laplace(1.0 / eps_r);
      spent_ = spent_ + Budget(eps_r, 0.0);
      round_spend_.push_back({Budget(eps_r, 0.0), round_});
      if (n_tilde_ < 2.0 * gamma(seg_index, round_)) {
        halted_ = true;
        return;
      }
      start_round_mechanisms();
    }
  }

  double query(std::size_t qi) const {
    if (halted_) return 0.0;
    return static_release_.answer(qi) - q_ins_->query(qi);
  }

  // Laplace scales behind query(); meaningful for the laplace static.
  std::vector<double> answer_scales() const {
    if (halted_) return {};
    auto out = q_ins_->answer_scales();
    if (static_release_.noise_scale > 0)
      out.push_back(static_release_.noise_scale);
    return out;
  }

  std::uint64_t index() const { return index_; }
  unsigned level() const { return level_of(index_); }
  Timestamp batch_time() const { return batch_time_; }
  std::size_t round() const { return round_; }
  bool halted() const { return halted_; }
  std::size_t live_size() const { return live_count_; }
  const std::vector<StoredItem>& stored() const { return stored_; }
  Budget spent() const { return spent_; }
  double n_tilde() const { return n_tilde_; }

  std::shared_ptr<LedgerNode> ledger() const {
    auto root = LedgerNode::series(
        "node v" + std::to_string(index_) + " rounds", node_budget_);
    std::size_t i = 0;
    while (i < round_spend_.size()) {
      const auto r = round_spend_[i].second;
      auto rnode = LedgerNode::sequential("round " + std::to_string(r));
      for (; i < round_spend_.size() && round_spend_[i].second == r; ++i)
        rnode->add_child(
            LedgerNode::leaf("sub-mechanism", round_spend_[i].first));
      root->add_child(rnode);
    }
    return root;
  }

 private:
  double round_epsilon(std::size_t r) const {
    return 3.0 * node_budget_.epsilon /
           (2.0 * kPi * kPi * static_cast<double>(r) * static_cast<double>(r));
  }
  double round_delta(std::size_t r) const {
    return 2.0 * node_budget_.delta /
           (kPi * kPi * static_cast<double>(r) * static_cast<double>(r));
  }
  double round_beta(std::size_t r) const {
    return beta_ / (kPi * kPi * static_cast<double>(r) * static_cast<double>(r));
  }

  // Public error bound of the counting mechanism at segment j in round r.
  double gamma(std::uint64_t seg_index, std::size_t r) const {
    if (noiseless_gamma_) return 0.0;
    return HybridMechanism::count_bound(round_epsilon(r),
                                        seg_index - index_, round_beta(r));
  }

  void start_round() {
    const double eps_r = round_epsilon(round_);
    n_tilde_ = static_cast<double>(live_count_) + src_.laplace(1.0 / eps_r);
    spent_ = spent_ + Budget(eps_r, 0.0);
    round_spend_.push_back({Budget(eps_r, 0.0), round_});
    start_round_mechanisms();
  }

  void start_round_mechanisms() {
    const Budget sub(round_epsilon(round_), round_delta(round_));
    Dataset live(queries_->domain_size());
    for (const auto& [x, idxs] : live_idx_)
      if (!idxs.empty()) live.add(x, idxs.size());
    static_release_ = make_release(live, *queries_, sub, src_, cfg_);
    q_ins_ = std::make_unique<HybridMechanism>(queries_, sub, cfg_,
                                               src_.fork());
    lap_ins_ = std::make_unique<HybridMechanism>(
        QueryClass::counting_only(queries_->domain_size()), sub,
        StaticConfig{StaticKind::laplace, {}}, src_.fork());
    spent_ = spent_ + sub + sub + sub;
    for (int i = 0; i < 3; ++i) round_spend_.push_back({sub, round_});
  }

  std::uint64_t index_;
  Timestamp batch_time_;
  std::shared_ptr<const QueryClass> queries_;
  Budget node_budget_;
  StaticConfig cfg_;
  double beta_;
  NoiseSource src_;
  bool noiseless_gamma_;

  std::vector<StoredItem> stored_;
  std::map<ItemId, std::deque<std::size_t>> live_idx_;  // unaugmented copies
  std::size_t live_count_ = 0;

  std::size_t round_ = 1;
  double n_tilde_ = 0.0;
  bool halted_ = false;
  Release static_release_;
  std::unique_ptr<HybridMechanism> q_ins_;
  std::unique_ptr<HybridMechanism> lap_ins_;
  Budget spent_;
  std::vector<std::pair<Budget, std::size_t>> round_spend_;
};

struct FdConfig {
  double epsilon = 1.0;
  double delta = 0.0;
  double beta = 0.05;
  StaticConfig static_cfg{};
  bool noiseless = false;
};

// The full fully-dynamic mechanism: private partitioning into segments, an
// online interval tree over segment indices, one NodeMechanism per node,
// answers summed over the query node set.
class FdMechanism {
 public:
  struct Answer {
    double value = 0.0;
    double pending_updates_bound = 0.0;
  };

  FdMechanism(std::shared_ptr<const QueryClass> queries, FdConfig cfg,
              std::uint64_t seed)
      : queries_(std::move(queries)),
        cfg_(cfg),
        src_(seed, cfg.noiseless),
        partitioner_(cfg.epsilon / 2.0, cfg.beta, src_.fork()) {}

  // Test/diagnostic hook: close segments at the given times instead of via
  // private partitioning.  Must be set before any feed.
  void set_fixed_boundaries(std::vector<Timestamp> ts) {
    if (t_ != 0) throw std::logic_error("fixed boundaries set mid-stream");
    fixed_boundaries_ = std::move(ts);
  }

  // Returns the index of the segment closed by this event, if any.
  std::optional<std::uint64_t> feed(const UpdateEvent& e) {
    if (e.t != t_ + 1)
      throw InvalidStreamError("timestamps must increase by 1 from 1");
    t_ = e.t;
    switch (e.op) {
      case Op::insert:
        ++pending_ins_[e.item];
        break;
      case Op::remove: {
        const auto it = live_.find(e.item);
        const std::size_t avail =
            (it == live_.end() ? 0 : it->second.size()) -
            net_del_count_[e.item];
        if (avail > 0) {
          ++net_del_count_[e.item];
          net_dels_.push_back(e.item);
        } else if (pending_ins_[e.item] > 0) {
          --pending_ins_[e.item];
          ++discarded_pairs_;
        } else {
          throw InvalidStreamError("deletion of absent item");
        }
        break;
      }
      case Op::noop:
        break;
    }
    bool close = false;
    if (!fixed_boundaries_.empty()) {
      if (fixed_seen_ < fixed_boundaries_.size() &&
          fixed_boundaries_[fixed_seen_] == t_) {
        ++fixed_seen_;
        close = true;
      }
      // keep the partitioner's clock consistent even when unused
    } else {
      close = partitioner_.feed(e.is_update()).has_value();
    }
    if (!close) return std::nullopt;
    close_segment();
    return segments_closed_;
  }

  Answer query(std::size_t qi) const {
    Answer a;
    a.pending_updates_bound =
        fixed_boundaries_.empty()
            ? partitioner_.open_segment_insertion_bound()
            : 0.0;
    if (segments_closed_ == 0) return a;
    for (std::uint64_t i : query_node_set(segments_closed_))
      a.value += nodes_[i - 1]->query(qi);
    return a;
  }

  // High-probability bound on |query error| for the laplace static;
  // 0 for other statics (no closed form implemented).
  double answer_bound(double beta) const {
    if (cfg_.static_cfg.kind != StaticKind::laplace || segments_closed_ == 0)
      return 0.0;
    std::vector<double> scales;
    for (std::uint64_t i : query_node_set(segments_closed_)) {
      const auto s = nodes_[i - 1]->answer_scales();
      scales.insert(scales.end(), s.begin(), s.end());
    }
    return scales.empty() ? 0.0 : laplace_sum_tail_bound(scales, beta);
  }

  std::uint64_t segments_closed() const { return segments_closed_; }
  std::uint64_t discarded_pairs() const { return discarded_pairs_; }
  Timestamp time() const { return t_; }
  const NodeMechanism& node(std::uint64_t i) const { return *nodes_.at(i - 1); }
  Timestamp boundary_time(std::uint64_t j) const {
    return boundary_times_.at(j - 1);
  }

  std::shared_ptr<LedgerNode> ledger() const {
    auto root = LedgerNode::sequential("fully-dynamic mechanism");
    const Budget half(cfg_.epsilon / 2.0, cfg_.delta / 2.0);
    root->add_child(partitioner_.ledger(half));
    auto tree = LedgerNode::series("interval tree levels", half);
    std::map<unsigned, std::shared_ptr<LedgerNode>> levels;
    for (const auto& n : nodes_) {
      auto& lvl = levels[n->level()];
      if (!lvl)
        lvl = LedgerNode::parallel("level " + std::to_string(n->level()),
                                   allocate_series(half, n->level()));
      lvl->add_child(n->ledger());
    }
    for (auto& [_, lvl] : levels) tree->add_child(lvl);
    root->add_child(tree);
    return root;
  }

  std::string dump_tree() const {
    std::ostringstream os;
    os << "index level round live spent_eps spent_delta halted\n";
    for (const auto& n : nodes_) {
      os << n->index() << ' ' << n->level() << ' ' << n->round() << ' '
         << n->live_size() << ' ' << n->spent().epsilon << ' '
         << n->spent().delta << ' ' << (n->halted() ? 1 : 0) << '\n';
    }
    return os.str();
  }

 private:
  void close_segment() {
    ++segments_closed_;
    const std::uint64_t j = segments_closed_;
    boundary_times_.push_back(t_);

    for (auto& n : nodes_) n->process_segment(net_dels_, j, t_);

    for (ItemId x : net_dels_) live_[x].pop_front();
    for (const auto& [x, cnt] : pending_ins_)
      for (std::uint64_t c = 0; c < cnt; ++c) live_[x].push_back(j);
    for (auto it = live_.begin(); it != live_.end();)
      it = it->second.empty() ? live_.erase(it) : std::next(it);

    const std::uint64_t anchor = left_anchor(j);
    std::vector<ItemId> items;
    for (const auto& [x, segs] : live_)
      for (std::uint64_t s : segs)
        if (s > anchor) items.push_back(x);

    const Budget node_budget = allocate_series(
        Budget(cfg_.epsilon / 2.0, cfg_.delta / 2.0), level_of(j));
    nodes_.push_back(std::make_unique<NodeMechanism>(
        j, t_, queries_, node_budget, cfg_.static_cfg, cfg_.beta, src_.fork(),
        items, cfg_.noiseless));

    pending_ins_.clear();
    net_del_count_.clear();
    net_dels_.clear();
  }

  std::shared_ptr<const QueryClass> queries_;
  FdConfig cfg_;
  NoiseSource src_;
  PrivatePartitioner partitioner_;
  std::vector<Timestamp> fixed_boundaries_;
  std::size_t fixed_seen_ = 0;

  Timestamp t_ = 0;
  std::uint64_t segments_closed_ = 0;
  std::uint64_t discarded_pairs_ = 0;
  std::vector<Timestamp> boundary_times_;
  std::vector<std::unique_ptr<NodeMechanism>> nodes_;

  // live copies: item -> insertion segment index per copy (FIFO)
  std::map<ItemId, std::deque<std::uint64_t>> live_;
  // open-segment buffers
  std::map<ItemId, std::uint64_t> pending_ins_;
  std::map<ItemId, std::uint64_t> net_del_count_;
  std::vector<ItemId> net_dels_;
};

// Baseline for ablations: split the update stream into an insertion stream
// and a deletion stream (deletions treated as insertions) and run two
// insertion-only mechanisms at (eps/2, delta/2) each.
class FdBaselineMechanism {
 public:
  FdBaselineMechanism(std::shared_ptr<const QueryClass> queries, FdConfig cfg,
                      std::uint64_t seed)
      : src_(seed, cfg.noiseless),
        ins_(queries, Budget(cfg.epsilon / 2.0, cfg.delta / 2.0),
             cfg.static_cfg, cfg.beta, src_.fork()),
        del_(queries, Budget(cfg.epsilon / 2.0, cfg.delta / 2.0),
             cfg.static_cfg, cfg.beta, src_.fork()) {}

  bool feed(const UpdateEvent& e) {
    UpdateEvent to_ins = e.op == Op::insert ? e : UpdateEvent::noop_at(e.t);
    UpdateEvent to_del = e.op == Op::remove
                             ? UpdateEvent::ins(e.t, e.item)
                             : UpdateEvent::noop_at(e.t);
    const bool a = ins_.feed(to_ins).has_value();
    const bool b = del_.feed(to_del).has_value();
    return a || b;
  }

  FdMechanism::Answer query(std::size_t qi) const {
    const auto a = ins_.query(qi);
    const auto b = del_.query(qi);
    return {a.value - b.value,
            a.pending_updates_bound + b.pending_updates_bound};
  }

  const InsertionOnlyMechanism& ins_side() const { return ins_; }
  const InsertionOnlyMechanism& del_side() const { return del_; }

  std::shared_ptr<LedgerNode> ledger() const {
    auto root = LedgerNode::sequential("ins/del two-stream baseline");
    root->add_child(ins_.ledger());
    root->add_child(del_.ledger());
    return root;
  }

 private:
  NoiseSource src_;
  InsertionOnlyMechanism ins_;
  InsertionOnlyMechanism del_;
};

}  // namespace dpcr
