#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dpcr/common.hpp"

namespace dpcr {

using ItemId = std::uint32_t;
using Timestamp = std::uint64_t;

// Finite item domain with dense ids 0..size-1.
class Domain {
 public:
  explicit Domain(std::size_t size) : size_(size) {
    if (size == 0) throw std::invalid_argument("domain size must be >= 1");
  }
  std::size_t size() const { return size_; }
  bool operator==(const Domain&) const = default;

 private:
  std::size_t size_;
};

// Multiset over a fixed domain, stored as a dense multiplicity vector.
class Dataset {
 public:
  explicit Dataset(std::size_t domain_size)
      : counts_(domain_size, 0), total_(0) {}

  std::size_t domain_size() const { return counts_.size(); }
  std::uint64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }

  std::uint64_t count(ItemId x) const {
    check_item(x);
    return counts_[x];
  }

  void add(ItemId x, std::uint64_t mult = 1) {
    check_item(x);
    counts_[x] += mult;
    total_ += mult;
  }

  void remove(ItemId x, std::uint64_t mult = 1) {
    check_item(x);
    if (counts_[x] < mult)
      throw std::underflow_error("removal exceeds multiplicity");
    counts_[x] -= mult;
    total_ -= mult;
  }

  const std::vector<std::uint64_t>& counts() const { return counts_; }
  bool operator==(const Dataset&) const = default;

 private:
  void check_item(ItemId x) const {
    if (x >= counts_.size()) throw DimensionError("item id outside domain");
  }
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_;
};

// Linear query f: X -> [0,1], evaluated as a weighted count.
class LinearQuery {
 public:
  explicit LinearQuery(std::vector<double> weights)
      : weights_(std::move(weights)) {
    for (double w : weights_)
      if (!(w >= 0.0 && w <= 1.0))
        throw std::invalid_argument("query weights must lie in [0,1]");
  }

  static LinearQuery counting(std::size_t domain_size) {
    return LinearQuery(std::vector<double>(domain_size, 1.0));
  }

  std::size_t domain_size() const { return weights_.size(); }
  double weight(ItemId x) const { return weights_[x]; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

class QueryClass {
 public:
  explicit QueryClass(std::vector<LinearQuery> queries)
      : queries_(std::move(queries)) {
    if (queries_.empty()) throw std::invalid_argument("query class is empty");
    for (const auto& q : queries_)
      if (q.domain_size() != queries_.front().domain_size())
        throw DimensionError("queries disagree on domain size");
  }

  static std::shared_ptr<const QueryClass> counting_only(
      std::size_t domain_size) {
    return std::make_shared<QueryClass>(
        std::vector<LinearQuery>{LinearQuery::counting(domain_size)});
  }

  std::size_t size() const { return queries_.size(); }
  std::size_t domain_size() const { return queries_.front().domain_size(); }
  const LinearQuery& operator[](std::size_t i) const { return queries_[i]; }

 private:
  std::vector<LinearQuery> queries_;
};

enum class Op { insert, remove, noop };

struct UpdateEvent {
  Timestamp t = 0;
  Op op = Op::noop;
  ItemId item = 0;  // ignored for noop

  bool is_update() const { return op != Op::noop; }
  static UpdateEvent ins(Timestamp t, ItemId x) { return {t, Op::insert, x}; }
  static UpdateEvent del(Timestamp t, ItemId x) { return {t, Op::remove, x}; }
  static UpdateEvent noop_at(Timestamp t) { return {t, Op::noop, 0}; }
};

struct StreamStats {
  std::uint64_t updates = 0;  // N_t
  std::uint64_t live = 0;     // n_t
};

inline double evaluate_query(const LinearQuery& q, const Dataset& d) {
  if (q.domain_size() != d.domain_size())
    throw DimensionError("query/dataset domain mismatch");
  double sum = 0.0;
  for (std::size_t x = 0; x < d.domain_size(); ++x)
    sum += q.weight(static_cast<ItemId>(x)) *
           static_cast<double>(d.counts()[x]);
  return sum;
}

enum class CombineMode { unite, subtract };

inline Dataset combine(const Dataset& a, const Dataset& b, CombineMode mode) {
  if (a.domain_size() != b.domain_size())
    throw DimensionError("datasets disagree on domain size");
  Dataset out = a;
  for (std::size_t x = 0; x < b.domain_size(); ++x) {
    const auto id = static_cast<ItemId>(x);
    if (b.counts()[x] == 0) continue;
    if (mode == CombineMode::unite)
      out.add(id, b.counts()[x]);
    else
      out.remove(id, b.counts()[x]);
  }
  return out;
}

// Replays a fully-dynamic stream and returns D_t.  Deletion of an absent
// item is a hard error.
inline Dataset replay_exact(const std::vector<UpdateEvent>& stream,
                            Timestamp t, std::size_t domain_size) {
  Dataset d(domain_size);
  Timestamp prev = 0;
  for (const auto& e : stream) {
    if (e.t <= prev) throw InvalidStreamError("timestamps not increasing");
    prev = e.t;
    if (e.t > t) break;
    switch (e.op) {
      case Op::insert:
        d.add(e.item);
        break;
      case Op::remove:
        if (d.count(e.item) == 0)
          throw InvalidStreamError("deletion of absent item");
        d.remove(e.item);
        break;
      case Op::noop:
        break;
    }
  }
  return d;
}

inline StreamStats stream_stats(const std::vector<UpdateEvent>& stream,
                                Timestamp t, std::size_t domain_size) {
  StreamStats s;
  s.live = replay_exact(stream, t, domain_size).total();
  for (const auto& e : stream) {
    if (e.t > t) break;
    if (e.is_update()) ++s.updates;
  }
  return s;
}

}  // namespace dpcr
