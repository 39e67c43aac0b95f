#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpcr/core.hpp"
#include "dpcr/rng.hpp"

namespace dpcr {

enum class WorkloadKind {
  dense_insert,         // insertion every step
  sparse_insert,        // insertion w.p. update_prob, else noop
  fully_dynamic_churn,  // heavy ins/del traffic around a small live set
  adversarial_burst,    // long quiet stretches then insertion bursts
};

inline WorkloadKind workload_kind_from_string(const std::string& s) {
  if (s == "dense-insert") return WorkloadKind::dense_insert;
  if (s == "sparse-insert") return WorkloadKind::sparse_insert;
  if (s == "fully-dynamic-churn") return WorkloadKind::fully_dynamic_churn;
  if (s == "adversarial-burst") return WorkloadKind::adversarial_burst;
  throw std::invalid_argument("unknown workload: " + s);
}

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::dense_insert;
  Timestamp horizon = 1024;
  std::size_t domain_size = 32;
  std::uint64_t target_live = 32;   // churn: live-set size to hover around
  std::uint64_t num_updates = 100;  // sparse: exact number of insertions
  double update_prob = 0.5;         // churn activity probability
  std::uint64_t seed = 1;
};

// Deterministic stream generator.  Every produced stream is valid: items are
// drawn from the domain and deletions only target live items.
inline std::vector<UpdateEvent> gen_stream(const WorkloadSpec& spec) {
  NoiseSource rng(spec.seed);
  std::vector<UpdateEvent> out;
  out.reserve(spec.horizon);
  std::vector<std::uint64_t> live_counts(spec.domain_size, 0);
  std::vector<ItemId> live;  // one entry per live copy

  auto pick_item = [&] {
    return static_cast<ItemId>(rng.uniform() * spec.domain_size);
  };
  auto do_insert = [&](Timestamp t) {
    const ItemId x = pick_item();
    ++live_counts[x];
    live.push_back(x);
    out.push_back(UpdateEvent::ins(t, x));
  };
  auto do_delete = [&](Timestamp t) {
    const std::size_t pos = static_cast<std::size_t>(rng.uniform() * live.size());
    const ItemId x = live[pos];
    live[pos] = live.back();
    live.pop_back();
    --live_counts[x];
    out.push_back(UpdateEvent::del(t, x));
  };

  for (Timestamp t = 1; t <= spec.horizon; ++t) {
    switch (spec.kind) {
      case WorkloadKind::dense_insert:
        do_insert(t);
        break;
      case WorkloadKind::sparse_insert: {
        // exactly num_updates insertions, evenly spaced across the horizon
        const std::uint64_t k = spec.num_updates;
        if (k > spec.horizon)
          throw std::invalid_argument("sparse workload: more updates than steps");
        const bool hit =
            k > 0 && (t * k) / spec.horizon > ((t - 1) * k) / spec.horizon;
        if (hit)
          do_insert(t);
        else
          out.push_back(UpdateEvent::noop_at(t));
        break;
      }
      case WorkloadKind::fully_dynamic_churn: {
        if (rng.uniform() >= spec.update_prob) {
          out.push_back(UpdateEvent::noop_at(t));
          break;
        }
        const double n = static_cast<double>(live.size());
        const double tgt = static_cast<double>(spec.target_live);
        // steer the live-set size into a +-20% band around the target
        if (live.empty() || n <= 0.8 * tgt)
          do_insert(t);
        else if (n >= 1.2 * tgt)
          do_delete(t);
        else if (rng.uniform() < 0.5)
          do_insert(t);
        else
          do_delete(t);
        break;
      }
      case WorkloadKind::adversarial_burst: {
        // bursts of 64 insertions starting at every power of two
        if (t - std::bit_floor(t) < 64)
          do_insert(t);
        else
          out.push_back(UpdateEvent::noop_at(t));
        break;
      }
    }
  }
  return out;
}

}  // namespace dpcr
