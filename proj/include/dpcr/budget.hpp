#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dpcr/common.hpp"
#include "dpcr/core.hpp"

namespace dpcr {

inline constexpr double kBudgetTol = 1e-9;

struct Budget {
  double epsilon = 0.0;
  double delta = 0.0;

  Budget() = default;
  Budget(double eps, double del) : epsilon(eps), delta(del) {
    if (!(epsilon >= 0)) throw std::domain_error("epsilon must be >= 0");
    if (!(delta >= 0 && delta <= 1))
      throw std::domain_error("delta must lie in [0,1]");
  }

  Budget operator+(const Budget& o) const {
    return Budget(epsilon + o.epsilon, delta + o.delta);
  }
  Budget scaled(double f) const { return Budget(epsilon * f, delta * f); }
  bool fits_within(const Budget& cap, double tol = kBudgetTol) const {
    return epsilon <= cap.epsilon + tol && delta <= cap.delta + tol;
  }
  bool approx_equal(const Budget& o, double tol = kBudgetTol) const {
    return std::abs(epsilon - o.epsilon) <= tol &&
           std::abs(delta - o.delta) <= tol;
  }
};

// Sub-universe a mechanism certifies it queried: a closed timestamp interval.
struct Declaration {
  Timestamp first = 0;
  Timestamp last = 0;

  Declaration() = default;
  Declaration(Timestamp a, Timestamp b) : first(a), last(b) {
    if (b < a) throw std::invalid_argument("empty declaration interval");
  }
  bool overlaps(const Declaration& o) const {
    return first <= o.last && o.first <= last;
  }
};

inline Budget compose_sequential(std::span<const Budget> budgets) {
  Budget out;
  for (const auto& b : budgets) out = out + b;
  return out;
}

inline Budget compose_parallel(std::span<const Budget> budgets,
                               std::span<const Declaration> declarations = {},
                               bool adaptive = false) {
  if (adaptive) {
    if (declarations.size() != budgets.size())
      throw std::invalid_argument(
          "adaptive composition needs one declaration per child");
    for (std::size_t i = 0; i < declarations.size(); ++i)
      for (std::size_t j = i + 1; j < declarations.size(); ++j)
        if (declarations[i].overlaps(declarations[j]))
          throw DisjointnessViolation("overlapping declarations");
  }
  Budget out;
  for (const auto& b : budgets) {
    out.epsilon = std::max(out.epsilon, b.epsilon);
    out.delta = std::max(out.delta, b.delta);
  }
  return out;
}

// The pi^2-series allocator: term `index` of a series summing to `total`.
inline Budget allocate_series(const Budget& total, std::uint64_t index) {
  if (index == 0) throw std::domain_error("series index must be >= 1");
  const double f = 6.0 / (kPi * kPi * static_cast<double>(index) *
                          static_cast<double>(index));
  return total.scaled(f);
}

// Accounting tree mirroring the composition structure of a mechanism.
// Leaves trust the underlying mechanism; the ledger's job is to make any
// mis-allocation a loud runtime failure when total() is computed.
struct LedgerNode {
  enum class Kind { leaf, sequential, parallel, adaptive_parallel, series };

  Kind kind = Kind::leaf;
  std::string label;
  Budget budget;             // leaf value, or declared cap for parallel/series
  bool declared = false;     // parallel only: cap given up front
  std::vector<std::shared_ptr<LedgerNode>> children;
  std::vector<Declaration> declarations;  // adaptive_parallel, per child

  static std::shared_ptr<LedgerNode> leaf(std::string label, Budget b) {
    auto n = std::make_shared<LedgerNode>();
    n->kind = Kind::leaf;
    n->label = std::move(label);
    n->budget = b;
    return n;
  }
  static std::shared_ptr<LedgerNode> sequential(std::string label) {
    auto n = std::make_shared<LedgerNode>();
    n->kind = Kind::sequential;
    n->label = std::move(label);
    return n;
  }
  static std::shared_ptr<LedgerNode> parallel(std::string label, Budget cap) {
    auto n = std::make_shared<LedgerNode>();
    n->kind = Kind::parallel;
    n->label = std::move(label);
    n->budget = cap;
    n->declared = true;
    return n;
  }
  static std::shared_ptr<LedgerNode> adaptive_parallel(std::string label,
                                                       Budget cap) {
    auto n = std::make_shared<LedgerNode>();
    n->kind = Kind::adaptive_parallel;
    n->label = std::move(label);
    n->budget = cap;
    n->declared = true;
    return n;
  }
  // Infinite-series node: children draw terms, partial sums must stay
  // under the analytic total.
  static std::shared_ptr<LedgerNode> series(std::string label, Budget total) {
    auto n = std::make_shared<LedgerNode>();
    n->kind = Kind::series;
    n->label = std::move(label);
    n->budget = total;
    return n;
  }

  void add_child(std::shared_ptr<LedgerNode> c) {
    children.push_back(std::move(c));
  }
  void add_child(std::shared_ptr<LedgerNode> c, Declaration d) {
    children.push_back(std::move(c));
    declarations.push_back(d);
  }

  Budget total() const {
    switch (kind) {
      case Kind::leaf:
        return budget;
      case Kind::sequential: {
        Budget sum;
        for (const auto& c : children) sum = sum + c->total();
        return sum;
      }
      case Kind::parallel: {
        Budget m;
        for (const auto& c : children) {
          const Budget t = c->total();
          if (declared && !t.fits_within(budget))
            throw AccountingError("parallel child exceeds declared cap: " +
                                  label);
          m.epsilon = std::max(m.epsilon, t.epsilon);
          m.delta = std::max(m.delta, t.delta);
        }
        return declared ? budget : m;
      }
      case Kind::adaptive_parallel: {
        if (declarations.size() != children.size())
          throw AccountingError("missing declarations: " + label);
        for (std::size_t i = 0; i < declarations.size(); ++i)
          for (std::size_t j = i + 1; j < declarations.size(); ++j)
            if (declarations[i].overlaps(declarations[j]))
              throw DisjointnessViolation("overlapping declarations: " + label);
        Budget m;
        for (const auto& c : children) {
          const Budget t = c->total();
          if (declared && !t.fits_within(budget))
            throw AccountingError("adaptive child exceeds declared cap: " +
                                  label);
          m.epsilon = std::max(m.epsilon, t.epsilon);
          m.delta = std::max(m.delta, t.delta);
        }
        return declared ? budget : m;
      }
      case Kind::series: {
        Budget sum;
        for (const auto& c : children) sum = sum + c->total();
        if (!sum.fits_within(budget))
          throw AccountingError("series partial sum exceeds total: " + label);
        return budget;
      }
    }
    throw AccountingError("corrupt ledger node");
  }

  void print(std::ostream& os, int indent = 0) const {
    static const char* kNames[] = {"leaf", "seq", "par", "adaptive-par",
                                   "series"};
    const Budget t = total();
    os << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "["
       << kNames[static_cast<int>(kind)] << "] " << label << "  (eps="
       << t.epsilon << ", delta=" << t.delta << ")\n";
    for (const auto& c : children) c->print(os, indent + 1);
  }

  std::string to_string() const {
    std::ostringstream os;
    print(os);
    return os.str();
  }
};

}  // namespace dpcr
