#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dpcr/budget.hpp"
#include "dpcr/core.hpp"
#include "dpcr/rng.hpp"

namespace dpcr {

enum class StaticKind { laplace, gaussian, pmw };

struct PmwOptions {
  std::size_t rounds = 100;        // 0 = run to convergence (noiseless use)
  double size_budget_share = 0.5;  // epsilon share spent privatizing |D|
  double converge_tol = 1.0;       // target max error when rounds == 0
  std::size_t max_rounds_cap = 20'000'000;
};

struct StaticConfig {
  StaticKind kind = StaticKind::laplace;
  PmwOptions pmw{};
};

// Output of a static mechanism: either per-query noisy answers or a
// synthetic histogram over the domain.  Per-query answers are materialized
// in both cases so callers extract answers uniformly.
struct Release {
  enum class Kind { per_query_noisy, synthetic_histogram };

  Kind kind = Kind::per_query_noisy;
  std::vector<double> answers;    // one per query
  std::vector<double> histogram;  // synthetic_histogram only
  Budget budget;
  double noise_scale = 0.0;  // laplace b or gaussian sigma per answer

  double answer(std::size_t qi) const { return answers.at(qi); }
};

inline Release release_laplace(const Dataset& d, const QueryClass& q,
                               const Budget& budget, NoiseSource& src) {
  if (!(budget.epsilon > 0)) throw std::domain_error("epsilon must be > 0");
  // Basic composition across queries: scale |Q|/eps per answer.
  const double scale = static_cast<double>(q.size()) / budget.epsilon;
  Release r;
  r.kind = Release::Kind::per_query_noisy;
  r.budget = budget;
  r.noise_scale = scale;
  r.answers.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    r.answers.push_back(evaluate_query(q[i], d) + src.laplace(scale));
  return r;
}

inline double gaussian_sigma(double epsilon, double delta,
                             std::size_t num_queries) {
  return std::sqrt(2.0 * static_cast<double>(num_queries) *
                   std::log(1.25 / delta)) /
         epsilon;
}

inline Release release_gaussian(const Dataset& d, const QueryClass& q,
                                const Budget& budget, NoiseSource& src) {
  if (!(budget.delta > 0))
    throw std::domain_error("gaussian mechanism requires delta > 0");
  if (!(budget.epsilon > 0)) throw std::domain_error("epsilon must be > 0");
  const double sigma = gaussian_sigma(budget.epsilon, budget.delta, q.size());
  Release r;
  r.kind = Release::Kind::per_query_noisy;
  r.budget = budget;
  r.noise_scale = sigma;
  r.answers.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    r.answers.push_back(evaluate_query(q[i], d) + src.gaussian(sigma));
  return r;
}

// Private multiplicative weights (MWEM loop): privatize the total, then
// repeatedly select the worst query with report-noisy-max, measure it, and
// do a multiplicative histogram update.  The iteration schedule is
// configuration; accuracy is accepted against the error envelope only.
inline Release release_pmw(const Dataset& d, const QueryClass& q,
                           const Budget& budget, NoiseSource& src,
                           const PmwOptions& opt = {}) {
  if (!(budget.epsilon > 0)) throw std::domain_error("epsilon must be > 0");
  const std::size_t dom = q.domain_size();
  if (d.domain_size() != dom) throw DimensionError("domain mismatch");

  const double eps_size = budget.epsilon * opt.size_budget_share;
  const double eps_mw = budget.epsilon - eps_size;

  Release r;
  r.kind = Release::Kind::synthetic_histogram;
  r.budget = budget;
  r.noise_scale = 1.0 / eps_size;

  const double n_hat = std::max(
      0.0, static_cast<double>(d.total()) + src.laplace(1.0 / eps_size));
  std::vector<double> hist(dom, n_hat / static_cast<double>(dom));

  auto synth_answer = [&](std::size_t qi) {
    double s = 0;
    for (std::size_t x = 0; x < dom; ++x) s += q[qi].weight(x) * hist[x];
    return s;
  };

  std::vector<double> truth(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) truth[i] = evaluate_query(q[i], d);

  std::size_t rounds = opt.rounds;
  const bool to_convergence = rounds == 0;
  if (to_convergence) rounds = opt.max_rounds_cap;

  // Per-round budget: basic composition for delta = 0, the standard
  // advanced-composition allocation otherwise.  Each round spends half on
  // selection and half on measurement.
  double eps_round;
  if (budget.delta > 0 && !to_convergence)
    eps_round = eps_mw / (2.0 * std::sqrt(2.0 * static_cast<double>(rounds) *
                                          std::log(1.0 / budget.delta)));
  else
    eps_round = eps_mw / (2.0 * std::max<std::size_t>(rounds, 1));

  if (n_hat > 0) {
    for (std::size_t round = 0; round < rounds; ++round) {
      std::size_t sel = 0;
      double best = -1e300;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double noisy =
            std::abs(truth[i] - synth_answer(i)) + src.laplace(2.0 / eps_round);
        if (noisy > best) {
          best = noisy;
          sel = i;
        }
      }
      const double measured = truth[sel] + src.laplace(2.0 / eps_round);
      const double est = synth_answer(sel);
      if (to_convergence && std::abs(measured - est) <= opt.converge_tol) break;
      const double eta = (measured - est) / (2.0 * n_hat);
      double sum = 0;
      for (std::size_t x = 0; x < dom; ++x) {
        hist[x] *= std::exp(eta * q[sel].weight(x));
        sum += hist[x];
      }
      if (sum > 0)
        for (double& h : hist) h *= n_hat / sum;
    }
  }

  r.histogram = std::move(hist);
  r.answers.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    double s = 0;
    for (std::size_t x = 0; x < dom; ++x)
      s += q[i].weight(x) * r.histogram[x];
    r.answers[i] = s;
  }
  return r;
}

inline Release make_release(const Dataset& d, const QueryClass& q,
                            const Budget& budget, NoiseSource& src,
                            const StaticConfig& cfg) {
  switch (cfg.kind) {
    case StaticKind::laplace:
      return release_laplace(d, q, budget, src);
    case StaticKind::gaussian:
      return release_gaussian(d, q, budget, src);
    case StaticKind::pmw:
      return release_pmw(d, q, budget, src, cfg.pmw);
  }
  throw std::invalid_argument("unknown static mechanism");
}

// Tail bound on |sum of independent Laplace(b_i)| holding with probability
// 1-beta.  Single noise uses the exact Laplace tail; sums use a Bernstein
// bound for sub-exponential variables:
//   Pr[|S| > t] <= 2 exp(-min(t^2 / (8 sum b_i^2), t / (2 sqrt(2) b_max))).
inline double laplace_sum_tail_bound(std::span<const double> scales,
                                     double beta) {
  if (!(beta > 0 && beta < 1)) throw std::domain_error("beta must be in (0,1)");
  if (scales.empty()) return 0.0;
  if (scales.size() == 1) return scales[0] * std::log(1.0 / beta);
  double sum_sq = 0, bmax = 0;
  for (double b : scales) {
    sum_sq += b * b;
    bmax = std::max(bmax, b);
  }
  const double L = std::log(2.0 / beta);
  return std::max(std::sqrt(8.0 * sum_sq * L),
                  2.0 * std::sqrt(2.0) * bmax * L);
}

struct ErrorParams {
  double epsilon = 1.0;
  double delta = 0.0;
  double beta = 0.05;
  std::uint64_t k = 1;  // number of releases summed over disjoint datasets
  std::uint64_t data_size = 1;
  std::uint64_t num_queries = 1;
  std::uint64_t domain_size = 1;
};

enum class BoundMech { laplace, gaussian, pmw_pure, pmw_approx };

// alpha^(k) error envelopes with explicit implementation constants (see the
// constants table in the README).  Monotone non-increasing in epsilon,
// non-decreasing in k; alpha^(1) = alpha.
inline double error_bound(const ErrorParams& p, BoundMech mech) {
  if (!(p.beta > 0 && p.beta < 1))
    throw std::domain_error("beta must be in (0,1)");
  if (p.k < 1) throw std::domain_error("k must be >= 1");
  if (!(p.epsilon > 0)) throw std::domain_error("epsilon must be > 0");
  const double k = static_cast<double>(p.k);
  const double nq = static_cast<double>(p.num_queries);
  const double beta_q = p.beta / nq;  // union bound over the query class

  switch (mech) {
    case BoundMech::laplace: {
      const double b = nq / p.epsilon;
      if (p.k == 1) return b * std::log(1.0 / beta_q);
      const std::vector<double> scales(p.k, b);
      const double bernstein = laplace_sum_tail_bound(scales, beta_q);
      const double union_bound = k * b * std::log(k / beta_q);
      return std::min(bernstein, union_bound);
    }
    case BoundMech::gaussian: {
      if (!(p.delta > 0))
        throw std::domain_error("gaussian bound requires delta > 0");
      const double sigma = gaussian_sigma(p.epsilon, p.delta, p.num_queries);
      return sigma * std::sqrt(2.0 * k * std::log(2.0 / beta_q));
    }
    case BoundMech::pmw_pure: {
      const double n = static_cast<double>(p.data_size);
      const double one =
          std::pow(n, 2.0 / 3.0) *
          std::cbrt(std::log(static_cast<double>(p.domain_size)) *
                    std::log(nq * k / p.beta) / p.epsilon);
      // The simple union bound remains the best known for PMW under
      // disjoint union.
      return k * one;
    }
    case BoundMech::pmw_approx: {
      if (!(p.delta > 0))
        throw std::domain_error("pmw_approx bound requires delta > 0");
      const double n = static_cast<double>(p.data_size);
      const double one =
          std::sqrt(n) *
          std::sqrt(std::sqrt(std::log(static_cast<double>(p.domain_size)) *
                              std::log(1.0 / p.delta)) *
                    std::log(nq * k / p.beta) / p.epsilon);
      return k * one;
    }
  }
  throw std::invalid_argument("unknown bound mechanism");
}

}  // namespace dpcr
