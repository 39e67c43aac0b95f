#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "dpcr/budget.hpp"
#include "dpcr/rng.hpp"

namespace dpcr {

// Sparse vector technique as a streaming object.  The caller evaluates the
// queries; feed() takes precomputed values.  The privatized threshold is
// sampled exactly once at construction; each fed value draws one fresh
// Lap(4/eps).  Ties with the noisy threshold count as not exceeding.
class SvtInstance {
 public:
  struct Halt {
    std::uint64_t index;  // 1-based index of the halting query
    Declaration declaration;
  };

  SvtInstance(double epsilon, double theta, Timestamp start, NoiseSource src)
      : epsilon_(epsilon), theta_(theta), start_(start), src_(std::move(src)) {
    if (!(epsilon > 0)) throw std::domain_error("epsilon must be > 0");
    theta_hat_ = theta_ + src_.laplace(2.0 / epsilon_);
  }

  std::optional<Halt> feed(double query_value) {
    if (halted_) throw std::logic_error("svt fed after halt");
    ++fed_;
    if (query_value + src_.laplace(4.0 / epsilon_) > theta_hat_) {
      halted_ = true;
      return Halt{fed_, Declaration(start_, current_timestamp())};
    }
    return std::nullopt;
  }

  bool halted() const { return halted_; }
  double theta() const { return theta_; }
  double theta_hat() const { return theta_hat_; }
  Timestamp start() const { return start_; }
  std::uint64_t queries_fed() const { return fed_; }
  Timestamp current_timestamp() const { return start_ + fed_ - 1; }
  std::uint64_t noise_draws() const { return src_.draw_count(); }

 private:
  double epsilon_;
  double theta_;
  Timestamp start_;
  NoiseSource src_;
  double theta_hat_;
  bool halted_ = false;
  std::uint64_t fed_ = 0;
};

}  // namespace dpcr
