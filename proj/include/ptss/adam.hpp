#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ptss {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment buffers for one parameter block. The step counter lives with the
// optimizer driver so that sparse row updates share one bias correction.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  std::size_t size() const noexcept { return m_.size(); }

  // Updates params[offset, offset + grad.size()) in place. step is 1-based.
  void update(std::span<double> params, std::span<const double> grad, std::size_t offset,
              double lr, std::size_t step, const AdamParams& p = {}) {
    const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < grad.size(); ++i) {
      double& m = m_[offset + i];
      double& v = v_[offset + i];
      m = p.beta1 * m + (1.0 - p.beta1) * grad[i];
      v = p.beta2 * v + (1.0 - p.beta2) * grad[i] * grad[i];
      params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + p.epsilon);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace ptss
