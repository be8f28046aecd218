#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace mpflow {

/// Dense rank-R tensor with every index ranging over 0..d-1, row-major.
template <int R>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(int d) : d_(d), data_(size_for(d), 0.0) {}

  int dim() const { return d_; }
  std::size_t size() const { return data_.size(); }

  template <class... I>
  double& operator()(I... idx) {
    static_assert(sizeof...(I) == R);
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <class... I>
  double operator()(I... idx) const {
    static_assert(sizeof...(I) == R);
    return data_[offset({static_cast<int>(idx)...})];
  }

  const std::vector<double>& data() const { return data_; }

 private:
  static std::size_t size_for(int d) {
    std::size_t n = 1;
    for (int r = 0; r < R; ++r) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t offset(const std::array<int, R>& idx) const {
    std::size_t o = 0;
    for (int r = 0; r < R; ++r) o = o * static_cast<std::size_t>(d_) + static_cast<std::size_t>(idx[r]);
    return o;
  }

  int d_ = 0;
  std::vector<double> data_;
};

using Tensor3 = Tensor<3>;
using Tensor4 = Tensor<4>;

}  // namespace mpflow
