#pragma once

#include <Eigen/Core>
#include <Eigen/StdVector>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace epifed {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Dense row-major tensor of doubles. Storage is aligned to Eigen's maximum
/// vector alignment so kernels take the same code path (and summation order)
/// wherever the buffer lands.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  /// Product of all leading dimensions, and the trailing dimension.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// rows() x cols() view.
  MatrixMap mat();
  ConstMatrixMap mat() const;

  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

/// Throws NumericError when any value is NaN or infinite.
void check_finite(std::span<const double> values, const char* where);
inline void check_finite(const Matrix& m, const char* where) {
  check_finite(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())), where);
}

/// Ordered collection of named tensors with stable iteration order.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& at(std::size_t i) { return tensors_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }
  const std::vector<std::string>& names() const { return names_; }

  /// Same names, order and shapes.
  bool congruent(const ParamSet& other) const;
  /// Congruent set filled with zeros.
  ParamSet zeros_like() const;
  std::size_t total_size() const;

  bool operator==(const ParamSet& other) const {
    return names_ == other.names_ && tensors_ == other.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Squared Euclidean distance over all entries of two congruent sets.
double squared_distance(const ParamSet& a, const ParamSet& b);

/// Binary format: magic "EPFP", u32 version, u64 record count, then per record
/// u32 name length, name bytes, u32 rank, rank x u64 dims, raw IEEE-754
/// little-endian doubles.
void write_paramset(const ParamSet& p, std::ostream& out);
ParamSet read_paramset(std::istream& in);

}  // namespace epifed
