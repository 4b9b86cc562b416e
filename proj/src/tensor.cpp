#include "epifed/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>

#include "epifed/error.hpp"

namespace epifed {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != product(shape_)) throw ValidationError("tensor: data length does not match shape");
}

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }
std::size_t Tensor::rows() const {
  const std::size_t c = cols();
  return c == 0 ? 0 : data_.size() / c;
}

MatrixMap Tensor::mat() {
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}
ConstMatrixMap Tensor::mat() const {
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()),
                        static_cast<Eigen::Index>(cols()));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void check_finite(std::span<const double> values, const char* where) {
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + where);
}

void ParamSet::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ValidationError("param set: duplicate name '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("param set: no tensor named '" + name + "'");
  return tensors_[it->second];
}

const Tensor& ParamSet::get(const std::string& name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

bool ParamSet::congruent(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (!tensors_[i].same_shape(other.tensors_[i])) return false;
  return true;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], Tensor(tensors_[i].shape()));
  return out;
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

double squared_distance(const ParamSet& a, const ParamSet& b) {
  if (!a.congruent(b)) throw ValidationError("squared_distance: incongruent parameter sets");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a.at(i).size(); ++k) {
      const double d = a.at(i)[k] - b.at(i)[k];
      s += d * d;
    }
  return s;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "parameter serialization assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get_value(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("parameter file truncated");
  return v;
}

constexpr char kMagic[4] = {'E', 'P', 'F', 'P'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_paramset(const ParamSet& p, std::ostream& out) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& name = p.name(i);
    const auto& t = p.at(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

ParamSet read_paramset(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("not a parameter file (bad magic)");
  if (get_value<std::uint32_t>(in) != kVersion) throw Error("unsupported parameter file version");
  const auto count = get_value<std::uint64_t>(in);
  ParamSet p;
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto len = get_value<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error("parameter file truncated");
    const auto rank = get_value<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_value<std::uint64_t>(in));
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data().data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw Error("parameter file truncated");
    p.add(std::move(name), std::move(t));
  }
  return p;
}

}  // namespace epifed
