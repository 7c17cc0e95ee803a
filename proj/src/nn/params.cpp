#include "lats/nn/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lats/common/errors.hpp"

namespace lats::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'A', 'T', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw VersionError("truncated checkpoint");
  return v;
}

Mat orthogonal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const Eigen::Index big = std::max(rows, cols);
  Eigen::MatrixXd a(big, big);
  for (Eigen::Index i = 0; i < big; ++i)
    for (Eigen::Index j = 0; j < big; ++j) a(i, j) = n01(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix so the result is uniformly distributed.
  Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < big; ++j)
    if (d(j) < 0) q.col(j) *= -1.0;
  return q.topLeftCorner(rows, cols);
}

}  // namespace

Tensor& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init scheme,
                        double gain) {
  if (index_.count(name)) throw ArgumentError("duplicate parameter '" + name + "'");
  auto t = std::make_unique<Tensor>();
  t->name = name;
  switch (scheme) {
    case Init::zeros:
      t->value = Mat::Zero(rows, cols);
      break;
    case Init::uniform_fan_in: {
      const double bound = gain / std::sqrt(static_cast<double>(rows));
      std::uniform_real_distribution<double> u(-bound, bound);
      t->value.resize(rows, cols);
      for (Eigen::Index i = 0; i < t->value.size(); ++i) t->value.data()[i] = u(rng_);
      break;
    }
    case Init::orthogonal:
      t->value = gain * orthogonal(rows, cols, rng_);
      break;
    case Init::normal_small: {
      std::normal_distribution<double> n(0.0, gain);
      t->value.resize(rows, cols);
      for (Eigen::Index i = 0; i < t->value.size(); ++i) t->value.data()[i] = n(rng_);
      break;
    }
  }
  t->grad = Mat::Zero(rows, cols);
  index_[name] = tensors_.size();
  tensors_.push_back(std::move(t));
  records_.push_back({name, scheme, gain});
  return *tensors_.back();
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return *tensors_[it->second];
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return *tensors_[it->second];
}

std::vector<Tensor*> ParamStore::all() {
  std::vector<Tensor*> out;
  for (auto& t : tensors_) out.push_back(t.get());
  return out;
}

std::vector<const Tensor*> ParamStore::all() const {
  std::vector<const Tensor*> out;
  for (const auto& t : tensors_) out.push_back(t.get());
  return out;
}

std::vector<Tensor*> ParamStore::with_prefix(const std::string& prefix) {
  std::vector<Tensor*> out;
  for (auto& t : tensors_)
    if (t->name.rfind(prefix, 0) == 0) out.push_back(t.get());
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t->value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t->grad.setZero(t->value.rows(), t->value.cols());
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& t : tensors_) s += t->grad.squaredNorm();
  return std::sqrt(s);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double n = grad_norm();
  if (n > max_norm && n > 0.0) {
    const double k = max_norm / n;
    for (auto& t : tensors_) t->grad *= k;
  }
  return n;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.size() != size()) throw ShapeError("parameter stores differ in size");
  for (auto& t : tensors_) {
    const Tensor& o = other.get(t->name);
    if (o.value.rows() != t->value.rows() || o.value.cols() != t->value.cols()) {
      throw ShapeError("parameter '" + t->name + "' shape differs");
    }
    t->value = o.value;
  }
}

void ParamStore::save(const std::string& path, const std::string& metadata) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& t : tensors_) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t->name.size()));
      out.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
      put<std::uint32_t>(out, 2);
      put<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.rows()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.cols()));
      out.write(reinterpret_cast<const char*>(t->value.data()),
                static_cast<std::streamsize>(t->value.size() * sizeof(double)));
    }
    put<std::uint64_t>(out, metadata.size());
    out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
  }
  std::rename(tmp.c_str(), path.c_str());
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw VersionError("not a checkpoint: " + path);
  const auto version = take<std::uint32_t>(in);
  if (version != kVersion) throw VersionError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto n = take<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto len = take<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto ndim = take<std::uint32_t>(in);
    if (ndim == 0 || ndim > 2) throw VersionError("unsupported tensor rank in checkpoint");
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t d = 0; d < ndim; ++d) dims[d] = take<std::uint64_t>(in);
    Mat m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw VersionError("truncated checkpoint");
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  const auto mlen = take<std::uint64_t>(in);
  ck.metadata.resize(mlen);
  in.read(ck.metadata.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw VersionError("truncated checkpoint metadata");
  return ck;
}

std::string read_checkpoint_metadata(const std::string& path) { return read_checkpoint(path).metadata; }

std::string ParamStore::load(const std::string& path) {
  Checkpoint ck = read_checkpoint(path);
  if (ck.tensors.size() != tensors_.size()) {
    throw ShapeError("checkpoint has " + std::to_string(ck.tensors.size()) + " tensors, model has " +
                     std::to_string(tensors_.size()));
  }
  for (auto& [name, m] : ck.tensors) {
    Tensor& t = get(name);
    if (t.value.rows() != m.rows() || t.value.cols() != m.cols()) {
      throw ShapeError("checkpoint tensor '" + name + "' has a different shape");
    }
    t.value = std::move(m);
  }
  return ck.metadata;
}

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {
  for (const Tensor* t : store_.all()) {
    m_.push_back(Mat::Zero(t->value.rows(), t->value.cols()));
    v_.push_back(Mat::Zero(t->value.rows(), t->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto params = store_.all();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * p.grad;
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= cfg_.lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace lats::nn
