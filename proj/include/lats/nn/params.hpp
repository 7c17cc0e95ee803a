#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lats/nn/autodiff.hpp"

namespace lats::nn {

enum class Init { zeros, uniform_fan_in, orthogonal, normal_small };

struct InitRecord {
  std::string name;
  Init scheme = Init::zeros;
  double gain = 1.0;
};

/// Named parameters with a deterministic initialization record. Tensor
/// addresses are stable for the store's lifetime.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  /// Throws ArgumentError on duplicate names.
  Tensor& add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init scheme,
              double gain = 1.0);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Tensor*> all();
  std::vector<const Tensor*> all() const;
  /// Parameters whose name starts with prefix.
  std::vector<Tensor*> with_prefix(const std::string& prefix);
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  double grad_norm() const;
  /// Scales all gradients so the global L2 norm is at most max_norm; returns the pre-clip norm.
  double clip_grad_norm(double max_norm);

  /// Copies values from a store with identical names and shapes.
  void copy_values_from(const ParamStore& other);

  std::uint64_t seed() const { return seed_; }
  const std::vector<InitRecord>& init_records() const { return records_; }

  /// Binary container: magic, version, named tensors (f64 LE), metadata string.
  void save(const std::string& path, const std::string& metadata = "") const;
  /// Loads values into existing tensors (names and shapes must match). Returns metadata.
  std::string load(const std::string& path);

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::unique_ptr<Tensor>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<InitRecord> records_;
};

/// Reads a checkpoint without a store: name -> tensor value, plus metadata.
struct Checkpoint {
  std::vector<std::pair<std::string, Mat>> tensors;
  std::string metadata;
};
Checkpoint read_checkpoint(const std::string& path);
std::string read_checkpoint_metadata(const std::string& path);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParamStore& store, AdamConfig cfg = {});
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  std::int64_t steps() const { return t_; }

 private:
  ParamStore& store_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace lats::nn
