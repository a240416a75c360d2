// Dense neural-network engine: batched forward/backward over affine and
// activation layers, Adam, soft target updates, binary checkpoints.
//
// Design notes:
//  - All math in 64-bit reals. Batches are stored column-wise (dim x B) so
//    the hot path is a plain column-major GEMM.
//  - A forward pass records its activations into a caller-owned Tape;
//    backward consumes the tape and accumulates into ParamTensor::grad.
//    Networks are single-writer objects; tape-less forwards are const and
//    safe to run concurrently on a frozen parameter snapshot.
//  - Concat layers splice an auxiliary input stream into the activation
//    (used to feed speed features, command one-hots and actions into heads).
#pragma once

#include <Eigen/Core>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cirl/common.hpp"

namespace cirl::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class LayerKind : uint8_t { Affine = 0, Relu = 1, Tanh = 2, Sigmoid = 3, Concat = 4 };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Affine: return "affine";
    case LayerKind::Relu: return "relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Concat: return "concat";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind;
  int in_dim = 0;
  int out_dim = 0;

  bool operator==(const LayerSpec&) const = default;
};

inline LayerSpec affine(int in, int out) { return {LayerKind::Affine, in, out}; }
inline LayerSpec relu(int dim) { return {LayerKind::Relu, dim, dim}; }
inline LayerSpec tanh_layer(int dim) { return {LayerKind::Tanh, dim, dim}; }
inline LayerSpec sigmoid(int dim) { return {LayerKind::Sigmoid, dim, dim}; }
/// Appends an auxiliary input of (out - in) rows below the main activation.
inline LayerSpec concat(int in, int aux) { return {LayerKind::Concat, in, in + aux}; }

/// Named flat parameter block with gradient storage of the same length.
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  Vec values;
  Vec grad;

  int size() const { return int(values.size()); }

  Eigen::Map<Mat> matrix() {
    return Eigen::Map<Mat>(values.data(), shape.at(0), shape.at(1));
  }
  Eigen::Map<const Mat> matrix() const {
    return Eigen::Map<const Mat>(values.data(), shape.at(0), shape.at(1));
  }
  Eigen::Map<Mat> grad_matrix() {
    return Eigen::Map<Mat>(grad.data(), shape.at(0), shape.at(1));
  }
};

struct Layer {
  LayerSpec spec;
  ParamTensor weight;  // affine only, shape {out, in}
  ParamTensor bias;    // affine only, shape {out}
};

class Network;

/// Activation record of one forward pass; required for backward.
struct Tape {
  const Network* net = nullptr;
  int batch = 0;
  std::vector<Mat> xs;  // xs[0] = input, xs[i+1] = output of layer i
};

class Network {
 public:
  Network() = default;

  explicit Network(std::vector<LayerSpec> specs) {
    require(!specs.empty(), ErrorKind::Config, "network needs at least one layer");
    int prev = specs.front().in_dim;
    for (const LayerSpec& s : specs) {
      require(s.in_dim == prev, ErrorKind::Config,
              strfmt("layer chain break: expected in_dim %d, got %d (%s)", prev, s.in_dim,
                     layer_kind_name(s.kind)));
      switch (s.kind) {
        case LayerKind::Affine:
          require(s.in_dim > 0 && s.out_dim > 0, ErrorKind::Config, "affine dims must be positive");
          break;
        case LayerKind::Concat:
          require(s.out_dim > s.in_dim, ErrorKind::Config, "concat must add at least one row");
          break;
        default:
          require(s.in_dim == s.out_dim, ErrorKind::Config, "activation layers keep their dim");
      }
      Layer layer;
      layer.spec = s;
      if (s.kind == LayerKind::Affine) {
        layer.weight.shape = {s.out_dim, s.in_dim};
        layer.weight.values = Vec::Zero(int64_t(s.out_dim) * s.in_dim);
        layer.weight.grad = Vec::Zero(layer.weight.values.size());
        layer.bias.shape = {s.out_dim};
        layer.bias.values = Vec::Zero(s.out_dim);
        layer.bias.grad = Vec::Zero(s.out_dim);
      }
      layers_.push_back(std::move(layer));
      prev = s.out_dim;
    }
    input_dim_ = layers_.front().spec.in_dim;
    output_dim_ = prev;
    for (const Layer& l : layers_)
      if (l.spec.kind == LayerKind::Concat) aux_dims_.push_back(l.spec.out_dim - l.spec.in_dim);
  }

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::vector<int>& aux_dims() const { return aux_dims_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const Layer& l : layers_) out.push_back(l.spec);
    return out;
  }

  /// Glorot-uniform weights, zero biases; one deterministic stream per call.
  void init_params(uint64_t seed) {
    Rng rng(seed);
    for (Layer& l : layers_) {
      if (l.spec.kind != LayerKind::Affine) continue;
      double bound = std::sqrt(6.0 / double(l.spec.in_dim + l.spec.out_dim));
      for (int i = 0; i < l.weight.size(); ++i) l.weight.values[i] = rng.uniform(-bound, bound);
      l.bias.values.setZero();
      l.weight.grad.setZero();
      l.bias.grad.setZero();
    }
  }

  std::vector<ParamTensor*> params() {
    std::vector<ParamTensor*> out;
    for (Layer& l : layers_) {
      if (l.spec.kind != LayerKind::Affine) continue;
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const ParamTensor*> params() const {
    std::vector<const ParamTensor*> out;
    for (const Layer& l : layers_) {
      if (l.spec.kind != LayerKind::Affine) continue;
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  /// Batched forward; columns are samples. aux supplies one matrix per
  /// concat layer in order. Pass a tape to enable a later backward.
  Mat forward(const Mat& x, std::span<const Mat* const> aux = {}, Tape* tape = nullptr) const {
    require(int(x.rows()) == input_dim_, ErrorKind::Data,
            strfmt("net_forward: input has %d rows, network expects %d", int(x.rows()), input_dim_));
    require(aux.size() == aux_dims_.size(), ErrorKind::Data,
            strfmt("net_forward: %zu aux inputs supplied, %zu concat layers present", aux.size(),
                   aux_dims_.size()));
    const int batch = int(x.cols());
    if (tape) {
      tape->net = this;
      tape->batch = batch;
      tape->xs.clear();
      tape->xs.reserve(layers_.size() + 1);
      tape->xs.push_back(x);
    }
    Mat h = x;
    size_t aux_idx = 0;
    for (const Layer& l : layers_) {
      Mat next;
      switch (l.spec.kind) {
        case LayerKind::Affine:
          next.noalias() = l.weight.matrix() * h;
          next.colwise() += l.bias.values;
          break;
        case LayerKind::Relu:
          next = h.cwiseMax(0.0);
          break;
        case LayerKind::Tanh:
          next = h.array().tanh().matrix();
          break;
        case LayerKind::Sigmoid:
          next = (1.0 / (1.0 + (-h.array()).exp())).matrix();
          break;
        case LayerKind::Concat: {
          const Mat& a = *aux[aux_idx++];
          int add = l.spec.out_dim - l.spec.in_dim;
          require(int(a.rows()) == add && int(a.cols()) == batch, ErrorKind::Data,
                  strfmt("concat aux must be %d x %d, got %ld x %ld", add, batch, long(a.rows()),
                         long(a.cols())));
          next.resize(l.spec.out_dim, batch);
          next.topRows(l.spec.in_dim) = h;
          next.bottomRows(add) = a;
          break;
        }
      }
      h = std::move(next);
      if (tape) tape->xs.push_back(h);
    }
    return h;
  }

  /// Single-sample convenience wrapper.
  Vec forward1(const Vec& x, std::span<const Vec* const> aux = {}, Tape* tape = nullptr) const {
    std::vector<Mat> aux_mats(aux.size());
    std::vector<const Mat*> aux_ptrs(aux.size());
    for (size_t i = 0; i < aux.size(); ++i) {
      aux_mats[i] = *aux[i];
      aux_ptrs[i] = &aux_mats[i];
    }
    return forward(Mat(x), std::span<const Mat* const>(aux_ptrs), tape);
  }

  /// Reverse pass. Accumulates parameter grads, returns the input grad; fills
  /// one grad matrix per concat layer when aux_grads is given.
  Mat backward(const Tape& tape, const Mat& output_grad, std::vector<Mat>* aux_grads = nullptr) {
    require(tape.net == this && tape.xs.size() == layers_.size() + 1, ErrorKind::Logic,
            "net_backward: tape does not match a forward pass of this network");
    require(int(output_grad.rows()) == output_dim_ && int(output_grad.cols()) == tape.batch,
            ErrorKind::Data,
            strfmt("net_backward: output_grad must be %d x %d", output_dim_, tape.batch));
    if (aux_grads) {
      aux_grads->assign(aux_dims_.size(), Mat());
    }
    Mat g = output_grad;
    size_t aux_idx = aux_dims_.size();
    for (int i = int(layers_.size()) - 1; i >= 0; --i) {
      Layer& l = layers_[i];
      const Mat& x_in = tape.xs[i];
      const Mat& y_out = tape.xs[i + 1];
      switch (l.spec.kind) {
        case LayerKind::Affine: {
          l.weight.grad_matrix().noalias() += g * x_in.transpose();
          l.bias.grad += g.rowwise().sum();
          Mat gx;
          gx.noalias() = l.weight.matrix().transpose() * g;
          g = std::move(gx);
          break;
        }
        case LayerKind::Relu:
          g = (x_in.array() > 0.0).cast<double>().matrix().cwiseProduct(g);
          break;
        case LayerKind::Tanh:
          g = (1.0 - y_out.array().square()).matrix().cwiseProduct(g);
          break;
        case LayerKind::Sigmoid:
          g = (y_out.array() * (1.0 - y_out.array())).matrix().cwiseProduct(g);
          break;
        case LayerKind::Concat: {
          --aux_idx;
          int add = l.spec.out_dim - l.spec.in_dim;
          if (aux_grads) (*aux_grads)[aux_idx] = g.bottomRows(add);
          g = Mat(g.topRows(l.spec.in_dim));
          break;
        }
      }
    }
    return g;
  }

 private:
  std::vector<Layer> layers_;
  std::vector<int> aux_dims_;
  int input_dim_ = 0;
  int output_dim_ = 0;
};

// ---------------------------------------------------------------------------
// Parameter-set operations

using ParamRefs = std::vector<ParamTensor*>;
using ConstParamRefs = std::vector<const ParamTensor*>;

inline int64_t param_count(std::span<ParamTensor* const> params) {
  int64_t n = 0;
  for (const ParamTensor* p : params) n += p->size();
  return n;
}

inline void zero_grads(std::span<ParamTensor* const> params) {
  for (ParamTensor* p : params) p->grad.setZero();
}

inline double grad_norm(std::span<ParamTensor* const> params) {
  double sq = 0;
  for (const ParamTensor* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

inline bool grads_finite(std::span<ParamTensor* const> params) {
  for (const ParamTensor* p : params)
    if (!p->grad.allFinite()) return false;
  return true;
}

inline void copy_params(std::span<ParamTensor* const> dst, std::span<ParamTensor* const> src) {
  require(dst.size() == src.size(), ErrorKind::Logic, "copy_params: set size mismatch");
  for (size_t i = 0; i < dst.size(); ++i) {
    require(dst[i]->size() == src[i]->size(), ErrorKind::Data,
            strfmt("copy_params: shape mismatch on %s", src[i]->name.c_str()));
    dst[i]->values = src[i]->values;
  }
}

/// Max absolute elementwise difference across two parameter sets.
inline double param_distance(std::span<ParamTensor* const> a, std::span<ParamTensor* const> b) {
  require(a.size() == b.size(), ErrorKind::Logic, "param_distance: set size mismatch");
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i)
    d = std::max(d, (a[i]->values - b[i]->values).cwiseAbs().maxCoeff());
  return d;
}

/// target <- (1 - tau) * target + tau * online, elementwise.
inline void soft_update(std::span<ParamTensor* const> target, std::span<ParamTensor* const> online,
                        double tau) {
  require(target.size() == online.size(), ErrorKind::Data, "soft_update: set size mismatch");
  for (size_t i = 0; i < target.size(); ++i) {
    require(target[i]->size() == online[i]->size(), ErrorKind::Data,
            strfmt("soft_update: shape mismatch on %s", online[i]->name.c_str()));
    target[i]->values = (1.0 - tau) * target[i]->values + tau * online[i]->values;
  }
}

struct AdamState {
  Vec m;
  Vec v;
  int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(std::span<ParamTensor* const> params) {
    AdamState st;
    int64_t n = param_count(params);
    st.m = Vec::Zero(n);
    st.v = Vec::Zero(n);
    return st;
  }
};

/// One bias-corrected Adam update over the flattened parameter set.
/// Rejects the update (parameters untouched) on any non-finite gradient;
/// zeroes all gradients on success.
inline void adam_step(std::span<ParamTensor* const> params, AdamState& st, double lr) {
  require(lr >= 0.0, ErrorKind::Config, "adam_step: negative learning rate");
  require(st.m.size() == param_count(params), ErrorKind::Logic,
          "adam_step: state sized for a different parameter set");
  if (!grads_finite(params)) throw_numeric("adam_step: non-finite gradient entry; update rejected");
  st.step += 1;
  const double c1 = 1.0 - std::pow(st.beta1, double(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, double(st.step));
  int64_t off = 0;
  for (ParamTensor* p : params) {
    const int n = p->size();
    auto m = st.m.segment(off, n);
    auto v = st.v.segment(off, n);
    m = st.beta1 * m + (1.0 - st.beta1) * p->grad;
    v = st.beta2 * v + (1.0 - st.beta2) * p->grad.cwiseProduct(p->grad);
    p->values.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + st.epsilon);
    if (!p->values.allFinite())
      throw_numeric(strfmt("adam_step: non-finite parameter after update in %s", p->name.c_str()));
    off += n;
  }
  zero_grads(params);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian binary layout:
//   magic "CIRLNET1" | u32 version | u64 config_hash | str role |
//   u32 net_count | per net: str name, u32 layer_count,
//                            per layer: u8 kind, u32 in_dim, u32 out_dim |
//   payload: per net, per affine layer: weight doubles (column-major), bias doubles.

namespace detail {

constexpr char kCheckpointMagic[8] = {'C', 'I', 'R', 'L', 'N', 'E', 'T', '1'};
constexpr uint32_t kCheckpointVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw_data("checkpoint: truncated file");
  return v;
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_pod<uint16_t>(os, uint16_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_str(std::istream& is) {
  uint16_t n = read_pod<uint16_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw_data("checkpoint: truncated string");
  return s;
}

}  // namespace detail

struct CheckpointMeta {
  uint32_t version = 0;
  std::string role;
  uint64_t config_hash = 0;
};

using NamedNets = std::vector<std::pair<std::string, const Network*>>;
using NamedNetsMut = std::vector<std::pair<std::string, Network*>>;

inline void save_checkpoint(const std::string& path, const std::string& role,
                            const NamedNets& nets, uint64_t config_hash = 0) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), ErrorKind::Data, strfmt("checkpoint_save: cannot open %s", path.c_str()));
  os.write(detail::kCheckpointMagic, 8);
  detail::write_pod<uint32_t>(os, detail::kCheckpointVersion);
  detail::write_pod<uint64_t>(os, config_hash);
  detail::write_str(os, role);
  detail::write_pod<uint32_t>(os, uint32_t(nets.size()));
  for (const auto& [name, net] : nets) {
    detail::write_str(os, name);
    detail::write_pod<uint32_t>(os, uint32_t(net->layers().size()));
    for (const Layer& l : net->layers()) {
      detail::write_pod<uint8_t>(os, uint8_t(l.spec.kind));
      detail::write_pod<uint32_t>(os, uint32_t(l.spec.in_dim));
      detail::write_pod<uint32_t>(os, uint32_t(l.spec.out_dim));
    }
  }
  for (const auto& [name, net] : nets) {
    for (const Layer& l : net->layers()) {
      if (l.spec.kind != LayerKind::Affine) continue;
      os.write(reinterpret_cast<const char*>(l.weight.values.data()),
               std::streamsize(l.weight.values.size() * sizeof(double)));
      os.write(reinterpret_cast<const char*>(l.bias.values.data()),
               std::streamsize(l.bias.values.size() * sizeof(double)));
    }
  }
  require(bool(os), ErrorKind::Data, strfmt("checkpoint_save: write failed on %s", path.c_str()));
}

/// Loads a checkpoint into pre-built networks, validating role (when
/// expected_role is non-empty), names and every layer spec.
inline CheckpointMeta load_checkpoint(const std::string& path, const NamedNetsMut& nets,
                                      const std::string& expected_role = "") {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), ErrorKind::Data, strfmt("checkpoint_load: cannot open %s", path.c_str()));
  char magic[8];
  is.read(magic, 8);
  require(bool(is) && std::memcmp(magic, detail::kCheckpointMagic, 8) == 0, ErrorKind::Data,
          strfmt("checkpoint_load: %s is not a CIRLNET1 file", path.c_str()));
  CheckpointMeta meta;
  meta.version = detail::read_pod<uint32_t>(is);
  require(meta.version == detail::kCheckpointVersion, ErrorKind::Data,
          strfmt("checkpoint_load: unsupported format version %u", meta.version));
  meta.config_hash = detail::read_pod<uint64_t>(is);
  meta.role = detail::read_str(is);
  if (!expected_role.empty())
    require(meta.role == expected_role, ErrorKind::Data,
            strfmt("checkpoint_load: role '%s' where '%s' expected", meta.role.c_str(),
                   expected_role.c_str()));
  uint32_t net_count = detail::read_pod<uint32_t>(is);
  require(net_count == nets.size(), ErrorKind::Data,
          strfmt("checkpoint_load: file holds %u networks, %zu expected", net_count, nets.size()));
  for (const auto& [name, net] : nets) {
    std::string fname = detail::read_str(is);
    require(fname == name, ErrorKind::Data,
            strfmt("checkpoint_load: network '%s' where '%s' expected", fname.c_str(),
                   name.c_str()));
    uint32_t n_layers = detail::read_pod<uint32_t>(is);
    require(n_layers == net->layers().size(), ErrorKind::Data,
            strfmt("checkpoint_load: '%s' has %u layers, %zu expected", name.c_str(), n_layers,
                   net->layers().size()));
    for (const Layer& l : net->layers()) {
      auto kind = LayerKind(detail::read_pod<uint8_t>(is));
      auto in = int(detail::read_pod<uint32_t>(is));
      auto out = int(detail::read_pod<uint32_t>(is));
      require(kind == l.spec.kind && in == l.spec.in_dim && out == l.spec.out_dim, ErrorKind::Data,
              strfmt("checkpoint_load: layer mismatch in '%s': file has %s %dx%d, network has "
                     "%s %dx%d",
                     name.c_str(), layer_kind_name(kind), in, out, layer_kind_name(l.spec.kind),
                     l.spec.in_dim, l.spec.out_dim));
    }
  }
  for (const auto& [name, net] : nets) {
    for (ParamTensor* p : net->params()) {
      is.read(reinterpret_cast<char*>(p->values.data()),
              std::streamsize(p->values.size() * sizeof(double)));
      require(bool(is), ErrorKind::Data,
              strfmt("checkpoint_load: truncated payload in '%s'", name.c_str()));
      require(p->values.allFinite(), ErrorKind::Data,
              strfmt("checkpoint_load: non-finite parameter in '%s'", name.c_str()));
      p->grad.setZero();
    }
  }
  return meta;
}

inline void save_network(const std::string& path, const Network& net, uint64_t config_hash = 0) {
  save_checkpoint(path, "net", {{"net", &net}}, config_hash);
}

inline CheckpointMeta load_network(const std::string& path, Network& net) {
  return load_checkpoint(path, {{"net", &net}}, "net");
}

}  // namespace cirl::nn
