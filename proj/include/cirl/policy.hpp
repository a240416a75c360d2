// Gated actor and critic. The actor runs a shared perception trunk over the
// flattened raster plus a speed encoder, then exactly one of four
// command-gated branches (fixed order Follow, Straight, TurnLeft, TurnRight)
// with a tanh steer head and sigmoid throttle/brake heads. The critic reuses
// the same trunk/encoder shapes with independent parameters and a single
// value head fed by feature, speed, command one-hot and action.
#pragma once

#include <array>

#include "cirl/nn.hpp"
#include "cirl/types.hpp"

namespace cirl {

struct PolicyConfig {
  int raster_h = 32, raster_w = 32;
  int trunk_hidden = 128;   // two hidden layers of this width
  int speed_feature = 32;
  int branch_hidden = 64;
  double speed_norm_kmh = 40.0;  // speed input scaling before the encoder

  int raster_dim() const { return raster_h * raster_w; }

  bool operator==(const PolicyConfig&) const = default;
};

/// Branch selection: bijective map from commands onto {0,1,2,3}.
inline int gate(Command c) { return int(c); }

namespace policy_detail {

inline nn::Mat gather_cols(const nn::Mat& src, const std::vector<int>& idx) {
  nn::Mat out(src.rows(), Eigen::Index(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) out.col(Eigen::Index(j)) = src.col(idx[j]);
  return out;
}

inline void scatter_add_cols(nn::Mat& dst, const nn::Mat& src, const std::vector<int>& idx) {
  for (size_t j = 0; j < idx.size(); ++j) dst.col(idx[j]) += src.col(Eigen::Index(j));
}

}  // namespace policy_detail

class GatedActor {
 public:
  GatedActor() = default;

  GatedActor(const PolicyConfig& cfg, uint64_t seed) : cfg_(cfg) {
    const int f = cfg.trunk_hidden, s = cfg.speed_feature, h = cfg.branch_hidden;
    trunk_ = nn::Network({nn::affine(cfg.raster_dim(), f), nn::relu(f), nn::affine(f, f),
                          nn::relu(f)});
    speed_enc_ = nn::Network({nn::affine(1, s), nn::relu(s)});
    for (int b = 0; b < kNumCommands; ++b) {
      branches_[b].stem = nn::Network({nn::concat(f, s), nn::affine(f + s, h), nn::relu(h)});
      branches_[b].steer = nn::Network({nn::affine(h, 1), nn::tanh_layer(1)});
      branches_[b].pedal = nn::Network({nn::affine(h, 2), nn::sigmoid(2)});
    }
    Rng seeds(seed);
    trunk_.init_params(seeds.next_u64());
    speed_enc_.init_params(seeds.next_u64());
    for (auto& br : branches_) {
      br.stem.init_params(seeds.next_u64());
      br.steer.init_params(seeds.next_u64());
      br.pedal.init_params(seeds.next_u64());
    }
  }

  const PolicyConfig& config() const { return cfg_; }

  struct Tape {
    nn::Tape trunk, speed;
    std::array<nn::Tape, kNumCommands> stem, steer, pedal;
    std::array<std::vector<int>, kNumCommands> groups;
    int batch = 0;
  };

  /// Batched forward. `rasters` is (H*W x B), `speeds_mps` (1 x B); returns
  /// actions (3 x B) with rows steer, throttle, brake. Only the gated branch
  /// of each sample is evaluated.
  nn::Mat forward_batch(const nn::Mat& rasters, const nn::Mat& speeds_mps,
                        std::span<const Command> commands, Tape* tape = nullptr) const {
    const int batch = int(rasters.cols());
    require(int(commands.size()) == batch, ErrorKind::Data,
            "actor_forward: command count does not match batch");
    nn::Mat speeds_norm = speeds_mps * (3.6 / cfg_.speed_norm_kmh);

    Tape local;
    Tape& t = tape ? *tape : local;
    t.batch = batch;
    for (auto& g : t.groups) g.clear();
    for (int i = 0; i < batch; ++i) t.groups[size_t(gate(commands[i]))].push_back(i);

    nn::Mat features = trunk_.forward(rasters, {}, tape ? &t.trunk : nullptr);
    nn::Mat speed_feats = speed_enc_.forward(speeds_norm, {}, tape ? &t.speed : nullptr);

    nn::Mat actions(3, batch);
    for (int b = 0; b < kNumCommands; ++b) {
      const auto& idx = t.groups[size_t(b)];
      if (idx.empty()) continue;
      nn::Mat fb = policy_detail::gather_cols(features, idx);
      nn::Mat sb = policy_detail::gather_cols(speed_feats, idx);
      const nn::Mat* aux[] = {&sb};
      nn::Mat hb = branches_[b].stem.forward(fb, aux, tape ? &t.stem[size_t(b)] : nullptr);
      nn::Mat steer = branches_[b].steer.forward(hb, {}, tape ? &t.steer[size_t(b)] : nullptr);
      nn::Mat pedal = branches_[b].pedal.forward(hb, {}, tape ? &t.pedal[size_t(b)] : nullptr);
      for (size_t j = 0; j < idx.size(); ++j) {
        actions(0, idx[j]) = steer(0, Eigen::Index(j));
        actions(1, idx[j]) = pedal(0, Eigen::Index(j));
        actions(2, idx[j]) = pedal(1, Eigen::Index(j));
      }
    }
    return actions;
  }

  ActionTriple act(const Observation& obs) const {
    require(int(obs.raster.size()) == cfg_.raster_dim(), ErrorKind::Data,
            strfmt("actor_forward: raster has %zu cells, trunk expects %d", obs.raster.size(),
                   cfg_.raster_dim()));
    nn::Mat raster(cfg_.raster_dim(), 1);
    for (int i = 0; i < cfg_.raster_dim(); ++i) raster(i, 0) = obs.raster[size_t(i)];
    nn::Mat speed(1, 1);
    speed(0, 0) = obs.speed;
    Command cmd = obs.command;
    nn::Mat a = forward_batch(raster, speed, {&cmd, 1});
    return {a(0, 0), a(1, 0), a(2, 0)};
  }

  /// Branch-masked reverse pass: every sample's gradient reaches the trunk
  /// and speed encoder, but a branch only accumulates gradient from samples
  /// gated to it.
  void backward_masked(const Tape& t, const nn::Mat& action_grads) {
    require(int(action_grads.cols()) == t.batch && action_grads.rows() == 3, ErrorKind::Data,
            "actor_backward: action grad must be 3 x batch");
    nn::Mat d_features = nn::Mat::Zero(cfg_.trunk_hidden, t.batch);
    nn::Mat d_speed = nn::Mat::Zero(cfg_.speed_feature, t.batch);
    for (int b = 0; b < kNumCommands; ++b) {
      const auto& idx = t.groups[size_t(b)];
      if (idx.empty()) continue;
      nn::Mat ga = policy_detail::gather_cols(action_grads, idx);
      nn::Mat d_hidden = branches_[b].steer.backward(t.steer[size_t(b)], ga.topRows(1));
      d_hidden += branches_[b].pedal.backward(t.pedal[size_t(b)], ga.bottomRows(2));
      std::vector<nn::Mat> aux_grads;
      nn::Mat d_fb = branches_[b].stem.backward(t.stem[size_t(b)], d_hidden, &aux_grads);
      policy_detail::scatter_add_cols(d_features, d_fb, idx);
      policy_detail::scatter_add_cols(d_speed, aux_grads[0], idx);
    }
    trunk_.backward(t.trunk, d_features);
    speed_enc_.backward(t.speed, d_speed);
  }

  nn::ParamRefs params() {
    nn::ParamRefs out;
    auto append = [&](nn::Network& n) {
      for (auto* p : n.params()) out.push_back(p);
    };
    append(trunk_);
    append(speed_enc_);
    for (auto& br : branches_) {
      append(br.stem);
      append(br.steer);
      append(br.pedal);
    }
    return out;
  }

  /// Parameters of one branch only (stem + heads), for isolation checks.
  nn::ParamRefs branch_params(int b) {
    nn::ParamRefs out;
    for (auto* p : branches_[size_t(b)].stem.params()) out.push_back(p);
    for (auto* p : branches_[size_t(b)].steer.params()) out.push_back(p);
    for (auto* p : branches_[size_t(b)].pedal.params()) out.push_back(p);
    return out;
  }

  nn::Network& trunk() { return trunk_; }
  nn::Network& speed_encoder() { return speed_enc_; }
  nn::Network& branch_stem(int b) { return branches_[size_t(b)].stem; }
  nn::Network& branch_steer(int b) { return branches_[size_t(b)].steer; }
  nn::Network& branch_pedal(int b) { return branches_[size_t(b)].pedal; }

  void save(const std::string& path, const std::string& role, uint64_t config_hash = 0) const {
    nn::save_checkpoint(path, role, named_nets(), config_hash);
  }

  static GatedActor load(const PolicyConfig& cfg, const std::string& path,
                         const std::string& expected_role = "") {
    GatedActor a(cfg, 0);
    a.load_into(path, expected_role);
    return a;
  }

  nn::CheckpointMeta load_into(const std::string& path, const std::string& expected_role = "") {
    auto nets = named_nets_mut();
    return nn::load_checkpoint(path, nets, expected_role);
  }

 private:
  nn::NamedNets named_nets() const {
    nn::NamedNets nets = {{"trunk", &trunk_}, {"speed_enc", &speed_enc_}};
    for (int b = 0; b < kNumCommands; ++b) {
      nets.emplace_back(strfmt("branch%d_stem", b), &branches_[size_t(b)].stem);
      nets.emplace_back(strfmt("branch%d_steer", b), &branches_[size_t(b)].steer);
      nets.emplace_back(strfmt("branch%d_pedal", b), &branches_[size_t(b)].pedal);
    }
    return nets;
  }
  nn::NamedNetsMut named_nets_mut() {
    nn::NamedNetsMut nets = {{"trunk", &trunk_}, {"speed_enc", &speed_enc_}};
    for (int b = 0; b < kNumCommands; ++b) {
      nets.emplace_back(strfmt("branch%d_stem", b), &branches_[size_t(b)].stem);
      nets.emplace_back(strfmt("branch%d_steer", b), &branches_[size_t(b)].steer);
      nets.emplace_back(strfmt("branch%d_pedal", b), &branches_[size_t(b)].pedal);
    }
    return nets;
  }

  struct Branch {
    nn::Network stem;   // concat speed feature, affine, relu
    nn::Network steer;  // affine -> tanh, 1 output
    nn::Network pedal;  // affine -> sigmoid, 2 outputs (throttle, brake)
  };

  PolicyConfig cfg_;
  nn::Network trunk_;
  nn::Network speed_enc_;
  std::array<Branch, kNumCommands> branches_;
};

class Critic {
 public:
  Critic() = default;

  Critic(const PolicyConfig& cfg, uint64_t seed) : cfg_(cfg) {
    const int f = cfg.trunk_hidden, s = cfg.speed_feature, h = cfg.branch_hidden;
    trunk_ = nn::Network({nn::affine(cfg.raster_dim(), f), nn::relu(f), nn::affine(f, f),
                          nn::relu(f)});
    speed_enc_ = nn::Network({nn::affine(1, s), nn::relu(s)});
    // feature, then concat speed, command one-hot and action before the head
    q_net_ = nn::Network({nn::concat(f, s), nn::concat(f + s, kNumCommands),
                          nn::concat(f + s + kNumCommands, 3),
                          nn::affine(f + s + kNumCommands + 3, h), nn::relu(h),
                          nn::affine(h, 1)});
    Rng seeds(seed);
    trunk_.init_params(seeds.next_u64());
    speed_enc_.init_params(seeds.next_u64());
    q_net_.init_params(seeds.next_u64());
  }

  const PolicyConfig& config() const { return cfg_; }

  struct Tape {
    nn::Tape trunk, speed, q;
    int batch = 0;
  };

  /// Q values (1 x B) for observation batches and actions (3 x B).
  nn::Mat forward_batch(const nn::Mat& rasters, const nn::Mat& speeds_mps,
                        std::span<const Command> commands, const nn::Mat& actions,
                        Tape* tape = nullptr) const {
    const int batch = int(rasters.cols());
    require(int(commands.size()) == batch && int(actions.cols()) == batch, ErrorKind::Data,
            "critic_forward: batch size mismatch");
    nn::Mat speeds_norm = speeds_mps * (3.6 / cfg_.speed_norm_kmh);
    nn::Mat features = trunk_.forward(rasters, {}, tape ? &tape->trunk : nullptr);
    nn::Mat speed_feats = speed_enc_.forward(speeds_norm, {}, tape ? &tape->speed : nullptr);
    nn::Mat onehot = nn::Mat::Zero(kNumCommands, batch);
    for (int i = 0; i < batch; ++i) onehot(gate(commands[i]), i) = 1.0;
    const nn::Mat* aux[] = {&speed_feats, &onehot, &actions};
    if (tape) tape->batch = batch;
    return q_net_.forward(features, aux, tape ? &tape->q : nullptr);
  }

  double q1(const Observation& obs, const ActionTriple& a) const {
    nn::Mat raster(cfg_.raster_dim(), 1);
    require(int(obs.raster.size()) == cfg_.raster_dim(), ErrorKind::Data,
            "critic_forward: raster dimension mismatch");
    for (int i = 0; i < cfg_.raster_dim(); ++i) raster(i, 0) = obs.raster[size_t(i)];
    nn::Mat speed(1, 1);
    speed(0, 0) = obs.speed;
    nn::Mat act(3, 1);
    act << a.steer, a.throttle, a.brake;
    Command cmd = obs.command;
    return forward_batch(raster, speed, {&cmd, 1}, act)(0, 0);
  }

  /// Full reverse pass for the critic loss; accumulates parameter grads.
  void backward_params(const Tape& t, const nn::Mat& dq) {
    std::vector<nn::Mat> aux_grads;
    nn::Mat d_features = q_net_.backward(t.q, dq, &aux_grads);
    trunk_.backward(t.trunk, d_features);
    speed_enc_.backward(t.speed, aux_grads[0]);
  }

  /// Gradient of sum(dq .* Q) with respect to the action inputs only;
  /// parameters are left untouched.
  nn::Mat action_grads(const Tape& t, const nn::Mat& dq) {
    std::vector<nn::Mat> aux_grads;
    q_net_.backward(t.q, dq, &aux_grads, /*accumulate_params=*/false);
    return aux_grads[2];
  }

  nn::ParamRefs params() {
    nn::ParamRefs out;
    for (auto* p : trunk_.params()) out.push_back(p);
    for (auto* p : speed_enc_.params()) out.push_back(p);
    for (auto* p : q_net_.params()) out.push_back(p);
    return out;
  }

  nn::Network& q_net() { return q_net_; }
  nn::Network& trunk() { return trunk_; }

  void save(const std::string& path, const std::string& role, uint64_t config_hash = 0) const {
    nn::save_checkpoint(path, role,
                        {{"trunk", &trunk_}, {"speed_enc", &speed_enc_}, {"q_net", &q_net_}},
                        config_hash);
  }

  nn::CheckpointMeta load_into(const std::string& path, const std::string& expected_role = "") {
    nn::NamedNetsMut nets = {
        {"trunk", &trunk_}, {"speed_enc", &speed_enc_}, {"q_net", &q_net_}};
    return nn::load_checkpoint(path, nets, expected_role);
  }

 private:
  PolicyConfig cfg_;
  nn::Network trunk_;
  nn::Network speed_enc_;
  nn::Network q_net_;
};

}  // namespace cirl
