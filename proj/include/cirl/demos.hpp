// Demonstration datasets: seed-controlled expert episodes recorded step by
// step, with per-command balancing driven by decision-focused route
// sampling. Binary file format "CIRLDEM1".
#pragma once

#include <array>

#include "cirl/expert.hpp"
#include "cirl/nn.hpp"

namespace cirl {

/// One recorded step. `terminal` marks the last acted step of an episode;
/// a trailing sentinel record (terminal == 2, zero action) carries the final
/// observation so consecutive records always give (o, a, o') transitions.
struct DemoRecord {
  std::vector<float> raster;
  double speed = 0;  // observation speed, m/s
  uint8_t command = 0;
  uint8_t terminal = 0;       // 0 mid-episode, 1 last action, 2 final-observation sentinel
  uint8_t post_collision = 0; // CollisionKind after the action
  uint32_t episode = 0;
  double steer = 0, throttle = 0, brake = 0;
  double post_speed_kmh = 0, post_sidewalk = 0, post_opposite = 0;

  bool is_sample() const { return terminal != 2; }
  double speed_kmh() const { return speed * 3.6; }

  Observation observation(int h, int w) const {
    Observation o;
    o.h = h;
    o.w = w;
    o.raster.assign(raster.begin(), raster.end());
    o.speed = speed;
    o.command = Command(command);
    return o;
  }
};

struct DemoDataset {
  int raster_h = 32, raster_w = 32;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  std::vector<DemoRecord> records;

  std::array<int64_t, kNumCommands> command_counts() const {
    std::array<int64_t, kNumCommands> c{};
    for (const DemoRecord& r : records)
      if (r.is_sample()) c[r.command] += 1;
    return c;
  }

  int64_t sample_count() const {
    int64_t n = 0;
    for (const DemoRecord& r : records) n += r.is_sample();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Binary IO

namespace detail {
constexpr char kDemoMagic[8] = {'C', 'I', 'R', 'L', 'D', 'E', 'M', '1'};
constexpr uint32_t kDemoVersion = 1;
}  // namespace detail

inline void save_demos(const std::string& path, const DemoDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), ErrorKind::Data, strfmt("cannot write dataset %s", path.c_str()));
  os.write(detail::kDemoMagic, 8);
  nn::detail::write_pod<uint32_t>(os, detail::kDemoVersion);
  nn::detail::write_pod<uint64_t>(os, ds.config_hash);
  nn::detail::write_pod<uint32_t>(os, uint32_t(ds.raster_h));
  nn::detail::write_pod<uint32_t>(os, uint32_t(ds.raster_w));
  nn::detail::write_pod<uint64_t>(os, ds.seed);
  nn::detail::write_pod<uint64_t>(os, uint64_t(ds.records.size()));
  for (const DemoRecord& r : ds.records) {
    nn::detail::write_pod<uint32_t>(os, r.episode);
    nn::detail::write_pod<uint8_t>(os, r.command);
    nn::detail::write_pod<uint8_t>(os, r.terminal);
    nn::detail::write_pod<uint8_t>(os, r.post_collision);
    nn::detail::write_pod<uint8_t>(os, 0);
    nn::detail::write_pod<double>(os, r.speed);
    nn::detail::write_pod<double>(os, r.steer);
    nn::detail::write_pod<double>(os, r.throttle);
    nn::detail::write_pod<double>(os, r.brake);
    nn::detail::write_pod<double>(os, r.post_speed_kmh);
    nn::detail::write_pod<double>(os, r.post_sidewalk);
    nn::detail::write_pod<double>(os, r.post_opposite);
    os.write(reinterpret_cast<const char*>(r.raster.data()),
             std::streamsize(r.raster.size() * sizeof(float)));
  }
  require(bool(os), ErrorKind::Data, strfmt("write failed on %s", path.c_str()));
}

inline DemoDataset load_demos(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), ErrorKind::Data, strfmt("cannot open dataset %s", path.c_str()));
  char magic[8];
  is.read(magic, 8);
  require(bool(is) && std::memcmp(magic, detail::kDemoMagic, 8) == 0, ErrorKind::Data,
          strfmt("%s is not a CIRLDEM1 dataset", path.c_str()));
  uint32_t version = nn::detail::read_pod<uint32_t>(is);
  require(version == detail::kDemoVersion, ErrorKind::Data,
          strfmt("unsupported dataset version %u", version));
  DemoDataset ds;
  ds.config_hash = nn::detail::read_pod<uint64_t>(is);
  ds.raster_h = int(nn::detail::read_pod<uint32_t>(is));
  ds.raster_w = int(nn::detail::read_pod<uint32_t>(is));
  ds.seed = nn::detail::read_pod<uint64_t>(is);
  uint64_t n = nn::detail::read_pod<uint64_t>(is);
  const size_t raster_len = size_t(ds.raster_h) * ds.raster_w;
  ds.records.resize(n);
  for (DemoRecord& r : ds.records) {
    r.episode = nn::detail::read_pod<uint32_t>(is);
    r.command = nn::detail::read_pod<uint8_t>(is);
    r.terminal = nn::detail::read_pod<uint8_t>(is);
    r.post_collision = nn::detail::read_pod<uint8_t>(is);
    nn::detail::read_pod<uint8_t>(is);
    r.speed = nn::detail::read_pod<double>(is);
    r.steer = nn::detail::read_pod<double>(is);
    r.throttle = nn::detail::read_pod<double>(is);
    r.brake = nn::detail::read_pod<double>(is);
    r.post_speed_kmh = nn::detail::read_pod<double>(is);
    r.post_sidewalk = nn::detail::read_pod<double>(is);
    r.post_opposite = nn::detail::read_pod<double>(is);
    r.raster.resize(raster_len);
    is.read(reinterpret_cast<char*>(r.raster.data()),
            std::streamsize(raster_len * sizeof(float)));
    require(bool(is), ErrorKind::Data, strfmt("truncated dataset %s", path.c_str()));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Episode sampling focused on one decision kind

/// Samples an episode whose route makes exactly one crossing of the wanted
/// class (or a plain lane-following stretch for Follow). Throws after too
/// many rejected draws.
inline EpisodeSpec sample_decision_episode(const World& world, Command decision, Rng& rng,
                                           const SimConfig& cfg) {
  const TownMap& map = world.map;
  for (int tries = 0; tries < 400; ++tries) {
    EpisodeSpec spec;
    spec.map_name = map.name;
    if (decision == Command::Follow) {
      const LaneEdge& e = map.edge(rng.uniform_int(int(map.edges.size())));
      if (e.length < 50) continue;
      double s0 = rng.uniform(2.0, e.length - 40.0);
      double s1 = s0 + rng.uniform(30.0, std::min(60.0, e.length - 2.0 - s0));
      spec.start = {e.id, s0};
      spec.goal = {e.id, s1};
      return spec;
    }
    // pick an (incoming, outgoing) lane pair of the wanted turn class
    const LaneEdge& in = map.edge(rng.uniform_int(int(map.edges.size())));
    std::vector<int> outs;
    for (int o : map.out_edges[size_t(in.to_node)]) {
      if (o == in.opposite_id) continue;
      if (detail::classify_turn(in.dir_at(in.length), map.edge(o).dir_at(0)) == decision)
        outs.push_back(o);
    }
    if (outs.empty()) continue;
    const LaneEdge& out = map.edge(outs[size_t(rng.uniform_int(int(outs.size())))]);
    double lead = cfg.approach_window + rng.uniform(8.0, 18.0);
    double tail = rng.uniform(12.0, 28.0);
    spec.start = {in.id, std::max(2.0, in.length - lead)};
    spec.goal = {out.id, std::min(out.length - 2.0, tail)};
    Route r = plan_route(map, spec.start, spec.goal, cfg.approach_window);
    if (r.edges.size() != 2 || r.edges[0] != in.id || r.edges[1] != out.id) continue;
    return spec;
  }
  throw_data(strfmt("no %s-decision episode found on map %s", command_name(decision),
                    map.name.c_str()));
}

// ---------------------------------------------------------------------------
// Generation

struct DemoGenConfig {
  int min_per_branch = 2000;
  int max_episodes = 4000;
  uint64_t seed = 1;
  double dynamic_fraction = 0.25;  // share of episodes with scripted obstacles
  int dynamic_vehicles = 3;
  int dynamic_pedestrians = 4;
  std::vector<PerturbationRegime> regimes;  // rotated per episode; {none} if empty
};

struct DemoGenStats {
  int episodes_accepted = 0;
  int episodes_dropped_collision = 0;
  int episodes_dropped_abort = 0;
};

/// Runs expert episodes until every command has at least min_per_branch
/// samples. Episodes ending in a collision are rejected; expert aborts are
/// dropped and counted. Deterministic in the seed.
inline DemoDataset generate_demos(std::shared_ptr<const World> world, const SimConfig& sim,
                                  const ExpertConfig& expert_cfg, const DemoGenConfig& gen,
                                  DemoGenStats* stats_out = nullptr) {
  require(gen.max_episodes > 0, ErrorKind::Config,
          "generate_demos: episode budget of 0 would produce an empty dataset");
  require(gen.min_per_branch > 0, ErrorKind::Config, "generate_demos: min_per_branch must be > 0");

  DemoDataset ds;
  ds.raster_h = sim.raster_h;
  ds.raster_w = sim.raster_w;
  ds.seed = gen.seed;

  std::vector<PerturbationRegime> regimes = gen.regimes;
  if (regimes.empty()) regimes.push_back(PerturbationRegime{});

  Environment env(world, sim);
  Rng rng(gen.seed);
  DemoGenStats stats;
  std::array<int64_t, kNumCommands> counts{};
  int attempts = 0;

  auto deficient = [&]() {
    int worst = -1;
    for (int c = 0; c < kNumCommands; ++c)
      if (counts[c] < gen.min_per_branch && (worst < 0 || counts[c] < counts[worst])) worst = c;
    return worst;
  };

  while (true) {
    int want = deficient();
    if (want < 0) break;
    require(attempts < gen.max_episodes, ErrorKind::Data,
            strfmt("generate_demos: %d episodes did not reach %d samples per command",
                   attempts, gen.min_per_branch));
    ++attempts;

    EpisodeSpec spec = sample_decision_episode(*world, Command(want), rng, sim);
    spec.seed = rng.next_u64();
    spec.regime = regimes[size_t(stats.episodes_accepted) % regimes.size()];
    if (rng.uniform() < gen.dynamic_fraction) {
      spec.n_vehicles = gen.dynamic_vehicles;
      spec.n_pedestrians = gen.dynamic_pedestrians;
    }

    std::vector<DemoRecord> episode_records;
    EpisodeStatus status = EpisodeStatus::Running;
    try {
      Observation obs = env.reset(spec);
      ExpertDriver driver(&env.route(), sim.vehicle, expert_cfg);
      while (env.status() == EpisodeStatus::Running) {
        ActionTriple a = driver.act(env.vehicle(), env.obstacles(), obs.command);
        auto res = env.step(a);
        DemoRecord r;
        r.raster.assign(obs.raster.begin(), obs.raster.end());
        r.speed = obs.speed;
        r.command = uint8_t(obs.command);
        r.steer = a.steer;
        r.throttle = a.throttle;
        r.brake = a.brake;
        r.post_speed_kmh = res.m.speed_kmh;
        r.post_sidewalk = res.m.sidewalk_overlap;
        r.post_opposite = res.m.opposite_overlap;
        r.post_collision = uint8_t(res.m.collision_kind);
        r.terminal = res.status != EpisodeStatus::Running ? 1 : 0;
        episode_records.push_back(std::move(r));
        obs = res.obs;
        status = res.status;
      }
      // trailing sentinel with the final observation
      DemoRecord fin;
      fin.raster.assign(obs.raster.begin(), obs.raster.end());
      fin.speed = obs.speed;
      fin.command = uint8_t(obs.command);
      fin.terminal = 2;
      episode_records.push_back(std::move(fin));
    } catch (const Error&) {
      stats.episodes_dropped_abort += 1;
      continue;
    }
    if (status == EpisodeStatus::Collision) {
      stats.episodes_dropped_collision += 1;
      continue;
    }
    uint32_t ep = uint32_t(stats.episodes_accepted);
    for (DemoRecord& r : episode_records) {
      r.episode = ep;
      if (r.is_sample()) counts[r.command] += 1;
    }
    ds.records.insert(ds.records.end(), std::make_move_iterator(episode_records.begin()),
                      std::make_move_iterator(episode_records.end()));
    stats.episodes_accepted += 1;
  }

  if (stats_out) *stats_out = stats;
  return ds;
}

}  // namespace cirl
