#pragma once

#include <cstdint>
#include <string>

#include "deepcas/dqn.hpp"
#include "deepcas/random.hpp"

namespace deepcas {

struct EnvModel;

// Everything a training run carries from one epoch to the next.
struct TrainerState {
  QNetwork net;
  AdamState adam;
  ReplayBuffer buffer{1};
  RandomSource agent_rng;
  int epoch = 0;  // next epoch to run
  std::uint64_t run_seed = 0;
  int subsystems = 0;
  int channels = 0;

  friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'C', 'A', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: 8-byte magic, u32 version, u64 header length, JSON header (shapes,
// epoch, ADAM counters, ring cursor, RNG state), then little-endian float64
// blocks: parameters, ADAM first and second moments, and the replay ring.
void save_checkpoint(const std::string& path, const TrainerState& state);
TrainerState load_checkpoint(const std::string& path);

// Throws IncompatibleCheckpoint if the network or problem shape disagrees
// with the environment the caller wants to use it on.
void check_compatible(const TrainerState& state, const EnvModel& model);

}  // namespace deepcas
