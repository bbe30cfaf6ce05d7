#include "deepcas/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "deepcas/errors.hpp"
#include "deepcas/scheduling_env.hpp"
#include "json.hpp"

namespace deepcas {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

using nlohmann::json;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IncompatibleCheckpoint("checkpoint truncated");
  return v;
}

void write_doubles(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw IncompatibleCheckpoint("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainerState& s) {
  json header = {
      {"format", "deepcas-checkpoint"},
      {"version", kCheckpointVersion},
      {"inputs", s.net.inputs()},
      {"hidden", s.net.hidden()},
      {"actions", s.net.actions()},
      {"subsystems", s.subsystems},
      {"channels", s.channels},
      {"epoch", s.epoch},
      {"run_seed", s.run_seed},
      {"adam",
       {{"step", s.adam.step},
        {"learning_rate", s.adam.learning_rate},
        {"beta1", s.adam.beta1},
        {"beta2", s.adam.beta2},
        {"epsilon", s.adam.epsilon}}},
      {"replay",
       {{"capacity", s.buffer.capacity()},
        {"cursor", s.buffer.cursor()},
        {"stored", s.buffer.storage().size()}}},
      {"agent_rng", s.agent_rng.serialize()},
  };
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod(os, kCheckpointVersion);
    write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_doubles(os, s.net.parameters().data(), s.net.parameter_count());
    write_doubles(os, s.adam.m.data(), s.adam.m.size());
    write_doubles(os, s.adam.v.data(), s.adam.v.size());
    for (const Transition& tr : s.buffer.storage()) {
      write_pod(os, static_cast<std::uint64_t>(tr.a));
      write_pod(os, tr.r);
      write_pod(os, static_cast<std::uint8_t>(tr.terminal ? 1 : 0));
      write_doubles(os, tr.s.data(), tr.s.size());
      write_doubles(os, tr.s_next.data(), tr.s_next.size());
    }
    if (!os) throw std::runtime_error("failed writing checkpoint '" + path + "'");
  }
  std::rename(tmp.c_str(), path.c_str());
}

TrainerState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IncompatibleCheckpoint("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw IncompatibleCheckpoint("'" + path + "' is not a deepcas checkpoint");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw IncompatibleCheckpoint("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = read_pod<std::uint64_t>(is);
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw IncompatibleCheckpoint("checkpoint truncated");

  TrainerState s;
  try {
    const json h = json::parse(text);
    const auto D = h.at("inputs").get<std::size_t>();
    const auto H = h.at("hidden").get<std::size_t>();
    const auto A = h.at("actions").get<std::size_t>();
    s.net = QNetwork(D, H, A);
    s.subsystems = h.at("subsystems").get<int>();
    s.channels = h.at("channels").get<int>();
    s.epoch = h.at("epoch").get<int>();
    s.run_seed = h.at("run_seed").get<std::uint64_t>();
    const json& adam = h.at("adam");
    s.adam = AdamState::for_network(s.net, adam.at("learning_rate").get<double>());
    s.adam.step = adam.at("step").get<std::uint64_t>();
    s.adam.beta1 = adam.at("beta1").get<double>();
    s.adam.beta2 = adam.at("beta2").get<double>();
    s.adam.epsilon = adam.at("epsilon").get<double>();
    s.agent_rng = RandomSource::deserialize(h.at("agent_rng").get<std::string>());

    read_doubles(is, s.net.parameters().data(), s.net.parameter_count());
    read_doubles(is, s.adam.m.data(), s.adam.m.size());
    read_doubles(is, s.adam.v.data(), s.adam.v.size());

    const json& replay = h.at("replay");
    const auto capacity = replay.at("capacity").get<std::size_t>();
    const auto cursor = replay.at("cursor").get<std::size_t>();
    const auto stored = replay.at("stored").get<std::size_t>();
    std::vector<Transition> storage(stored);
    for (Transition& tr : storage) {
      tr.a = static_cast<ActionIndex>(read_pod<std::uint64_t>(is));
      tr.r = read_pod<double>(is);
      tr.terminal = read_pod<std::uint8_t>(is) != 0;
      tr.s.resize(D);
      tr.s_next.resize(D);
      read_doubles(is, tr.s.data(), D);
      read_doubles(is, tr.s_next.data(), D);
    }
    s.buffer = ReplayBuffer::restore(capacity, cursor, std::move(storage));
  } catch (const json::exception& e) {
    throw IncompatibleCheckpoint(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ContractViolation& e) {
    throw IncompatibleCheckpoint(std::string("inconsistent checkpoint: ") + e.what());
  }
  return s;
}

void check_compatible(const TrainerState& s, const EnvModel& model) {
  if (s.subsystems != model.subsystems() || s.channels != model.channels() ||
      s.net.inputs() != model.observation_dim || s.net.actions() != model.action_count) {
    throw IncompatibleCheckpoint(
        "checkpoint was trained for N=" + std::to_string(s.subsystems) +
        ", M=" + std::to_string(s.channels) + " (input " + std::to_string(s.net.inputs()) +
        ", " + std::to_string(s.net.actions()) + " actions) but the config has N=" +
        std::to_string(model.subsystems()) + ", M=" + std::to_string(model.channels()) +
        " (input " + std::to_string(model.observation_dim) + ", " +
        std::to_string(model.action_count) + " actions)");
  }
}

}  // namespace deepcas
