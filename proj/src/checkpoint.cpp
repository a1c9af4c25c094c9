#include "crowdnav/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

constexpr char kMagic[8] = {'C', 'N', 'A', 'V', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("truncated checkpoint");
  return v;
}

void write_f64(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_f64(std::istream& in, std::vector<double>& v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw ConfigError("truncated checkpoint payload");
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config, const TrainerState& state) {
  nlohmann::json header;
  header["format"] = "crowdnav-checkpoint";
  header["architecture"] = state.params.arch().to_json();
  header["observation_layout"] = kObservationLayoutVersion;
  header["digest"] = config.digest();
  header["config"] = config.to_json();
  header["param_count"] = state.params.size();
  header["has_optimizer"] = state.adam.m.size() == state.params.size();
  header["training"] = {{"update", state.update},
                        {"total_steps", state.total_steps},
                        {"adam_t", state.adam.t}};
  const std::string text = header.dump();

  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint '" + tmp + "'");
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kCheckpointVersion);
    write_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_f64(out, state.params.data());
    if (header["has_optimizer"].get<bool>()) {
      write_f64(out, state.adam.m);
      write_f64(out, state.adam.v);
    }
    out.flush();
    if (!out) throw ConfigError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ConfigError("'" + path + "' is not a checkpoint");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t len = read_u32(in);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw ConfigError("truncated checkpoint header");
  const nlohmann::json header = nlohmann::json::parse(text);

  if (header.at("observation_layout").get<int>() != kObservationLayoutVersion) {
    throw DigestMismatch("checkpoint uses observation layout " +
                         std::to_string(header.at("observation_layout").get<int>()));
  }
  Checkpoint ck;
  ck.config = RunConfig::from_json(header.at("config"));
  ck.digest = header.at("digest").get<std::string>();
  if (ck.digest != ck.config.digest()) {
    throw DigestMismatch("checkpoint header digest does not match its embedded config");
  }
  const PolicyArch arch = PolicyArch::from_json(header.at("architecture"));
  PolicyParams params(arch);
  if (header.at("param_count").get<std::size_t>() != params.size()) {
    throw DigestMismatch("checkpoint parameter count does not match its architecture");
  }
  read_f64(in, params.data());
  ck.state.params = std::move(params);
  if (header.at("has_optimizer").get<bool>()) {
    ck.state.adam.m.assign(ck.state.params.size(), 0.0);
    ck.state.adam.v.assign(ck.state.params.size(), 0.0);
    read_f64(in, ck.state.adam.m);
    read_f64(in, ck.state.adam.v);
  }
  const auto& training = header.at("training");
  ck.state.update = training.at("update").get<std::int64_t>();
  ck.state.total_steps = training.at("total_steps").get<std::int64_t>();
  ck.state.adam.t = training.at("adam_t").get<std::int64_t>();
  return ck;
}

void require_compatible(const Checkpoint& ckpt, const RunConfig& config) {
  const std::string want = config.digest();
  if (ckpt.digest != want) {
    throw DigestMismatch("checkpoint digest " + ckpt.digest.substr(0, 12) +
                         " does not match config digest " + want.substr(0, 12));
  }
}

}  // namespace crowdnav
