#include "pstx/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pstx {

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'S', 'T', 'X', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated");
  return v;
}

void put_ints(std::ostream& os, const std::vector<int>& v) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(v.size()));
  for (int x : v) put<std::int32_t>(os, x);
}

std::vector<int> get_ints(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n > 4096) throw CheckpointError("checkpoint: implausible list length");
  std::vector<int> v(n);
  for (auto& x : v) x = get<std::int32_t>(is);
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  if (image_channels < 1) throw ParameterError("image_channels must be >= 1");
  if (encoder_widths.empty()) throw ParameterError("encoder needs at least one REM");
  if (decoder.latent_widths.size() != encoder_widths.size()) {
    throw ParameterError("decoder latent levels must equal the number of REMs");
  }
  if (decoder.latent_widths.back() != latent_channels()) throw ParameterError("u_L width must equal C_s");
  if (decoder.image_channels != image_channels) throw ParameterError("decoder image channels mismatch");
  rates.validate();
  if (!(rho > 0)) throw ParameterError("rho must be positive");
}

SemanticModel::SemanticModel(ModelConfig cfg, std::uint64_t seed) : config(std::move(cfg)) {
  config.validate();
  CounterRng rng(seed, 0x5e3a);
  encoder = SemanticEncoder(config.image_channels, config.encoder_widths, rng);
  decoder = SemanticDecoder(config.decoder, rng);
  hyper = HyperSynthesis(config.latent_channels(), config.latent_channels(), rng);
  prior = FactorizedPrior(config.latent_channels(), rng);
  ra = RateCodec(config.rates, config.latent_channels(), rng);
}

ParamList SemanticModel::ra_params() const {
  ParamList out;
  hyper.collect(out, "hyper");
  prior.collect(out, "prior");
  ra.collect(out, "ra");
  return out;
}

ParamList SemanticModel::non_ra_params() const {
  ParamList out;
  encoder.collect(out, "encoder");
  decoder.collect(out, "decoder");
  return out;
}

ParamList SemanticModel::params() const {
  ParamList out = non_ra_params();
  for (auto& p : ra_params()) out.push_back(std::move(p));
  return out;
}

long long SemanticModel::parameter_count() const {
  long long n = 0;
  for (const auto& p : params()) n += p.tensor.numel();
  return n;
}

void SemanticModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint " + path);
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(stage));
  put<std::int32_t>(os, config.image_channels);
  put_ints(os, config.encoder_widths);
  put<std::int32_t>(os, config.decoder.rrdb_features);
  put<std::int32_t>(os, config.decoder.rrdb_growth);
  put<std::int32_t>(os, config.decoder.rrdb_blocks);
  put_ints(os, config.decoder.latent_widths);
  put_ints(os, config.rates.widths);
  put<double>(os, config.rho);
  const auto ps = params();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ps.size()));
  for (const auto& p : ps) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.tensor.numel()));
    os.write(reinterpret_cast<const char*>(p.tensor.value().data()),
             static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
  }
  if (!os) throw CheckpointError("failed writing checkpoint " + path);
}

SemanticModel SemanticModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  char magic[sizeof kCheckpointMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw CheckpointError(path + " is not a checkpoint");
  }
  if (get<std::uint32_t>(is) != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");
  const int stage = static_cast<int>(get<std::uint32_t>(is));
  ModelConfig cfg;
  cfg.image_channels = get<std::int32_t>(is);
  cfg.encoder_widths = get_ints(is);
  cfg.decoder.image_channels = cfg.image_channels;
  cfg.decoder.rrdb_features = get<std::int32_t>(is);
  cfg.decoder.rrdb_growth = get<std::int32_t>(is);
  cfg.decoder.rrdb_blocks = get<std::int32_t>(is);
  cfg.decoder.latent_widths = get_ints(is);
  cfg.rates.widths = get_ints(is);
  cfg.rho = get<double>(is);
  SemanticModel model(cfg, 0);
  model.stage = stage;
  auto ps = model.params();
  if (get<std::uint32_t>(is) != ps.size()) throw CheckpointError("checkpoint parameter count mismatch");
  for (auto& p : ps) {
    const auto len = get<std::uint32_t>(is);
    std::string name(len, '\0');
    if (len > 1024 || !is.read(name.data(), len)) throw CheckpointError("checkpoint truncated");
    if (name != p.name) throw CheckpointError("checkpoint parameter '" + name + "' where '" + p.name + "' expected");
    if (get<std::uint64_t>(is) != static_cast<std::uint64_t>(p.tensor.numel())) {
      throw CheckpointError("checkpoint size mismatch for " + name);
    }
    auto& v = p.tensor.mutable_value();
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)))) {
      throw CheckpointError("checkpoint truncated");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
  return model;
}

}  // namespace pstx
