#include "irda/common.hpp"

namespace irda {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string_view to_string(EnvKind env) {
  switch (env) {
  case EnvKind::AppleFarm:
    return "applefarm";
  case EnvKind::MoralMachine:
    return "moralmachine";
  }
  return "unknown";
}

EnvKind env_from_string(std::string_view name) {
  if (name == "applefarm") {
    return EnvKind::AppleFarm;
  }
  if (name == "moralmachine") {
    return EnvKind::MoralMachine;
  }
  throw ConfigError("unknown environment '" + std::string(name) + "' (expected applefarm or moralmachine)");
}

} // namespace irda
