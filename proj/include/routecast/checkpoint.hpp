#pragma once

#include <memory>
#include <string>

#include "routecast/cgan.hpp"

namespace routecast {

// Binary layout: "RCKP", u32 version, u32 header length, JSON header
// (configs, RNG state, counters, manifest hash, last losses, Adam steps),
// u32 record count, then records of
//   u32 name length, name, u8 dtype (0 = f32), u32 rank, u32 dims[rank],
//   little-endian f32 payload.
// Records cover parameters, batch-norm running statistics and Adam moments.
inline constexpr uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(Model &m);
std::unique_ptr<Model> deserialize_checkpoint(const std::string &bytes);

// Throw IoError on filesystem or format errors, ValidationError when the
// tensor table disagrees with the stored configs.
void save_checkpoint(Model &m, const std::string &path);
std::unique_ptr<Model> load_checkpoint(const std::string &path);

} // namespace routecast
