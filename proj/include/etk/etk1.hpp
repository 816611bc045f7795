#pragma once

#include <string>

#include "etk/inversion.hpp"
#include "etk/types.hpp"
#include "etk/zeus.hpp"

namespace etk::io {

// ETK1 container: magic "ETK1", u16 version, u16 artifact kind, then
// section-tagged payloads ([u32 tag][u64 byte length][payload]); all
// integers and floats little-endian, floats 64-bit. Round-trips are
// bit-exact. A trajectory read back carries no cached inversion states.

void write_tensor(const std::string& path, VecRef x);
Vec read_tensor(const std::string& path);

void write_trajectory(const std::string& path, const NoiseTrajectory& traj);
NoiseTrajectory read_trajectory(const std::string& path);

void write_bundle(const std::string& path, const PcBundle& bundle);
PcBundle read_bundle(const std::string& path);

void write_profile(const std::string& path, const LambdaProfile& profile);
LambdaProfile read_profile(const std::string& path);

}  // namespace etk::io
