#pragma once

#include <string>

#include "ren/adam.hpp"
#include "ren/networks.hpp"

namespace ren {

/// Binary snapshot: magic "RENCKPT1", config echo, every named parameter
/// (name, extents, raw little-endian doubles), current_alpha, and both
/// optimizer states. Round trips are bit-exact.
void save_checkpoint(const std::string& path, const RenModel& model,
                     const std::string& config_echo, const Adam& vae_opt,
                     const Adam& ren_opt);

/// Restores parameters and optimizer state into a model built with the same
/// architecture; returns the stored config echo. Mismatched names or shapes
/// raise structured errors.
std::string load_checkpoint(const std::string& path, RenModel& model,
                            Adam& vae_opt, Adam& ren_opt);

/// Reads just the stored config echo, so callers can rebuild the matching
/// architecture before a full load.
std::string read_checkpoint_echo(const std::string& path);

}  // namespace ren
