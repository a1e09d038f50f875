#pragma once

#include <filesystem>

#include "wss/model/network.hpp"

namespace wss {

/// Checkpoint layout: a text header
///
///     WSS-CHECKPOINT 1
///     architecture <architecture id>
///     input_mean <r> <g> <b>
///     tensor <name> float32 <d0>x<d1>x... present|absent
///     ...
///     end
///
/// followed by the little-endian float32 payload of every `present` tensor in header order.
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace wss
