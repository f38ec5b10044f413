#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semsplat::io {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::runtime_error on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian f32 packing used by the bank file and the HTTP payloads.
std::string encode_f32_base64(std::span<const float> values);
std::vector<float> decode_f32_base64(std::string_view text);

}  // namespace semsplat::io
