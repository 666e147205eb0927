#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cmivtp/data/types.hpp"

namespace cmivtp::data {

/// One VesselSample per line. Scene rasters are base64 little-endian f32.
std::string sample_to_json_line(const VesselSample& s);
/// Throws ParseError naming `line_no` and the offending field.
VesselSample sample_from_json_line(const std::string& line, std::size_t line_no);

void write_dataset(const std::filesystem::path& path, const std::vector<VesselSample>& samples);
std::vector<VesselSample> read_dataset(const std::filesystem::path& path);

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace cmivtp::data
