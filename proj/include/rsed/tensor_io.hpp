#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsed/context.hpp"
#include "rsed/frontend.hpp"

namespace rsed {

// BVTF: 4-byte magic, u32 little-endian JSON header length, JSON header
// {dtype, shape, axes, metadata}, then a row-major little-endian payload.
// Features are stored as f32; f64 is accepted for exact parameter tensors.
struct TensorFile {
  std::string dtype = "f32";
  std::vector<std::int64_t> shape;
  std::vector<std::string> axes;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<float> f32;
  std::vector<double> f64;

  std::int64_t element_count() const;
};

std::vector<std::uint8_t> encode_tensor(const TensorFile& t);
TensorFile decode_tensor(const std::uint8_t* data, size_t size);

void write_tensor(const std::string& path, const TensorFile& t);
TensorFile read_tensor(const std::string& path);

// Feature-cache adapters.
TensorFile to_tensor(const TimeFrequencyMatrix& m);
TimeFrequencyMatrix tf_matrix_from_tensor(const TensorFile& t);

TensorFile to_tensor(const ContextTensor& c);
ContextTensor context_from_tensor(const TensorFile& t);

}  // namespace rsed
